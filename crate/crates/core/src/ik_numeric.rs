/*
Copyright 2026 The masr Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! Multi-restart damped Newton IK over sub-chains.
//!
//! The sub-chain with `k` active joints keeps joints `k+1..n` straight and
//! treats the MA as a prismatic joint along link `k`, so every pose with the
//! MA on link `k` is representable. Restarts are spread evenly over the `n`
//! sub-chains and the successful solution with the least action-time
//! regularizer relative to the current configuration wins.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ik_learn::{regularizer, RegKind};
use crate::kinematics::{fk_jacobian_unchecked, fk_unchecked, Configuration, RobotModel};
use crate::se2::{pose_log_differential, PoseSE2};

/// A revolute sub-chain with a prismatic MA on its last link `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubchainSpec {
    /// Active revolute joints, `1..=n`.
    pub k: usize,
}

impl SubchainSpec {
    /// Length of the prismatic range, `l_k`.
    pub fn prismatic_range(&self, model: &RobotModel) -> f64 {
        model.link_lengths()[self.k - 1]
    }

    /// Sub-chain state `(theta_1..theta_k, s)` as a full configuration.
    pub fn lift(&self, model: &RobotModel, state: &[f64]) -> Configuration {
        let mut theta = vec![0.0; model.n_joints()];
        theta[..self.k].copy_from_slice(&state[..self.k]);
        let d = (model.anchors()[self.k - 1] + state[self.k]).min(model.total_length());
        Configuration { theta, d }
    }

    fn clamp(&self, model: &RobotModel, state: &mut [f64]) {
        for (j, v) in state[..self.k].iter_mut().enumerate() {
            let b = model.joint_bounds()[j];
            *v = v.clamp(-b, b);
        }
        state[self.k] = state[self.k].clamp(0.0, self.prismatic_range(model));
    }

    /// Uniform random state within the sub-chain bounds.
    pub fn sample<R: Rng + ?Sized>(&self, model: &RobotModel, rng: &mut R) -> Vec<f64> {
        let mut state: Vec<f64> = model.joint_bounds()[..self.k]
            .iter()
            .map(|&b| if b > 0.0 { rng.gen_range(-b..=b) } else { 0.0 })
            .collect();
        state.push(rng.gen_range(0.0..=self.prismatic_range(model)));
        state
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrParams {
    pub iters: usize,
    /// Convergence threshold on the twist norm.
    pub tol: f64,
    /// Levenberg damping added to `J^T J`.
    pub damping: f64,
    pub e_p: f64,
    pub e_phi: f64,
}

impl Default for NrParams {
    fn default() -> Self {
        Self {
            iters: 100,
            tol: 1e-8,
            damping: 1e-3,
            e_p: 0.008,
            e_phi: 4f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrOutcome {
    pub state: Vec<f64>,
    pub success: bool,
    pub iterations: usize,
    pub position_error: f64,
    pub angle_error: f64,
}

/// Damped Newton iteration on one sub-chain from `start`.
pub fn nr_solve_subchain(
    model: &RobotModel,
    spec: SubchainSpec,
    x_d: &PoseSE2,
    start: &[f64],
    params: &NrParams,
) -> Result<NrOutcome> {
    let n = model.n_joints();
    if spec.k == 0 || spec.k > n || start.len() != spec.k + 1 {
        return Err(Error::Config(format!(
            "sub-chain with {} joints needs {} state values, got {}",
            spec.k,
            spec.k + 1,
            start.len()
        )));
    }
    let mut state = start.to_vec();
    spec.clamp(model, &mut state);
    let reach = model.anchors()[spec.k - 1] + spec.prismatic_range(model);
    let finish = |state: Vec<f64>, iterations: usize| {
        let reached = fk_unchecked(model, &spec.lift(model, &state));
        let position_error = reached.position_error(x_d);
        let angle_error = reached.angle_error(x_d);
        NrOutcome {
            success: position_error <= params.e_p && angle_error <= params.e_phi,
            state,
            iterations,
            position_error,
            angle_error,
        }
    };
    if x_d.x.hypot(x_d.y) > reach + params.e_p {
        return Ok(finish(state, 0));
    }
    let cols: Vec<usize> = (0..spec.k).chain(std::iter::once(n)).collect();
    for iteration in 0..params.iters {
        let q = spec.lift(model, &state);
        let reached = fk_unchecked(model, &q);
        let (twist, dlog) = pose_log_differential(x_d, &reached);
        if twist.norm() < params.tol {
            return Ok(finish(state, iteration));
        }
        let fk_jac = fk_jacobian_unchecked(model, &q);
        let jac = DMatrix::from_fn(3, cols.len(), |r, c| {
            (0..3).map(|i| dlog[r][i] * fk_jac[(i, cols[c])]).sum::<f64>()
        });
        let residual = DVector::from_vec(vec![twist.vx, twist.vy, twist.omega]);
        let mut normal = jac.transpose() * &jac;
        for i in 0..cols.len() {
            normal[(i, i)] += params.damping;
        }
        let rhs = jac.transpose() * residual;
        let Some(step) = normal.cholesky().map(|c| c.solve(&rhs)) else {
            return Ok(finish(state, iteration));
        };
        for (v, s) in state.iter_mut().zip(step.iter()) {
            *v -= s;
        }
        spec.clamp(model, &mut state);
    }
    Ok(finish(state, params.iters))
}

/// One restart of [`ik_numeric`].
#[derive(Debug, Clone, PartialEq)]
pub struct RestartRecord {
    pub index: usize,
    pub spec: SubchainSpec,
    pub success: bool,
    pub solution: Configuration,
    /// Action-time regularizer from the current configuration.
    pub action_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericIkResult {
    pub best: Option<Configuration>,
    pub best_index: Option<usize>,
    pub restarts: Vec<RestartRecord>,
}

fn restart_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 of (seed, index)
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Multi-restart numeric IK, picking the cheapest successful solution.
pub fn ik_numeric(
    model: &RobotModel,
    x_d: &PoseSE2,
    q_c: &Configuration,
    m: usize,
    seed: u64,
    params: &NrParams,
) -> Result<NumericIkResult> {
    let n = model.n_joints();
    if m < n {
        return Err(Error::Validation(format!("need at least {n} restarts, got {m}")));
    }
    model.check_feasible(q_c)?;
    let restarts: Vec<RestartRecord> = (0..m)
        .into_par_iter()
        .map(|index| {
            let spec = SubchainSpec { k: 1 + index * n / m };
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(seed, index));
            let start = spec.sample(model, &mut rng);
            let out = nr_solve_subchain(model, spec, x_d, &start, params).expect("valid sub-chain");
            let solution = spec.lift(model, &out.state);
            let (action_time, _) = regularizer(model, q_c, &solution, RegKind::ActionTime, 0.0);
            RestartRecord {
                index,
                spec,
                success: out.success && model.is_feasible(&solution),
                solution,
                action_time,
            }
        })
        .collect();
    let best_index = restarts
        .iter()
        .filter(|r| r.success)
        .min_by(|a, b| a.action_time.total_cmp(&b.action_time).then(a.index.cmp(&b.index)))
        .map(|r| r.index);
    Ok(NumericIkResult {
        best: best_index.map(|i| restarts[i].solution.clone()),
        best_index,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;

    #[test]
    fn already_at_goal_needs_no_iterations() {
        let m = RobotModel::reference_5r();
        let spec = SubchainSpec { k: 3 };
        let start = vec![0.1, -0.2, 0.3, 0.15];
        let goal = forward_kinematics(&m, &spec.lift(&m, &start)).unwrap();
        let out = nr_solve_subchain(&m, spec, &goal, &start, &NrParams::default()).unwrap();
        assert!(out.success);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn unreachable_goal_fails() {
        let m = RobotModel::reference_5r();
        let spec = SubchainSpec { k: 3 };
        let goal = PoseSE2::new(0.7, 0.0, 0.0);
        let out = nr_solve_subchain(&m, spec, &goal, &[0.0, 0.0, 0.0, 0.1], &NrParams::default()).unwrap();
        assert!(!out.success);
        let far = PoseSE2::new(0.9, 0.1, 0.0);
        let res = ik_numeric(&m, &far, &m.straight(0.0), 50, 1, &NrParams::default()).unwrap();
        assert!(res.best.is_none());
    }

    #[test]
    fn two_link_right_angle() {
        let m = RobotModel::new(vec![1.0, 1.0], vec![100f64.to_radians(); 2], 0.1, 0.28, 0.0).unwrap();
        let spec = SubchainSpec { k: 2 };
        let goal = PoseSE2::new(0.0, 1.5, 90f64.to_radians());
        let params = NrParams {
            e_p: 1e-6,
            e_phi: 1e-6,
            ..NrParams::default()
        };
        let out = nr_solve_subchain(&m, spec, &goal, &[0.5, 0.3, 0.2], &params).unwrap();
        assert!(out.success);
        assert!((out.state[0] - 90f64.to_radians()).abs() < 1e-6);
        assert!(out.state[1].abs() < 1e-6);
        assert!((out.state[2] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn first_link_subchain_stays_on_its_ray() {
        let m = RobotModel::reference_5r();
        let spec = SubchainSpec { k: 1 };
        let on_ray = PoseSE2::new(0.15 * 0.3f64.cos(), 0.15 * 0.3f64.sin(), 0.3);
        let out = nr_solve_subchain(&m, spec, &on_ray, &[0.0, 0.02], &NrParams::default()).unwrap();
        assert!(out.success);
        assert!((out.state[0] - 0.3).abs() < 1e-6);
        assert!((out.state[1] - 0.15).abs() < 1e-6);
        let off_ray = nr_solve_subchain(&m, spec, &PoseSE2::new(0.15, 0.05, 0.0), &[0.0, 0.02], &NrParams::default()).unwrap();
        assert!(!off_ray.success);
        assert!(nr_solve_subchain(&m, SubchainSpec { k: 0 }, &on_ray, &[0.0], &NrParams::default()).is_err());
    }

    #[test]
    fn selection_is_minimal_and_deterministic() {
        let m = RobotModel::reference_5r();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let goal = forward_kinematics(&m, &m.sample_configuration(&mut rng)).unwrap();
            let q_c = m.sample_configuration(&mut rng);
            let res = ik_numeric(&m, &goal, &q_c, 100, 5, &NrParams::default()).unwrap();
            let again = ik_numeric(&m, &goal, &q_c, 100, 5, &NrParams::default()).unwrap();
            assert_eq!(res, again);
            assert_eq!(res.restarts.len(), 100);
            for k in 1..=5 {
                assert_eq!(res.restarts.iter().filter(|r| r.spec.k == k).count(), 20);
            }
            if let Some(best) = &res.best {
                let reached = forward_kinematics(&m, best).unwrap();
                assert!(reached.within(&goal, 0.008, 4f64.to_radians()));
                let chosen = res.restarts[res.best_index.unwrap()].action_time;
                assert!(res.restarts.iter().filter(|r| r.success).all(|r| chosen <= r.action_time));
            }
        }
    }

    #[test]
    fn rejects_too_few_restarts() {
        let m = RobotModel::reference_5r();
        assert!(ik_numeric(&m, &PoseSE2::identity(), &m.straight(0.0), 4, 0, &NrParams::default()).is_err());
    }
}
