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
//! The learned IK solver.
//!
//! A network maps a desired pose and the current configuration to a target
//! configuration. It is trained without labels: its output goes through
//! forward kinematics, and the loss is the squared body twist between the
//! reached and desired poses plus a regularizer on the motion from the
//! current configuration.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::datagen::PoseDataset;
use crate::error::{Error, Result};
use crate::kinematics::{fk_jacobian_unchecked, fk_unchecked, Configuration, RobotModel};
use crate::mlp::{Adam, Mlp};
use crate::se2::{pose_log_differential, PoseSE2};

/// Which motion penalty is added to the pose loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    /// Sum of absolute joint changes.
    Angles,
    /// Joint changes weighted by how far the MA must travel to reach them.
    ActionTime,
}

impl RegKind {
    pub fn tag(&self) -> &'static str {
        match self {
            RegKind::Angles => "angles",
            RegKind::ActionTime => "action-time",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "angles" => Some(RegKind::Angles),
            "action-time" => Some(RegKind::ActionTime),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub lambda: f64,
    pub reg_kind: RegKind,
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the translational twist part, 1/m^2.
    pub w_v: f64,
    /// Weight of the rotational twist part.
    pub w_omega: f64,
    /// Smoothing of `|z|` as `sqrt(z^2 + eps^2) - eps`; zero means exact.
    pub abs_smoothing: f64,
}

impl TrainHyper {
    /// Joint-angle regularizer, lambda 0.002, hidden [70, 50, 30, 20].
    pub fn model_i() -> Self {
        Self {
            lambda: 0.002,
            reg_kind: RegKind::Angles,
            hidden_layers: vec![70, 50, 30, 20],
            ..Self::model_ii()
        }
    }

    /// Action-time regularizer, lambda 0.001, hidden [120, 100, 50, 30].
    pub fn model_ii() -> Self {
        Self {
            lambda: 0.001,
            reg_kind: RegKind::ActionTime,
            hidden_layers: vec![120, 100, 50, 30],
            learning_rate: 1e-4,
            batch_size: 500,
            epochs: 1000,
            seed: 1,
            w_v: 1.0,
            w_omega: 0.25,
            abs_smoothing: 1e-6,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Validation("lambda must be nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Validation("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Short hash of the link lengths and joint bounds a network was trained for.
pub fn robot_fingerprint(model: &RobotModel) -> String {
    let mut text = String::new();
    for (l, b) in model.link_lengths().iter().zip(model.joint_bounds()) {
        text.push_str(&format!("{l:?}:{b:?};"));
    }
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// The IK network with its input normalization and bounded output squashing.
#[derive(Debug, Clone, PartialEq)]
pub struct IkNetwork {
    pub mlp: Mlp,
    /// Per-coordinate input divisors for `(x, y, phi, theta_1..theta_n, d)`.
    pub input_scale: Vec<f64>,
    /// Output interval per configuration coordinate.
    pub output_bounds: Vec<(f64, f64)>,
    pub fingerprint: String,
}

impl IkNetwork {
    pub fn new(model: &RobotModel, hidden: &[usize], seed: u64) -> Self {
        let n = model.n_joints();
        let mut sizes = vec![3 + n + 1];
        sizes.extend_from_slice(hidden);
        sizes.push(n + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mlp = Mlp::new(&sizes, &mut rng);
        // start close to the middle of the output box
        if let Some(w) = mlp.weights.last_mut() {
            *w *= 0.1;
        }
        Self::from_mlp(model, mlp)
    }

    /// Wraps trained weights with the normalization derived from `model`.
    pub fn from_mlp(model: &RobotModel, mlp: Mlp) -> Self {
        let l = model.total_length();
        let mut input_scale = vec![l, l, PI];
        input_scale.extend(model.joint_bounds().iter().map(|b| if *b > 0.0 { *b } else { 1.0 }));
        input_scale.push(l);
        let mut output_bounds: Vec<(f64, f64)> = model.joint_bounds().iter().map(|b| (-b, *b)).collect();
        output_bounds.push((0.0, l));
        Self {
            mlp,
            input_scale,
            output_bounds,
            fingerprint: robot_fingerprint(model),
        }
    }

    pub fn dof(&self) -> usize {
        self.output_bounds.len()
    }

    fn check_dims(&self, q_c: &Configuration) -> Result<()> {
        let dof = self.dof();
        if self.mlp.input_size() != 3 + dof || self.mlp.output_size() != dof || q_c.theta.len() + 1 != dof {
            return Err(Error::Config(format!(
                "network expects {} joints, configuration has {}",
                dof - 1,
                q_c.theta.len()
            )));
        }
        Ok(())
    }

    fn encode_into(&self, x_d: &PoseSE2, q_c: &Configuration, col: &mut [f64]) {
        col[0] = x_d.x / self.input_scale[0];
        col[1] = x_d.y / self.input_scale[1];
        col[2] = x_d.phi / self.input_scale[2];
        for (j, t) in q_c.theta.iter().enumerate() {
            col[3 + j] = t / self.input_scale[3 + j];
        }
        col[3 + q_c.theta.len()] = q_c.d / self.input_scale[3 + q_c.theta.len()];
    }

    /// Maps a raw output column onto the bounded configuration box. Returns
    /// the configuration vector and `dq/dz` per coordinate.
    fn squash(&self, raw: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut q = Vec::with_capacity(raw.len());
        let mut dq = Vec::with_capacity(raw.len());
        for (z, (lo, hi)) in raw.iter().zip(&self.output_bounds) {
            let center = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            let t = z.tanh();
            q.push((center + half * t).clamp(*lo, *hi));
            dq.push(half * (1.0 - t * t));
        }
        (q, dq)
    }

    fn input_batch(&self, pairs: &[(PoseSE2, Configuration)]) -> DMatrix<f64> {
        let rows = self.mlp.input_size();
        let mut input = DMatrix::zeros(rows, pairs.len());
        for (j, (x_d, q_c)) in pairs.iter().enumerate() {
            let col = &mut input.as_mut_slice()[j * rows..(j + 1) * rows];
            self.encode_into(x_d, q_c, col);
        }
        input
    }

    /// Predicts a configuration for every `(x_d, q_c)` pair.
    pub fn forward_batch(&self, pairs: &[(PoseSE2, Configuration)]) -> Result<Vec<Configuration>> {
        if let Some((_, q)) = pairs.first() {
            self.check_dims(q)?;
        }
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let cache = self.mlp.forward(self.input_batch(pairs));
        let out = cache.output();
        let dof = self.dof();
        Ok((0..pairs.len())
            .map(|j| {
                let (q, _) = self.squash(&out.as_slice()[j * dof..(j + 1) * dof]);
                Configuration::from_slice(&q)
            })
            .collect())
    }
}

/// Network prediction `q~ = g(x_d, q_c)`; always inside the feasibility box.
pub fn mlp_forward(net: &IkNetwork, x_d: &PoseSE2, q_c: &Configuration) -> Result<Configuration> {
    net.check_dims(q_c)?;
    let mut input = DMatrix::zeros(net.mlp.input_size(), 1);
    net.encode_into(x_d, q_c, input.as_mut_slice());
    let cache = net.mlp.forward(input);
    let (q, _) = net.squash(cache.output().as_slice());
    Ok(Configuration::from_slice(&q))
}

/// IK query with a trained network.
pub fn ik_solve(net: &IkNetwork, x_d: &PoseSE2, q_c: &Configuration) -> Result<Configuration> {
    mlp_forward(net, x_d, q_c)
}

/// Loss value split into its parts, with the gradient w.r.t. `q~`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub total: f64,
    pub pose: f64,
    pub reg: f64,
    /// `d total / d (theta~_1..theta~_n, d~)`.
    pub grad: Vec<f64>,
}

fn smooth_abs(z: f64, eps: f64) -> (f64, f64) {
    if eps > 0.0 {
        let s = (z * z + eps * eps).sqrt();
        (s - eps, z / s)
    } else {
        (z.abs(), z.signum() * (z != 0.0) as i32 as f64)
    }
}

/// Regularizer value and its gradient w.r.t. the predicted joint angles.
pub fn regularizer(
    model: &RobotModel,
    q_c: &Configuration,
    q_tilde: &Configuration,
    kind: RegKind,
    abs_smoothing: f64,
) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; model.dof()];
    for (i, r) in model.anchors().iter().enumerate() {
        let (a, da) = smooth_abs(q_c.theta[i] - q_tilde.theta[i], abs_smoothing);
        let weight = match kind {
            RegKind::Angles => 1.0,
            RegKind::ActionTime => (q_c.d - r).abs() / (model.joint_speed() * model.ma_speed()),
        };
        value += weight * a;
        grad[i] = -weight * da;
    }
    (value, grad)
}

/// Twist loss plus `lambda` times the regularizer, with analytic gradient.
pub fn ik_loss(
    model: &RobotModel,
    q_c: &Configuration,
    x_d: &PoseSE2,
    q_tilde: &Configuration,
    hyper: &TrainHyper,
) -> LossEval {
    let reached = fk_unchecked(model, q_tilde);
    let (twist, dlog) = pose_log_differential(x_d, &reached);
    let pose = hyper.w_v * (twist.vx * twist.vx + twist.vy * twist.vy) + hyper.w_omega * twist.omega * twist.omega;
    let outer = [2.0 * hyper.w_v * twist.vx, 2.0 * hyper.w_v * twist.vy, 2.0 * hyper.w_omega * twist.omega];
    // d pose / d (x, y, phi)
    let mut dpose = [0.0; 3];
    for (k, slot) in dpose.iter_mut().enumerate() {
        *slot = (0..3).map(|i| outer[i] * dlog[i][k]).sum();
    }
    let jac = fk_jacobian_unchecked(model, q_tilde);
    let (reg, reg_grad) = regularizer(model, q_c, q_tilde, hyper.reg_kind, hyper.abs_smoothing);
    let grad = (0..model.dof())
        .map(|c| (0..3).map(|r| dpose[r] * jac[(r, c)]).sum::<f64>() + hyper.lambda * reg_grad[c])
        .collect();
    LossEval {
        total: pose + hyper.lambda * reg,
        pose,
        reg,
        grad,
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_dp_mm: f64,
    pub mean_dphi_deg: f64,
}

/// Trains an IK network on `dataset` with minibatch Adam.
///
/// Every epoch reshuffles the poses and pairs each with a fresh uniformly
/// random current configuration. Stops with an error if the loss diverges.
pub fn train(model: &RobotModel, dataset: &PoseDataset, hyper: &TrainHyper) -> Result<(IkNetwork, Vec<EpochStats>)> {
    train_with_progress(model, dataset, hyper, |_| {})
}

pub fn train_with_progress(
    model: &RobotModel,
    dataset: &PoseDataset,
    hyper: &TrainHyper,
    mut progress: impl FnMut(&EpochStats),
) -> Result<(IkNetwork, Vec<EpochStats>)> {
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(Error::Validation("training dataset is empty".into()));
    }
    let mut net = IkNetwork::new(model, &hyper.hidden_layers, hyper.seed);
    let mut opt = Adam::new(&net.mlp, hyper.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);
    let dof = model.dof();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = Vec::with_capacity(hyper.epochs);
    let mut pairs = Vec::with_capacity(hyper.batch_size);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut dp_sum, mut dphi_sum) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(hyper.batch_size) {
            pairs.clear();
            for &i in chunk {
                pairs.push((dataset.poses[i], model.sample_configuration(&mut rng)));
            }
            let batch = pairs.len();
            let cache = net.mlp.forward(net.input_batch(&pairs));
            let out = cache.output();
            let mut d_out = DMatrix::zeros(dof, batch);
            for (j, (x_d, q_c)) in pairs.iter().enumerate() {
                let (q, dq) = net.squash(&out.as_slice()[j * dof..(j + 1) * dof]);
                let q_tilde = Configuration::from_slice(&q);
                let eval = ik_loss(model, q_c, x_d, &q_tilde, hyper);
                if !eval.total.is_finite() {
                    return Err(Error::Training(format!(
                        "loss became {} at epoch {epoch} (pose {:?}, current {:?})",
                        eval.total, x_d, q_c
                    )));
                }
                let reached = fk_unchecked(model, &q_tilde);
                loss_sum += eval.total;
                dp_sum += reached.position_error(x_d);
                dphi_sum += reached.angle_error(x_d);
                let col = &mut d_out.as_mut_slice()[j * dof..(j + 1) * dof];
                for c in 0..dof {
                    col[c] = eval.grad[c] * dq[c] / batch as f64;
                }
            }
            let grads = net.mlp.backward(&cache, d_out);
            opt.step(&mut net.mlp, &grads);
        }
        let n = dataset.len() as f64;
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / n,
            mean_dp_mm: 1000.0 * dp_sum / n,
            mean_dphi_deg: (dphi_sum / n).to_degrees(),
        };
        if !stats.mean_loss.is_finite() {
            return Err(Error::Training(format!("mean loss diverged at epoch {epoch}")));
        }
        progress(&stats);
        log.push(stats);
    }
    Ok((net, log))
}
