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
//! Actions between configurations and what they cost in time.
//!
//! The MA can only turn joint `j` while parked at `r_j`. An action therefore
//! expands into an ordered list of MA moves and joint rotations following a
//! fixed convention: first visit the joints lying away from the final MA
//! position, then sweep through the remaining ones towards it.

use crate::error::{Error, Result};
use crate::kinematics::{Configuration, RobotModel};

/// Joint deltas below this magnitude are treated as no rotation.
pub const ROTATION_EPS: f64 = 1e-12;

/// Componentwise difference `q_to - q_from`.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub dtheta: Vec<f64>,
    pub dd: f64,
}

impl Action {
    pub fn between(from: &Configuration, to: &Configuration) -> Self {
        Self {
            dtheta: to.theta.iter().zip(&from.theta).map(|(b, a)| b - a).collect(),
            dd: to.d - from.d,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            dtheta: vec![0.0; n],
            dd: 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dtheta: self.dtheta.iter().map(|t| t * factor).collect(),
            dd: self.dd * factor,
        }
    }

    pub fn apply(&self, q: &Configuration) -> Configuration {
        Configuration {
            theta: q.theta.iter().zip(&self.dtheta).map(|(a, b)| a + b).collect(),
            d: q.d + self.dd,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dd == 0.0 && self.dtheta.iter().all(|t| t.abs() < ROTATION_EPS)
    }

    /// Sum of absolute joint deltas, ignoring numerical noise.
    pub fn total_rotation(&self) -> f64 {
        self.dtheta
            .iter()
            .filter(|t| t.abs() >= ROTATION_EPS)
            .map(|t| t.abs())
            .sum()
    }
}

/// One primitive step of an expanded action.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionStep {
    Move { from_d: f64, to_d: f64 },
    /// `joint` is 0-based.
    Rotate { joint: usize, from_angle: f64, to_angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionSteps(pub Vec<MotionStep>);

impl MotionSteps {
    pub fn steps(&self) -> &[MotionStep] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of MA travel over the move steps.
    pub fn move_length(&self) -> f64 {
        self.0
            .iter()
            .map(|s| match s {
                MotionStep::Move { from_d, to_d } => (to_d - from_d).abs(),
                MotionStep::Rotate { .. } => 0.0,
            })
            .sum()
    }
}

fn check_endpoints(model: &RobotModel, q_from: &Configuration, a: &Action) -> Result<()> {
    if a.dtheta.len() != model.n_joints() {
        return Err(Error::Config(format!(
            "action has {} joint deltas, robot has {}",
            a.dtheta.len(),
            model.n_joints()
        )));
    }
    model.check_feasible(q_from)?;
    model.check_feasible(&a.apply(q_from))
}

/// Joints the action rotates, by 0-based index.
fn rotated_joints(a: &Action) -> impl Iterator<Item = usize> + '_ {
    a.dtheta
        .iter()
        .enumerate()
        .filter(|(_, t)| t.abs() >= ROTATION_EPS)
        .map(|(j, _)| j)
}

/// Expands an action into MA moves and joint rotations.
pub fn expand_action(model: &RobotModel, q_from: &Configuration, a: &Action) -> Result<MotionSteps> {
    check_endpoints(model, q_from, a)?;
    Ok(expand_unchecked(model, q_from, a))
}

pub(crate) fn expand_unchecked(model: &RobotModel, q_from: &Configuration, a: &Action) -> MotionSteps {
    let r = model.anchors();
    let d_c = q_from.d;
    let d_f = d_c + a.dd;
    let joints: Vec<usize> = rotated_joints(a).collect();
    // Ascending by anchor since anchors are strictly increasing.
    let (away, toward): (Vec<usize>, Vec<usize>) = if a.dd >= 0.0 {
        joints.iter().partition(|&&j| r[j] <= d_c)
    } else {
        joints.iter().partition(|&&j| r[j] >= d_c)
    };
    let mut order: Vec<usize> = Vec::with_capacity(joints.len());
    if a.dd >= 0.0 {
        order.extend(away.iter().rev());
        order.extend(toward.iter());
    } else {
        order.extend(away.iter());
        order.extend(toward.iter().rev());
    }

    let mut steps = Vec::with_capacity(2 * order.len() + 1);
    let mut at = d_c;
    for j in order {
        if r[j] != at {
            steps.push(MotionStep::Move { from_d: at, to_d: r[j] });
            at = r[j];
        }
        steps.push(MotionStep::Rotate {
            joint: j,
            from_angle: q_from.theta[j],
            to_angle: q_from.theta[j] + a.dtheta[j],
        });
    }
    if at != d_f {
        steps.push(MotionStep::Move { from_d: at, to_d: d_f });
    }
    MotionSteps(steps)
}

/// Total MA travel `D_a` induced by an action, in closed form.
pub fn traverse_length(model: &RobotModel, q_from: &Configuration, a: &Action) -> Result<f64> {
    check_endpoints(model, q_from, a)?;
    Ok(traverse_unchecked(model, q_from.d, a))
}

pub(crate) fn traverse_unchecked(model: &RobotModel, d_c: f64, a: &Action) -> f64 {
    let r = model.anchors();
    let d_f = d_c + a.dd;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in rotated_joints(a) {
        lo = lo.min(r[j]);
        hi = hi.max(r[j]);
    }
    if a.dd >= 0.0 {
        let m = lo.min(d_c);
        let big = hi.max(d_f);
        (d_c - m) + (big - m) + (big - d_f)
    } else {
        let big = hi.max(d_c);
        let m = lo.min(d_f);
        (big - d_c) + (big - m) + (d_f - m)
    }
}

/// Time to execute an action: MA travel at `ma_speed` plus rotations at `joint_speed`.
pub fn action_cost(model: &RobotModel, q_from: &Configuration, a: &Action) -> Result<f64> {
    check_endpoints(model, q_from, a)?;
    Ok(cost_unchecked(model, q_from.d, a))
}

pub(crate) fn cost_unchecked(model: &RobotModel, d_c: f64, a: &Action) -> f64 {
    traverse_unchecked(model, d_c, a) / model.ma_speed() + a.total_rotation() / model.joint_speed()
}

/// Cost of moving between two configurations, `c(q_to - q_from)`.
pub fn transition_cost(model: &RobotModel, q_from: &Configuration, q_to: &Configuration) -> f64 {
    cost_unchecked(model, q_from.d, &Action::between(q_from, q_to))
}

/// A sequence of configurations joined by actions, with cumulative times.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub configurations: Vec<Configuration>,
    pub actions: Vec<Action>,
    pub cumulative_time: Vec<f64>,
}

impl Path {
    /// Builds a path from waypoints, deriving actions and times.
    pub fn from_configurations(model: &RobotModel, configurations: Vec<Configuration>) -> Self {
        let mut actions = Vec::new();
        let mut cumulative_time = Vec::with_capacity(configurations.len());
        let mut tau = 0.0;
        if !configurations.is_empty() {
            cumulative_time.push(0.0);
        }
        for w in configurations.windows(2) {
            let a = Action::between(&w[0], &w[1]);
            tau += cost_unchecked(model, w[0].d, &a);
            actions.push(a);
            cumulative_time.push(tau);
        }
        Self {
            configurations,
            actions,
            cumulative_time,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.cumulative_time.last().copied().unwrap_or(0.0)
    }
}

const PATH_TOL: f64 = 1e-9;

/// Total action time of a path, after checking its internal consistency.
pub fn path_cost(model: &RobotModel, path: &Path) -> Result<f64> {
    let k = path.actions.len();
    if path.configurations.is_empty() {
        if k == 0 && path.cumulative_time.is_empty() {
            return Ok(0.0);
        }
        return Err(Error::Validation("path without configurations".into()));
    }
    if path.configurations.len() != k + 1 || path.cumulative_time.len() != k + 1 {
        return Err(Error::Validation(format!(
            "path has {} configurations, {} actions and {} times",
            path.configurations.len(),
            k,
            path.cumulative_time.len()
        )));
    }
    let mut tau = 0.0;
    for (i, a) in path.actions.iter().enumerate() {
        let from = &path.configurations[i];
        let to = &path.configurations[i + 1];
        let applied = a.apply(from);
        let mismatch = applied
            .to_vec()
            .iter()
            .zip(to.to_vec())
            .any(|(x, y)| (x - y).abs() > PATH_TOL);
        if mismatch {
            return Err(Error::Validation(format!(
                "action {i} does not connect its configurations"
            )));
        }
        tau += action_cost(model, from, a)?;
        let stored = path.cumulative_time[i + 1];
        if (stored - tau).abs() > PATH_TOL * tau.max(1.0) {
            return Err(Error::Validation(format!(
                "cumulative time {stored} at step {} disagrees with recomputed {tau}",
                i + 1
            )));
        }
    }
    Ok(tau)
}
