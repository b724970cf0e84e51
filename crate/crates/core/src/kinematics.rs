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
//! Robot parameters, configurations and forward kinematics of the arm.
//!
//! Angles are stored in radians and lengths in meters. The MA position `d`
//! is measured along the arm from the base; joint `j` (1-based in prose,
//! 0-based in code) sits at arc length `r_j = l_1 + ... + l_{j-1}`.

use nalgebra::Matrix3xX;
use rand::Rng;

use crate::error::{Error, Result};
use crate::se2::{normalize_angle, PoseSE2};

/// Geometric and actuation parameters of an `n`-link arm.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    link_lengths: Vec<f64>,
    joint_bounds: Vec<f64>,
    ma_speed: f64,
    joint_speed: f64,
    link_width: f64,
    anchors: Vec<f64>,
    total_length: f64,
}

impl RobotModel {
    pub fn new(
        link_lengths: Vec<f64>,
        joint_bounds: Vec<f64>,
        ma_speed: f64,
        joint_speed: f64,
        link_width: f64,
    ) -> Result<Self> {
        if link_lengths.is_empty() {
            return Err(Error::Validation("robot needs at least one link".into()));
        }
        if link_lengths.len() != joint_bounds.len() {
            return Err(Error::Validation(format!(
                "{} link lengths but {} joint bounds",
                link_lengths.len(),
                joint_bounds.len()
            )));
        }
        if let Some(l) = link_lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::Validation(format!("link length {l} must be positive")));
        }
        if let Some(b) = joint_bounds.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return Err(Error::Validation(format!("joint bound {b} must be nonnegative")));
        }
        if !(ma_speed > 0.0) || !(joint_speed > 0.0) {
            return Err(Error::Validation("speeds must be positive".into()));
        }
        if !(link_width >= 0.0) {
            return Err(Error::Validation("link width must be nonnegative".into()));
        }
        let mut anchors = Vec::with_capacity(link_lengths.len());
        let mut acc = 0.0;
        for l in &link_lengths {
            anchors.push(acc);
            acc += l;
        }
        Ok(Self {
            link_lengths,
            joint_bounds,
            ma_speed,
            joint_speed,
            link_width,
            anchors,
            total_length: acc,
        })
    }

    /// The five-link arm used in the reference experiments: links of
    /// 0.2/0.2/0.2/0.1/0.1 m, +-50 deg joints, MA at 100 mm/s and joints at
    /// 0.28 rad/s.
    pub fn reference_5r() -> Self {
        Self::new(
            vec![0.2, 0.2, 0.2, 0.1, 0.1],
            vec![50f64.to_radians(); 5],
            0.1,
            0.28,
            0.02,
        )
        .expect("reference parameters are valid")
    }

    pub fn n_joints(&self) -> usize {
        self.link_lengths.len()
    }

    /// Dimension of a configuration vector, `n + 1`.
    pub fn dof(&self) -> usize {
        self.link_lengths.len() + 1
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn joint_bounds(&self) -> &[f64] {
        &self.joint_bounds
    }

    pub fn ma_speed(&self) -> f64 {
        self.ma_speed
    }

    pub fn joint_speed(&self) -> f64 {
        self.joint_speed
    }

    pub fn link_width(&self) -> f64 {
        self.link_width
    }

    /// Joint anchor positions `r_j` along the arm; `r_0 = 0`.
    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Checks the feasibility box: joint bounds and `d` in `[0, l]`.
    pub fn check_feasible(&self, q: &Configuration) -> Result<()> {
        if q.theta.len() != self.n_joints() {
            return Err(Error::Config(format!(
                "configuration has {} joints, robot has {}",
                q.theta.len(),
                self.n_joints()
            )));
        }
        for (j, (&angle, &bound)) in q.theta.iter().zip(&self.joint_bounds).enumerate() {
            if !(angle.abs() <= bound) {
                return Err(Error::JointOutOfBounds {
                    joint: j + 1,
                    angle,
                    bound,
                });
            }
        }
        if !(q.d >= 0.0 && q.d <= self.total_length) {
            return Err(Error::MaOutOfRange {
                d: q.d,
                total: self.total_length,
            });
        }
        Ok(())
    }

    pub fn is_feasible(&self, q: &Configuration) -> bool {
        self.check_feasible(q).is_ok()
    }

    /// Draws a configuration uniformly from the feasibility box.
    pub fn sample_configuration<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let theta = self
            .joint_bounds
            .iter()
            .map(|&b| if b > 0.0 { rng.gen_range(-b..=b) } else { 0.0 })
            .collect();
        let d = rng.gen_range(0.0..=self.total_length);
        Configuration { theta, d }
    }

    /// The straight arm with the MA at `d`.
    pub fn straight(&self, d: f64) -> Configuration {
        Configuration {
            theta: vec![0.0; self.n_joints()],
            d,
        }
    }
}

/// Joint angles plus MA position.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub theta: Vec<f64>,
    pub d: f64,
}

impl Configuration {
    pub fn new(theta: Vec<f64>, d: f64) -> Self {
        Self { theta, d }
    }

    /// Flattened `(theta_1, ..., theta_n, d)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.theta.clone();
        v.push(self.d);
        v
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let (d, theta) = values.split_last().expect("nonempty configuration vector");
        Self {
            theta: theta.to_vec(),
            d: *d,
        }
    }
}

/// Link carrying the MA and the offset along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaLocation {
    /// 1-based link index `j_d`.
    pub link: usize,
    pub d_link: f64,
}

/// Splits `d` into `(j_d, d_link)`. Right-continuous at joints; `d = l`
/// lands on the tip of link `n`.
pub fn decompose_ma_position(model: &RobotModel, d: f64) -> Result<MaLocation> {
    if !(d >= 0.0 && d <= model.total_length) {
        return Err(Error::MaOutOfRange {
            d,
            total: model.total_length,
        });
    }
    let anchors = &model.anchors;
    // last anchor <= d
    let idx = anchors.partition_point(|&r| r <= d).max(1) - 1;
    Ok(MaLocation {
        link: idx + 1,
        d_link: d - anchors[idx],
    })
}

/// Cumulative joint angles `theta_hat_k = theta_1 + ... + theta_k`.
pub fn cumulative_angles(theta: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect()
}

/// Positions of the joints and the arm tip: `n + 1` points starting at the base.
pub fn arm_points(model: &RobotModel, theta: &[f64]) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity(theta.len() + 1);
    let (mut x, mut y, mut acc) = (0.0, 0.0, 0.0);
    pts.push([x, y]);
    for (t, l) in theta.iter().zip(&model.link_lengths) {
        acc += t;
        x += l * acc.cos();
        y += l * acc.sin();
        pts.push([x, y]);
    }
    pts
}

/// Gripper (MA) pose of a feasible configuration.
pub fn forward_kinematics(model: &RobotModel, q: &Configuration) -> Result<PoseSE2> {
    model.check_feasible(q)?;
    Ok(fk_unchecked(model, q))
}

/// Forward kinematics without the feasibility check. `q.d` must lie in
/// `[0, l]` and `q.theta` must have `n` entries.
pub(crate) fn fk_unchecked(model: &RobotModel, q: &Configuration) -> PoseSE2 {
    let loc = decompose_ma_position(model, q.d.clamp(0.0, model.total_length))
        .expect("clamped into range");
    let jd = loc.link - 1;
    let (mut x, mut y, mut acc) = (0.0, 0.0, 0.0);
    for j in 0..jd {
        acc += q.theta[j];
        x += model.link_lengths[j] * acc.cos();
        y += model.link_lengths[j] * acc.sin();
    }
    acc += q.theta[jd];
    x += loc.d_link * acc.cos();
    y += loc.d_link * acc.sin();
    PoseSE2::new(x, y, normalize_angle(acc))
}

/// Jacobian of `(x, y, phi)` with respect to `(theta_1..theta_n, d)`.
///
/// FK is piecewise in `d`; at a joint anchor the piece of the link that
/// starts there is used. The orientation row is the unwrapped sum of angles.
pub fn fk_jacobian(model: &RobotModel, q: &Configuration) -> Result<Matrix3xX<f64>> {
    model.check_feasible(q)?;
    Ok(fk_jacobian_unchecked(model, q))
}

pub(crate) fn fk_jacobian_unchecked(model: &RobotModel, q: &Configuration) -> Matrix3xX<f64> {
    let n = model.n_joints();
    let loc = decompose_ma_position(model, q.d.clamp(0.0, model.total_length))
        .expect("clamped into range");
    let jd = loc.link - 1;
    let mut jac = Matrix3xX::zeros(n + 1);
    // joint positions up to the MA link
    let mut joints = Vec::with_capacity(jd + 1);
    let (mut x, mut y, mut acc) = (0.0, 0.0, 0.0);
    for j in 0..jd {
        joints.push([x, y]);
        acc += q.theta[j];
        x += model.link_lengths[j] * acc.cos();
        y += model.link_lengths[j] * acc.sin();
    }
    joints.push([x, y]);
    acc += q.theta[jd];
    let (s, c) = acc.sin_cos();
    let px = x + loc.d_link * c;
    let py = y + loc.d_link * s;
    for (k, p) in joints.iter().enumerate() {
        jac[(0, k)] = -(py - p[1]);
        jac[(1, k)] = px - p[0];
        jac[(2, k)] = 1.0;
    }
    jac[(0, n)] = c;
    jac[(1, n)] = s;
    jac
}
