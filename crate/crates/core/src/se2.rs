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
//! Planar rigid transforms: composition, inverse and the exp/log maps.

use std::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// A gripper pose in SE(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE2 {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl PoseSE2 {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: normalize_angle(phi),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// `self * other`
    pub fn compose(&self, other: &PoseSE2) -> PoseSE2 {
        let (s, c) = self.phi.sin_cos();
        PoseSE2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.phi + other.phi,
        )
    }

    pub fn inverse(&self) -> PoseSE2 {
        let (s, c) = self.phi.sin_cos();
        PoseSE2::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.phi)
    }

    /// Euclidean distance between the two positions.
    pub fn position_error(&self, other: &PoseSE2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Absolute geodesic orientation difference, in `[0, pi]`.
    pub fn angle_error(&self, other: &PoseSE2) -> f64 {
        normalize_angle(self.phi - other.phi).abs()
    }

    /// Goal-region membership: position within `e_p` and orientation within `e_phi`.
    pub fn within(&self, goal: &PoseSE2, e_p: f64, e_phi: f64) -> bool {
        self.position_error(goal) <= e_p && self.angle_error(goal) <= e_phi
    }
}

/// Body twist `(v_x, v_y, omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist {
    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn norm(&self) -> f64 {
        (self.vx * self.vx + self.vy * self.vy + self.omega * self.omega).sqrt()
    }
}

const SERIES_EPS: f64 = 1e-4;

/// `(omega/2) * cot(omega/2)`, the diagonal of the inverse left Jacobian.
fn half_cot(omega: f64) -> f64 {
    if omega.abs() < SERIES_EPS {
        let w2 = omega * omega;
        1.0 - w2 / 12.0 - w2 * w2 / 720.0
    } else {
        0.5 * omega * omega.sin() / (1.0 - omega.cos())
    }
}

/// Derivative of [`half_cot`] with respect to omega.
fn half_cot_derivative(omega: f64) -> f64 {
    if omega.abs() < SERIES_EPS {
        -omega / 6.0 - omega * omega * omega / 180.0
    } else {
        let s = (0.5 * omega).sin();
        0.5 * (0.5 * omega).cos() / s - 0.25 * omega / (s * s)
    }
}

/// Maps a twist to the relative transform it generates.
pub fn exp(twist: &Twist) -> PoseSE2 {
    let w = twist.omega;
    let (a, b) = if w.abs() < SERIES_EPS {
        let w2 = w * w;
        (1.0 - w2 / 6.0, w / 2.0 - w * w2 / 24.0)
    } else {
        (w.sin() / w, (1.0 - w.cos()) / w)
    };
    PoseSE2::new(a * twist.vx - b * twist.vy, b * twist.vx + a * twist.vy, w)
}

/// Log of a relative transform.
pub fn log(rel: &PoseSE2) -> Twist {
    let w = normalize_angle(rel.phi);
    let a = half_cot(w);
    let b = 0.5 * w;
    Twist::new(a * rel.x + b * rel.y, -b * rel.x + a * rel.y, w)
}

/// Body twist `log(x_ref^-1 * x)`.
pub fn pose_log(x_ref: &PoseSE2, x: &PoseSE2) -> Twist {
    log(&x_ref.inverse().compose(x))
}

/// Differential of [`pose_log`] with respect to the second pose.
///
/// Returns the twist together with `d(vx, vy, omega) / d(x, y, phi)` as a
/// row-major 3x3 array. The relative angle is taken on its continuous branch,
/// so the derivative is undefined only at `|omega| = pi`.
pub fn pose_log_differential(x_ref: &PoseSE2, x: &PoseSE2) -> (Twist, [[f64; 3]; 3]) {
    let rel = x_ref.inverse().compose(x);
    let twist = log(&rel);
    let w = twist.omega;
    let a = half_cot(w);
    let da = half_cot_derivative(w);
    let b = 0.5 * w;
    // rel position = R(-phi_ref) (p - p_ref)
    let (s, c) = x_ref.phi.sin_cos();
    // d rel / d p
    let r = [[c, s], [-s, c]];
    // v = [[a, b], [-b, a]] rel
    let m = [[a, b], [-b, a]];
    let mut jac = [[0.0; 3]; 3];
    for i in 0..2 {
        for j in 0..2 {
            jac[i][j] = m[i][0] * r[0][j] + m[i][1] * r[1][j];
        }
    }
    // d v / d omega
    jac[0][2] = da * rel.x + 0.5 * rel.y;
    jac[1][2] = -0.5 * rel.x + da * rel.y;
    jac[2][2] = 1.0;
    (twist, jac)
}
