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
//! Independent oracles shared by the integration tests.

use masr_core::kinematics::{Configuration, RobotModel};
use masr_core::se2::PoseSE2;
use nalgebra::Matrix3;
use rand::Rng;

fn rot_trans(angle: f64, len: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, c * len, s, c, s * len, 0.0, 0.0, 1.0)
}

/// Chain of homogeneous transforms: rotate at each joint, walk each full
/// link, and stop partway along the link that carries the MA.
pub fn fk_oracle(model: &RobotModel, q: &Configuration) -> PoseSE2 {
    let mut t = Matrix3::identity();
    let mut walked = 0.0;
    for (j, (&len, &theta)) in model.link_lengths().iter().zip(&q.theta).enumerate() {
        let last = j + 1 == model.n_joints();
        if q.d < walked + len || last {
            t *= rot_trans(theta, q.d - walked);
            break;
        }
        t *= rot_trans(theta, len);
        walked += len;
    }
    PoseSE2::new(t[(0, 2)], t[(1, 2)], t[(1, 0)].atan2(t[(0, 0)]))
}

/// Random configuration with the MA at least 1 mm from every link boundary.
pub fn away_from_anchors<R: Rng>(model: &RobotModel, rng: &mut R) -> Configuration {
    loop {
        let q = model.sample_configuration(rng);
        let clear = model
            .anchors()
            .iter()
            .chain(std::iter::once(&model.total_length()))
            .all(|r| (q.d - r).abs() > 1e-3);
        if clear {
            return q;
        }
    }
}
