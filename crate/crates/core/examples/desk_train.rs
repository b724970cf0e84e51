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
//! Generates the desk-scale dataset, trains an IK network and reports its
//! accuracy on random queries.
//!
//! cargo run --release -p masr-core --example desk_train -- [epochs] [angles|action-time] [lambda]

use std::time::Instant;

use masr_core::datagen::{generate_dataset, DataGenConfig};
use masr_core::ik_learn::{ik_solve, train_with_progress, RegKind, TrainHyper};
use masr_core::kinematics::forward_kinematics;
use masr_core::RobotModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let kind = args.get(2).and_then(|s| RegKind::from_tag(s)).unwrap_or(RegKind::ActionTime);
    let model = RobotModel::reference_5r();
    let t0 = Instant::now();
    let ds = generate_dataset(&model, &DataGenConfig::new(180, 160, 10, 7)).unwrap();
    println!(
        "dataset: {} poses ({} draws, density reached: {}) in {:.1?}",
        ds.len(),
        ds.meta.draws,
        ds.meta.density_reached,
        t0.elapsed()
    );
    let mut hyper = match kind {
        RegKind::ActionTime => TrainHyper::model_ii(),
        RegKind::Angles => TrainHyper::model_i(),
    };
    hyper.epochs = epochs;
    if let Some(lambda) = args.get(3).and_then(|s| s.parse().ok()) {
        hyper.lambda = lambda;
    }
    let t1 = Instant::now();
    let (net, _) = train_with_progress(&model, &ds, &hyper, |e| {
        if e.epoch % 10 == 0 {
            println!(
                "epoch {:4} loss {:.6} dp {:.2} mm dphi {:.2} deg ({:.0?})",
                e.epoch,
                e.mean_loss,
                e.mean_dp_mm,
                e.mean_dphi_deg,
                t1.elapsed()
            );
        }
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut ok, mut dp) = (0, 0.0);
    let trials = 1000;
    for _ in 0..trials {
        let goal = forward_kinematics(&model, &model.sample_configuration(&mut rng)).unwrap();
        let q_c = model.sample_configuration(&mut rng);
        let q = ik_solve(&net, &goal, &q_c).unwrap();
        let reached = forward_kinematics(&model, &q).unwrap();
        dp += reached.position_error(&goal);
        if reached.within(&goal, 0.016, 8f64.to_radians()) {
            ok += 1;
        }
    }
    println!(
        "success {:.1}% at 16 mm / 8 deg, mean dp {:.2} mm, total {:.1?}",
        100.0 * ok as f64 / trials as f64,
        1000.0 * dp / trials as f64,
        t0.elapsed()
    );
}
