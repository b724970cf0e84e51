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
//! SVG pictures of environments, arm configurations and goals.
//!
//! Drawing units are millimeters with the y axis pointing up; one group per
//! arm waypoint holds its link lines and the MA marker.

use std::fmt::Write as _;

use crate::geometry::Environment;
use crate::kinematics::{arm_points, fk_unchecked, Configuration, RobotModel};
use crate::se2::PoseSE2;

fn mm(v: f64) -> f64 {
    (v * 1000.0 * 1e4).round() / 1e4
}

fn points_attr(vertices: &[[f64; 2]]) -> String {
    vertices
        .iter()
        .map(|p| format!("{},{}", mm(p[0]), mm(p[1])))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Goal marker: a disc of radius `e_p` with a heading tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalMarker {
    pub pose: PoseSE2,
    pub e_p: f64,
}

/// Renders the environment with one arm drawing per configuration.
pub fn render_svg(env: &Environment, model: &RobotModel, configurations: &[Configuration], goal: Option<GoalMarker>) -> String {
    let half = mm(env.half_extent);
    let margin = 20.0;
    let side = 2.0 * half + 2.0 * margin;
    let stroke = mm(model.link_width()).max(1.0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}mm" height="{side}mm" viewBox="{} {} {side} {side}">"#,
        -half - margin,
        -half - margin
    );
    out.push_str("<g transform=\"scale(1,-1)\">\n");
    let _ = writeln!(
        out,
        r#"<rect class="workspace" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black" stroke-width="1"/>"#,
        -half,
        -half,
        2.0 * half,
        2.0 * half
    );
    for poly in &env.obstacles {
        let _ = writeln!(
            out,
            r#"<polygon class="obstacle" points="{}" fill="gray" stroke="none"/>"#,
            points_attr(poly.vertices())
        );
    }
    for poly in &env.inflated {
        let _ = writeln!(
            out,
            r#"<polygon class="inflated" points="{}" fill="none" stroke="dimgray" stroke-dasharray="4 2" stroke-width="0.5"/>"#,
            points_attr(poly.vertices())
        );
    }
    if let Some(g) = goal {
        let (x, y) = (mm(g.pose.x), mm(g.pose.y));
        let tick = mm(g.e_p).max(5.0) * 2.0;
        let _ = writeln!(
            out,
            r#"<circle class="goal" cx="{x}" cy="{y}" r="{}" fill="green" fill-opacity="0.4"/>"#,
            mm(g.e_p)
        );
        let _ = writeln!(
            out,
            r#"<line class="heading" x1="{x}" y1="{y}" x2="{}" y2="{}" stroke="green" stroke-width="1"/>"#,
            x + tick * g.pose.phi.cos(),
            y + tick * g.pose.phi.sin()
        );
    }
    let count = configurations.len();
    for (k, q) in configurations.iter().enumerate() {
        let opacity = if count <= 1 { 1.0 } else { 0.25 + 0.75 * k as f64 / (count - 1) as f64 };
        let _ = writeln!(out, r#"<g class="arm" opacity="{opacity:.3}">"#);
        let pts = arm_points(model, &q.theta);
        for w in pts.windows(2) {
            let _ = writeln!(
                out,
                r#"<line class="link" x1="{}" y1="{}" x2="{}" y2="{}" stroke="steelblue" stroke-width="{stroke}" stroke-linecap="round"/>"#,
                mm(w[0][0]),
                mm(w[0][1]),
                mm(w[1][0]),
                mm(w[1][1])
            );
        }
        let ma = fk_unchecked(model, q);
        let _ = writeln!(
            out,
            r#"<circle class="ma" cx="{}" cy="{}" r="{}" fill="orangered"/>"#,
            mm(ma.x),
            mm(ma.y),
            2.0 * stroke
        );
        out.push_str("</g>\n");
    }
    out.push_str("</g>\n</svg>\n");
    out
}
