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
//! Text file formats: environments, pose datasets, trained networks,
//! training logs and planned paths.
//!
//! Every format carries a `format_version`. JSON formats reject unknown keys.
//! Floats are written in shortest round-trip form, so reading a written file
//! reproduces the in-memory values exactly.

use std::fmt::Write as _;
use std::path::Path as FsPath;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datagen::{DatasetMeta, PoseDataset};
use crate::error::{Error, Result};
use crate::geometry::{Environment, Polygon};
use crate::ik_learn::{robot_fingerprint, EpochStats, IkNetwork};
use crate::kinematics::{Configuration, RobotModel};
use crate::mlp::Mlp;
use crate::motion::Path;
use crate::planner::Goal;
use crate::se2::PoseSE2;

pub const FORMAT_VERSION: u32 = 1;

fn check_version(found: u32, what: &str) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "{what} has format version {found}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

fn degrees(v: &[f64]) -> Vec<f64> {
    v.iter().map(|a| a.to_degrees()).collect()
}

fn radians(v: &[f64]) -> Vec<f64> {
    v.iter().map(|a| a.to_radians()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub link_lengths_m: Vec<f64>,
    pub joint_bound_deg: Vec<f64>,
    pub ma_speed_m_s: f64,
    pub joint_speed_rad_s: f64,
    pub link_width_m: f64,
}

impl RobotSpec {
    pub fn to_model(&self) -> Result<RobotModel> {
        RobotModel::new(
            self.link_lengths_m.clone(),
            radians(&self.joint_bound_deg),
            self.ma_speed_m_s,
            self.joint_speed_rad_s,
            self.link_width_m,
        )
    }

    pub fn from_model(model: &RobotModel) -> Self {
        Self {
            link_lengths_m: model.link_lengths().to_vec(),
            joint_bound_deg: degrees(model.joint_bounds()),
            ma_speed_m_s: model.ma_speed(),
            joint_speed_rad_s: model.joint_speed(),
            link_width_m: model.link_width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub theta_deg: Vec<f64>,
    pub d_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub phi_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_theta_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_d_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub e_p_mm: f64,
    pub e_phi_deg: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            e_p_mm: 8.0,
            e_phi_deg: 4.0,
        }
    }
}

/// A planning problem as stored on disk, in millimeters and degrees where
/// the key says so.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentFile {
    pub format_version: u32,
    pub robot: RobotSpec,
    pub obstacles: Vec<Vec<[f64; 2]>>,
    pub start: StartSpec,
    pub goal: GoalSpec,
    pub tolerances: Tolerances,
}

/// A validated planning problem in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub model: RobotModel,
    pub env: Environment,
    pub q_init: Configuration,
    pub goal: Goal,
    pub e_p: f64,
    pub e_phi: f64,
}

impl EnvironmentFile {
    pub fn to_problem(&self) -> Result<Problem> {
        check_version(self.format_version, "environment file")?;
        let model = self.robot.to_model()?;
        let obstacles = self
            .obstacles
            .iter()
            .map(|v| Polygon::new(v.clone()))
            .collect::<Result<Vec<_>>>()?;
        let env = Environment::new(&model, obstacles);
        let q_init = Configuration::new(radians(&self.start.theta_deg), self.start.d_m);
        model.check_feasible(&q_init)?;
        let q_goal = match (&self.goal.goal_theta_deg, self.goal.goal_d_m) {
            (Some(t), Some(d)) => {
                let q = Configuration::new(radians(t), d);
                model.check_feasible(&q)?;
                Some(q)
            }
            (None, None) => None,
            _ => {
                return Err(Error::Validation(
                    "goal_theta_deg and goal_d_m must be given together".into(),
                ))
            }
        };
        let tol = &self.tolerances;
        if !(tol.e_p_mm > 0.0 && tol.e_phi_deg > 0.0) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        Ok(Problem {
            model,
            env,
            q_init,
            goal: Goal {
                pose: PoseSE2::new(self.goal.x_m, self.goal.y_m, self.goal.phi_deg.to_radians()),
                q_goal,
            },
            e_p: tol.e_p_mm / 1000.0,
            e_phi: tol.e_phi_deg.to_radians(),
        })
    }

    pub fn from_problem(p: &Problem) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            robot: RobotSpec::from_model(&p.model),
            obstacles: p.env.obstacles.iter().map(|o| o.vertices().to_vec()).collect(),
            start: StartSpec {
                theta_deg: degrees(&p.q_init.theta),
                d_m: p.q_init.d,
            },
            goal: GoalSpec {
                x_m: p.goal.pose.x,
                y_m: p.goal.pose.y,
                phi_deg: p.goal.pose.phi.to_degrees(),
                goal_theta_deg: p.goal.q_goal.as_ref().map(|q| degrees(&q.theta)),
                goal_d_m: p.goal.q_goal.as_ref().map(|q| q.d),
            },
            tolerances: Tolerances {
                e_p_mm: p.e_p * 1000.0,
                e_phi_deg: p.e_phi.to_degrees(),
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment serializes")
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Dataset text: `key = value` header lines, a column line, then one
/// `x_m,y_m,phi_rad` row per pose.
pub fn dataset_to_text(ds: &PoseDataset) -> String {
    let m = &ds.meta;
    let mut out = String::new();
    let _ = writeln!(out, "format_version = {FORMAT_VERSION}");
    let _ = writeln!(out, "grid_cols = {}", m.grid_cols);
    let _ = writeln!(out, "grid_rows = {}", m.grid_rows);
    let _ = writeln!(out, "rho = {}", m.rho);
    let _ = writeln!(out, "seed = {}", m.seed);
    let _ = writeln!(out, "max_samples = {}", m.max_samples);
    let _ = writeln!(out, "draws = {}", m.draws);
    let _ = writeln!(out, "upper_count = {}", m.upper_count);
    let _ = writeln!(out, "density_reached = {}", m.density_reached);
    let _ = writeln!(out, "count = {}", ds.poses.len());
    out.push_str("x_m,y_m,phi_rad\n");
    for p in &ds.poses {
        let _ = writeln!(out, "{:?},{:?},{:?}", p.x, p.y, p.phi);
    }
    out
}

fn header_value<T: std::str::FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    let raw = fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .ok_or_else(|| Error::Parse(format!("missing header key {key}")))?;
    raw.parse()
        .map_err(|_| Error::Parse(format!("bad value {raw:?} for {key}")))
}

pub fn dataset_from_text(text: &str) -> Result<PoseDataset> {
    let mut lines = text.lines().enumerate();
    let mut fields = Vec::new();
    for (_, line) in lines.by_ref() {
        if line == "x_m,y_m,phi_rad" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header line {line:?}")))?;
        fields.push((k.trim().to_string(), v.trim().to_string()));
    }
    check_version(header_value(&fields, "format_version")?, "dataset")?;
    let count: usize = header_value(&fields, "count")?;
    let mut poses = Vec::with_capacity(count);
    for (no, line) in lines {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("line {}: bad number", no + 1)))?;
        if vals.len() != 3 || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("line {}: expected 3 finite values", no + 1)));
        }
        poses.push(PoseSE2::new(vals[0], vals[1], vals[2]));
    }
    if poses.len() != count {
        return Err(Error::Parse(format!("header says {count} poses, found {}", poses.len())));
    }
    Ok(PoseDataset {
        poses,
        meta: DatasetMeta {
            grid_cols: header_value(&fields, "grid_cols")?,
            grid_rows: header_value(&fields, "grid_rows")?,
            rho: header_value(&fields, "rho")?,
            seed: header_value(&fields, "seed")?,
            max_samples: header_value(&fields, "max_samples")?,
            draws: header_value(&fields, "draws")?,
            upper_count: header_value(&fields, "upper_count")?,
            density_reached: header_value(&fields, "density_reached")?,
        },
    })
}

/// Serialized IK network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub fingerprint: String,
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
    pub input_scale: Vec<f64>,
    pub output_bounds: Vec<[f64; 2]>,
    /// Row-major weight matrices, one per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

pub const HIDDEN_ACTIVATION: &str = "tanh";
pub const OUTPUT_ACTIVATION: &str = "bounded-tanh";

impl ModelFile {
    pub fn from_network(net: &IkNetwork) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            fingerprint: net.fingerprint.clone(),
            layer_sizes: net.mlp.layer_sizes(),
            hidden_activation: HIDDEN_ACTIVATION.into(),
            output_activation: OUTPUT_ACTIVATION.into(),
            input_scale: net.input_scale.clone(),
            output_bounds: net.output_bounds.iter().map(|&(a, b)| [a, b]).collect(),
            weights: net
                .mlp
                .weights
                .iter()
                .map(|w| w.transpose().as_slice().to_vec())
                .collect(),
            biases: net.mlp.biases.iter().map(|b| b.as_slice().to_vec()).collect(),
        }
    }

    pub fn to_network(&self) -> Result<IkNetwork> {
        check_version(self.format_version, "model file")?;
        if self.hidden_activation != HIDDEN_ACTIVATION || self.output_activation != OUTPUT_ACTIVATION {
            return Err(Error::Parse(format!(
                "unsupported activations {} / {}",
                self.hidden_activation, self.output_activation
            )));
        }
        let sizes = &self.layer_sizes;
        let layers = sizes.len().saturating_sub(1);
        if sizes.len() < 2 || self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::Parse("layer count mismatch".into()));
        }
        let (inputs, outputs) = (sizes[0], sizes[layers]);
        if self.input_scale.len() != inputs || self.output_bounds.len() != outputs || inputs != outputs + 3 {
            return Err(Error::Parse("input or output size mismatch".into()));
        }
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for k in 0..layers {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            if self.weights[k].len() != fan_in * fan_out || self.biases[k].len() != fan_out {
                return Err(Error::Parse(format!("layer {k} has wrong array sizes")));
            }
            weights.push(DMatrix::from_row_slice(fan_out, fan_in, &self.weights[k]));
            biases.push(DVector::from_column_slice(&self.biases[k]));
        }
        Ok(IkNetwork {
            mlp: Mlp { weights, biases },
            input_scale: self.input_scale.clone(),
            output_bounds: self.output_bounds.iter().map(|b| (b[0], b[1])).collect(),
            fingerprint: self.fingerprint.clone(),
        })
    }

    /// Loads a network and checks it was trained for `model`.
    pub fn network_for(&self, model: &RobotModel) -> Result<IkNetwork> {
        let expected = robot_fingerprint(model);
        if self.fingerprint != expected {
            return Err(Error::Config(format!(
                "network was trained for robot {}, environment robot is {expected}",
                self.fingerprint
            )));
        }
        self.to_network()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

pub const TRAINING_LOG_HEADER: &str = "epoch,mean_loss,mean_dp_mm,mean_dphi_deg";

pub fn training_log_to_csv(log: &[EpochStats]) -> String {
    let mut out = format!("{TRAINING_LOG_HEADER}\n");
    for e in log {
        let _ = writeln!(out, "{},{:?},{:?},{:?}", e.epoch, e.mean_loss, e.mean_dp_mm, e.mean_dphi_deg);
    }
    out
}

pub fn training_log_from_csv(text: &str) -> Result<Vec<EpochStats>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRAINING_LOG_HEADER) {
        return Err(Error::Parse("missing training log header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("training log row {}: {line:?}", i + 1));
            if cols.len() != 4 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(EpochStats {
                epoch: cols[0].parse().map_err(|_| bad())?,
                mean_loss: num(cols[1])?,
                mean_dp_mm: num(cols[2])?,
                mean_dphi_deg: num(cols[3])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub theta_rad: Vec<f64>,
    pub d_m: f64,
    pub t_s: f64,
}

/// Planned path with its total action time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub format_version: u32,
    pub tau_s: f64,
    pub waypoints: Vec<Waypoint>,
}

impl PathFile {
    pub fn from_path(path: &Path) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            tau_s: path.total_time(),
            waypoints: path
                .configurations
                .iter()
                .zip(&path.cumulative_time)
                .map(|(q, &t)| Waypoint {
                    theta_rad: q.theta.clone(),
                    d_m: q.d,
                    t_s: t,
                })
                .collect(),
        }
    }

    /// Rebuilds the path with actions as waypoint differences.
    pub fn to_path(&self, model: &RobotModel) -> Result<Path> {
        check_version(self.format_version, "path file")?;
        let configurations: Vec<Configuration> = self
            .waypoints
            .iter()
            .map(|w| Configuration::new(w.theta_rad.clone(), w.d_m))
            .collect();
        for q in &configurations {
            model.check_feasible(q)?;
        }
        let mut path = Path::from_configurations(model, configurations);
        path.cumulative_time = self.waypoints.iter().map(|w| w.t_s).collect();
        Ok(path)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_problem() -> Problem {
        let model = RobotModel::reference_5r();
        let obstacle = Polygon::new(vec![[0.3, 0.3], [0.4, 0.3], [0.4, 0.4], [0.3, 0.4]]).unwrap();
        Problem {
            env: Environment::new(&model, vec![obstacle]),
            q_init: model.straight(0.0),
            goal: Goal {
                pose: PoseSE2::new(0.5, -0.2, 0.3),
                q_goal: None,
            },
            model,
            e_p: 0.008,
            e_phi: 4f64.to_radians(),
        }
    }

    #[test]
    fn environment_round_trip() {
        let file = EnvironmentFile::from_problem(&sample_problem());
        let text = file.to_json();
        assert!(text.contains("\"e_p_mm\""));
        let back = EnvironmentFile::parse(&text).unwrap();
        assert_eq!(back, file);
        let p = back.to_problem().unwrap();
        assert_eq!(p.env.obstacles, sample_problem().env.obstacles);
        assert!((p.e_p - 0.008).abs() < 1e-15);
    }

    #[test]
    fn environment_rejects_unknown_keys_and_bad_values() {
        let text = EnvironmentFile::from_problem(&sample_problem()).to_json();
        let extra = text.replacen("\"obstacles\"", "\"colour\": 1, \"obstacles\"", 1);
        assert_eq!(EnvironmentFile::parse(&extra).unwrap_err().kind(), "parse");
        let mut file = EnvironmentFile::parse(&text).unwrap();
        file.start.d_m = 2.0;
        assert_eq!(file.to_problem().unwrap_err().kind(), "domain");
        let mut file = EnvironmentFile::parse(&text).unwrap();
        file.goal.goal_d_m = Some(0.1);
        assert_eq!(file.to_problem().unwrap_err().kind(), "validation");
        let mut file = EnvironmentFile::parse(&text).unwrap();
        file.format_version = 7;
        assert_eq!(file.to_problem().unwrap_err().kind(), "parse");
    }

    #[test]
    fn dataset_round_trip() {
        let ds = PoseDataset {
            poses: vec![PoseSE2::new(0.1, 0.2, 0.3), PoseSE2::new(0.1, -0.2, -0.3), PoseSE2::new(1.0 / 3.0, 0.0, std::f64::consts::PI)],
            meta: DatasetMeta {
                grid_cols: 18,
                grid_rows: 16,
                rho: 10,
                seed: 7,
                max_samples: 100,
                draws: 50,
                upper_count: 2,
                density_reached: true,
            },
        };
        let text = dataset_to_text(&ds);
        assert_eq!(dataset_from_text(&text).unwrap(), ds);
        let truncated: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        assert_eq!(dataset_from_text(&truncated).unwrap_err().kind(), "parse");
    }

    #[test]
    fn model_round_trip_is_exact() {
        let model = RobotModel::reference_5r();
        let net = IkNetwork::new(&model, &[7, 5], 3);
        let text = ModelFile::from_network(&net).to_json();
        let back = ModelFile::parse(&text).unwrap().network_for(&model).unwrap();
        assert_eq!(back, net);
        let other = RobotModel::new(vec![0.3; 4], vec![0.5; 4], 0.1, 0.28, 0.02).unwrap();
        assert_eq!(ModelFile::parse(&text).unwrap().network_for(&other).unwrap_err().kind(), "config");
    }

    #[test]
    fn training_log_round_trip() {
        let log = vec![
            EpochStats { epoch: 0, mean_loss: 0.5, mean_dp_mm: 300.25, mean_dphi_deg: 40.0 },
            EpochStats { epoch: 1, mean_loss: 0.1 + 0.2, mean_dp_mm: 1e-3, mean_dphi_deg: 2.5 },
        ];
        assert_eq!(training_log_from_csv(&training_log_to_csv(&log)).unwrap(), log);
    }

    #[test]
    fn path_round_trip_keeps_times() {
        let model = RobotModel::reference_5r();
        let qs = vec![
            model.straight(0.0),
            Configuration::new(vec![0.3, 0.0, 0.0, 0.0, 0.0], 0.25),
            Configuration::new(vec![0.3, -0.1, 0.0, 0.2, 0.0], 0.5),
        ];
        let path = Path::from_configurations(&model, qs);
        let file = PathFile::from_path(&path);
        let back = PathFile::parse(&file.to_json()).unwrap();
        assert_eq!(back, file);
        let rebuilt = back.to_path(&model).unwrap();
        let tau = crate::motion::path_cost(&model, &rebuilt).unwrap();
        assert!((tau - back.tau_s).abs() < 1e-9);
    }
}
