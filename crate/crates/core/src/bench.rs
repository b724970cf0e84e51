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
//! Benchmark harness: many planning runs over generated or given problems,
//! reduced to success-rate and cost-threshold curves.
//!
//! Each run plans once with the largest iteration budget; smaller budgets are
//! read from its per-iteration trace, since a run with the same seed and a
//! smaller budget makes exactly the same decisions up to that point.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formats::{Problem, FORMAT_VERSION};
use crate::geometry::{config_free, random_environment, Environment};
use crate::ik_learn::IkNetwork;
use crate::kinematics::{fk_unchecked, RobotModel};
use crate::planner::{plan, Goal, PlannerParams};
use crate::se2::PoseSE2;

/// Mixes a base seed with two indices into an independent seed.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    for _ in 0..2 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSource {
    Empty,
    Random { max_obstacles: usize, max_coverage: f64 },
    Problems(Vec<Problem>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    /// Environments; ignored for [`EnvSource::Problems`], which runs each once.
    pub trials: usize,
    pub seeds_per_trial: usize,
    pub p_c_values: Vec<f64>,
    /// Iteration budgets to report; the largest is the run length.
    pub checkpoints: Vec<usize>,
    pub neighbors: usize,
    pub delta: f64,
    pub goal_bias: f64,
    pub e_p: f64,
    pub e_phi: f64,
    pub suite_seed: u64,
    pub env_source: EnvSource,
    /// Goal poses to draw from; otherwise goals are the MA pose of a random
    /// collision-free configuration.
    pub goal_poses: Option<Vec<PoseSE2>>,
    /// Normalized-cost thresholds for the cost curves.
    pub thresholds: Vec<f64>,
    /// Record wall time per run; makes the report nondeterministic.
    pub timing: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        let p = PlannerParams::default();
        Self {
            trials: 10,
            seeds_per_trial: 1,
            p_c_values: vec![0.0, 0.2, 0.6, 1.0],
            checkpoints: vec![1000, 2000, 4000, 8000, 12_000],
            neighbors: p.neighbors,
            delta: p.delta,
            goal_bias: p.goal_bias,
            e_p: p.e_p,
            e_phi: p.e_phi,
            suite_seed: 0,
            env_source: EnvSource::Random {
                max_obstacles: 4,
                max_coverage: 0.1,
            },
            goal_poses: None,
            thresholds: vec![0.15, 0.25],
            timing: false,
        }
    }
}

/// One planning run observed at one iteration budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub trial: usize,
    pub env_seed: u64,
    pub run_seed: u64,
    pub p_c: f64,
    pub n_c: usize,
    pub success: bool,
    pub tau_s: Option<f64>,
    /// First iteration with a solution over the whole run.
    pub first_solution_iter: Option<usize>,
    pub ik_calls: usize,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub p_c: f64,
    pub n_c: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub p_c: f64,
    pub n_c: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    pub success: Vec<CurvePoint>,
    pub cost_thresholds: Vec<ThresholdPoint>,
    /// Trials where no run found a path.
    pub unsolvable_suspects: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub suite_seed: u64,
    pub thresholds: Vec<f64>,
    pub rows: Vec<RunRow>,
    pub aggregates: Aggregates,
}

fn distinct_f64(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Curves computed from run rows alone.
///
/// Costs are normalized per trial to `[0, 1]` using the smallest and largest
/// final cost over all of that trial's successful runs at the largest budget.
pub fn aggregate(rows: &[RunRow], thresholds: &[f64]) -> Aggregates {
    let p_cs = distinct_f64(rows.iter().map(|r| r.p_c));
    let mut n_cs: Vec<usize> = rows.iter().map(|r| r.n_c).collect();
    n_cs.sort_unstable();
    n_cs.dedup();
    let n_max = n_cs.last().copied().unwrap_or(0);
    let mut trials: Vec<usize> = rows.iter().map(|r| r.trial).collect();
    trials.sort_unstable();
    trials.dedup();

    let range = |trial: usize| {
        rows.iter()
            .filter(|r| r.trial == trial && r.n_c == n_max)
            .filter_map(|r| r.tau_s)
            .fold(None, |acc: Option<(f64, f64)>, t| match acc {
                None => Some((t, t)),
                Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
            })
    };
    let ranges: Vec<(usize, Option<(f64, f64)>)> = trials.iter().map(|&t| (t, range(t))).collect();
    let normalized = |r: &RunRow| -> Option<f64> {
        let tau = r.tau_s?;
        let (lo, hi) = ranges.iter().find(|(t, _)| *t == r.trial)?.1?;
        Some(if hi > lo { ((tau - lo) / (hi - lo)).max(0.0) } else { 0.0 })
    };

    let mut success = Vec::new();
    let mut cost_thresholds = Vec::new();
    for &p_c in &p_cs {
        for &n_c in &n_cs {
            let group: Vec<&RunRow> = rows.iter().filter(|r| r.p_c == p_c && r.n_c == n_c).collect();
            if group.is_empty() {
                continue;
            }
            let total = group.len() as f64;
            success.push(CurvePoint {
                p_c,
                n_c,
                rate: group.iter().filter(|r| r.success).count() as f64 / total,
            });
            for &threshold in thresholds {
                let hits = group
                    .iter()
                    .filter(|r| r.success && normalized(r).is_some_and(|c| c <= threshold))
                    .count();
                cost_thresholds.push(ThresholdPoint {
                    threshold,
                    p_c,
                    n_c,
                    rate: hits as f64 / total,
                });
            }
        }
    }
    let unsolvable_suspects = ranges.iter().filter(|(_, r)| r.is_none()).map(|(t, _)| *t).collect();
    Aggregates {
        success,
        cost_thresholds,
        unsolvable_suspects,
    }
}

impl BenchReport {
    /// Success rate at `(p_c, n_c)`, if that point was run.
    pub fn success_rate(&self, p_c: f64, n_c: usize) -> Option<f64> {
        self.aggregates
            .success
            .iter()
            .find(|c| c.p_c == p_c && c.n_c == n_c)
            .map(|c| c.rate)
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:?}"));
        let mut out = String::new();
        let _ = writeln!(out, "format_version = {FORMAT_VERSION}");
        let _ = writeln!(out, "suite_seed = {}", self.suite_seed);
        let _ = writeln!(
            out,
            "thresholds = {}",
            self.thresholds.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(",")
        );
        out.push_str("[runs]\ntrial,env_seed,run_seed,p_c,n_c,success,tau_s,first_solution_iter,ik_calls,wall_ms\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{},{},{},{},{},{}",
                r.trial,
                r.env_seed,
                r.run_seed,
                r.p_c,
                r.n_c,
                r.success as u8,
                opt(r.tau_s),
                r.first_solution_iter.map_or("-".to_string(), |i| i.to_string()),
                r.ik_calls,
                opt(r.wall_ms)
            );
        }
        out.push_str("[success_curve]\np_c,n_c,success_rate\n");
        for c in &self.aggregates.success {
            let _ = writeln!(out, "{:?},{},{:?}", c.p_c, c.n_c, c.rate);
        }
        out.push_str("[cost_threshold_curve]\nthreshold,p_c,n_c,success_rate\n");
        for c in &self.aggregates.cost_thresholds {
            let _ = writeln!(out, "{:?},{:?},{},{:?}", c.threshold, c.p_c, c.n_c, c.rate);
        }
        out.push_str("[unsolvable_suspects]\ntrial\n");
        for t in &self.aggregates.unsolvable_suspects {
            let _ = writeln!(out, "{t}");
        }
        out
    }

    /// Parses a report and checks its curves against its run rows.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("bench report: {what}"));
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let (k, v) = line.split_once('=').ok_or_else(|| bad(line))?;
            if k.trim() != key {
                return Err(bad(&format!("expected {key}")));
            }
            Ok(v.trim().to_string())
        };
        let version: u32 = header("format_version")?.parse().map_err(|_| bad("version"))?;
        if version != FORMAT_VERSION {
            return Err(bad("unsupported version"));
        }
        let suite_seed: u64 = header("suite_seed")?.parse().map_err(|_| bad("suite_seed"))?;
        let thresholds_raw = header("thresholds")?;
        let thresholds = if thresholds_raw.is_empty() {
            Vec::new()
        } else {
            thresholds_raw
                .split(',')
                .map(|t| t.parse::<f64>().map_err(|_| bad("threshold")))
                .collect::<Result<Vec<_>>>()?
        };
        let body: Vec<&str> = text.lines().skip(3).collect();
        if body.first() != Some(&"[runs]") {
            return Err(bad("missing [runs]"));
        }
        let opt_f = |s: &str| -> Result<Option<f64>> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(s))
            }
        };
        let mut rows = Vec::new();
        for line in body.iter().skip(2) {
            if line.starts_with('[') {
                break;
            }
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 10 {
                return Err(bad(line));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(s));
            rows.push(RunRow {
                trial: int(c[0])? as usize,
                env_seed: int(c[1])?,
                run_seed: int(c[2])?,
                p_c: c[3].parse().map_err(|_| bad(c[3]))?,
                n_c: int(c[4])? as usize,
                success: c[5] == "1",
                tau_s: opt_f(c[6])?,
                first_solution_iter: if c[7] == "-" { None } else { Some(int(c[7])? as usize) },
                ik_calls: int(c[8])? as usize,
                wall_ms: opt_f(c[9])?,
            });
        }
        let report = BenchReport {
            suite_seed,
            aggregates: aggregate(&rows, &thresholds),
            thresholds,
            rows,
        };
        if report.to_text() != text {
            return Err(bad("curves do not match the run rows"));
        }
        Ok(report)
    }
}

struct TrialSetup {
    env: Environment,
    model: RobotModel,
    q_init: crate::kinematics::Configuration,
    goal: Goal,
    env_seed: u64,
    e_p: f64,
    e_phi: f64,
}

fn random_goal(env: &Environment, model: &RobotModel, poses: Option<&[PoseSE2]>, rng: &mut ChaCha8Rng) -> Option<Goal> {
    for _ in 0..10_000 {
        match poses {
            Some(ps) if !ps.is_empty() => {
                let p = ps[rng.gen_range(0..ps.len())];
                if !env.inflated.iter().any(|o| o.contains([p.x, p.y])) {
                    return Some(Goal::pose(p));
                }
            }
            _ => {
                let q = model.sample_configuration(rng);
                if config_free(env, model, &q) {
                    return Some(Goal::pose(fk_unchecked(model, &q)));
                }
            }
        }
    }
    None
}

fn setup_trial(model: &RobotModel, spec: &BenchSpec, trial: usize) -> Result<TrialSetup> {
    if let EnvSource::Problems(problems) = &spec.env_source {
        let p = &problems[trial];
        return Ok(TrialSetup {
            env: p.env.clone(),
            model: p.model.clone(),
            q_init: p.q_init.clone(),
            goal: p.goal.clone(),
            env_seed: 0,
            e_p: p.e_p,
            e_phi: p.e_phi,
        });
    }
    let q_init = model.straight(0.0);
    for attempt in 0..1000u64 {
        let env_seed = derive_seed(spec.suite_seed, trial as u64, attempt);
        let env = match &spec.env_source {
            EnvSource::Random { max_obstacles, max_coverage } => {
                random_environment(model, env_seed, *max_obstacles, *max_coverage)?
            }
            _ => Environment::empty(model),
        };
        if !config_free(&env, model, &q_init) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(env_seed);
        rng.set_stream(1);
        if let Some(goal) = random_goal(&env, model, spec.goal_poses.as_deref(), &mut rng) {
            return Ok(TrialSetup {
                env,
                model: model.clone(),
                q_init,
                goal,
                env_seed,
                e_p: spec.e_p,
                e_phi: spec.e_phi,
            });
        }
    }
    Err(Error::Planning(format!("trial {trial}: no usable environment")))
}

/// Runs every (trial, seed, p_c) combination and reduces the results.
pub fn bench_suite(model: &RobotModel, net: Option<&IkNetwork>, spec: &BenchSpec) -> Result<BenchReport> {
    let trials = match &spec.env_source {
        EnvSource::Problems(p) => p.len(),
        _ => spec.trials,
    };
    if trials == 0 || spec.seeds_per_trial == 0 {
        return Err(Error::Validation("bench needs at least one trial and one seed".into()));
    }
    let mut checkpoints = spec.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let n_max = *checkpoints.last().ok_or_else(|| Error::Validation("no iteration budgets".into()))?;
    if checkpoints[0] == 0 {
        return Err(Error::Validation("iteration budgets must be positive".into()));
    }
    if spec.p_c_values.iter().any(|&p| p > 0.0) && net.is_none() {
        return Err(Error::Config("IK biasing requested without a network".into()));
    }
    let setups: Vec<TrialSetup> = (0..trials).map(|t| setup_trial(model, spec, t)).collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, f64)> = (0..trials)
        .flat_map(|t| (0..spec.seeds_per_trial).flat_map(move |s| spec.p_c_values.iter().map(move |&p| (t, s, p))))
        .collect();
    let results: Vec<Vec<RunRow>> = jobs
        .par_iter()
        .map(|&(trial, s, p_c)| {
            let setup = &setups[trial];
            let run_seed = derive_seed(spec.suite_seed ^ 0x5eed, trial as u64, s as u64);
            let params = PlannerParams {
                iterations: n_max,
                neighbors: spec.neighbors,
                p_c,
                delta: spec.delta,
                goal_bias: spec.goal_bias,
                e_p: setup.e_p,
                e_phi: setup.e_phi,
                seed: run_seed,
                audit_every: PlannerParams::default().audit_every,
            };
            let start = Instant::now();
            let outcome = plan(&setup.env, &setup.model, &setup.q_init, &setup.goal, net, &params);
            let wall_ms = spec.timing.then(|| start.elapsed().as_secs_f64() * 1000.0);
            checkpoints
                .iter()
                .map(|&n_c| {
                    let (tau_s, first, ik_calls) = match &outcome {
                        Ok(o) => (o.stats.trace[n_c - 1].best_tau, o.stats.first_solution_iteration, o.stats.ik_calls),
                        Err(_) => (None, None, 0),
                    };
                    RunRow {
                        trial,
                        env_seed: setup.env_seed,
                        run_seed,
                        p_c,
                        n_c,
                        success: tau_s.is_some(),
                        tau_s,
                        first_solution_iter: first,
                        ik_calls,
                        wall_ms,
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<RunRow> = results.into_iter().flatten().collect();
    Ok(BenchReport {
        suite_seed: spec.suite_seed,
        thresholds: spec.thresholds.clone(),
        aggregates: aggregate(&rows, &spec.thresholds),
        rows,
    })
}

/// Largest increase of the best cost along any run's checkpoints; zero for
/// anytime-monotone runs.
pub fn max_checkpoint_increase(report: &BenchReport) -> f64 {
    let mut worst: f64 = 0.0;
    for w in report.rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.trial == b.trial && a.run_seed == b.run_seed && a.p_c == b.p_c {
            if let (Some(x), Some(y)) = (a.tau_s, b.tau_s) {
                worst = worst.max(y - x);
            }
        }
    }
    worst
}
