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
//! `masr`: dataset generation, IK training and evaluation, planning,
//! benchmarking and rendering for minimally actuated serial robots.
//!
//! Exit codes: 0 success, 1 invalid input, 2 planning or training failure.
//! Errors are also reported as one JSON line on standard error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use masr_core::bench::{bench_suite, BenchSpec, EnvSource};
use masr_core::datagen::{generate_dataset, DataGenConfig, PoseDataset};
use masr_core::formats::{
    dataset_from_text, dataset_to_text, training_log_to_csv, EnvironmentFile, ModelFile, PathFile, Problem,
};
use masr_core::geometry::{config_free, motion_free};
use masr_core::ik_learn::{ik_solve, regularizer, train_with_progress, IkNetwork, RegKind, TrainHyper};
use masr_core::ik_numeric::{ik_numeric, NrParams};
use masr_core::kinematics::forward_kinematics;
use masr_core::motion::{path_cost, transition_cost};
use masr_core::planner::{plan, PlannerParams};
use masr_core::svg::{render_svg, GoalMarker};
use masr_core::{Error, PoseSE2, RobotModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "masr", version, about = "Planning toolkit for minimally actuated serial robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a uniform-coverage pose dataset.
    GenData(GenDataArgs),
    /// Train an IK network on a pose dataset.
    Train(TrainArgs),
    /// Compare the IK network with the numeric solver on random queries.
    IkEval(IkEvalArgs),
    /// Plan a path for one environment file.
    Plan(PlanArgs),
    /// Run a planning benchmark suite.
    Bench(BenchArgs),
    /// Draw an environment and optionally a path.
    Render(RenderArgs),
}

#[derive(Args)]
struct RobotArg {
    /// Environment file whose robot block is used; defaults to the reference 5R arm.
    #[arg(long = "robot")]
    robot: Option<PathBuf>,
}

impl RobotArg {
    fn model(&self) -> Result<RobotModel, Error> {
        match &self.robot {
            Some(p) => EnvironmentFile::load(p)?.robot.to_model(),
            None => Ok(RobotModel::reference_5r()),
        }
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    robot: RobotArg,
    #[arg(long, default_value_t = 180)]
    cols: usize,
    #[arg(long, default_value_t = 160)]
    rows: usize,
    #[arg(long, default_value_t = 10)]
    rho: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 5_000_000)]
    max_samples: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    robot: RobotArg,
    #[arg(long)]
    data: PathBuf,
    /// Regularizer: action-time or angles.
    #[arg(long, default_value = "action-time")]
    reg: String,
    #[arg(long)]
    lambda: Option<f64>,
    /// Hidden layer sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 500)]
    batch: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct IkEvalArgs {
    #[command(flatten)]
    robot: RobotArg,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Numeric restarts per query; 0 skips the numeric solver.
    #[arg(long, default_value_t = 1000)]
    restarts: usize,
    #[arg(long, default_value_t = 8.0)]
    e_p_mm: f64,
    #[arg(long, default_value_t = 4.0)]
    e_phi_deg: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    pc: f64,
    #[arg(long, default_value_t = 12_000)]
    nc: usize,
    #[arg(long, default_value_t = 7)]
    nn: usize,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    goal_bias: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Per-iteration CSV trace of tree size and best cost.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    robot: RobotArg,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.6,1")]
    pc: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000,12000")]
    nc: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    nn: usize,
    /// Environment source: random or empty. Ignored when --env is given.
    #[arg(long, default_value = "random")]
    envs: String,
    /// Environment files to benchmark instead of generated ones.
    #[arg(long = "env")]
    env_files: Vec<PathBuf>,
    #[arg(long, default_value_t = 4)]
    max_obstacles: usize,
    #[arg(long, default_value_t = 0.1)]
    coverage: f64,
    /// Dataset to draw goal poses from.
    #[arg(long)]
    goals: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record wall time per run.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    path: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error.kind() {
            "planning" | "training" => 2,
            _ => 1,
        };
        Self { code, error }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_dataset(path: &Path) -> Result<PoseDataset, Error> {
    dataset_from_text(&read(path)?)
}

fn load_network(path: &Path, model: &RobotModel) -> Result<IkNetwork, Error> {
    ModelFile::parse(&read(path)?)?.network_for(model)
}

fn load_problem(path: &Path) -> Result<Problem, Error> {
    EnvironmentFile::parse(&read(path)?)?.to_problem()
}

fn gen_data(a: GenDataArgs) -> CmdResult {
    let model = a.robot.model()?;
    let cfg = DataGenConfig {
        max_samples: a.max_samples,
        workers: a.workers,
        ..DataGenConfig::new(a.cols, a.rows, a.rho, a.seed)
    };
    let ds = generate_dataset(&model, &cfg)?;
    write(&a.out, &dataset_to_text(&ds))?;
    println!(
        "{} poses from {} draws (density reached: {})",
        ds.len(),
        ds.meta.draws,
        ds.meta.density_reached
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CmdResult {
    let model = a.robot.model()?;
    let ds = load_dataset(&a.data)?;
    let kind = RegKind::from_tag(&a.reg).ok_or_else(|| Error::Validation(format!("unknown regularizer {:?}", a.reg)))?;
    let base = match kind {
        RegKind::ActionTime => TrainHyper::model_ii(),
        RegKind::Angles => TrainHyper::model_i(),
    };
    let hyper = TrainHyper {
        lambda: a.lambda.unwrap_or(base.lambda),
        hidden_layers: a.hidden.unwrap_or(base.hidden_layers.clone()),
        learning_rate: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        seed: a.seed,
        ..base
    };
    let quiet = a.quiet;
    let (net, log) = train_with_progress(&model, &ds, &hyper, |e| {
        if !quiet && (e.epoch % 10 == 0 || e.epoch + 1 == hyper.epochs) {
            eprintln!(
                "epoch {:5}  loss {:.6}  dp {:.2} mm  dphi {:.2} deg",
                e.epoch, e.mean_loss, e.mean_dp_mm, e.mean_dphi_deg
            );
        }
    })?;
    write(&a.out, &ModelFile::from_network(&net).to_json())?;
    if let Some(p) = &a.log {
        write(p, &training_log_to_csv(&log))?;
    }
    Ok(())
}

#[derive(Default)]
struct EvalTally {
    dp: f64,
    dphi: f64,
    ok: usize,
    reg: f64,
    motion: f64,
    solved: usize,
    secs: f64,
}

fn ik_eval(a: IkEvalArgs) -> CmdResult {
    let model = a.robot.model()?;
    let net = load_network(&a.model, &model)?;
    if a.trials == 0 {
        return Err(Error::Validation("need at least one trial".into()).into());
    }
    let (e_p, e_phi) = (a.e_p_mm / 1000.0, a.e_phi_deg.to_radians());
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut nn = EvalTally::default();
    let mut nr = EvalTally::default();
    let params = NrParams {
        e_p,
        e_phi,
        ..NrParams::default()
    };
    for trial in 0..a.trials {
        let goal = forward_kinematics(&model, &model.sample_configuration(&mut rng))?;
        let q_c = model.sample_configuration(&mut rng);
        let t = Instant::now();
        let q = ik_solve(&net, &goal, &q_c)?;
        nn.secs += t.elapsed().as_secs_f64();
        tally(&mut nn, &model, &goal, &q_c, &q, e_p, e_phi)?;
        if a.restarts > 0 {
            let t = Instant::now();
            let res = ik_numeric(&model, &goal, &q_c, a.restarts, rng.gen::<u64>() ^ trial as u64, &params)?;
            nr.secs += t.elapsed().as_secs_f64();
            if let Some(q) = res.best {
                tally(&mut nr, &model, &goal, &q_c, &q, e_p, e_phi)?;
            }
        }
    }
    println!("method,mean_dp_mm,mean_dphi_deg,success_pct,mean_reg_action_time,mean_motion_time_s,runtime_s");
    print_row("ik-nn", &nn, a.trials);
    if a.restarts > 0 {
        print_row(&format!("numeric-m{}", a.restarts), &nr, a.trials);
    }
    Ok(())
}

fn tally(
    t: &mut EvalTally,
    model: &RobotModel,
    goal: &PoseSE2,
    q_c: &masr_core::Configuration,
    q: &masr_core::Configuration,
    e_p: f64,
    e_phi: f64,
) -> Result<(), Error> {
    let reached = forward_kinematics(model, q)?;
    t.dp += reached.position_error(goal);
    t.dphi += reached.angle_error(goal);
    t.ok += reached.within(goal, e_p, e_phi) as usize;
    t.reg += regularizer(model, q_c, q, RegKind::ActionTime, 0.0).0;
    t.motion += transition_cost(model, q_c, q);
    t.solved += 1;
    Ok(())
}

fn print_row(name: &str, t: &EvalTally, trials: usize) {
    let n = t.solved.max(1) as f64;
    println!(
        "{name},{:.3},{:.3},{:.1},{:.3},{:.3},{:.6}",
        1000.0 * t.dp / n,
        (t.dphi / n).to_degrees(),
        100.0 * t.ok as f64 / trials as f64,
        t.reg / n,
        t.motion / n,
        t.secs / trials as f64
    );
}

fn plan_cmd(a: PlanArgs) -> CmdResult {
    let problem = load_problem(&a.env)?;
    let model = &problem.model;
    let net = match &a.model {
        Some(p) => Some(load_network(p, model)?),
        None => None,
    };
    let params = PlannerParams {
        iterations: a.nc,
        neighbors: a.nn,
        p_c: a.pc,
        delta: a.delta,
        goal_bias: a.goal_bias,
        e_p: problem.e_p,
        e_phi: problem.e_phi,
        seed: a.seed,
        ..PlannerParams::default()
    };
    let out = plan(&problem.env, model, &problem.q_init, &problem.goal, net.as_ref(), &params)?;
    if let Some(p) = &a.trace {
        let mut text = String::from("iteration,tree_size,best_tau_s\n");
        for t in &out.stats.trace {
            let best = t.best_tau.map_or("-".to_string(), |b| format!("{b:?}"));
            text.push_str(&format!("{},{},{}\n", t.iteration, t.tree_size, best));
        }
        write(p, &text)?;
    }
    let path = out.path.ok_or_else(|| {
        Error::Planning(format!(
            "no path after {} iterations (tree size {}, {} collisions)",
            out.stats.iterations, out.stats.tree_size, out.stats.collisions
        ))
    })?;
    let tau = path_cost(model, &path)?;
    for w in path.configurations.windows(2) {
        if !config_free(&problem.env, model, &w[1]) || !motion_free(&problem.env, model, &w[0], &w[1]) {
            return Err(Error::Planning("returned path failed re-validation".into()).into());
        }
    }
    write(&a.out, &PathFile::from_path(&path).to_json())?;
    if let Some(p) = &a.svg {
        let marker = GoalMarker {
            pose: problem.goal.pose,
            e_p: problem.e_p,
        };
        write(p, &render_svg(&problem.env, model, &path.configurations, Some(marker)))?;
    }
    println!(
        "tau {tau:.3} s over {} actions; first solution at iteration {}; {} IK calls",
        path.len(),
        out.stats.first_solution_iteration.unwrap_or(0),
        out.stats.ik_calls
    );
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> CmdResult {
    let model = a.robot.model()?;
    let env_source = if !a.env_files.is_empty() {
        EnvSource::Problems(a.env_files.iter().map(|p| load_problem(p)).collect::<Result<_, _>>()?)
    } else {
        match a.envs.as_str() {
            "random" => EnvSource::Random {
                max_obstacles: a.max_obstacles,
                max_coverage: a.coverage,
            },
            "empty" => EnvSource::Empty,
            other => return Err(Error::Validation(format!("unknown environment source {other:?}")).into()),
        }
    };
    let net = match &a.model {
        Some(p) => Some(load_network(p, &model)?),
        None => None,
    };
    let goal_poses = match &a.goals {
        Some(p) => Some(load_dataset(p)?.poses),
        None => None,
    };
    let spec = BenchSpec {
        trials: a.trials,
        seeds_per_trial: a.seeds,
        p_c_values: a.pc,
        checkpoints: a.nc,
        neighbors: a.nn,
        suite_seed: a.seed,
        env_source,
        goal_poses,
        timing: a.timing,
        ..BenchSpec::default()
    };
    let report = bench_suite(&model, net.as_ref(), &spec)?;
    write(&a.out, &report.to_text())?;
    for c in &report.aggregates.success {
        println!("p_c {:<4} n_c {:<6} success {:.3}", c.p_c, c.n_c, c.rate);
    }
    Ok(())
}

fn render_cmd(a: RenderArgs) -> CmdResult {
    let problem = load_problem(&a.env)?;
    let configurations = match &a.path {
        Some(p) => PathFile::parse(&read(p)?)?.to_path(&problem.model)?.configurations,
        None => vec![problem.q_init.clone()],
    };
    let marker = GoalMarker {
        pose: problem.goal.pose,
        e_p: problem.e_p,
    };
    write(&a.out, &render_svg(&problem.env, &problem.model, &configurations, Some(marker)))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::IkEval(a) => ik_eval(a),
        Command::Plan(a) => plan_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Render(a) => render_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = serde_json::json!({"error": {"kind": f.error.kind(), "message": f.error.to_string()}});
            eprintln!("{line}");
            ExitCode::from(f.code)
        }
    }
}
