//! The `pronk` command line: plan, check, simulate, train, eval.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 planner
//! rejection, 3 training divergence.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use serde_json::{json, Value};

use pronk_core::ballistics::{BallisticState, Ballistics, FilterDecision};
use pronk_core::quadruped::QuadrupedModel;
use pronk_core::reward::{episode_reward, RewardParams};
use pronk_core::simulator::{
    run_episode_traced, start_pose, write_trace_csv, EpisodeConfig, EpisodeOutcome, LiftoffState, SimMode,
};
use pronk_core::thrust::{decode, ActionRanges, JumpCommand, ThrustTrajectory, ACTION_DIM, ACTION_NAMES};
use pronk_eval::output::write_table;
use pronk_eval::{
    actual_vs_target, feasible_region, height_map, robustness_matrix, sha256_hex, yaw_sweep, Direction, Evaluator,
    RobustnessSpec, RunMetadata, SweepSpec,
};
use pronk_learn::{train_to_dir_from, ActorCritic, Checkpoint, ExperimentConfig, JumpEnv, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("rejected: {0}")]
    Rejected(String),
    #[error("{0}")]
    Diverged(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Rejected(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged(m) => CliError::Diverged(format!("training diverged: {m}")),
            TrainError::Io(e) => CliError::Io(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<pronk_eval::EvalError> for CliError {
    fn from(e: pronk_eval::EvalError) -> Self {
        match e {
            pronk_eval::EvalError::Io(e) => CliError::Io(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pronk", version, about = "Quadruped jump planning, simulation and policy training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the thrust reference of an action and predict the landing.
    Plan(PlanArgs),
    /// Run the ballistic safety filter on an action.
    Check(CheckArgs),
    /// Simulate one jump episode.
    Simulate(SimulateArgs),
    /// Train a policy.
    Train(TrainArgs),
    /// Run evaluation sweeps on a checkpoint.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Robot model (TOML); built-in defaults when omitted.
    #[arg(long)]
    pub robot: Option<PathBuf>,
    /// Reward parameters (TOML).
    #[arg(long)]
    pub reward: Option<PathBuf>,
    /// Experiment file with [policy], [train], [task] and [episode] sections.
    #[arg(long)]
    pub train: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ActionSource {
    /// Action file: TOML with the 13 action fields, physical units.
    #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
    pub action: Option<PathBuf>,
    /// Take the action from the mean of a trained policy.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub source: ActionSource,
    /// Target displacement `x,y,z[,roll,pitch,yaw]`; metres and degrees.
    #[arg(long, value_parser = parse_target, allow_hyphen_values = true)]
    pub target: JumpCommand,
    /// Sampling period of the trajectory table, s.
    #[arg(long, default_value_t = 0.002)]
    pub period: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub source: ActionSource,
    #[arg(long, value_parser = parse_target, allow_hyphen_values = true)]
    pub target: JumpCommand,
    /// Also write the report as JSON into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub source: ActionSource,
    #[arg(long, value_parser = parse_target, allow_hyphen_values = true)]
    pub target: JumpCommand,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parallel environments per iteration.
    #[arg(long)]
    pub envs: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Start a new run from this checkpoint's policy (fine-tuning).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Run directory; an existing checkpoint in it is resumed.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Suites to run; repeat the flag or separate with commas.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub suite: Vec<Suite>,
    /// Sweep ranges and sample counts (TOML).
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Overrides the default mode: ideal for sweeps, tracked for robust.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Upper bound of the random joint damping of the robust suite, N m s/rad.
    #[arg(long, default_value_t = RobustnessSpec::default().damping_max)]
    pub damping_max: f64,
    /// Episodes per cell of the robust suite.
    #[arg(long, default_value_t = RobustnessSpec::default().runs)]
    pub runs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ideal,
    Tracked,
}

impl From<Mode> for SimMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ideal => SimMode::Ideal,
            Mode::Tracked => SimMode::Tracked,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Region,
    Avt,
    Height,
    Yaw,
    Robust,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Region => "region",
            Suite::Avt => "avt",
            Suite::Height => "height",
            Suite::Yaw => "yaw",
            Suite::Robust => "robust",
        }
    }
}

/// Parses `x,y,z` or `x,y,z,roll,pitch,yaw` (angles in degrees).
pub fn parse_target(s: &str) -> Result<JumpCommand, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    if !(v.len() == 3 || v.len() == 6) || v.iter().any(|x| !x.is_finite()) {
        return Err("expected three or six finite numbers".into());
    }
    let ang = if v.len() == 6 {
        Vector3::new(v[3], v[4], v[5]).map(f64::to_radians)
    } else {
        Vector3::zeros()
    };
    Ok(JumpCommand::new(Vector3::new(v[0], v[1], v[2]), ang))
}

/// Parses an action file: one `name = value` entry per action field.
pub fn parse_action(text: &str) -> Result<[f64; ACTION_DIM], CliError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(k) = table.keys().find(|k| !ACTION_NAMES.contains(&k.as_str())) {
        return Err(CliError::Config(format!("unknown action field `{k}`")));
    }
    let mut a = [0.0; ACTION_DIM];
    for (slot, name) in a.iter_mut().zip(ACTION_NAMES) {
        *slot = match table.get(name) {
            Some(toml::Value::Float(f)) => *f,
            Some(toml::Value::Integer(i)) => *i as f64,
            Some(_) => return Err(CliError::Config(format!("action field `{name}` must be a number"))),
            None => return Err(CliError::Config(format!("missing action field `{name}`"))),
        };
    }
    Ok(a)
}

pub fn action_to_toml(a: &[f64; ACTION_DIM]) -> String {
    ACTION_NAMES.iter().zip(a).map(|(n, v)| format!("{n} = {v:?}\n")).collect()
}

/// Configuration loaded from the `--robot`, `--reward` and `--train` files.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub model: QuadrupedModel,
    pub reward: RewardParams,
    pub experiment: ExperimentConfig,
}

impl Loaded {
    pub fn from_args(args: &ConfigArgs) -> Result<Self, CliError> {
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        let model = match &args.robot {
            Some(p) => QuadrupedModel::from_file(p).map_err(|e| cfg(&e))?,
            None => QuadrupedModel::default(),
        };
        let reward = match &args.reward {
            Some(p) => RewardParams::from_file(p).map_err(|e| cfg(&e))?,
            None => RewardParams::default(),
        };
        let experiment = match &args.train {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        Ok(Self {
            model,
            reward,
            experiment,
        })
    }

    /// Digest of every configuration value in effect.
    pub fn hash(&self, extra: &str) -> String {
        let text = format!(
            "[robot]\n{}\n[reward]\n{}\n[experiment]\n{}\n{extra}",
            self.model.to_toml_string(),
            self.reward.to_toml_string(),
            self.experiment.to_toml_string()
        );
        sha256_hex(text.as_bytes())
    }
}

fn load_policy(path: &Path) -> Result<(ActorCritic, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let policy = Checkpoint::load(path)?.policy()?;
    Ok((policy, sha256_hex(&bytes)))
}

fn check_policy_dims(policy: &ActorCritic) -> Result<(), CliError> {
    if policy.state_dim() != pronk_core::thrust::STATE_DIM || policy.action_dim() != ACTION_DIM {
        return Err(CliError::Config("checkpoint is not a jump policy".into()));
    }
    Ok(())
}

/// Physical action and the id of the checkpoint it came from, if any.
fn resolve_action(
    src: &ActionSource,
    loaded: &Loaded,
    cmd: &JumpCommand,
) -> Result<([f64; ACTION_DIM], Option<String>), CliError> {
    if let Some(p) = &src.checkpoint {
        let (policy, id) = load_policy(p)?;
        check_policy_dims(&policy)?;
        let eval = Evaluator::new(&policy, loaded.model.clone(), loaded.experiment.episode.clone());
        return Ok((eval.raw_action(cmd), Some(id)));
    }
    let path = src.action.as_ref().ok_or_else(|| CliError::Usage("--action or --checkpoint is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((parse_action(&text)?, None))
}

fn vec3(v: &Vector3<f64>) -> Value {
    json!([v.x, v.y, v.z])
}

fn liftoff_json(l: &LiftoffState) -> Value {
    json!({ "c": vec3(&l.c), "cdot": vec3(&l.cdot), "phi": vec3(&l.phi), "phidot": vec3(&l.phidot) })
}

fn write_json(path: &Path, value: &Value, meta: &RunMetadata) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    meta.write_for(path, 1)?;
    Ok(())
}

/// Lift-off boundary, filter decision and report for an action.
struct Planned {
    boundary: Option<pronk_core::thrust::LiftoffBoundary>,
    report: Value,
    rejection: Option<String>,
}

fn plan_action(loaded: &Loaded, cmd: &JumpCommand, raw: &[f64; ACTION_DIM]) -> Planned {
    let start = start_pose(&loaded.model);
    let c_tg = start.position + cmd.delta_c;
    let (action, excess) = ActionRanges::default().clip(raw);
    let max_excess = excess.iter().cloned().fold(0.0, f64::max);
    let mut report = json!({
        "target": vec3(&c_tg),
        "start": vec3(&start.position),
        "action": ACTION_NAMES.iter().zip(action.to_array()).map(|(n, v)| (n.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "clip_excess_max": max_excess,
    });
    let boundary = match decode(&action, &start.position, &start.euler, &c_tg) {
        Ok(b) => b,
        Err(e) => {
            report["decision"] = json!("reject");
            report["reason"] = json!("unreachable");
            report["detail"] = json!(e.to_string());
            return Planned {
                boundary: None,
                report,
                rejection: Some("unreachable".into()),
            };
        }
    };
    let lo = LiftoffState::from_boundary(&boundary);
    report["liftoff"] = liftoff_json(&lo);
    let ballistics = Ballistics::new(loaded.experiment.episode.g);
    let state = BallisticState::new(lo.c, lo.cdot);
    let (apex_z, t_up) = ballistics.apex(&state);
    report["apex_z"] = json!(apex_z);
    report["time_to_apex"] = json!(t_up);
    let rejection = match ballistics.safety_filter(&state, &c_tg) {
        FilterDecision::Accept(p) => {
            report["decision"] = json!("accept");
            report["c_td"] = vec3(&p.c_td);
            report["flight_time"] = json!(p.flight_time);
            report["landing_error"] = json!((p.c_td - c_tg).norm());
            None
        }
        FilterDecision::Reject(r) => {
            report["decision"] = json!("reject");
            report["reason"] = json!(r.as_str());
            Some(r.as_str().to_string())
        }
    };
    Planned {
        boundary: Some(boundary),
        report,
        rejection,
    }
}

fn cmd_plan(args: &PlanArgs) -> Result<(), CliError> {
    if !(args.period > 0.0) {
        return Err(CliError::Usage("--period must be positive".into()));
    }
    let loaded = Loaded::from_args(&args.config)?;
    let (raw, ckpt) = resolve_action(&args.source, &loaded, &args.target)?;
    std::fs::create_dir_all(&args.out)?;
    let planned = plan_action(&loaded, &args.target, &raw);
    let meta = RunMetadata::new(
        "plan",
        0,
        "reference",
        ckpt,
        loaded.hash(&format!("target={:?}\naction={raw:?}\nperiod={}", args.target.to_state(), args.period)),
    );
    if let Some(b) = &planned.boundary {
        let start = start_pose(&loaded.model);
        let traj = ThrustTrajectory::new(
            &start.position,
            &Vector3::zeros(),
            &start.euler,
            &Vector3::zeros(),
            b,
            loaded.experiment.episode.interpolation(),
        )
        .map_err(|e| CliError::Rejected(format!("unreachable ({e})")))?;
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, args.period)?;
        let path = args.out.join("trajectory.csv");
        let rows = buf.iter().filter(|&&c| c == b'\n').count().saturating_sub(1);
        std::fs::write(&path, buf)?;
        meta.write_for(&path, rows)?;
    }
    write_json(&args.out.join("plan.json"), &planned.report, &meta)?;
    println!("{}", serde_json::to_string_pretty(&planned.report).expect("json"));
    match planned.rejection {
        Some(r) => Err(CliError::Rejected(r)),
        None => Ok(()),
    }
}

fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let loaded = Loaded::from_args(&args.config)?;
    let (raw, ckpt) = resolve_action(&args.source, &loaded, &args.target)?;
    let planned = plan_action(&loaded, &args.target, &raw);
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let meta = RunMetadata::new(
            "check",
            0,
            "reference",
            ckpt,
            loaded.hash(&format!("target={:?}\naction={raw:?}", args.target.to_state())),
        );
        write_json(&out.join("check.json"), &planned.report, &meta)?;
    }
    match planned.rejection {
        Some(r) => {
            println!("reject {r}");
            Err(CliError::Rejected(r))
        }
        None => {
            println!("accept");
            Ok(())
        }
    }
}

fn outcome_json(o: &EpisodeOutcome, reward: &RewardParams) -> Value {
    let (r, penalties) = episode_reward(o, reward);
    json!({
        "mode": o.mode.as_str(),
        "failure": o.failure.to_string(),
        "target_position": vec3(&o.target_position),
        "target_euler": vec3(&o.target_euler),
        "final_position": vec3(&o.final_pose.position),
        "final_euler": vec3(&o.final_pose.euler),
        "landing_error": vec3(&o.landing_error()),
        "landing_error_norm": o.landing_error().norm(),
        "commanded_liftoff": o.commanded_liftoff.as_ref().map(liftoff_json),
        "achieved_liftoff": o.achieved_liftoff.as_ref().map(liftoff_json),
        "touchdown_time": o.touchdown.map(|t| t.time),
        "bounce_count": o.bounce_count,
        "reward": r,
        "penalties": penalties.iter().map(|(k, v)| (k.name().to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut loaded = Loaded::from_args(&args.config)?;
    if let Some(m) = args.mode {
        loaded.experiment.episode.mode = m.into();
    }
    if let Some(s) = args.seed {
        loaded.experiment.episode.seed = s;
    }
    let (raw, ckpt) = resolve_action(&args.source, &loaded, &args.target)?;
    let ep = &loaded.experiment.episode;
    let mut trace = Vec::new();
    let outcome = run_episode_traced(&loaded.model, &args.target, &raw, ep, Some(&mut trace));
    std::fs::create_dir_all(&args.out)?;
    let meta = RunMetadata::new(
        "simulate",
        ep.seed,
        ep.mode.as_str(),
        ckpt,
        loaded.hash(&format!("target={:?}\naction={raw:?}", args.target.to_state())),
    );
    let path = args.out.join("trace.csv");
    write_trace_csv(std::io::BufWriter::new(std::fs::File::create(&path)?), &trace)?;
    meta.write_for(&path, trace.len())?;
    let report = outcome_json(&outcome, &loaded.reward);
    write_json(&args.out.join("outcome.json"), &report, &meta)?;
    println!(
        "{}: landing error {:.4} m, failure {}",
        ep.mode,
        outcome.landing_error().norm(),
        outcome.failure
    );
    match outcome.failure {
        pronk_core::simulator::Failure::FilterRejected(r) => Err(CliError::Rejected(r.to_string())),
        _ => Ok(()),
    }
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut loaded = Loaded::from_args(&args.config)?;
    let exp = &mut loaded.experiment;
    if let Some(s) = args.seed {
        exp.train.seed = s;
    }
    if let Some(n) = args.envs {
        exp.train.n_envs = n;
    }
    if let Some(n) = args.iterations {
        exp.train.iterations = n;
    }
    if let Some(m) = args.mode {
        exp.episode.mode = m.into();
    }
    exp.validate()?;
    let exp = loaded.experiment.clone();
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("robot.toml"), loaded.model.to_toml_string())?;
    std::fs::write(args.out.join("reward.toml"), loaded.reward.to_toml_string())?;
    std::fs::write(args.out.join("experiment.toml"), exp.to_toml_string())?;
    let init = match &args.init {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Some((Checkpoint::parse(&text)?, sha256_hex(&bytes)))
        }
        None => None,
    };
    let env = JumpEnv::new(loaded.model.clone(), loaded.reward.clone(), exp.episode.clone(), exp.task.clone());
    let result = train_to_dir_from(&env, &exp.policy, &exp.train, &args.out, init.as_ref().map(|(c, _)| c));
    let ckpt_path = args.out.join(pronk_learn::train::CHECKPOINT_FILE);
    let metrics_path = args.out.join(pronk_learn::train::METRICS_FILE);
    let ckpt_id = std::fs::read(&ckpt_path).ok().map(|b| sha256_hex(&b));
    let extra = init.as_ref().map(|(_, id)| format!("init = {id}")).unwrap_or_default();
    let meta = RunMetadata::new("train", exp.train.seed, exp.episode.mode.as_str(), ckpt_id, loaded.hash(&extra));
    if metrics_path.exists() {
        let rows = std::fs::read_to_string(&metrics_path)?.lines().count().saturating_sub(1);
        meta.write_for(&metrics_path, rows)?;
    }
    let summary = result?;
    println!(
        "trained {} iterations{} -> {}",
        summary.iterations,
        summary.resumed_from.map(|i| format!(" (resumed at {i})")).unwrap_or_default(),
        summary.checkpoint.display()
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let loaded = Loaded::from_args(&args.config)?;
    let (policy, ckpt_id) = load_policy(&args.checkpoint)?;
    check_policy_dims(&policy)?;
    let mut sweep = match &args.sweep {
        Some(p) => SweepSpec::from_file(p)?,
        None => SweepSpec::default(),
    };
    if let Some(s) = args.seed {
        sweep.seed = s;
    }
    let robust = RobustnessSpec {
        runs: args.runs,
        damping_max: args.damping_max,
        seed: sweep.seed,
        ..RobustnessSpec::default()
    };
    if !(robust.damping_max >= 0.0) || robust.runs == 0 {
        return Err(CliError::Usage("--damping-max must be non-negative and --runs positive".into()));
    }
    std::fs::create_dir_all(&args.out)?;
    let mut suites = args.suite.clone();
    suites.dedup();
    for suite in suites {
        let mode: SimMode = match (args.mode, suite) {
            (Some(m), _) => m.into(),
            (None, Suite::Robust) => SimMode::Tracked,
            (None, _) => SimMode::Ideal,
        };
        let episode = EpisodeConfig {
            mode,
            ..loaded.experiment.episode.clone()
        };
        let eval = Evaluator::new(&policy, loaded.model.clone(), episode);
        let extra = format!(
            "suite={}\nmode={mode}\n[sweep]\n{}\n[robust]\nruns={}\nmass_fraction={:?}\ndamping_max={:?}\n",
            suite.name(),
            sweep.to_toml_string(),
            robust.runs,
            robust.mass_fraction,
            robust.damping_max
        );
        let meta = RunMetadata::new(
            &format!("eval {}", suite.name()),
            sweep.seed,
            mode.as_str(),
            Some(ckpt_id.clone()),
            loaded.hash(&extra),
        );
        let dir = args.out.as_path();
        match suite {
            Suite::Region => {
                write_table(dir, "region", &feasible_region(&eval, &sweep), &meta)?;
            }
            Suite::Avt => {
                for d in [Direction::Forward, Direction::Backward] {
                    write_table(dir, &format!("avt_{d}"), &actual_vs_target(&eval, d, &sweep), &meta)?;
                }
            }
            Suite::Height => {
                let (up, down) = height_map(&eval, &sweep);
                write_table(dir, "height_up", &up, &meta)?;
                write_table(dir, "height_down", &down, &meta)?;
            }
            Suite::Yaw => {
                write_table(dir, "yaw", &yaw_sweep(&eval, &sweep), &meta)?;
            }
            Suite::Robust => {
                let rows = robustness_matrix(&eval, &robust);
                for r in &rows {
                    println!(
                        "{:<4} {:<3} e_x {:+.4}±{:.4} m  e_y {:+.4}±{:.4} m  e_psi {:+.2}±{:.2} deg  failures {}",
                        r.jump, r.test, r.e_x_mean, r.e_x_std, r.e_y_mean, r.e_y_std, r.e_psi_mean, r.e_psi_std, r.failures
                    );
                }
                write_table(dir, "robust", &rows, &meta)?;
            }
        }
        println!("{} written to {}", suite.name(), dir.display());
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_parsing() {
        let c = parse_target("0.4,-0.1,0").unwrap();
        assert_eq!(c.delta_c, Vector3::new(0.4, -0.1, 0.0));
        let c = parse_target("0,0,0,0,0,90").unwrap();
        assert!((c.delta_phi.z - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(parse_target("1,2").is_err());
        assert!(parse_target("1,2,x").is_err());
    }

    #[test]
    fn action_file_round_trip() {
        let a: [f64; ACTION_DIM] = std::array::from_fn(|i| i as f64 * 0.25 - 1.0);
        assert_eq!(parse_action(&action_to_toml(&a)).unwrap(), a);
        assert!(parse_action("t_th_b = 0.3").is_err());
        assert!(parse_action(&format!("{}extra = 1.0\n", action_to_toml(&a))).is_err());
    }
}
