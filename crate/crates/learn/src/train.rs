//! Training loop, metrics log and on-disk runs with resume.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pronk_core::reward::{PenaltyKind, Penalties};

use crate::checkpoint::Checkpoint;
use crate::env::Env;
use crate::policy::{ActorCritic, PolicyConfig};
use crate::ppo::{ppo_update, Adam, TrainConfig, UpdateMetrics};
use crate::rollout::{collect_rollouts, derive_seed};
use crate::TrainError;

const INIT_STREAM: u64 = u64::MAX;
const SHUFFLE_STREAM: u64 = u64::MAX - 1;

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const METRICS_FILE: &str = "metrics.csv";

/// Per-iteration training statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_total_penalty: f64,
    pub penalties: Penalties,
    pub approx_kl: f64,
    pub lr: f64,
    pub mean_landing_error: f64,
    pub failure_rate: f64,
    pub update: UpdateMetrics,
}

pub fn metrics_header() -> String {
    let mut cols = vec!["iteration", "mean_reward", "mean_total_penalty"];
    cols.extend(PenaltyKind::ALL.iter().map(|k| k.name()));
    cols.extend(["approx_kl", "lr"]);
    cols.join(",")
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        let mut fields = vec![
            self.iteration.to_string(),
            format!("{:?}", self.mean_reward),
            format!("{:?}", self.mean_total_penalty),
        ];
        fields.extend(self.penalties.values().iter().map(|v| format!("{v:?}")));
        fields.push(format!("{:?}", self.approx_kl));
        fields.push(format!("{:?}", self.lr));
        fields.join(",")
    }
}

/// Owns the policy and optimiser state of one training run.
pub struct Trainer<'a, E: Env> {
    env: &'a E,
    cfg: TrainConfig,
    policy: ActorCritic,
    adam: Adam,
    lr: f64,
    iteration: usize,
}

impl<'a, E: Env> Trainer<'a, E> {
    pub fn new(env: &'a E, policy_cfg: &PolicyConfig, cfg: TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, INIT_STREAM, 0));
        let policy_cfg = PolicyConfig {
            state_dim: env.state_dim(),
            action_dim: env.action_dim(),
            ..policy_cfg.clone()
        };
        let policy = ActorCritic::new(&policy_cfg, &mut rng);
        Self {
            env,
            adam: Adam::new(policy.num_params()),
            lr: cfg.lr,
            cfg,
            policy,
            iteration: 0,
        }
    }

    pub fn from_checkpoint(env: &'a E, cfg: TrainConfig, ckpt: &Checkpoint) -> Result<Self, TrainError> {
        let policy = ckpt.policy()?;
        if policy.state_dim() != env.state_dim() || policy.action_dim() != env.action_dim() {
            return Err(TrainError::Checkpoint("policy dimensions do not match the environment".into()));
        }
        let adam = ckpt.adam(policy.num_params())?;
        Ok(Self {
            env,
            adam,
            lr: ckpt.scalar("lr")?,
            iteration: ckpt.scalar("iteration")? as usize,
            cfg,
            policy,
        })
    }

    /// Fresh run (iteration 0, new optimizer state, configured learning
    /// rate) starting from the policy stored in `ckpt`.
    pub fn warm_start(env: &'a E, cfg: TrainConfig, ckpt: &Checkpoint) -> Result<Self, TrainError> {
        let policy = ckpt.policy()?;
        if policy.state_dim() != env.state_dim() || policy.action_dim() != env.action_dim() {
            return Err(TrainError::Checkpoint("policy dimensions do not match the environment".into()));
        }
        Ok(Self {
            env,
            adam: Adam::new(policy.num_params()),
            lr: cfg.lr,
            iteration: 0,
            cfg,
            policy,
        })
    }

    pub fn policy(&self) -> &ActorCritic {
        &self.policy
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::default();
        c.put_policy(&self.policy);
        c.put_adam(&self.adam);
        c.insert_scalar("iteration", self.iteration as f64);
        c.insert_scalar("lr", self.lr);
        c
    }

    /// Collects one batch and updates the policy.
    pub fn step(&mut self) -> Result<MetricsRow, TrainError> {
        let it = self.iteration as u64;
        let batch = collect_rollouts(&self.policy, self.env, self.cfg.n_envs, self.cfg.seed, it);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, SHUFFLE_STREAM, it));
        let update = ppo_update(&mut self.policy, &mut self.adam, &batch, &self.cfg, &mut self.lr, &mut rng)?;
        let n = batch.len() as f64;
        let mut penalties = Penalties::default();
        let (mut reward, mut total, mut err, mut n_err, mut fails) = (0.0, 0.0, 0.0, 0usize, 0usize);
        for s in &batch.steps {
            reward += s.reward;
            total += s.total_penalty;
            if let Some(p) = &s.penalties {
                for (k, v) in p.iter() {
                    penalties.add(k, v / n);
                }
            }
            if let Some(e) = s.landing_error {
                err += e;
                n_err += 1;
            }
            fails += s.failed as usize;
        }
        let row = MetricsRow {
            iteration: self.iteration,
            mean_reward: reward / n,
            mean_total_penalty: total / n,
            penalties,
            approx_kl: update.approx_kl,
            lr: update.lr,
            mean_landing_error: if n_err > 0 { err / n_err as f64 } else { f64::NAN },
            failure_rate: fails as f64 / n,
            update,
        };
        self.iteration += 1;
        Ok(row)
    }

    /// Trains until `cfg.iterations` or until `callback` returns false.
    pub fn run(&mut self, mut callback: impl FnMut(&Self, &MetricsRow) -> bool) -> Result<Vec<MetricsRow>, TrainError> {
        let mut rows = Vec::new();
        while self.iteration < self.cfg.iterations {
            let row = self.step()?;
            rows.push(row);
            if !callback(self, &row) {
                break;
            }
        }
        Ok(rows)
    }
}

/// Summary of an on-disk training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub iterations: usize,
    pub resumed_from: Option<usize>,
}

/// Trains into `dir`, writing `metrics.csv` and `checkpoint.txt`. An existing
/// checkpoint in `dir` is resumed; metrics rows past it are discarded.
/// On divergence the last good checkpoint is kept and the error returned.
pub fn train_to_dir<E: Env>(
    env: &E,
    policy_cfg: &PolicyConfig,
    cfg: &TrainConfig,
    dir: &Path,
) -> Result<RunSummary, TrainError> {
    train_to_dir_from(env, policy_cfg, cfg, dir, None)
}

/// [`train_to_dir`] where a new run starts from the policy in `init` instead
/// of a random one (see [`Trainer::warm_start`]). Ignored when resuming.
pub fn train_to_dir_from<E: Env>(
    env: &E,
    policy_cfg: &PolicyConfig,
    cfg: &TrainConfig,
    dir: &Path,
    init: Option<&Checkpoint>,
) -> Result<RunSummary, TrainError> {
    std::fs::create_dir_all(dir)?;
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    let metrics_path = dir.join(METRICS_FILE);
    let (mut trainer, resumed_from, mut lines) = if ckpt_path.exists() {
        let trainer = Trainer::from_checkpoint(env, cfg.clone(), &Checkpoint::load(&ckpt_path)?)?;
        let done = trainer.iteration();
        let kept: Vec<String> = std::fs::read_to_string(&metrics_path)
            .unwrap_or_default()
            .lines()
            .skip(1)
            .take(done)
            .map(str::to_string)
            .collect();
        if kept.len() != done {
            return Err(TrainError::Checkpoint(format!(
                "metrics log has {} rows but the checkpoint is at iteration {done}",
                kept.len()
            )));
        }
        (trainer, Some(done), kept)
    } else if let Some(init) = init {
        (Trainer::warm_start(env, cfg.clone(), init)?, None, Vec::new())
    } else {
        (Trainer::new(env, policy_cfg, cfg.clone()), None, Vec::new())
    };

    let write_metrics = |lines: &[String]| -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&metrics_path)?);
        writeln!(f, "{}", metrics_header())?;
        for l in lines {
            writeln!(f, "{l}")?;
        }
        f.flush()
    };

    while trainer.iteration() < cfg.iterations {
        match trainer.step() {
            Ok(row) => lines.push(row.csv_line()),
            Err(e) => {
                write_metrics(&lines)?;
                trainer.checkpoint().save(&ckpt_path)?;
                return Err(e);
            }
        }
        let it = trainer.iteration();
        if cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it < cfg.iterations {
            write_metrics(&lines)?;
            trainer.checkpoint().save(&ckpt_path)?;
        }
    }
    write_metrics(&lines)?;
    trainer.checkpoint().save(&ckpt_path)?;
    Ok(RunSummary {
        checkpoint: ckpt_path,
        metrics: metrics_path,
        iterations: trainer.iteration(),
        resumed_from,
    })
}
