//! Training: exploration rollouts under a global budget, supervision from
//! their outcomes, and policy updates, alternated loop by loop.

pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod supervised;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::adaptation::{run_adaptation, AdaptationConfig, BudgetMode, PriorSource, Uncertainty};
use crate::error::{IfrError, Result};
use crate::eval::metrics::MetricsReport;
use crate::nets::{NetConfig, RelationNets};
use crate::rng::{stream, tags};
use crate::scene::Scene;

pub use policy::{PolicyInput, PolicyNet};
pub use ppo::{ppo_update, ActorCritic, PpoConfig, PpoStats, Sample};
pub use rollout::{collect_rollouts, explorer_registry, Explorer, RolloutConfig, Rollouts};
pub use supervised::{train_supervised, SupervisedConfig, Supervision};

pub const NETS_FILE: &str = "nets.ckpt";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const METRICS_FILE: &str = "metrics.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    /// Interactions per collection loop, shared by all scenes.
    pub budget: usize,
    pub loops: usize,
    /// Explorer key: `policy` or `random`.
    pub explorer: String,
    pub allow_stop: bool,
    /// Share of the training scenes held out for validation.
    pub val_fraction: f64,
    /// Loops without a validation gain of at least `min_delta` before
    /// stopping.
    pub patience: usize,
    pub min_delta: f64,
    pub net: NetConfig,
    pub supervised: SupervisedConfig,
    pub ppo: PpoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: 1000,
            loops: 10,
            explorer: "policy".into(),
            allow_stop: true,
            val_fraction: 0.1,
            patience: 3,
            min_delta: 0.002,
            net: NetConfig::default(),
            supervised: SupervisedConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(IfrError::InvalidConfig("budget must be at least 1".into()));
        }
        if self.loops == 0 {
            return Err(IfrError::InvalidConfig("at least one loop is required".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(IfrError::InvalidConfig(format!("validation fraction {} is outside [0, 1)", self.val_fraction)));
        }
        explorer_registry().create(&self.explorer)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopMetrics {
    #[serde(rename = "loop")]
    pub index: usize,
    pub steps: usize,
    pub scenes_visited: usize,
    pub mean_reward: f64,
    pub supervised_loss: Option<f64>,
    pub policy: Option<PpoStats>,
    pub val_f1_frac10: f64,
    pub val_f1_frac20: f64,
}

impl LoopMetrics {
    pub fn score(&self) -> f64 {
        0.5 * (self.val_f1_frac10 + self.val_f1_frac20)
    }
}

pub struct TrainOutcome {
    /// Networks from the loop with the best validation score.
    pub nets: RelationNets,
    pub policy: PolicyNet,
    pub best_loop: usize,
    pub history: Vec<LoopMetrics>,
}

/// Deterministic split of `n` scene indices into (train, validation).
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, tags::SPLIT, 0));
    let k = if fraction > 0.0 && n >= 2 {
        ((fraction * n as f64).ceil() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let val = idx.split_off(n - k);
    idx.sort_unstable();
    let mut val = val;
    val.sort_unstable();
    (idx, val)
}

/// Micro-averaged F1 of uncertainty-driven adaptation at a fixed fraction.
pub fn adaptation_f1(scenes: &[&Scene], nets: &RelationNets, fraction: f64) -> Result<f64> {
    let cfg = AdaptationConfig::new(BudgetMode::Fraction(fraction));
    let mut report = MetricsReport::new(false);
    let mut rng = stream(0, tags::EVAL, 0);
    for s in scenes {
        let out = run_adaptation(s, nets, &cfg, &Uncertainty, PriorSource::Scene, &mut rng)?;
        report.push(&s.scene_id, &out.prediction, s.ground_truth.adjacency(), s.n(), out.interactions())?;
    }
    Ok(report.micro.f1)
}

pub fn loop_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("loop-{index:02}"))
}

fn save_pair(dir: &Path, nets: &RelationNets, policy: &PolicyNet) -> Result<()> {
    fs::create_dir_all(dir)?;
    nets.save(&dir.join(NETS_FILE))?;
    policy.save(&dir.join(POLICY_FILE))
}

/// Runs up to `cfg.loops` of collect → supervise → policy update. With an
/// output directory, every loop's checkpoints and metrics are written there
/// and the best loop's checkpoints are copied to its root.
pub fn alternate_train(cfg: &TrainConfig, scenes: &[Scene], out: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(IfrError::EmptyInput("no training scenes".into()));
    }
    let explorer = explorer_registry().create(&cfg.explorer)?;
    let (train_idx, val_idx) = validation_split(scenes.len(), cfg.val_fraction, cfg.seed);
    let train: Vec<&Scene> = train_idx.iter().map(|&i| &scenes[i]).collect();
    let val: Vec<&Scene> = val_idx.iter().map(|&i| &scenes[i]).collect();
    log::info!("training on {} scenes, validating on {}", train.len(), val.len());

    let mut nets = RelationNets::new(cfg.net.clone(), cfg.seed)?;
    let mut policy = PolicyNet::new(cfg.seed)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("train_config.json"), serde_json::to_string_pretty(cfg)?)?;
        let _ = fs::remove_file(dir.join(METRICS_FILE));
    }
    let rollout_cfg = RolloutConfig {
        budget: cfg.budget,
        discount: cfg.ppo.discount,
        allow_stop: cfg.allow_stop,
    };

    let mut history: Vec<LoopMetrics> = Vec::new();
    let mut best: Option<(usize, f64, RelationNets, PolicyNet)> = None;
    let mut stale = 0;
    for l in 0..cfg.loops {
        let mut roll_rng = stream(cfg.seed, tags::ROLLOUT, l as u64);
        let rollouts = collect_rollouts(&train, &policy, &nets, explorer.as_ref(), &rollout_cfg, &mut roll_rng)?;

        let data: Vec<Supervision<'_>> = rollouts
            .observations
            .iter()
            .map(|o| Supervision { scene: train[o.scene], order: o.order.clone() })
            .collect();
        let mut sup_rng = stream(cfg.seed, tags::SUPERVISED, l as u64);
        let losses = train_supervised(&mut nets, &data, &cfg.supervised, &mut sup_rng)?;

        let policy_stats = if explorer.on_policy() && !rollouts.samples.is_empty() {
            Some(ppo_update(&mut policy, &rollouts.samples, &cfg.ppo)?)
        } else {
            None
        };

        let (f10, f20) = if val.is_empty() {
            (0.0, 0.0)
        } else {
            (adaptation_f1(&val, &nets, 0.1)?, adaptation_f1(&val, &nets, 0.2)?)
        };
        let m = LoopMetrics {
            index: l,
            steps: rollouts.steps,
            scenes_visited: rollouts.traces.len(),
            mean_reward: rollouts.mean_reward(),
            supervised_loss: losses.last().copied(),
            policy: policy_stats,
            val_f1_frac10: f10,
            val_f1_frac20: f20,
        };
        log::info!(
            "loop {l}: {} steps over {} scenes, reward {:.3}, val F1 {:.3}/{:.3}",
            m.steps,
            m.scenes_visited,
            m.mean_reward,
            f10,
            f20
        );
        if let Some(dir) = out {
            save_pair(&loop_dir(dir, l), &nets, &policy)?;
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join(METRICS_FILE))?;
            writeln!(f, "{}", serde_json::to_string(&m)?)?;
        }
        let score = m.score();
        history.push(m);

        let improved = match &best {
            None => true,
            Some((_, b, _, _)) => score >= b + cfg.min_delta,
        };
        if improved || val.is_empty() {
            best = Some((l, score, nets.clone(), policy.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log::info!("validation F1 has not improved for {stale} loops; stopping");
                break;
            }
        }
    }
    let (best_loop, _, nets, policy) = best.expect("at least one loop ran");
    if let Some(dir) = out {
        save_pair(dir, &nets, &policy)?;
    }
    Ok(TrainOutcome {
        nets,
        policy,
        best_loop,
        history,
    })
}

/// Loads the networks and policy written by [`alternate_train`].
pub fn load_checkpoint(dir: &Path) -> Result<(RelationNets, PolicyNet)> {
    Ok((RelationNets::open(&dir.join(NETS_FILE))?, PolicyNet::load(&dir.join(POLICY_FILE))?))
}
