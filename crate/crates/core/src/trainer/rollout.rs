//! Rollout collection under a global interaction budget.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::belief::BeliefMatrix;
use crate::env::{Environment, Step};
use crate::error::{IfrError, Result};
use crate::nets::RelationNets;
use crate::registry::Registry;
use crate::scene::Scene;

use super::policy::{PolicyInput, PolicyNet};
use super::ppo::{discounted_returns, Sample};

/// Hex SHA-256 of the belief values in little-endian byte order.
pub fn belief_hash(b: &BeliefMatrix) -> String {
    let mut h = Sha256::new();
    for v in b.values() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|x| format!("{x:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub belief_hash: String,
    /// Object index, or `n` for stop.
    pub action: usize,
    pub logp: f64,
    pub reward: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub scene_id: String,
    pub n: usize,
    pub steps: Vec<TraceStep>,
    /// Ended because the global budget ran out.
    pub truncated: bool,
}

/// Triggers of one scene in interaction order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneObservations {
    pub scene: usize,
    pub order: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreState {
    pub scene_steps: usize,
    /// Per-scene share of the global budget, rounded up.
    pub quota: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: usize,
    pub logp: f64,
    pub value: f64,
}

pub trait Explorer: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether the decisions come from the policy and can train it.
    fn on_policy(&self) -> bool;
    fn choose(&self, policy: &PolicyNet, input: &PolicyInput, state: ExploreState, rng: &mut dyn RngCore) -> Result<Decision>;
}

fn sample_index(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = k;
        acc += p;
        if u < acc {
            return k;
        }
    }
    last
}

/// Samples from the policy distribution.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolicySampling;

impl Explorer for PolicySampling {
    fn name(&self) -> &'static str {
        "policy"
    }

    fn on_policy(&self) -> bool {
        true
    }

    fn choose(&self, policy: &PolicyNet, input: &PolicyInput, _state: ExploreState, rng: &mut dyn RngCore) -> Result<Decision> {
        let (logp, value) = policy.log_probabilities(input)?;
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let action = sample_index(&probs, rng);
        Ok(Decision {
            action,
            logp: logp[action],
            value,
        })
    }
}

/// Uniform over non-interacted objects until the scene's quota is used.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomExplore;

impl Explorer for RandomExplore {
    fn name(&self) -> &'static str {
        "random"
    }

    fn on_policy(&self) -> bool {
        false
    }

    fn choose(&self, _policy: &PolicyNet, input: &PolicyInput, state: ExploreState, rng: &mut dyn RngCore) -> Result<Decision> {
        let open: Vec<usize> = (0..input.n()).filter(|&i| input.available[i]).collect();
        let action = if state.scene_steps >= state.quota || open.is_empty() {
            input.stop_action()
        } else {
            open[rng.random_range(0..open.len())]
        };
        Ok(Decision {
            action,
            logp: 0.0,
            value: 0.0,
        })
    }
}

pub fn explorer_registry() -> Registry<dyn Explorer> {
    let mut r: Registry<dyn Explorer> = Registry::new("explorer");
    r.register("policy", |_| Ok(Box::new(PolicySampling)));
    r.register("random", |_| Ok(Box::new(RandomExplore)));
    r
}

#[derive(Clone, Debug)]
pub struct Rollouts {
    pub traces: Vec<EpisodeTrace>,
    pub observations: Vec<SceneObservations>,
    pub samples: Vec<Sample<PolicyInput>>,
    pub steps: usize,
}

impl Rollouts {
    pub fn mean_reward(&self) -> f64 {
        let r: Vec<f64> = self
            .traces
            .iter()
            .flat_map(|t| t.steps.iter().filter(|s| s.action < t.n).map(|s| s.reward))
            .collect();
        if r.is_empty() {
            0.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutConfig {
    pub budget: usize,
    pub discount: f64,
    pub allow_stop: bool,
}

/// Visits the scenes in a shuffled order. Each interaction spends one unit
/// of the global budget; a scene ends on stop or once every object has been
/// triggered.
pub fn collect_rollouts(
    scenes: &[&Scene],
    policy: &PolicyNet,
    nets: &RelationNets,
    explorer: &dyn Explorer,
    cfg: &RolloutConfig,
    rng: &mut dyn RngCore,
) -> Result<Rollouts> {
    if scenes.is_empty() {
        return Err(IfrError::EmptyInput("no scenes to explore".into()));
    }
    if cfg.budget == 0 {
        return Err(IfrError::InvalidConfig("interaction budget must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    order.shuffle(rng);
    let quota = cfg.budget.div_ceil(scenes.len());
    let mut out = Rollouts {
        traces: Vec::new(),
        observations: Vec::new(),
        samples: Vec::new(),
        steps: 0,
    };
    for &k in &order {
        if out.steps == cfg.budget {
            break;
        }
        let scene = scenes[k];
        let n = scene.n();
        let ctx = nets.context(scene)?;
        let mut env = Environment::reset(scene, nets.sr_prior(&ctx)?, n)?;
        let mut trace = EpisodeTrace {
            scene_id: scene.scene_id.clone(),
            n,
            steps: Vec::new(),
            truncated: false,
        };
        let mut inputs = Vec::new();
        loop {
            let input = PolicyInput::new(nets, &ctx, env.belief(), env.interacted(), cfg.allow_stop)?;
            let state = ExploreState {
                scene_steps: env.t(),
                quota,
            };
            let d = explorer.choose(policy, &input, state, rng)?;
            let hash = belief_hash(env.belief());
            if d.action == n {
                trace.steps.push(TraceStep { belief_hash: hash, action: n, logp: d.logp, reward: 0.0, value: d.value });
                inputs.push(input);
                break;
            }
            if !input.available[d.action] {
                return Err(IfrError::InvariantViolation(format!("explorer chose unavailable object {}", d.action)));
            }
            let reward = match env.step(d.action)? {
                Step::Transition { reward, .. } => reward,
                Step::Terminal => break,
            };
            trace.steps.push(TraceStep { belief_hash: hash, action: d.action, logp: d.logp, reward, value: d.value });
            inputs.push(input);
            out.steps += 1;
            let post = nets.posterior_step(&ctx, env.belief(), env.history())?;
            env.update_belief(post)?;
            if out.steps == cfg.budget {
                trace.truncated = true;
                break;
            }
        }
        if explorer.on_policy() {
            let rewards: Vec<f64> = trace.steps.iter().map(|s| s.reward).collect();
            let returns = discounted_returns(&rewards, cfg.discount);
            for ((s, g), input) in trace.steps.iter().zip(returns).zip(inputs) {
                out.samples.push(Sample {
                    obs: input,
                    action: s.action,
                    logp: s.logp,
                    ret: g,
                    advantage: g - s.value,
                });
            }
        }
        let triggered: Vec<usize> = env.history().iter().map(|o| o.trigger).collect();
        if !triggered.is_empty() {
            out.observations.push(SceneObservations { scene: k, order: triggered });
        }
        out.traces.push(trace);
    }
    if out.steps == 0 {
        log::warn!("rollouts made no interactions; the supervision set is empty");
    }
    Ok(out)
}
