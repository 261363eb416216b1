//! Test-time interactive adaptation: trigger the most uncertain object,
//! update the posterior, and stop when confident or out of budget.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::belief::BeliefMatrix;
use crate::env::{Environment, LogRecord, Step};
use crate::error::{IfrError, Result};
use crate::nets::edges::{Dense, EdgeInit};
use crate::nets::{RelationNets, SceneContext};
use crate::registry::Registry;
use crate::scene::Scene;

pub const STOP_THRESHOLD: f64 = 0.05;
pub const DECISION_THRESHOLD: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "fraction", rename_all = "lowercase")]
pub enum BudgetMode {
    /// At most `⌈fraction·n⌉` interactions per scene.
    Fraction(f64),
    /// Interact until every entry is certain, at most `n` times.
    Certainty,
}

impl BudgetMode {
    pub fn interactions(&self, n: usize) -> usize {
        match *self {
            BudgetMode::Fraction(f) => ((f * n as f64).ceil() as usize).min(n),
            BudgetMode::Certainty => n,
        }
    }
}

impl fmt::Display for BudgetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BudgetMode::Fraction(x) if x == 0.1 => write!(f, "frac10"),
            BudgetMode::Fraction(x) if x == 0.2 => write!(f, "frac20"),
            BudgetMode::Fraction(x) => write!(f, "frac:{x}"),
            BudgetMode::Certainty => write!(f, "certainty"),
        }
    }
}

/// Accepts `frac10`, `frac20`, `certainty` and `frac:<x>` with `x ∈ [0, 1]`.
impl FromStr for BudgetMode {
    type Err = IfrError;

    fn from_str(s: &str) -> Result<Self> {
        let mode = match s {
            "frac10" => BudgetMode::Fraction(0.1),
            "frac20" => BudgetMode::Fraction(0.2),
            "certainty" => BudgetMode::Certainty,
            _ => {
                let x = s
                    .strip_prefix("frac:")
                    .and_then(|x| x.parse::<f64>().ok())
                    .ok_or_else(|| IfrError::Unknown { kind: "budget mode", name: s.to_string() })?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(IfrError::InvalidConfig(format!("budget fraction {x} is outside [0, 1]")));
                }
                BudgetMode::Fraction(x)
            }
        };
        Ok(mode)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub mode: BudgetMode,
    pub stop_threshold: f64,
    pub decision_threshold: f64,
}

impl AdaptationConfig {
    pub fn new(mode: BudgetMode) -> Self {
        Self {
            mode,
            stop_threshold: STOP_THRESHOLD,
            decision_threshold: DECISION_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stop_threshold > 0.0 && self.stop_threshold < 0.5) {
            return Err(IfrError::InvalidConfig(format!("stop threshold {} is outside (0, 0.5)", self.stop_threshold)));
        }
        if !(self.decision_threshold > 0.5 && self.decision_threshold < 1.0) {
            return Err(IfrError::InvalidConfig(format!(
                "decision threshold {} is outside (0.5, 1)",
                self.decision_threshold
            )));
        }
        if let BudgetMode::Fraction(f) = self.mode {
            if !(0.0..=1.0).contains(&f) {
                return Err(IfrError::InvalidConfig(format!("budget fraction {f} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn row_uncertainty(belief: &BeliefMatrix, i: usize) -> f64 {
    belief.row(i).iter().map(|&r| BeliefMatrix::uncertainty(r)).fold(0.0, f64::max)
}

/// The non-interacted object whose row holds the most uncertain entry;
/// ties go to the lowest index.
pub fn select_next(belief: &BeliefMatrix, interacted: &[bool]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in (0..belief.n()).filter(|&i| !interacted[i]) {
        let u = row_uncertainty(belief, i);
        if best.is_none_or(|(_, b)| u > b) {
            best = Some((i, u));
        }
    }
    best.map(|(i, _)| i).ok_or(IfrError::Exhausted)
}

/// True when every entry is closer than `threshold` to 0 or 1.
pub fn should_stop(belief: &BeliefMatrix, threshold: f64) -> bool {
    belief.values().iter().all(|&r| BeliefMatrix::uncertainty(r) < threshold)
}

pub trait Selector: Send + Sync {
    fn name(&self) -> &'static str;
    fn select(&self, belief: &BeliefMatrix, interacted: &[bool], rng: &mut dyn RngCore) -> Result<usize>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Uncertainty;

impl Selector for Uncertainty {
    fn name(&self) -> &'static str {
        "uncertainty"
    }

    fn select(&self, belief: &BeliefMatrix, interacted: &[bool], _rng: &mut dyn RngCore) -> Result<usize> {
        select_next(belief, interacted)
    }
}

/// Uniform over non-interacted objects.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPick;

impl Selector for RandomPick {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(&self, _belief: &BeliefMatrix, interacted: &[bool], rng: &mut dyn RngCore) -> Result<usize> {
        let open: Vec<usize> = (0..interacted.len()).filter(|&i| !interacted[i]).collect();
        if open.is_empty() {
            return Err(IfrError::Exhausted);
        }
        Ok(open[rng.random_range(0..open.len())])
    }
}

pub fn selector_registry() -> Registry<dyn Selector> {
    let mut r: Registry<dyn Selector> = Registry::new("selector");
    r.register("uncertainty", |_| Ok(Box::new(Uncertainty)));
    r.register("random", |_| Ok(Box::new(RandomPick)));
    r
}

/// Where the initial belief comes from and which edges the scene network uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSource {
    /// The scene prior with the configured edge initializer.
    Scene,
    /// The binary prior, unchanged by the scene network.
    BinaryOnly,
    /// The scene network with every input edge at weight 1.
    DenseEdges,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationOutcome {
    pub belief: BeliefMatrix,
    /// Final adjacency, row-major `n×n`.
    pub prediction: Vec<bool>,
    /// Triggered objects in order.
    pub order: Vec<usize>,
    pub log: Vec<LogRecord>,
    /// Thresholded prediction after each of `0..=T` interactions.
    pub curve: Vec<Vec<bool>>,
}

impl AdaptationOutcome {
    pub fn interactions(&self) -> usize {
        self.order.len()
    }
}

pub fn initial_belief(nets: &RelationNets, ctx: &SceneContext, prior: PriorSource) -> Result<BeliefMatrix> {
    match prior {
        PriorSource::Scene => nets.sr_prior(ctx),
        PriorSource::BinaryOnly => Ok(ctx.prior_b.clone()),
        PriorSource::DenseEdges => nets.scene_scores_with(ctx, &ctx.prior_b, &Dense),
    }
}

pub fn run_adaptation(
    scene: &Scene,
    nets: &RelationNets,
    config: &AdaptationConfig,
    selector: &dyn Selector,
    prior: PriorSource,
    rng: &mut dyn RngCore,
) -> Result<AdaptationOutcome> {
    config.validate()?;
    let ctx = nets.context(scene)?;
    let init: &dyn EdgeInit = match prior {
        PriorSource::DenseEdges => &Dense,
        _ => nets.edge_init(),
    };
    let n = scene.n();
    let budget = config.mode.interactions(n);
    let mut env = Environment::reset(scene, initial_belief(nets, &ctx, prior)?, budget)?;
    let tau = config.decision_threshold;
    let mut curve = vec![env.belief().threshold(tau)];
    let mut order = Vec::new();
    while env.remaining() > 0 && !env.all_interacted() {
        if config.mode == BudgetMode::Certainty && should_stop(env.belief(), config.stop_threshold) {
            break;
        }
        let i = selector.select(env.belief(), env.interacted(), rng)?;
        if let Step::Terminal = env.step(i)? {
            break;
        }
        order.push(i);
        let post = nets.posterior_step_with(&ctx, env.belief(), env.history(), init)?;
        env.update_belief(post)?;
        curve.push(env.belief().threshold(tau));
    }
    Ok(AdaptationOutcome {
        belief: env.belief().clone(),
        prediction: env.belief().threshold(tau),
        order,
        log: env.log().to_vec(),
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_the_most_uncertain_row() {
        let b = BeliefMatrix::new(2, vec![0.9, 0.1, 0.5, 0.0]).unwrap();
        assert_eq!(select_next(&b, &[false, false]).unwrap(), 1);
        assert!(matches!(select_next(&b, &[true, true]), Err(IfrError::Exhausted)));
    }

    #[test]
    fn stop_is_strict() {
        assert!(should_stop(&BeliefMatrix::new(1, vec![0.049]).unwrap(), 0.05));
        assert!(!should_stop(&BeliefMatrix::new(1, vec![0.05]).unwrap(), 0.05));
        assert!(!should_stop(&BeliefMatrix::uniform(3, 0.5), 0.05));
    }

    #[test]
    fn budget_rounds_up() {
        assert_eq!(BudgetMode::Fraction(0.1).interactions(3), 1);
        assert_eq!(BudgetMode::Fraction(0.2).interactions(15), 3);
        assert_eq!(BudgetMode::Fraction(1.0).interactions(7), 7);
        assert_eq!(BudgetMode::Fraction(0.0).interactions(7), 0);
    }

    #[test]
    fn mode_keys_round_trip() {
        for k in ["frac10", "frac20", "certainty", "frac:0.5"] {
            assert_eq!(k.parse::<BudgetMode>().unwrap().to_string(), k);
        }
        assert!("frac:2".parse::<BudgetMode>().is_err());
        assert!("all".parse::<BudgetMode>().is_err());
    }
}
