//! Baselines, ablations and the full pipeline behind one interface.

use rand::RngCore;

use crate::adaptation::{run_adaptation, AdaptationConfig, BudgetMode, PriorSource, RandomPick, Selector, Uncertainty};
use crate::belief::BeliefMatrix;
use crate::error::{IfrError, Result};
use crate::nets::RelationNets;
use crate::registry::Registry;
use crate::scene::Scene;

/// Threshold for the prior-only baseline.
pub const PRIOR_ONLY_THRESHOLD: f64 = 0.5;

/// Result of one method on one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneRun {
    pub scene_id: String,
    pub belief: BeliefMatrix,
    pub prediction: Vec<bool>,
    pub order: Vec<usize>,
    /// Prediction after each of `0..=T` interactions.
    pub curve: Vec<Vec<bool>>,
}

pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;
    fn needs_checkpoint(&self) -> bool;
    /// Predictions consist of observed rows only.
    fn observation_only(&self) -> bool {
        false
    }
    fn run(&self, scene: &Scene, nets: Option<&RelationNets>, config: &AdaptationConfig, rng: &mut dyn RngCore) -> Result<SceneRun>;
}

fn require<'a>(nets: Option<&'a RelationNets>, method: &str) -> Result<&'a RelationNets> {
    nets.ok_or_else(|| IfrError::MissingCheckpoint(format!("method `{method}` needs a trained checkpoint")))
}

/// Predicts exactly the union of the observed rows.
fn observe_rows(scene: &Scene, order: Vec<usize>) -> SceneRun {
    let n = scene.n();
    let mut belief = BeliefMatrix::uniform(n, 0.0);
    let mut curve = vec![belief.threshold(0.5)];
    for &i in &order {
        belief.clamp_row(i, scene.ground_truth.row(i));
        curve.push(belief.threshold(0.5));
    }
    SceneRun {
        scene_id: scene.scene_id.clone(),
        prediction: belief.threshold(0.5),
        belief,
        order,
        curve,
    }
}

/// Uniformly random objects up to the budget.
pub struct RandomBaseline;

impl Method for RandomBaseline {
    fn name(&self) -> &'static str {
        "random"
    }

    fn needs_checkpoint(&self) -> bool {
        false
    }

    fn observation_only(&self) -> bool {
        true
    }

    fn run(&self, scene: &Scene, _nets: Option<&RelationNets>, config: &AdaptationConfig, rng: &mut dyn RngCore) -> Result<SceneRun> {
        if config.mode == BudgetMode::Certainty {
            return Err(IfrError::InvalidConfig("the random baseline has no certainty signal; use a fraction budget".into()));
        }
        let mut interacted = vec![false; scene.n()];
        let mut order = Vec::new();
        let empty = BeliefMatrix::uniform(scene.n(), 0.5);
        for _ in 0..config.mode.interactions(scene.n()) {
            let i = RandomPick.select(&empty, &interacted, rng)?;
            interacted[i] = true;
            order.push(i);
        }
        Ok(observe_rows(scene, order))
    }
}

/// Triggers every object.
pub struct Exhaustive;

impl Method for Exhaustive {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn needs_checkpoint(&self) -> bool {
        false
    }

    fn observation_only(&self) -> bool {
        true
    }

    fn run(&self, scene: &Scene, _nets: Option<&RelationNets>, _config: &AdaptationConfig, _rng: &mut dyn RngCore) -> Result<SceneRun> {
        Ok(observe_rows(scene, (0..scene.n()).collect()))
    }
}

/// Scene prior at 0.5, no interactions.
pub struct PriorOnly;

impl Method for PriorOnly {
    fn name(&self) -> &'static str {
        "prior_only"
    }

    fn needs_checkpoint(&self) -> bool {
        true
    }

    fn run(&self, scene: &Scene, nets: Option<&RelationNets>, _config: &AdaptationConfig, _rng: &mut dyn RngCore) -> Result<SceneRun> {
        let nets = require(nets, self.name())?;
        let belief = nets.sr_prior(&nets.context(scene)?)?;
        let prediction = belief.threshold(PRIOR_ONLY_THRESHOLD);
        Ok(SceneRun {
            scene_id: scene.scene_id.clone(),
            curve: vec![prediction.clone()],
            prediction,
            belief,
            order: Vec::new(),
        })
    }
}

/// Interactive adaptation with a given selector and prior.
pub struct Adaptive {
    pub name: &'static str,
    pub selector: Box<dyn Selector>,
    pub prior: PriorSource,
}

impl Method for Adaptive {
    fn name(&self) -> &'static str {
        self.name
    }

    fn needs_checkpoint(&self) -> bool {
        true
    }

    fn run(&self, scene: &Scene, nets: Option<&RelationNets>, config: &AdaptationConfig, rng: &mut dyn RngCore) -> Result<SceneRun> {
        let nets = require(nets, self.name)?;
        let out = run_adaptation(scene, nets, config, self.selector.as_ref(), self.prior, rng)?;
        Ok(SceneRun {
            scene_id: scene.scene_id.clone(),
            belief: out.belief,
            prediction: out.prediction,
            order: out.order,
            curve: out.curve,
        })
    }
}

fn adaptive(name: &'static str, selector: Box<dyn Selector>, prior: PriorSource) -> Box<dyn Method> {
    Box::new(Adaptive { name, selector, prior })
}

/// `abla_random_explore` runs the full pipeline; it differs from
/// `ours_final` only in the checkpoint, which must come from training with
/// the random explorer.
pub fn method_registry() -> Registry<dyn Method> {
    let mut r: Registry<dyn Method> = Registry::new("method");
    r.register("random", |_| Ok(Box::new(RandomBaseline)));
    r.register("exhaustive", |_| Ok(Box::new(Exhaustive)));
    r.register("prior_only", |_| Ok(Box::new(PriorOnly)));
    r.register("ours_final", |_| Ok(adaptive("ours_final", Box::new(Uncertainty), PriorSource::Scene)));
    r.register("abla_random_explore", |_| Ok(adaptive("abla_random_explore", Box::new(Uncertainty), PriorSource::Scene)));
    r.register("abla_random_adapt", |_| Ok(adaptive("abla_random_adapt", Box::new(RandomPick), PriorSource::Scene)));
    r.register("abla_no_scene_prior", |_| Ok(adaptive("abla_no_scene_prior", Box::new(Uncertainty), PriorSource::BinaryOnly)));
    r.register("abla_no_binary_prior", |_| Ok(adaptive("abla_no_binary_prior", Box::new(Uncertainty), PriorSource::DenseEdges)));
    r
}
