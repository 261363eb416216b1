//! Exploration policy: a graph backbone of its own with a per-object action
//! head, a stop head and a value head.

use std::path::Path;

use ifr_tensor::{ParamStore, Tape, Tensor, Var};

use crate::belief::BeliefMatrix;
use crate::error::{IfrError, Result};
use crate::nets::edges::normalized_adjacency;
use crate::nets::layers::*;
use crate::nets::{RelationNets, SceneContext};
use crate::rng::{stream, tags};

use super::ppo::ActorCritic;

/// Logit offset for unavailable actions.
const MASKED: f64 = -1e9;

/// Everything the policy sees at one step.
#[derive(Clone, Debug)]
pub struct PolicyInput {
    pub node_input: Tensor,
    pub adj: Tensor,
    /// `n + 1` flags; the last one is the stop action.
    pub available: Vec<bool>,
}

impl PolicyInput {
    /// Same node features and edge construction as the scene network.
    /// Interacted objects are unavailable; stop is available when
    /// `allow_stop` is set or nothing else is left.
    pub fn new(nets: &RelationNets, ctx: &SceneContext, belief: &BeliefMatrix, interacted: &[bool], allow_stop: bool) -> Result<Self> {
        let w = nets.edge_init().build(belief.values(), &ctx.centers)?;
        let mut available: Vec<bool> = interacted.iter().map(|&b| !b).collect();
        let none_left = !available.iter().any(|&a| a);
        available.push(allow_stop || none_left);
        Ok(Self {
            node_input: ctx.node_input.clone(),
            adj: normalized_adjacency(&w)?,
            available,
        })
    }

    pub fn n(&self) -> usize {
        self.available.len() - 1
    }

    pub fn stop_action(&self) -> usize {
        self.n()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    pub store: ParamStore,
}

impl PolicyNet {
    pub fn new(seed: u64) -> Result<Self> {
        let mut rng = stream(seed, tags::INIT_POLICY, 0);
        let mut s = ParamStore::new();
        init_scene_backbone(&mut s, &mut rng, "pol")?;
        insert_pair_head(&mut s, &mut rng, "pol.act", EMBED_DIM, PAIR_HEAD_HIDDEN)?;
        insert_pair_head(&mut s, &mut rng, "pol.stop", EMBED_DIM, PAIR_HEAD_HIDDEN)?;
        insert_linear(&mut s, &mut rng, "pol.value", EMBED_DIM, 1, true)?;
        Ok(Self { store: s })
    }

    /// Log-probabilities `[1, n+1]` and the value estimate `[1, 1]`.
    pub fn forward(tape: &mut Tape, store: &ParamStore, input: &PolicyInput) -> Result<(Var, Var)> {
        let n = input.n();
        let x = tape.constant(input.node_input.clone());
        let a = tape.constant(input.adj.clone());
        let e = scene_backbone(tape, store, "pol", x, a)?;
        let global = tape.mean_axis(e, 0)?;
        let ones = tape.constant(Tensor::full(&[n, 1], 1.0));
        let tiled = tape.matmul(ones, global)?;
        let act = rowwise_logits(tape, store, "pol.act", e, tiled)?;
        let act = tape.transpose(act)?;
        let stop = rowwise_logits(tape, store, "pol.stop", global, global)?;
        let logits = tape.concat_cols(&[act, stop])?;
        let mask = Tensor::new(vec![1, n + 1], input.available.iter().map(|&a| if a { 0.0 } else { MASKED }).collect())?;
        let mask = tape.constant(mask);
        let logits = tape.add(logits, mask)?;
        let logp = tape.log_softmax(logits)?;
        let value = linear(tape, store, "pol.value", global)?;
        Ok((logp, value))
    }

    /// Action log-probabilities and value without tracing.
    pub fn log_probabilities(&self, input: &PolicyInput) -> Result<(Vec<f64>, f64)> {
        let mut tape = Tape::inference();
        let (logp, v) = Self::forward(&mut tape, &self.store, input)?;
        Ok((tape.value(logp).data().to_vec(), tape.value(v).item()?))
    }

    pub fn probabilities(&self, input: &PolicyInput) -> Result<(Vec<f64>, f64)> {
        let (logp, v) = self.log_probabilities(input)?;
        Ok((logp.iter().map(|l| l.exp()).collect(), v))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(self.store.save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(IfrError::MissingCheckpoint(path.display().to_string()));
        }
        let store = ParamStore::load(path)?;
        let expected = Self::new(0)?;
        for name in expected.store.names() {
            if store.get(name)?.shape() != expected.store.get(name)?.shape() {
                return Err(IfrError::Format(format!("policy parameter `{name}` has the wrong shape")));
            }
        }
        Ok(Self { store })
    }
}

impl ActorCritic for PolicyNet {
    type Obs = PolicyInput;

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn evaluate(&self, tape: &mut Tape, store: &ParamStore, obs: &PolicyInput) -> Result<(Var, Var)> {
        Self::forward(tape, store, obs)
    }
}
