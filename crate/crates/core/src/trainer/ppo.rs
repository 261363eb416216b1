//! Clipped-surrogate policy optimization over any actor-critic.

use std::collections::BTreeMap;

use ifr_tensor::{AdamConfig, ParamStore, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{IfrError, Result};

pub trait ActorCritic {
    type Obs;

    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    /// Log-probabilities `[1, k]` over actions and a value `[1, 1]`.
    fn evaluate(&self, tape: &mut Tape, store: &ParamStore, obs: &Self::Obs) -> Result<(Var, Var)>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub discount: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            discount: 0.99,
            epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 1e-3,
        }
    }
}

/// One decision with its behavior log-probability, return and advantage.
#[derive(Clone, Debug)]
pub struct Sample<O> {
    pub obs: O,
    pub action: usize,
    pub logp: f64,
    pub ret: f64,
    pub advantage: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// `G_t = r_t + γ·G_{t+1}` over one episode.
pub fn discounted_returns(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for t in (0..rewards.len()).rev() {
        g = rewards[t] + discount * g;
        out[t] = g;
    }
    out
}

/// `epochs` full-batch steps on the clipped surrogate plus value and entropy
/// terms. Returns the statistics of the last epoch.
pub fn ppo_update<A: ActorCritic>(ac: &mut A, samples: &[Sample<A::Obs>], cfg: &PpoConfig) -> Result<PpoStats> {
    if samples.is_empty() {
        return Err(IfrError::EmptyInput("no samples for the policy update".into()));
    }
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let k = samples.len() as f64;
    let mut stats = PpoStats::default();
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let store = ac.store().clone();
        let mut surr_terms = Vec::with_capacity(samples.len());
        let mut value_terms = Vec::with_capacity(samples.len());
        let mut entropy_terms = Vec::with_capacity(samples.len());
        for s in samples {
            let (logp, value) = ac.evaluate(&mut tape, &store, &s.obs)?;
            let chosen = tape.pick(logp, &[s.action])?;
            let old = tape.constant(Tensor::scalar(s.logp));
            let diff = tape.sub(chosen, old)?;
            let ratio = tape.exp(diff);
            let unclipped = tape.scale(ratio, s.advantage);
            let clipped = tape.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
            let clipped = tape.scale(clipped, s.advantage);
            surr_terms.push(tape.minimum(unclipped, clipped)?);

            let target = tape.constant(Tensor::scalar(s.ret));
            let err = tape.sub(value, target)?;
            value_terms.push(tape.square(err));

            let p = tape.exp(logp);
            let plogp = tape.mul(p, logp)?;
            let neg_h = tape.sum(plogp);
            entropy_terms.push(neg_h);
        }
        let surr = tape.concat_rows(&surr_terms)?;
        let surr = tape.sum(surr);
        let vl = tape.concat_rows(&value_terms)?;
        let vl = tape.sum(vl);
        let neg_h = tape.concat_rows(&entropy_terms)?;
        let neg_h = tape.sum(neg_h);

        let policy_loss = tape.scale(surr, -1.0 / k);
        let value_loss = tape.scale(vl, cfg.value_coef / k);
        let entropy_loss = tape.scale(neg_h, cfg.entropy_coef / k);
        let l = tape.add(policy_loss, value_loss)?;
        let loss = tape.add(l, entropy_loss)?;
        let total = tape.value(loss).item()?;
        if !total.is_finite() {
            return Err(IfrError::NonFiniteLoss(format!("policy loss is {total}")));
        }
        stats = PpoStats {
            policy_loss: tape.value(policy_loss).item()?,
            value_loss: tape.value(vl).item()? / k,
            entropy: -tape.value(neg_h).item()? / k,
        };
        let grads: BTreeMap<String, Tensor> = tape.backward(loss)?.into_params();
        ac.store_mut().adam_step(&grads, &adam)?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns_discount_backwards() {
        let g = discounted_returns(&[1.0, 0.0, 2.0], 0.5);
        assert_eq!(g, vec![1.5, 1.0, 2.0]);
    }
}
