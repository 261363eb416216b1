//! Supervision of the binary prior and the scene network from interaction
//! outcomes.

use std::collections::BTreeMap;

use ifr_tensor::{AdamConfig, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefMatrix;
use crate::error::{IfrError, Result};
use crate::nets::edges::normalized_adjacency;
use crate::nets::{br_forward, node_input, points_tensor, sr_forward, RelationNets, PROB_MARGIN};
use crate::scene::Scene;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisedConfig {
    pub epochs: usize,
    pub batch_scenes: usize,
    /// Upper bound on the positive-class weight; 1 gives plain BCE.
    pub pos_weight_cap: f64,
    pub lr: f64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_scenes: 1,
            pos_weight_cap: 1.0,
            lr: 1e-3,
        }
    }
}

/// A scene and the triggers observed in it, in order.
#[derive(Clone, Debug)]
pub struct Supervision<'a> {
    pub scene: &'a Scene,
    pub order: Vec<usize>,
}

/// Rows supervised by each pass over one scene: the prior pass targets every
/// observed row; pass `t` (after clamping the first `t` triggers) targets
/// the remaining `m − t`.
pub fn pass_targets(order: &[usize]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = vec![(Vec::new(), order.to_vec())];
    for t in 1..order.len() {
        out.push((order[..t].to_vec(), order[t..].to_vec()));
    }
    out
}

/// `min(neg/pos, cap)`, at least 1, over the observed rows of a batch.
pub fn positive_weight(batch: &[Supervision<'_>], cap: f64) -> f64 {
    let (mut pos, mut neg) = (0usize, 0usize);
    for s in batch {
        for &i in &s.order {
            let p = s.scene.ground_truth.row(i).iter().filter(|&&e| e).count();
            pos += p;
            neg += s.scene.n() - p;
        }
    }
    if pos == 0 {
        1.0
    } else {
        (neg as f64 / pos as f64).clamp(1.0, cap)
    }
}

struct Targets {
    target: Tensor,
    weight: Tensor,
    total: f64,
}

fn row_targets(scene: &Scene, rows: &[usize], pos_weight: f64) -> Result<Targets> {
    let n = scene.n();
    let mut target = vec![0.0; n * n];
    let mut weight = vec![0.0; n * n];
    for &i in rows {
        for (j, &e) in scene.ground_truth.row(i).iter().enumerate() {
            target[i * n + j] = if e { 1.0 } else { 0.0 };
            weight[i * n + j] = if e { pos_weight } else { 1.0 };
        }
    }
    let total = weight.iter().sum();
    Ok(Targets {
        target: Tensor::new(vec![n * n, 1], target)?,
        weight: Tensor::new(vec![n * n, 1], weight)?,
        total,
    })
}

fn weighted_bce(tape: &mut Tape, probs: Var, t: &Targets) -> Result<Var> {
    let l = tape.bce(probs, &t.target)?;
    let w = tape.constant(t.weight.clone());
    let l = tape.mul(l, w)?;
    let l = tape.sum(l);
    Ok(tape.scale(l, 1.0 / t.total))
}

fn probs_to_belief(n: usize, p: &Tensor) -> Result<BeliefMatrix> {
    BeliefMatrix::new(n, p.data().iter().map(|v| v.clamp(PROB_MARGIN, 1.0 - PROB_MARGIN)).collect())
}

/// Adds the loss terms of one scene to `terms`.
fn scene_terms(tape: &mut Tape, nets: &RelationNets, s: &Supervision<'_>, pos_weight: f64, terms: &mut Vec<Var>) -> Result<()> {
    let scene = s.scene;
    let n = scene.n();
    let (pts, p) = points_tensor(scene, nets.config.encoder_points)?;
    let (features, pb) = br_forward(tape, &nets.br, &pts, p)?;
    let all = row_targets(scene, &s.order, pos_weight)?;
    terms.push(weighted_bce(tape, pb, &all)?);

    let features = tape.value(features).clone();
    let scales: Vec<f64> = scene.objects.iter().map(|o| o.scale).collect();
    let centers = scene.centers();
    let x = node_input(&features, &centers, &scales)?;
    let mut belief = probs_to_belief(n, tape.value(pb))?;
    for (clamped, supervised) in pass_targets(&s.order) {
        for &i in &clamped {
            belief.clamp_row(i, scene.ground_truth.row(i));
        }
        let adj = normalized_adjacency(&nets.edge_init().build(belief.values(), &centers)?)?;
        let (probs, _) = sr_forward(tape, &nets.sr, &x, &adj)?;
        let t = row_targets(scene, &supervised, pos_weight)?;
        terms.push(weighted_bce(tape, probs, &t)?);
        belief = probs_to_belief(n, tape.value(probs))?;
    }
    Ok(())
}

fn split_grads(grads: BTreeMap<String, Tensor>) -> (BTreeMap<String, Tensor>, BTreeMap<String, Tensor>) {
    grads.into_iter().partition(|(k, _)| k.starts_with("br."))
}

/// Mean loss of each epoch. An empty set leaves the networks unchanged.
pub fn train_supervised(nets: &mut RelationNets, data: &[Supervision<'_>], cfg: &SupervisedConfig, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    let data: Vec<&Supervision<'_>> = data.iter().filter(|s| !s.order.is_empty()).collect();
    if data.is_empty() {
        log::warn!("no observations to train on");
        return Ok(Vec::new());
    }
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let batch = cfg.batch_scenes.max(1);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut idx: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in idx.chunks(batch) {
            let members: Vec<Supervision<'_>> = chunk.iter().map(|&k| data[k].clone()).collect();
            let pos_weight = positive_weight(&members, cfg.pos_weight_cap);
            let mut tape = Tape::new();
            let mut terms = Vec::new();
            for s in &members {
                scene_terms(&mut tape, nets, s, pos_weight, &mut terms)?;
            }
            let k = terms.len() as f64;
            let stacked = tape.concat_rows(&terms)?;
            let total = tape.sum(stacked);
            let loss = tape.scale(total, 1.0 / k);
            let value = tape.value(loss).item()?;
            if !value.is_finite() {
                return Err(IfrError::NonFiniteLoss(format!("supervised loss is {value}")));
            }
            let (br, sr) = split_grads(tape.backward(loss)?.into_params());
            nets.br.adam_step(&br, &adam)?;
            nets.sr.adam_step(&sr, &adam)?;
            epoch_loss += value;
            batches += 1;
        }
        history.push(epoch_loss / batches as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_pass_supervises_one_row() {
        let p = pass_targets(&[4, 1, 7]);
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], (vec![], vec![4, 1, 7]));
        assert_eq!(p[2], (vec![4, 1], vec![7]));
    }
}
