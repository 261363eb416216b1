//! Metrics, evaluation methods, transfer and result rendering.

pub mod methods;
pub mod metrics;
pub mod render;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptationConfig;
use crate::error::{IfrError, Result};
use crate::nets::RelationNets;
use crate::rng::{stream, tags};
use crate::scene::{catalog, Scene};
use methods::{Method, SceneRun};
use metrics::{Confusion, MetricsReport, Scores};

pub use methods::method_registry;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub scores: Scores,
    /// Scenes that made at least `t` interactions.
    pub active: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub method: String,
    pub budget: String,
    pub report: MetricsReport,
    pub runs: Vec<SceneRun>,
    /// Micro scores after `t` interactions; scenes that stopped earlier
    /// keep their final prediction.
    pub curve: Vec<CurvePoint>,
}

/// Runs `method` on every scene. Scene `k` draws from its own random stream,
/// so results do not depend on evaluation order.
pub fn evaluate(method: &dyn Method, scenes: &[&Scene], nets: Option<&RelationNets>, config: &AdaptationConfig, seed: u64) -> Result<Evaluation> {
    if scenes.is_empty() {
        return Err(IfrError::EmptyInput("no scenes to evaluate".into()));
    }
    if method.needs_checkpoint() && nets.is_none() {
        return Err(IfrError::MissingCheckpoint(format!("method `{}` needs a trained checkpoint", method.name())));
    }
    let mut report = MetricsReport::new(method.observation_only());
    let mut runs = Vec::with_capacity(scenes.len());
    for (k, s) in scenes.iter().enumerate() {
        let mut rng = stream(seed, tags::EVAL, k as u64);
        let run = method.run(s, nets, config, &mut rng)?;
        report.push(&s.scene_id, &run.prediction, s.ground_truth.adjacency(), s.n(), run.order.len())?;
        runs.push(run);
    }
    let horizon = runs.iter().map(|r| r.curve.len()).max().unwrap_or(1);
    let mut curve = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut c = Confusion::default();
        let mut active = 0;
        for (run, s) in runs.iter().zip(scenes) {
            let step = &run.curve[t.min(run.curve.len() - 1)];
            c += Confusion::from_graphs(step, s.ground_truth.adjacency())?;
            if run.order.len() >= t {
                active += 1;
            }
        }
        curve.push(CurvePoint {
            t,
            scores: Scores::of(&c, method.observation_only()),
            active,
        });
    }
    Ok(Evaluation {
        method: method.name().to_string(),
        budget: config.mode.to_string(),
        report,
        runs,
        curve,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub train_family: String,
    pub test_family: String,
    pub report: MetricsReport,
    /// Ground-truth edges whose relation type never occurs in the training
    /// family.
    pub unseen_edges: usize,
    pub unseen_found: usize,
}

impl TransferReport {
    pub fn unseen_recall(&self) -> Option<f64> {
        (self.unseen_edges > 0).then(|| self.unseen_found as f64 / self.unseen_edges as f64)
    }
}

/// Evaluates on scenes of `test_family` with networks trained on
/// `train_family`, whose relation types are `seen_types`.
pub fn run_transfer(
    method: &dyn Method,
    train_family: &str,
    test_family: &str,
    seen_types: &[String],
    scenes: &[&Scene],
    nets: Option<&RelationNets>,
    config: &AdaptationConfig,
    seed: u64,
) -> Result<TransferReport> {
    if train_family == test_family {
        log::warn!("transfer from `{train_family}` to itself is an in-domain evaluation");
    }
    let seen: BTreeSet<&str> = seen_types.iter().map(String::as_str).collect();
    let eval = evaluate(method, scenes, nets, config, seed)?;
    let (mut unseen_edges, mut unseen_found) = (0, 0);
    for (run, s) in eval.runs.iter().zip(scenes) {
        for e in s.ground_truth.edges() {
            let name = catalog::relation_type(e.type_id).map(|t| t.name).unwrap_or("");
            if !seen.contains(name) {
                unseen_edges += 1;
                if run.prediction[e.trigger * s.n() + e.responder] {
                    unseen_found += 1;
                }
            }
        }
    }
    Ok(TransferReport {
        train_family: train_family.to_string(),
        test_family: test_family.to_string(),
        report: eval.report,
        unseen_edges,
        unseen_found,
    })
}

/// Edge initializers compared by the edge ablation.
pub const EDGE_ABLATION_KEYS: [&str; 6] = ["prior-only", "distance-only", "combined:0.4", "combined:0.6", "combined:0.8", "combined:1.0"];

/// Evaluates `method` once per edge initializer, leaving `nets` unchanged.
pub fn ablate_edges(method: &dyn Method, scenes: &[&Scene], nets: &RelationNets, config: &AdaptationConfig, seed: u64) -> Result<Vec<(String, Evaluation)>> {
    let mut out = Vec::new();
    for key in EDGE_ABLATION_KEYS {
        let mut variant = nets.clone();
        variant.set_edge_init(key)?;
        out.push((key.to_string(), evaluate(method, scenes, Some(&variant), config, seed)?));
    }
    Ok(out)
}
