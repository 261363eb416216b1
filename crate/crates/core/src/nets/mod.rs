//! The learned relation models: a point-set encoder with a pairwise head
//! (the binary-relationship prior) and a graph-convolution scene network
//! that serves both as the scene prior and as the posterior.

pub mod edges;
pub mod layers;

use std::path::{Path, PathBuf};

use ifr_tensor::{ParamStore, Tape, Tensor};
use serde::{Deserialize, Serialize};

use crate::belief::BeliefMatrix;
use crate::env::Observation;
use crate::error::{IfrError, Result};
use crate::rng::{stream, tags};
use crate::scene::{Point, Scene};
use edges::{edge_registry, normalized_adjacency, EdgeInit};
use layers::*;

/// Smallest distance of an unclamped network probability from 0 or 1.
pub const PROB_MARGIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Points per object fed to the encoder; clouds are truncated to their
    /// first `encoder_points` points (generated clouds are i.i.d. samples).
    pub encoder_points: usize,
    /// Edge initializer key, e.g. `combined` or `combined:0.8`.
    pub edge_init: String,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            encoder_points: 64,
            edge_init: "combined".into(),
        }
    }
}

/// Per-scene inputs derived once from the current encoder.
#[derive(Clone, Debug)]
pub struct SceneContext {
    pub n: usize,
    pub features: Tensor,
    pub centers: Vec<Point>,
    pub scales: Vec<f64>,
    /// `[f | c | s]` per object, `[n, 68]`.
    pub node_input: Tensor,
    /// Binary-relationship prior.
    pub prior_b: BeliefMatrix,
}

/// `[k·p, 3]` stacked point sets, and `p`.
pub fn points_tensor(scene: &Scene, max_points: usize) -> Result<(Tensor, usize)> {
    let p = scene
        .objects
        .iter()
        .map(|o| o.points.len())
        .min()
        .unwrap_or(0)
        .min(max_points);
    if p == 0 {
        return Err(IfrError::EmptyInput(format!("scene `{}` has no points", scene.scene_id)));
    }
    let mut data = Vec::with_capacity(scene.n() * p * 3);
    for o in &scene.objects {
        for q in &o.points[..p] {
            data.extend(q.iter().map(|&v| v as f64));
        }
    }
    Ok((Tensor::new(vec![scene.n() * p, 3], data)?, p))
}

pub fn node_input(features: &Tensor, centers: &[Point], scales: &[f64]) -> Result<Tensor> {
    let (n, d) = features.dims2()?;
    let mut data = Vec::with_capacity(n * (d + 4));
    for i in 0..n {
        data.extend_from_slice(features.row(i));
        data.extend_from_slice(&centers[i]);
        data.push(scales[i]);
    }
    Ok(Tensor::new(vec![n, d + 4], data)?)
}

fn to_belief(n: usize, probs: &Tensor) -> Result<BeliefMatrix> {
    let v = probs.data().iter().map(|p| p.clamp(PROB_MARGIN, 1.0 - PROB_MARGIN)).collect();
    BeliefMatrix::new(n, v)
}

pub struct RelationNets {
    pub config: NetConfig,
    /// Encoder and binary pair head, names prefixed `br.`.
    pub br: ParamStore,
    /// Scene graph network, names prefixed `sr.`.
    pub sr: ParamStore,
    edge_init: Box<dyn EdgeInit>,
}

impl Clone for RelationNets {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            br: self.br.clone(),
            sr: self.sr.clone(),
            edge_init: edge_registry().create(&self.config.edge_init).expect("key was validated on construction"),
        }
    }
}

impl std::fmt::Debug for RelationNets {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RelationNets")
            .field("config", &self.config)
            .field("br_params", &self.br.len())
            .field("sr_params", &self.sr.len())
            .finish()
    }
}

pub fn init_br(seed: u64) -> Result<ParamStore> {
    let mut rng = stream(seed, tags::INIT_NETS, 0);
    let mut s = ParamStore::new();
    init_encoder(&mut s, &mut rng, "br")?;
    insert_pair_head(&mut s, &mut rng, "br.head", FEATURE_DIM, BR_HEAD_HIDDEN)?;
    Ok(s)
}

pub fn init_sr(seed: u64) -> Result<ParamStore> {
    let mut rng = stream(seed, tags::INIT_NETS, 1);
    let mut s = ParamStore::new();
    init_scene_backbone(&mut s, &mut rng, "sr")?;
    insert_pair_head(&mut s, &mut rng, "sr.head", EMBED_DIM, PAIR_HEAD_HIDDEN)?;
    Ok(s)
}

/// Traced encoder and binary head: features `[k, 64]` and pair
/// probabilities `[k², 1]`.
pub fn br_forward(tape: &mut Tape, store: &ParamStore, points: &Tensor, p: usize) -> Result<(ifr_tensor::Var, ifr_tensor::Var)> {
    let x = tape.constant(points.clone());
    let f = encoder(tape, store, "br", x, p)?;
    let logits = pair_logits(tape, store, "br.head", f, f)?;
    Ok((f, tape.sigmoid(logits)))
}

/// Traced scene network: pair probabilities `[n², 1]` and embeddings.
pub fn sr_forward(tape: &mut Tape, store: &ParamStore, node_input: &Tensor, adj: &Tensor) -> Result<(ifr_tensor::Var, ifr_tensor::Var)> {
    let x = tape.constant(node_input.clone());
    let a = tape.constant(adj.clone());
    let e = scene_backbone(tape, store, "sr", x, a)?;
    let logits = pair_logits(tape, store, "sr.head", e, e)?;
    Ok((tape.sigmoid(logits), e))
}

#[derive(Serialize)]
struct ModelCard<'a> {
    point_mlp: [usize; 3],
    pooling: &'static str,
    feature_dim: usize,
    encoder_points: usize,
    br_head: [usize; 3],
    node_input: [usize; 2],
    gcn_layers: [usize; 4],
    gcn_activation: &'static str,
    embedding_dim: usize,
    sr_head: [usize; 3],
    edge_init: &'a str,
    proximity_weight: f64,
    proximity_radius_m: f64,
    br_features_into_sr: &'static str,
}

impl RelationNets {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let edge_init = edge_registry().create(&config.edge_init)?;
        if config.encoder_points == 0 {
            return Err(IfrError::InvalidConfig("encoder_points must be positive".into()));
        }
        Ok(Self {
            config,
            br: init_br(seed)?,
            sr: init_sr(seed)?,
            edge_init,
        })
    }

    pub fn edge_init(&self) -> &dyn EdgeInit {
        self.edge_init.as_ref()
    }

    pub fn set_edge_init(&mut self, key: &str) -> Result<()> {
        self.edge_init = edge_registry().create(key)?;
        self.config.edge_init = key.to_string();
        Ok(())
    }

    /// Features `[n, 64]` of every object in `scene`.
    pub fn encode_scene(&self, scene: &Scene) -> Result<Tensor> {
        let (pts, p) = points_tensor(scene, self.config.encoder_points)?;
        self.encode_points(&pts, p)
    }

    /// Features of `k` stacked clouds of `p` points each.
    pub fn encode_points(&self, points: &Tensor, p: usize) -> Result<Tensor> {
        let (_, c) = points.dims2()?;
        if c != 3 {
            return Err(IfrError::Tensor(ifr_tensor::TensorError::ShapeMismatch {
                op: "encode",
                lhs: points.shape().to_vec(),
                rhs: vec![points.shape()[0], 3],
            }));
        }
        let mut tape = Tape::inference();
        let x = tape.constant(points.clone());
        let f = encoder(&mut tape, &self.br, "br", x, p)?;
        Ok(tape.value(f).clone())
    }

    /// Binary prior from features alone: `σ(head(f_i ‖ f_j))`.
    pub fn br_from_features(&self, features: &Tensor) -> Result<BeliefMatrix> {
        let (n, _) = features.dims2()?;
        let mut tape = Tape::inference();
        let f = tape.constant(features.clone());
        let logits = pair_logits(&mut tape, &self.br, "br.head", f, f)?;
        let p = tape.sigmoid(logits);
        to_belief(n, tape.value(p))
    }

    pub fn br_prior(&self, scene: &Scene) -> Result<BeliefMatrix> {
        self.br_from_features(&self.encode_scene(scene)?)
    }

    pub fn context(&self, scene: &Scene) -> Result<SceneContext> {
        let features = self.encode_scene(scene)?;
        let prior_b = self.br_from_features(&features)?;
        let centers = scene.centers();
        let scales: Vec<f64> = scene.objects.iter().map(|o| o.scale).collect();
        let node_input = node_input(&features, &centers, &scales)?;
        Ok(SceneContext {
            n: scene.n(),
            features,
            centers,
            scales,
            node_input,
            prior_b,
        })
    }

    pub fn scene_scores_with(&self, ctx: &SceneContext, edge_source: &BeliefMatrix, init: &dyn EdgeInit) -> Result<BeliefMatrix> {
        if edge_source.n() != ctx.n {
            return Err(IfrError::InvalidBelief(format!(
                "edge source is {0}×{0} for {1} objects",
                edge_source.n(),
                ctx.n
            )));
        }
        let w = init.build(edge_source.values(), &ctx.centers)?;
        let adj = normalized_adjacency(&w)?;
        let mut tape = Tape::inference();
        let (p, _) = sr_forward(&mut tape, &self.sr, &ctx.node_input, &adj)?;
        to_belief(ctx.n, tape.value(p))
    }

    pub fn scene_scores(&self, ctx: &SceneContext, edge_source: &BeliefMatrix) -> Result<BeliefMatrix> {
        self.scene_scores_with(ctx, edge_source, self.edge_init.as_ref())
    }

    /// Scene prior: the scene network with edges initialized from the
    /// binary prior.
    pub fn sr_prior(&self, ctx: &SceneContext) -> Result<BeliefMatrix> {
        self.scene_scores(ctx, &ctx.prior_b)
    }

    /// Clamps observed rows, reruns the scene network on the clamped matrix
    /// and clamps the observed rows of the output again.
    pub fn posterior_step(&self, ctx: &SceneContext, belief: &BeliefMatrix, observations: &[Observation]) -> Result<BeliefMatrix> {
        self.posterior_step_with(ctx, belief, observations, self.edge_init.as_ref())
    }

    pub fn posterior_step_with(
        &self,
        ctx: &SceneContext,
        belief: &BeliefMatrix,
        observations: &[Observation],
        init: &dyn EdgeInit,
    ) -> Result<BeliefMatrix> {
        let mut clamped = belief.clone();
        for o in observations {
            if o.trigger >= ctx.n || o.effects.len() != ctx.n {
                return Err(IfrError::IndexOutOfRange { index: o.trigger, n: ctx.n });
            }
            clamped.clamp_row(o.trigger, &o.effects);
        }
        let mut out = self.scene_scores_with(ctx, &clamped, init)?;
        for o in observations {
            out.clamp_row(o.trigger, &o.effects);
        }
        Ok(out)
    }

    fn merged(&self) -> Result<ParamStore> {
        let mut m = ParamStore::new();
        for s in [&self.br, &self.sr] {
            for name in s.names() {
                m.insert(name, s.get(name)?.clone())?;
            }
        }
        Ok(m)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(self.merged()?.to_bytes())
    }

    pub fn model_card(&self) -> Result<String> {
        let card = ModelCard {
            point_mlp: [3, POINT_HIDDEN, POINT_WIDE],
            pooling: "max",
            feature_dim: FEATURE_DIM,
            encoder_points: self.config.encoder_points,
            br_head: [2 * FEATURE_DIM, BR_HEAD_HIDDEN, 1],
            node_input: [NODE_INPUT_DIM, NODE_HIDDEN],
            gcn_layers: [NODE_HIDDEN, NODE_HIDDEN, NODE_HIDDEN, EMBED_DIM],
            gcn_activation: "relu after layers 1 and 2",
            embedding_dim: EMBED_DIM,
            sr_head: [2 * EMBED_DIM, PAIR_HEAD_HIDDEN, 1],
            edge_init: &self.config.edge_init,
            proximity_weight: edges::PROXIMITY_WEIGHT,
            proximity_radius_m: edges::PROXIMITY_RADIUS,
            br_features_into_sr: "detached",
        };
        Ok(serde_json::to_string_pretty(&card)? + "\n")
    }

    pub fn card_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".card.json");
        PathBuf::from(s)
    }

    /// Writes the checkpoint and a model card at `<path>.card.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.merged()?.save(path)?;
        std::fs::write(Self::card_path(path), self.model_card()?)?;
        Ok(())
    }

    pub fn load(path: &Path, config: NetConfig) -> Result<Self> {
        let merged = ParamStore::load(path)?;
        Self::from_store(&merged, config)
    }

    /// Loads a checkpoint, taking the encoder size and edge initializer from
    /// its model card when one exists.
    pub fn open(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(IfrError::MissingCheckpoint(path.display().to_string()));
        }
        let mut config = NetConfig::default();
        if let Ok(text) = std::fs::read_to_string(Self::card_path(path)) {
            let card: serde_json::Value = serde_json::from_str(&text)?;
            if let Some(p) = card.get("encoder_points").and_then(|v| v.as_u64()) {
                config.encoder_points = p as usize;
            }
            if let Some(e) = card.get("edge_init").and_then(|v| v.as_str()) {
                config.edge_init = e.to_string();
            }
        }
        Self::load(path, config)
    }

    pub fn from_store(merged: &ParamStore, config: NetConfig) -> Result<Self> {
        let mut nets = Self::new(config, 0)?;
        let expected = nets.br.len() + nets.sr.len();
        if merged.len() != expected {
            return Err(IfrError::Format(format!(
                "checkpoint has {} tensors, expected {expected}",
                merged.len()
            )));
        }
        for name in merged.names() {
            let v = merged.get(name)?.clone();
            let target = if name.starts_with("br.") {
                &mut nets.br
            } else if name.starts_with("sr.") {
                &mut nets.sr
            } else {
                return Err(IfrError::Format(format!("unexpected tensor `{name}`")));
            };
            target.set(name, v)?;
        }
        Ok(nets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stores_have_expected_shapes() {
        let nets = RelationNets::new(NetConfig::default(), 0).unwrap();
        assert_eq!(nets.br.get("br.enc2.w").unwrap().shape(), &[64, 128]);
        assert_eq!(nets.br.get("br.head.a").unwrap().shape(), &[64, 64]);
        assert_eq!(nets.sr.get("sr.in.w").unwrap().shape(), &[68, 64]);
        assert_eq!(nets.sr.get("sr.gcn3").unwrap().shape(), &[64, 32]);
        assert_eq!(nets.sr.get("sr.head.a").unwrap().shape(), &[32, 32]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nets.ckpt");
        let nets = RelationNets::new(NetConfig::default(), 3).unwrap();
        nets.save(&p).unwrap();
        let back = RelationNets::load(&p, NetConfig::default()).unwrap();
        assert_eq!(back.to_bytes().unwrap(), nets.to_bytes().unwrap());
        assert!(RelationNets::card_path(&p).exists());

        let small = RelationNets::new(NetConfig { encoder_points: 32, edge_init: "combined:0.8".into() }, 3).unwrap();
        small.save(&p).unwrap();
        assert_eq!(RelationNets::open(&p).unwrap().config, small.config);
        assert!(matches!(RelationNets::open(&dir.path().join("none")), Err(IfrError::MissingCheckpoint(_))));
    }
}
