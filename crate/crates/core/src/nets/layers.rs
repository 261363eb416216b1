//! Parameter layouts and traced forward passes shared by every network.

use ifr_tensor::{ParamStore, Tape, Tensor, Var};
use rand::Rng;

use crate::error::Result;

pub const POINT_HIDDEN: usize = 64;
pub const POINT_WIDE: usize = 128;
pub const FEATURE_DIM: usize = 64;
pub const NODE_INPUT_DIM: usize = FEATURE_DIM + 4;
pub const NODE_HIDDEN: usize = 64;
pub const EMBED_DIM: usize = 32;
pub const BR_HEAD_HIDDEN: usize = 64;
pub const PAIR_HEAD_HIDDEN: usize = 32;

/// Glorot-uniform weights.
pub fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    glorot_block(rng, fan_in, fan_out, fan_in, fan_out)
}

/// A `rows × cols` block of a larger `fan_in × fan_out` Glorot layer.
fn glorot_block<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect();
    Tensor::new(vec![rows, cols], data).expect("sized")
}

pub fn insert_linear<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, fan_in: usize, fan_out: usize, bias: bool) -> Result<()> {
    store.insert(format!("{name}.w"), glorot(rng, fan_in, fan_out))?;
    if bias {
        store.insert(format!("{name}.b"), Tensor::zeros(&[1, fan_out]))?;
    }
    Ok(())
}

pub fn linear(tape: &mut Tape, store: &ParamStore, name: &str, x: Var) -> Result<Var> {
    let w = tape.param(store, &format!("{name}.w"))?;
    let b = tape.param(store, &format!("{name}.b"))?;
    let y = tape.matmul(x, w)?;
    Ok(tape.add_row(y, b)?)
}

/// Pair MLP whose first layer is split over the two slots: row `i·n + j`
/// of the output is `σ(W₂ relu(x_i A + y_j B + b₁) + b₂)`.
pub fn insert_pair_head<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, name: &str, input: usize, hidden: usize) -> Result<()> {
    store.insert(format!("{name}.a"), glorot_block(rng, input, hidden, 2 * input, hidden))?;
    store.insert(format!("{name}.bw"), glorot_block(rng, input, hidden, 2 * input, hidden))?;
    store.insert(format!("{name}.b1"), Tensor::zeros(&[1, hidden]))?;
    store.insert(format!("{name}.w2"), glorot(rng, hidden, 1))?;
    store.insert(format!("{name}.b2"), Tensor::zeros(&[1, 1]))?;
    Ok(())
}

/// Logits `[n², 1]` for every ordered pair of rows of `x` and `y`.
pub fn pair_logits(tape: &mut Tape, store: &ParamStore, name: &str, x: Var, y: Var) -> Result<Var> {
    let a = tape.param(store, &format!("{name}.a"))?;
    let bw = tape.param(store, &format!("{name}.bw"))?;
    let b1 = tape.param(store, &format!("{name}.b1"))?;
    let w2 = tape.param(store, &format!("{name}.w2"))?;
    let b2 = tape.param(store, &format!("{name}.b2"))?;
    let xa = tape.matmul(x, a)?;
    let yb = tape.matmul(y, bw)?;
    let h = tape.pair_sum(xa, yb)?;
    let h = tape.add_row(h, b1)?;
    let h = tape.relu(h);
    let o = tape.matmul(h, w2)?;
    Ok(tape.add_row(o, b2)?)
}

/// Logits `[n, 1]` for row-wise pairs `(x_i ‖ y_i)` through the same
/// parameter layout as [`pair_logits`].
pub fn rowwise_logits(tape: &mut Tape, store: &ParamStore, name: &str, x: Var, y: Var) -> Result<Var> {
    let a = tape.param(store, &format!("{name}.a"))?;
    let bw = tape.param(store, &format!("{name}.bw"))?;
    let b1 = tape.param(store, &format!("{name}.b1"))?;
    let w2 = tape.param(store, &format!("{name}.w2"))?;
    let b2 = tape.param(store, &format!("{name}.b2"))?;
    let xa = tape.matmul(x, a)?;
    let yb = tape.matmul(y, bw)?;
    let h = tape.add(xa, yb)?;
    let h = tape.add_row(h, b1)?;
    let h = tape.relu(h);
    let o = tape.matmul(h, w2)?;
    Ok(tape.add_row(o, b2)?)
}

pub fn init_encoder<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, prefix: &str) -> Result<()> {
    insert_linear(store, rng, &format!("{prefix}.enc1"), 3, POINT_HIDDEN, true)?;
    insert_linear(store, rng, &format!("{prefix}.enc2"), POINT_HIDDEN, POINT_WIDE, true)?;
    insert_linear(store, rng, &format!("{prefix}.enc3"), POINT_WIDE, FEATURE_DIM, true)
}

/// `points` is `[k·p, 3]`: k objects of p points each. Returns `[k, 64]`.
pub fn encoder(tape: &mut Tape, store: &ParamStore, prefix: &str, points: Var, p: usize) -> Result<Var> {
    let h = linear(tape, store, &format!("{prefix}.enc1"), points)?;
    let h = tape.relu(h);
    let h = linear(tape, store, &format!("{prefix}.enc2"), h)?;
    let h = tape.relu(h);
    let pooled = tape.segment_max(h, p)?;
    linear(tape, store, &format!("{prefix}.enc3"), pooled)
}

pub fn init_scene_backbone<R: Rng + ?Sized>(store: &mut ParamStore, rng: &mut R, prefix: &str) -> Result<()> {
    insert_linear(store, rng, &format!("{prefix}.in"), NODE_INPUT_DIM, NODE_HIDDEN, true)?;
    store.insert(format!("{prefix}.gcn1"), glorot(rng, NODE_HIDDEN, NODE_HIDDEN))?;
    store.insert(format!("{prefix}.gcn2"), glorot(rng, NODE_HIDDEN, NODE_HIDDEN))?;
    store.insert(format!("{prefix}.gcn3"), glorot(rng, NODE_HIDDEN, EMBED_DIM))?;
    Ok(())
}

/// One graph convolution: `Â · H · Θ`.
pub fn gcn_layer(tape: &mut Tape, store: &ParamStore, name: &str, adj: Var, h: Var) -> Result<Var> {
    let theta = tape.param(store, name)?;
    let agg = tape.matmul(adj, h)?;
    Ok(tape.matmul(agg, theta)?)
}

/// Node input projection followed by three graph convolutions, ReLU after
/// the first two. `node_input` is `[n, 68]`, `adj` the normalized adjacency.
pub fn scene_backbone(tape: &mut Tape, store: &ParamStore, prefix: &str, node_input: Var, adj: Var) -> Result<Var> {
    let h = linear(tape, store, &format!("{prefix}.in"), node_input)?;
    let h = tape.relu(h);
    let h = gcn_layer(tape, store, &format!("{prefix}.gcn1"), adj, h)?;
    let h = tape.relu(h);
    let h = gcn_layer(tape, store, &format!("{prefix}.gcn2"), adj, h)?;
    let h = tape.relu(h);
    gcn_layer(tape, store, &format!("{prefix}.gcn3"), adj, h)
}
