//! n×n matrices of relationship probabilities. Entry `(i, j)` is the belief
//! that triggering object `i` changes the state of object `j`.

use ifr_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{IfrError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefMatrix {
    n: usize,
    values: Vec<f64>,
}

impl BeliefMatrix {
    pub fn uniform(n: usize, value: f64) -> Self {
        Self {
            n,
            values: vec![value; n * n],
        }
    }

    /// Checks the shape and that every entry lies in `[0, 1]`.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(IfrError::InvalidBelief(format!(
                "expected {n}×{n} = {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(IfrError::InvalidBelief(format!(
                "entry ({}, {}) = {v} is outside [0, 1]",
                k / n,
                k % n
            )));
        }
        Ok(Self { n, values })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let len = t.len();
        let n = (len as f64).sqrt().round() as usize;
        Self::new(n, t.data().to_vec())
    }

    pub fn from_graph(adjacency: &[bool], n: usize) -> Self {
        Self {
            n,
            values: adjacency.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Overwrites row `i` with observed effects.
    pub fn clamp_row(&mut self, i: usize, effects: &[bool]) {
        for (v, &e) in self.values[i * self.n..(i + 1) * self.n].iter_mut().zip(effects) {
            *v = if e { 1.0 } else { 0.0 };
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.n, self.n], self.values.clone()).expect("n×n")
    }

    /// Edges with belief strictly above `threshold`.
    pub fn threshold(&self, threshold: f64) -> Vec<bool> {
        self.values.iter().map(|&v| v > threshold).collect()
    }

    /// `min(r, 1 − r)`, the distance of a belief from certainty.
    pub fn uncertainty(r: f64) -> f64 {
        r.min(1.0 - r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_shape() {
        assert!(BeliefMatrix::new(2, vec![0.5, 1.2, 0.0, 0.0]).is_err());
        assert!(BeliefMatrix::new(2, vec![0.5; 3]).is_err());
        assert!(BeliefMatrix::new(2, vec![f64::NAN; 4]).is_err());
        assert!(BeliefMatrix::new(2, vec![0.0, 1.0, 0.5, 0.25]).is_ok());
    }

    #[test]
    fn threshold_is_strict() {
        let b = BeliefMatrix::new(1, vec![0.9]).unwrap();
        assert_eq!(b.threshold(0.9), vec![false]);
    }
}
