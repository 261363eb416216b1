//! Input-edge initialization for the scene graph network.

use ifr_tensor::Tensor;

use crate::error::{IfrError, Result};
use crate::registry::{parse_arg, Registry};
use crate::scene::{distance, Point};

pub const PROXIMITY_WEIGHT: f64 = 0.6;
pub const PROXIMITY_RADIUS: f64 = 0.5;

/// Turns pair weights (a prior or the current belief) and object centers into
/// an `n×n` edge-weight matrix with a zero diagonal.
pub trait EdgeInit: Send + Sync {
    fn name(&self) -> String;
    fn weight(&self, pair: f64, dist: f64) -> f64;

    fn build(&self, pair_weights: &[f64], centers: &[Point]) -> Result<Tensor> {
        let n = centers.len();
        if pair_weights.len() != n * n {
            return Err(IfrError::InvalidBelief(format!(
                "pair weights have {} entries for {n} objects",
                pair_weights.len()
            )));
        }
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    w[i * n + j] = self.weight(pair_weights[i * n + j], distance(&centers[i], &centers[j]));
                }
            }
        }
        Ok(Tensor::new(vec![n, n], w)?)
    }
}

/// `max(pair, γ·1[dist < r])`.
#[derive(Clone, Copy, Debug)]
pub struct Combined {
    pub gamma: f64,
    pub radius: f64,
}

impl Default for Combined {
    fn default() -> Self {
        Self {
            gamma: PROXIMITY_WEIGHT,
            radius: PROXIMITY_RADIUS,
        }
    }
}

impl EdgeInit for Combined {
    fn name(&self) -> String {
        format!("combined:{}", self.gamma)
    }

    fn weight(&self, pair: f64, dist: f64) -> f64 {
        pair.max(if dist < self.radius { self.gamma } else { 0.0 })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PriorOnly;

impl EdgeInit for PriorOnly {
    fn name(&self) -> String {
        "prior-only".into()
    }

    fn weight(&self, pair: f64, _dist: f64) -> f64 {
        pair
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DistanceOnly {
    pub gamma: f64,
    pub radius: f64,
}

impl EdgeInit for DistanceOnly {
    fn name(&self) -> String {
        format!("distance-only:{}", self.gamma)
    }

    fn weight(&self, _pair: f64, dist: f64) -> f64 {
        if dist < self.radius {
            self.gamma
        } else {
            0.0
        }
    }
}

/// Every off-diagonal edge at weight 1.
#[derive(Clone, Copy, Debug)]
pub struct Dense;

impl EdgeInit for Dense {
    fn name(&self) -> String {
        "dense".into()
    }

    fn weight(&self, _pair: f64, _dist: f64) -> f64 {
        1.0
    }
}

fn gamma(arg: &str) -> Result<f64> {
    let g = parse_arg("edge weight", arg, PROXIMITY_WEIGHT)?;
    if !(0.0..=1.0).contains(&g) {
        return Err(IfrError::InvalidConfig(format!("edge weight {g} is outside [0, 1]")));
    }
    Ok(g)
}

pub fn edge_registry() -> Registry<dyn EdgeInit> {
    let mut r: Registry<dyn EdgeInit> = Registry::new("edge initializer");
    r.register("combined", |a| {
        Ok(Box::new(Combined {
            gamma: gamma(a)?,
            radius: PROXIMITY_RADIUS,
        }))
    });
    r.register("prior-only", |_| Ok(Box::new(PriorOnly)));
    r.register("distance-only", |a| {
        Ok(Box::new(DistanceOnly {
            gamma: gamma(a)?,
            radius: PROXIMITY_RADIUS,
        }))
    });
    r.register("dense", |_| Ok(Box::new(Dense)));
    r
}

/// `D^{-1/2} (Wᵀ + I) D^{-1/2}` with `d_i = 1 + Σ_{j≠i} w_{j,i}`: entry
/// `(i, j)` is the coefficient of node `j` in node `i`'s aggregate. The
/// diagonal of `w` is ignored; the self term always has weight 1.
pub fn normalized_adjacency(w: &Tensor) -> Result<Tensor> {
    let (n, m) = w.dims2()?;
    if n != m {
        return Err(IfrError::InvalidBelief(format!("edge matrix is {n}×{m}")));
    }
    if let Some(v) = w.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(IfrError::InvalidBelief(format!("edge weight {v} is not a finite non-negative number")));
    }
    let wt = |j: usize, i: usize| if i == j { 1.0 } else { w.get2(j, i) };
    let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| wt(j, i)).sum()).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = wt(j, i) / (d[i] * d[j]).sqrt();
        }
    }
    Ok(Tensor::new(vec![n, n], a)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_rule_examples() {
        let c = Combined::default();
        assert_eq!(c.weight(0.9, 0.3), 0.9);
        assert_eq!(c.weight(0.1, 0.3), 0.6);
        assert_eq!(c.weight(0.1, 2.0), 0.1);
    }

    #[test]
    fn build_zeroes_the_diagonal_and_proximity_is_symmetric() {
        let e = Combined::default().build(&[0.9, 0.0, 0.0, 0.9], &[[0.0; 3], [0.3, 0.0, 0.0]]).unwrap();
        assert_eq!(e.data(), &[0.0, 0.6, 0.6, 0.0]);
    }

    #[test]
    fn registry_parses_gamma() {
        let r = edge_registry();
        assert_eq!(r.create("combined:0.8").unwrap().weight(0.0, 0.1), 0.8);
        assert_eq!(r.create("distance-only").unwrap().weight(1.0, 0.1), 0.6);
        assert!(r.create("combined:2").is_err());
        assert!(r.create("knn").is_err());
    }

    #[test]
    fn two_node_coefficients() {
        let w = Tensor::new(vec![2, 2], vec![0.0, 0.6, 0.6, 0.0]).unwrap();
        let a = normalized_adjacency(&w).unwrap();
        assert!((a.get2(0, 1) - 0.375).abs() < 1e-15);
        assert!((a.get2(0, 0) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn nan_is_rejected() {
        let w = Tensor::new(vec![1, 1], vec![f64::NAN]).unwrap();
        assert!(normalized_adjacency(&w).is_err());
    }
}
