//! Pair-level confusion counts and the scores derived from them.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{IfrError, Result};

/// Counts over all `n²` ordered pairs, diagonal included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_graphs(prediction: &[bool], truth: &[bool]) -> Result<Self> {
        if prediction.len() != truth.len() {
            return Err(IfrError::InvalidBelief(format!(
                "prediction has {} pairs, ground truth {}",
                prediction.len(),
                truth.len()
            )));
        }
        let mut c = Confusion::default();
        for (&p, &t) in prediction.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    /// `0/0` is 1 for predictors that only report observations, 0 otherwise.
    pub fn precision(&self, observation_only: bool) -> f64 {
        let d = self.tp + self.fp;
        if d == 0 {
            if observation_only {
                1.0
            } else {
                0.0
            }
        } else {
            self.tp as f64 / d as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let d = self.tp + self.fn_;
        if d == 0 {
            0.0
        } else {
            self.tp as f64 / d as f64
        }
    }

    pub fn f1(&self, observation_only: bool) -> f64 {
        f1_score(self.precision(observation_only), self.recall())
    }

    /// Zero when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let d = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if d == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / d.sqrt()
        }
    }
}

impl AddAssign for Confusion {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

/// `2PR/(P+R)`, 0 when both are 0.
pub fn f1_score(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

impl Scores {
    pub fn of(c: &Confusion, observation_only: bool) -> Self {
        Self {
            precision: c.precision(observation_only),
            recall: c.recall(),
            f1: c.f1(observation_only),
            mcc: c.mcc(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene_id: String,
    pub n: usize,
    pub interactions: usize,
    pub confusion: Confusion,
    pub scores: Scores,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub observation_only: bool,
    /// From summed counts.
    pub micro: Scores,
    /// Mean of per-scene scores.
    pub macro_avg: Scores,
    pub confusion: Confusion,
    pub interactions: usize,
    pub objects: usize,
    pub scenes: Vec<SceneMetrics>,
}

impl MetricsReport {
    pub fn new(observation_only: bool) -> Self {
        Self {
            observation_only,
            ..Self::default()
        }
    }

    pub fn push(&mut self, scene_id: &str, prediction: &[bool], truth: &[bool], n: usize, interactions: usize) -> Result<()> {
        let c = Confusion::from_graphs(prediction, truth)?;
        self.confusion += c;
        self.interactions += interactions;
        self.objects += n;
        self.scenes.push(SceneMetrics {
            scene_id: scene_id.to_string(),
            n,
            interactions,
            confusion: c,
            scores: Scores::of(&c, self.observation_only),
        });
        self.micro = Scores::of(&self.confusion, self.observation_only);
        let k = self.scenes.len() as f64;
        let mean = |f: fn(&Scores) -> f64| self.scenes.iter().map(|s| f(&s.scores)).sum::<f64>() / k;
        self.macro_avg = Scores {
            precision: mean(|s| s.precision),
            recall: mean(|s| s.recall),
            f1: mean(|s| s.f1),
            mcc: mean(|s| s.mcc),
        };
        Ok(())
    }

    pub fn interaction_fraction(&self) -> f64 {
        if self.objects == 0 {
            0.0
        } else {
            self.interactions as f64 / self.objects as f64
        }
    }
}
