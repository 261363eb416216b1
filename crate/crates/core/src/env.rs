//! The interaction environment: trigger one object per step, observe which
//! objects change state.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::belief::BeliefMatrix;
use crate::error::{IfrError, Result};
use crate::scene::Scene;

pub const REWARD_ALPHA: f64 = 2.0;
pub const REWARD_BETA: f64 = 1.0;
pub const REWARD_COST: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub trigger: usize,
    pub effects: Vec<bool>,
}

/// `α·max_j |r_ij − e_ij| + β·1[∃j e_ij] − γ_cost`, read from the belief row
/// before it is clamped.
pub fn reward_of(belief: &BeliefMatrix, i: usize, effects: &[bool]) -> Result<f64> {
    if i >= belief.n() {
        return Err(IfrError::IndexOutOfRange { index: i, n: belief.n() });
    }
    if effects.len() != belief.n() {
        return Err(IfrError::InvalidBelief(format!(
            "effect row has {} entries for {} objects",
            effects.len(),
            belief.n()
        )));
    }
    let err = belief
        .row(i)
        .iter()
        .zip(effects)
        .map(|(&r, &e)| (r - if e { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    let any = effects.iter().any(|&e| e);
    Ok(REWARD_ALPHA * err + if any { REWARD_BETA } else { 0.0 } - REWARD_COST)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub scene_id: String,
    pub t: usize,
    pub i: usize,
    /// One `'0'`/`'1'` character per object.
    pub effects: String,
    pub reward: f64,
}

impl LogRecord {
    pub fn effect_row(&self) -> Result<Vec<bool>> {
        self.effects
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(IfrError::Format(format!("bad effect character `{other}`"))),
            })
            .collect()
    }
}

pub fn effects_to_bits(effects: &[bool]) -> String {
    effects.iter().map(|&e| if e { '1' } else { '0' }).collect()
}

pub fn write_log<W: Write>(mut w: W, records: &[LogRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(r: R) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Transition { observation: Observation, reward: f64 },
    /// Budget exhausted; the state is unchanged.
    Terminal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Environment<'a> {
    scene: &'a Scene,
    belief: BeliefMatrix,
    interacted: Vec<bool>,
    history: Vec<Observation>,
    log: Vec<LogRecord>,
    budget: usize,
    remaining: usize,
}

impl<'a> Environment<'a> {
    pub fn reset(scene: &'a Scene, initial_belief: BeliefMatrix, budget: usize) -> Result<Self> {
        if initial_belief.n() != scene.n() {
            return Err(IfrError::InvalidBelief(format!(
                "belief is {0}×{0} for a scene of {1} objects",
                initial_belief.n(),
                scene.n()
            )));
        }
        BeliefMatrix::new(scene.n(), initial_belief.values().to_vec())?;
        Ok(Self {
            scene,
            belief: initial_belief,
            interacted: vec![false; scene.n()],
            history: Vec::new(),
            log: Vec::new(),
            budget,
            remaining: budget,
        })
    }

    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    pub fn belief(&self) -> &BeliefMatrix {
        &self.belief
    }

    pub fn t(&self) -> usize {
        self.history.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn interacted(&self) -> &[bool] {
        &self.interacted
    }

    pub fn all_interacted(&self) -> bool {
        self.interacted.iter().all(|&b| b)
    }

    /// Observations in interaction order, repeats included.
    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn observe(&self, i: usize) -> Result<Observation> {
        if i >= self.scene.n() {
            return Err(IfrError::IndexOutOfRange { index: i, n: self.scene.n() });
        }
        Ok(Observation {
            trigger: i,
            effects: self.scene.ground_truth.row(i).to_vec(),
        })
    }

    pub fn step(&mut self, i: usize) -> Result<Step> {
        let observation = self.observe(i)?;
        if self.remaining == 0 {
            return Ok(Step::Terminal);
        }
        let reward = reward_of(&self.belief, i, &observation.effects)?;
        self.belief.clamp_row(i, &observation.effects);
        self.interacted[i] = true;
        self.log.push(LogRecord {
            scene_id: self.scene.scene_id.clone(),
            t: self.history.len(),
            i,
            effects: effects_to_bits(&observation.effects),
            reward,
        });
        self.history.push(observation.clone());
        self.remaining -= 1;
        Ok(Step::Transition { observation, reward })
    }

    /// Replaces the belief (typically with a posterior) and re-clamps every
    /// observed row.
    pub fn update_belief(&mut self, belief: BeliefMatrix) -> Result<()> {
        if belief.n() != self.scene.n() {
            return Err(IfrError::InvalidBelief(format!(
                "belief is {0}×{0} for a scene of {1} objects",
                belief.n(),
                self.scene.n()
            )));
        }
        self.belief = belief;
        for o in &self.history {
            self.belief.clamp_row(o.trigger, &o.effects);
        }
        Ok(())
    }
}
