use super::{Action, DiscreteState};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("weight increments must be finite and non-negative, got {0}")]
    NegativeDelta(f64),
}

/// One logged weight increment. Sequence numbers are shared by both maps of
/// a [`WeightMaps`] pair, so the log reproduces the order updates happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLogEntry {
    pub seq: u64,
    pub state: DiscreteState,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action: Option<Action>,
    pub delta: f64,
    pub total: f64,
}

/// A feedback increment produced by the local planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightUpdate {
    Positional {
        state: DiscreteState,
        delta: f64,
    },
    Action {
        state: DiscreteState,
        action: Action,
        delta: f64,
    },
}

fn check(delta: f64) -> Result<(), WeightError> {
    if delta >= 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(WeightError::NegativeDelta(delta))
    }
}

/// Additional cost per cell, in metres. Unwritten cells weigh 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PositionalWeightMap {
    weights: BTreeMap<DiscreteState, f64>,
    log: Vec<WeightLogEntry>,
}

impl PositionalWeightMap {
    pub fn get(&self, q: DiscreteState) -> f64 {
        self.weights.get(&q).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, q: DiscreteState, delta: f64, seq: u64) -> Result<(), WeightError> {
        check(delta)?;
        let w = self.weights.entry(q).or_insert(0.0);
        *w += delta;
        self.log.push(WeightLogEntry {
            seq,
            state: q,
            action: None,
            delta,
            total: *w,
        });
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (DiscreteState, f64)> + '_ {
        self.weights.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn log(&self) -> &[WeightLogEntry] {
        &self.log
    }

    pub fn max(&self) -> f64 {
        self.weights.values().copied().fold(0.0, f64::max)
    }
}

/// Additional cost per `(cell, move)` pair, in metres.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionWeightMap {
    weights: BTreeMap<(DiscreteState, Action), f64>,
    log: Vec<WeightLogEntry>,
}

impl ActionWeightMap {
    pub fn get(&self, q: DiscreteState, a: Action) -> f64 {
        self.weights.get(&(q, a)).copied().unwrap_or(0.0)
    }

    pub fn add(
        &mut self,
        q: DiscreteState,
        a: Action,
        delta: f64,
        seq: u64,
    ) -> Result<(), WeightError> {
        check(delta)?;
        let w = self.weights.entry((q, a)).or_insert(0.0);
        *w += delta;
        self.log.push(WeightLogEntry {
            seq,
            state: q,
            action: Some(a),
            delta,
            total: *w,
        });
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (DiscreteState, Action, f64)> + '_ {
        self.weights.iter().map(|((q, a), w)| (*q, *a, *w))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn log(&self) -> &[WeightLogEntry] {
        &self.log
    }
}

/// Both weight maps plus the shared update sequence counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightMaps {
    pub positional: PositionalWeightMap,
    pub action: ActionWeightMap,
    next_seq: u64,
}

impl WeightMaps {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_positional_weight(
        &mut self,
        q: DiscreteState,
        delta: f64,
    ) -> Result<(), WeightError> {
        self.positional.add(q, delta, self.next_seq)?;
        self.next_seq += 1;
        Ok(())
    }

    pub fn add_action_weight(
        &mut self,
        q: DiscreteState,
        a: Action,
        delta: f64,
    ) -> Result<(), WeightError> {
        self.action.add(q, a, delta, self.next_seq)?;
        self.next_seq += 1;
        Ok(())
    }

    pub fn apply(&mut self, update: &WeightUpdate) -> Result<(), WeightError> {
        match *update {
            WeightUpdate::Positional { state, delta } => self.add_positional_weight(state, delta),
            WeightUpdate::Action {
                state,
                action,
                delta,
            } => self.add_action_weight(state, action, delta),
        }
    }

    /// Clears both maps and their logs. The sequence counter keeps running.
    pub fn reset(&mut self) {
        self.positional = PositionalWeightMap::default();
        self.action = ActionWeightMap::default();
    }

    /// Cumulative number of positional weight updates.
    pub fn positional_set_count(&self) -> usize {
        self.positional.log.len()
    }

    /// Cumulative number of action weight updates.
    pub fn action_set_count(&self) -> usize {
        self.action.log.len()
    }
}
