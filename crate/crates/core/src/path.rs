//! Time-parameterized state (and optional momentum) samples.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("path needs at least {0} samples")]
    TooShort(usize),
    #[error("path times must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("sample {0} has the wrong dimension")]
    Dimension(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub momenta: Option<Vec<Vec<f64>>>,
    pub action: Option<f64>,
}

impl ActionPath {
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self, PathError> {
        let path = Self { times, states, momenta: None, action: None };
        path.validate()?;
        Ok(path)
    }

    pub fn validate(&self) -> Result<(), PathError> {
        if self.times.is_empty() || self.times.len() != self.states.len() {
            return Err(PathError::TooShort(1));
        }
        if let Some(i) = self.times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(PathError::NotIncreasing(i + 1));
        }
        let n = self.states[0].len();
        if let Some(i) = self.states.iter().position(|s| s.len() != n) {
            return Err(PathError::Dimension(i));
        }
        if let Some(m) = &self.momenta {
            if m.len() != self.states.len() {
                return Err(PathError::Dimension(m.len()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// Linear interpolation of the state at time `t` (clamped to the ends).
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.states[i].iter().zip(&self.states[i + 1]).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// The path traversed backwards: x^R(t) = x(T − t) on [0, T − t₀].
    pub fn reversed(&self) -> Self {
        let t_end = *self.times.last().unwrap_or(&0.0);
        Self {
            times: self.times.iter().rev().map(|t| t_end - t).collect(),
            states: self.states.iter().rev().cloned().collect(),
            momenta: self.momenta.as_ref().map(|m| m.iter().rev().cloned().collect()),
            action: None,
        }
    }
}
