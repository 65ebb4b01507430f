use serde::{Deserialize, Serialize};

use crate::error::{Result, SprayError};

/// A point and a nonzero velocity in a single chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentState {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TangentState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(SprayError::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(SprayError::DimensionMismatch {
                expected: 2,
                got: x.len(),
            });
        }
        let ny = y.iter().map(|v| v * v).sum::<f64>();
        if !(ny > 0.0) || !ny.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(SprayError::ZeroVelocity);
        }
        Ok(TangentState { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn speed(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same point, velocity multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        TangentState::new(self.x.clone(), self.y.iter().map(|v| v * lambda).collect())
    }

    pub fn reversed(&self) -> Self {
        TangentState {
            x: self.x.clone(),
            y: self.y.iter().map(|v| -v).collect(),
        }
    }

    /// Velocity rescaled to unit Euclidean length.
    pub fn normalized(&self) -> Self {
        let s = self.speed();
        TangentState {
            x: self.x.clone(),
            y: self.y.iter().map(|v| v / s).collect(),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}
