use serde::{Deserialize, Serialize};

use super::{FlError, Result};

/// Flat dense vector of model parameters. Always non-empty and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FlError::Empty("weight vector"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FlError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "weight vector dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(FlError::DimensionMismatch {
                expected,
                actual: self.dim(),
            })
        }
    }

    /// `self - other`, coordinate-wise.
    pub fn sub(&self, other: &WeightVector) -> Result<WeightVector> {
        other.check_dim(self.dim())?;
        WeightVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + scale * other`, coordinate-wise.
    pub fn add_scaled(&self, other: &WeightVector, scale: f64) -> Result<WeightVector> {
        other.check_dim(self.dim())?;
        WeightVector::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    pub fn distance_squared(&self, other: &WeightVector) -> Result<f64> {
        other.check_dim(self.dim())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = FlError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        WeightVector::new(values)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}
