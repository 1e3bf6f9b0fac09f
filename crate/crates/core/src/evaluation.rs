//! Usability evaluation matrix: per-criterion scores and weights for one
//! task, aggregated as a plain mean and as a weighted sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_RANGE: (f64, f64) = (0.0, 10.0);
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub score: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMatrix {
    pub task: String,
    pub criteria: Vec<Criterion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Empty,
    WeightSum { sum: f64 },
    ScoreRange { criterion: String, score: f64 },
    WeightRange { criterion: String, weight: f64 },
}

impl EvaluationMatrix {
    /// Every invariant violation; empty when the matrix is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.criteria.is_empty() {
            out.push(Violation::Empty);
            return out;
        }
        for c in &self.criteria {
            if !(SCORE_RANGE.0..=SCORE_RANGE.1).contains(&c.score) {
                out.push(Violation::ScoreRange {
                    criterion: c.name.clone(),
                    score: c.score,
                });
            }
            if !(0.0..=1.0).contains(&c.weight) {
                out.push(Violation::WeightRange {
                    criterion: c.name.clone(),
                    weight: c.weight,
                });
            }
        }
        let sum: f64 = self.criteria.iter().map(|c| c.weight).sum();
        if sum.is_nan() || (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            out.push(Violation::WeightSum { sum });
        }
        out
    }

    fn checked(&self) -> Result<&Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidMatrix(v))
        }
    }

    pub fn average_score(&self) -> Result<f64> {
        let m = self.checked()?;
        Ok(m.criteria.iter().map(|c| c.score).sum::<f64>() / m.criteria.len() as f64)
    }

    pub fn weighted_score(&self) -> Result<f64> {
        Ok(self.weighted_contributions()?.iter().sum())
    }

    /// `score * weight` per criterion, in criterion order.
    pub fn weighted_contributions(&self) -> Result<Vec<f64>> {
        Ok(self
            .checked()?
            .criteria
            .iter()
            .map(|c| c.score * c.weight)
            .collect())
    }
}
