//! Weight learning for the matcher.
//!
//! A single sigmoid unit `σ(w·d + b)` is fit by per-sample gradient descent
//! on cross-entropy, with target 0 for matching pairs and 1 for nonmatching
//! ones. Sample order is shuffled per epoch from a fixed seed, so a given
//! (pairs, config) always yields bit-identical weights. Afterwards negative
//! weights are clipped and the rest rescaled to sum to one; the bias is
//! dropped because matching thresholds the plain weighted sum.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DissimilarityVector, MatchContext, MatcherWeights, DIMENSIONS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchLabel {
    Match,
    Nonmatch,
}

impl MatchLabel {
    fn target(self) -> f64 {
        match self {
            Self::Match => 0.0,
            Self::Nonmatch => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub c1: String,
    pub c2: String,
    pub label: MatchLabel,
}

impl LabeledPair {
    pub fn new(c1: &str, c2: &str, label: MatchLabel) -> Result<Self> {
        if c1 == c2 {
            return Err(Error::InvalidRecord(format!(
                "training pair compares `{c1}` with itself"
            )));
        }
        Ok(Self {
            c1: c1.to_string(),
            c2: c2.to_string(),
            label,
        })
    }
}

/// Parses `concept1 concept2 label` lines; `#` starts a comment line.
pub fn parse_training_pairs(text: &str) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [c1, c2, label] = fields[..] else {
            return Err(err(format!(
                "expected `concept1 concept2 label`, got `{line}`"
            )));
        };
        let label = match label {
            "match" => MatchLabel::Match,
            "nonmatch" => MatchLabel::Nonmatch,
            other => return Err(err(format!("unknown label `{other}`"))),
        };
        out.push(LabeledPair::new(c1, c2, label).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 200,
            seed: 42,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn train_weights(
    pairs: &[LabeledPair],
    ctx: &MatchContext<'_>,
    config: &TrainingConfig,
    version: u64,
) -> Result<MatcherWeights> {
    let samples = pairs
        .iter()
        .map(|p| Ok((ctx.dimensions(&p.c1, &p.c2)?, p.label)))
        .collect::<Result<Vec<_>>>()?;
    train_on_vectors(&samples, config, version)
}

pub fn train_on_vectors(
    samples: &[(DissimilarityVector, MatchLabel)],
    config: &TrainingConfig,
    version: u64,
) -> Result<MatcherWeights> {
    let has = |l: MatchLabel| samples.iter().any(|(_, sl)| *sl == l);
    if !has(MatchLabel::Match) || !has(MatchLabel::Nonmatch) {
        return Err(Error::DegenerateTraining);
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }

    let mut w = [1.0 / DIMENSIONS as f64; DIMENSIONS];
    let mut bias = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (d, label) = &samples[i];
            let z: f64 = bias + w.iter().zip(d.0.iter()).map(|(w, x)| w * x).sum::<f64>();
            let err = sigmoid(z) - label.target();
            for (wi, xi) in w.iter_mut().zip(d.0.iter()) {
                *wi -= config.learning_rate * err * xi;
            }
            bias -= config.learning_rate * err;
        }
    }

    let clipped = w.map(|x| if x.is_finite() { x.max(0.0) } else { 0.0 });
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Ok(
            MatcherWeights::new([1.0 / DIMENSIONS as f64; DIMENSIONS], version)
                .expect("uniform weights are valid"),
        );
    }
    let mut normalized = clipped.map(|x| x / total);
    // Put any rounding residue on the largest component.
    let residue = 1.0 - normalized.iter().sum::<f64>();
    let imax = (0..DIMENSIONS)
        .max_by(|&a, &b| normalized[a].total_cmp(&normalized[b]))
        .unwrap_or(0);
    normalized[imax] += residue;
    MatcherWeights::new(normalized, version)
}
