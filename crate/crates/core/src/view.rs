use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusSnapshot;
use crate::error::{Error, Result};
use crate::matcher::{MatchContext, MatcherWeights, DEFAULT_THETA};
use crate::ontology::Ontology;
use crate::taxonomy::FacetModel;

/// Match threshold and score blend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha and beta must be nonnegative, got {} and {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Versions a session is pinned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinnedVersions {
    pub corpus: u64,
    pub facets: u64,
    pub ontology: u64,
    pub weights: u64,
}

/// One consistent set of published, immutable data. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct KnowledgeView {
    pub corpus: Arc<CorpusSnapshot>,
    pub facets: Arc<FacetModel>,
    pub ontology: Arc<Ontology>,
    pub weights: Arc<MatcherWeights>,
    pub params: SearchParams,
}

impl KnowledgeView {
    pub fn versions(&self) -> PinnedVersions {
        PinnedVersions {
            corpus: self.corpus.version(),
            facets: self.facets.version,
            ontology: self.ontology.version,
            weights: self.weights.version(),
        }
    }

    pub fn match_context(&self) -> MatchContext<'_> {
        MatchContext::new(&self.corpus, &self.facets.associations, &self.ontology)
    }
}
