//! Learned concept matcher.
//!
//! Two concepts are compared along four independent aspects, each a
//! dissimilarity in `[0, 1]`:
//!
//! | dim | aspect        | measure                                                   |
//! |-----|---------------|-----------------------------------------------------------|
//! | d1  | lexical       | normalized Levenshtein distance of the closest label pair |
//! | d2  | distributional| 1 − Jaccard of the resources tagged with the labels       |
//! | d3  | structural    | normalized `isA` path distance                            |
//! | d4  | taxonomic     | 1 − Jaccard of facet values associated with the labels    |
//!
//! The aggregate is the weighted sum under [`MatcherWeights`], which are
//! learned from labelled concept pairs (see [`train`]). Matching is a rule
//! layer (identity, `sameAs`) followed by a threshold on the aggregate.

mod superconcept;
pub mod train;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSnapshot, NormalizedTag};
use crate::error::{Error, Result};
use crate::ontology::{Concept, Ontology};
use crate::taxonomy::{AssociationSet, FacetValueRef, TagFacetPair};

pub use superconcept::{form_superconcepts, Superconcept};
pub use train::{train_on_vectors, train_weights, LabeledPair, MatchLabel, TrainingConfig};

pub const DIMENSIONS: usize = 4;
pub const DEFAULT_THETA: f64 = 0.35;
const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityVector(pub [f64; DIMENSIONS]);

impl DissimilarityVector {
    pub const ZERO: Self = Self([0.0; DIMENSIONS]);

    pub fn new(d: [f64; DIMENSIONS]) -> Result<Self> {
        if d.iter().all(|x| (0.0..=1.0).contains(x)) {
            Ok(Self(d))
        } else {
            Err(Error::InvalidRecord(format!(
                "dissimilarities must lie in [0, 1]: {d:?}"
            )))
        }
    }

    pub fn label(&self) -> f64 {
        self.0[0]
    }

    pub fn cooccurrence(&self) -> f64 {
        self.0[1]
    }

    pub fn ontology(&self) -> f64 {
        self.0[2]
    }

    pub fn facet_overlap(&self) -> f64 {
        self.0[3]
    }
}

/// Relative weights of the four dimensions: nonnegative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MatcherWeights {
    w: [f64; DIMENSIONS],
    version: u64,
}

impl Default for MatcherWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

impl MatcherWeights {
    pub fn new(w: [f64; DIMENSIONS], version: u64) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weights must be nonnegative: {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self { w, version })
    }

    pub fn uniform() -> Self {
        Self {
            w: [0.25; DIMENSIONS],
            version: 0,
        }
    }

    pub fn weights(&self) -> [f64; DIMENSIONS] {
        self.w
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn to_record(&self, theta: f64) -> WeightsRecord {
        WeightsRecord {
            w1: self.w[0],
            w2: self.w[1],
            w3: self.w[2],
            w4: self.w[3],
            version: self.version,
            theta,
        }
    }
}

/// Persisted form of trained weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightsRecord {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub version: u64,
    pub theta: f64,
}

impl WeightsRecord {
    pub fn weights(&self) -> Result<MatcherWeights> {
        MatcherWeights::new([self.w1, self.w2, self.w3, self.w4], self.version)
    }
}

pub fn dissimilarity(vec: &DissimilarityVector, w: &MatcherWeights) -> f64 {
    let sum: f64 = vec.0.iter().zip(w.w.iter()).map(|(d, w)| d * w).sum();
    sum.clamp(0.0, 1.0)
}

struct Evidence<'a> {
    labels: Vec<&'a str>,
    resources: BTreeSet<&'a str>,
    facets: BTreeSet<FacetValueRef>,
}

/// Read-only view the matcher measures against, with per-concept evidence
/// gathered once up front.
pub struct MatchContext<'a> {
    pub corpus: &'a CorpusSnapshot,
    pub associations: &'a AssociationSet,
    pub ontology: &'a Ontology,
    evidence: BTreeMap<&'a str, Evidence<'a>>,
}

impl<'a> MatchContext<'a> {
    pub fn new(
        corpus: &'a CorpusSnapshot,
        associations: &'a AssociationSet,
        ontology: &'a Ontology,
    ) -> Self {
        let evidence = ontology
            .concepts()
            .map(|c| {
                let mut resources = BTreeSet::new();
                let mut facets = BTreeSet::new();
                for label in &c.labels {
                    resources.extend(corpus.resources_with_tag(label));
                    facets.extend(associations.values_for(label));
                }
                let ev = Evidence {
                    labels: c.labels.iter().map(NormalizedTag::as_str).collect(),
                    resources,
                    facets,
                };
                (c.id.as_str(), ev)
            })
            .collect();
        Self {
            corpus,
            associations,
            ontology,
            evidence,
        }
    }

    fn evidence(&self, id: &str) -> Result<&Evidence<'a>> {
        self.evidence
            .get(id)
            .ok_or_else(|| Error::UnknownConcept(id.to_string()))
    }

    pub fn dimensions(&self, c1: &str, c2: &str) -> Result<DissimilarityVector> {
        let e1 = self.evidence(c1)?;
        let e2 = self.evidence(c2)?;
        if c1 == c2 {
            return Ok(DissimilarityVector::ZERO);
        }
        let d1 = closest_label_distance(&e1.labels, &e2.labels);
        let d2 = jaccard_distance(&e1.resources, &e2.resources);
        let d3 = self.ontology.path_distance(c1, c2)?;
        let d4 = jaccard_distance(&e1.facets, &e2.facets);
        Ok(DissimilarityVector([d1, d2, d3, d4]))
    }

    pub fn dissimilarity(&self, c1: &str, c2: &str, w: &MatcherWeights) -> Result<f64> {
        Ok(dissimilarity(&self.dimensions(c1, c2)?, w))
    }

    pub fn is_match(&self, c1: &str, c2: &str, w: &MatcherWeights, theta: f64) -> Result<bool> {
        self.ontology.concept(c1)?;
        self.ontology.concept(c2)?;
        if c1 == c2 || self.ontology.is_same_as(c1, c2) {
            return Ok(true);
        }
        Ok(self.dissimilarity(c1, c2, w)? <= theta)
    }

    /// Concept whose closest label is nearest to `tag`, with that label
    /// distance. Ties go to the smaller concept id.
    pub fn closest_concept(&self, tag: &str) -> Option<(&'a Concept, f64)> {
        let mut best: Option<(&'a Concept, f64)> = None;
        for c in self.ontology.concepts() {
            let labels: Vec<&str> = c.labels.iter().map(NormalizedTag::as_str).collect();
            let d = closest_label_distance(&[tag], &labels);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        best
    }

    /// Concept a tag stands for, if some label lies within `theta` of it.
    pub fn resolve_tag(&self, tag: &str, theta: f64) -> Option<&'a Concept> {
        self.closest_concept(tag)
            .filter(|(_, d)| *d <= theta)
            .map(|(c, _)| c)
    }

    /// Concept a pair's tag stands for: the closest-label concept, falling
    /// back to the concept grounding the pair's facet value.
    pub fn tag_concept(&self, pair: &TagFacetPair) -> Option<&'a Concept> {
        self.closest_concept(pair.tag.as_str())
            .map(|(c, _)| c)
            .or_else(|| {
                self.ontology
                    .concept_for_facet_value(&pair.facet_value)
                    .ok()
            })
    }

    /// Picks the candidate whose pair's tag concept is least dissimilar to
    /// the candidate concept. Ties break on (concept id, tag).
    pub fn disambiguate<'c>(
        &self,
        candidates: &'c [(TagFacetPair, String)],
        w: &MatcherWeights,
    ) -> Result<&'c (TagFacetPair, String)> {
        let mut best: Option<(&'c (TagFacetPair, String), f64)> = None;
        for cand in candidates {
            let (pair, concept) = cand;
            let d = match self.tag_concept(pair) {
                Some(tc) => self.dissimilarity(&tc.id, concept, w)?,
                None => {
                    self.ontology.concept(concept)?;
                    1.0
                }
            };
            let better = match best {
                None => true,
                Some(((bp, bc), bd)) => d < bd || (d == bd && (concept, &pair.tag) < (bc, &bp.tag)),
            };
            if better {
                best = Some((cand, d));
            }
        }
        best.map(|(c, _)| c).ok_or(Error::EmptyCandidates)
    }
}

/// Minimum over label pairs of `levenshtein / max(len)`; 1 when either side
/// has no labels.
fn closest_label_distance(a: &[&str], b: &[&str]) -> f64 {
    let mut best: f64 = 1.0;
    for x in a {
        for y in b {
            let longest = x.chars().count().max(y.chars().count());
            let d = if longest == 0 {
                0.0
            } else {
                strsim::levenshtein(x, y) as f64 / longest as f64
            };
            best = best.min(d);
        }
    }
    best
}

/// 1 − |A ∩ B| / |A ∪ B|; two empty sets carry no evidence and score 1.
fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    1.0 - inter as f64 / union as f64
}
