//! Joint meaning: the subset of speaker tag–facet pairs × ontology concepts
//! that survives the reader's commitments.
//!
//! Computation has two stages. [`candidate_links`] proposes every
//! (pair, concept) whose pair's tag matches the query and whose concept lies
//! within the match threshold of the concept grounding the pair's facet
//! value. [`fixpoint`] then shrinks that set until stable:
//!
//! 1. a link is dropped when its concept grounds a facet value that
//!    conflicts with a committed value;
//! 2. a pair whose anchor link (the link to its own grounding concept) has
//!    been dropped is orphaned, and all its links go with it.
//!
//! Both rules only ever delete, so the greatest fixpoint is reached after at
//! most `|L0|` productive rounds.

mod session;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::NormalizedTag;
use crate::error::{Error, Result};
use crate::matcher::{MatchContext, MatcherWeights};
use crate::ontology::Ontology;
use crate::taxonomy::{FacetValueRef, TagFacetPair, Taxonomy};

pub use session::{Commitment, Session, SessionRecord, Turn, TurnAction};

/// One (pair, concept) element of the candidate relation. Identity is the
/// (pair, concept) key; `dissimilarity` and `grounding` are derived from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateLink {
    pub pair: TagFacetPair,
    pub concept: String,
    pub dissimilarity: f64,
    /// Concept grounding `pair.facet_value`.
    pub grounding: String,
}

impl CandidateLink {
    pub fn is_anchor(&self) -> bool {
        self.concept == self.grounding
    }

    fn key(&self) -> (&TagFacetPair, &str) {
        (&self.pair, &self.concept)
    }
}

impl PartialEq for CandidateLink {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for CandidateLink {}

impl PartialOrd for CandidateLink {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CandidateLink {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JointMeaning {
    /// Sorted, no duplicates.
    pub links: Vec<CandidateLink>,
    pub fixpoint_iterations: usize,
}

impl JointMeaning {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Distinct pairs that still have at least one link.
    pub fn pairs(&self) -> BTreeSet<&TagFacetPair> {
        self.links.iter().map(|l| &l.pair).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    pub links: Vec<CandidateLink>,
    /// Facet values skipped because no single concept grounds them.
    pub warnings: Vec<String>,
}

/// Whether a speaker's tag answers a query tag: exact equality, or both
/// resolve to concepts that match.
struct TagMatcher<'c, 'a> {
    ctx: &'c MatchContext<'a>,
    weights: &'c MatcherWeights,
    theta: f64,
    resolved: BTreeMap<String, Option<String>>,
}

impl<'c, 'a> TagMatcher<'c, 'a> {
    fn resolve(&mut self, tag: &str) -> Option<String> {
        if let Some(r) = self.resolved.get(tag) {
            return r.clone();
        }
        let r = self.ctx.resolve_tag(tag, self.theta).map(|c| c.id.clone());
        self.resolved.insert(tag.to_string(), r.clone());
        r
    }

    fn matches(&mut self, pair_tag: &str, query_tag: &str) -> Result<bool> {
        if pair_tag == query_tag {
            return Ok(true);
        }
        match (self.resolve(pair_tag), self.resolve(query_tag)) {
            (Some(a), Some(b)) => self.ctx.is_match(&a, &b, self.weights, self.theta),
            _ => Ok(false),
        }
    }
}

/// Proposes links from `pairs` (the speakers' relation) to ontology
/// concepts. Pairs whose facet value is ungrounded or ambiguously grounded
/// are skipped with a warning.
pub fn candidate_links<I>(
    query_tags: &BTreeSet<NormalizedTag>,
    pairs: I,
    ctx: &MatchContext<'_>,
    weights: &MatcherWeights,
    theta: f64,
) -> Result<CandidateSet>
where
    I: IntoIterator<Item = TagFacetPair>,
{
    let mut tags = TagMatcher {
        ctx,
        weights,
        theta,
        resolved: BTreeMap::new(),
    };
    let mut near: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut links = Vec::new();
    let mut warnings = BTreeSet::new();

    for pair in pairs {
        let mut hit = false;
        for q in query_tags {
            if tags.matches(pair.tag.as_str(), q.as_str())? {
                hit = true;
                break;
            }
        }
        if !hit {
            continue;
        }
        let grounding = match ctx.ontology.concept_for_facet_value(&pair.facet_value) {
            Ok(c) => c.id.clone(),
            Err(e @ (Error::UngroundedFacetValue(_) | Error::AmbiguousGrounding { .. })) => {
                warnings.insert(e.to_string());
                continue;
            }
            Err(e) => return Err(e),
        };
        if !near.contains_key(&grounding) {
            let mut within = Vec::new();
            for c in ctx.ontology.concepts() {
                let d = ctx.dissimilarity(&grounding, &c.id, weights)?;
                if d <= theta {
                    within.push((c.id.clone(), d));
                }
            }
            near.insert(grounding.clone(), within);
        }
        for (concept, d) in &near[&grounding] {
            links.push(CandidateLink {
                pair: pair.clone(),
                concept: concept.clone(),
                dissimilarity: *d,
                grounding: grounding.clone(),
            });
        }
    }
    links.sort();
    links.dedup();
    Ok(CandidateSet {
        links,
        warnings: warnings.into_iter().collect(),
    })
}

/// True when `concept` grounds a facet value that conflicts with one of the
/// committed values.
pub fn conflicts_with_commitments(
    concept: &str,
    commitments: &[FacetValueRef],
    taxonomy: &Taxonomy,
    ontology: &Ontology,
) -> bool {
    ontology
        .grounded_values(concept)
        .any(|g| commitments.iter().any(|v| taxonomy.conflicting(v, g)))
}

/// Greatest fixpoint of the shrinkage operator described in the module docs.
/// `fixpoint_iterations` counts rounds that deleted at least one link.
pub fn fixpoint(
    l0: Vec<CandidateLink>,
    commitments: &[FacetValueRef],
    taxonomy: &Taxonomy,
    ontology: &Ontology,
) -> JointMeaning {
    let mut links = l0;
    links.sort();
    links.dedup();

    let mut by_pair: BTreeMap<&TagFacetPair, Vec<usize>> = BTreeMap::new();
    let mut anchor: BTreeMap<&TagFacetPair, usize> = BTreeMap::new();
    for (i, l) in links.iter().enumerate() {
        by_pair.entry(&l.pair).or_default().push(i);
        if l.is_anchor() {
            anchor.insert(&l.pair, i);
        }
    }

    let mut alive = vec![true; links.len()];
    let mut concept_conflict: BTreeMap<&str, bool> = BTreeMap::new();
    let mut frontier: Vec<usize> = Vec::new();
    for (i, l) in links.iter().enumerate() {
        let c = *concept_conflict
            .entry(l.concept.as_str())
            .or_insert_with(|| {
                conflicts_with_commitments(&l.concept, commitments, taxonomy, ontology)
            });
        if c {
            frontier.push(i);
        }
    }

    let mut iterations = 0;
    while !frontier.is_empty() {
        iterations += 1;
        let mut orphaned = BTreeSet::new();
        for &i in &frontier {
            alive[i] = false;
            if anchor.get(&links[i].pair) == Some(&i) {
                orphaned.insert(&links[i].pair);
            }
        }
        frontier = orphaned
            .into_iter()
            .flat_map(|p| by_pair[p].iter().copied())
            .filter(|&i| alive[i])
            .collect();
    }

    let survivors = links
        .into_iter()
        .zip(alive)
        .filter_map(|(l, a)| a.then_some(l))
        .collect();
    JointMeaning {
        links: survivors,
        fixpoint_iterations: iterations,
    }
}
