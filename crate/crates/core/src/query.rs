//! Personalized faceted search over a session's pinned view.
//!
//! A resource is a candidate when it matches a query tag lexically or when
//! one of its annotations is reachable through the session's joint meaning.
//! Scores blend both signals:
//!
//! ```text
//! score = alpha * matched_tags / query_tags + beta * supporting_links / |J|
//! ```
//!
//! Filters are applied after scoring (post-coordination). Hits are ordered by
//! descending score, then descending popularity (number of tag assignments on
//! the resource), then ascending id.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_tag, words, NormalizedTag, Resource};
use crate::error::{Error, Result};
use crate::joint::{CandidateLink, JointMeaning, Session};
use crate::ontology::Ontology;
use crate::taxonomy::{Annotation, FacetModel, FacetValueRef, Taxonomy};

/// Function words dropped from query text.
pub const STOPWORDS: [&str; 12] = [
    "a", "an", "and", "for", "i", "i'm", "in", "is", "me", "of", "the", "to",
];

/// Query tags for free text: every word that is not a stopword, every
/// maximal run of such words, and the whole stopword-free phrase.
pub fn tokenize(text: &str) -> Result<BTreeSet<NormalizedTag>> {
    let mut tags = BTreeSet::new();
    let mut kept = Vec::new();
    let mut run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, tags: &mut BTreeSet<NormalizedTag>| {
        if run.len() > 1 {
            tags.extend(normalize_tag(&run.join(" ")).ok());
        }
        run.clear();
    };
    for w in words(text) {
        if STOPWORDS.contains(&w.as_str()) {
            flush(&mut run, &mut tags);
            continue;
        }
        tags.extend(normalize_tag(&w).ok());
        kept.push(w.clone());
        run.push(w);
    }
    flush(&mut run, &mut tags);
    if kept.is_empty() {
        return Err(Error::EmptyQuery);
    }
    tags.extend(normalize_tag(&kept.join(" ")).ok());
    Ok(tags)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    #[serde(default)]
    pub filters: Vec<FacetValueRef>,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            filters: Vec::new(),
        }
    }

    pub fn with_filter(mut self, value: FacetValueRef) -> Self {
        self.filters.push(value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultHit {
    pub resource: Resource,
    pub score: f64,
    pub annotations: BTreeSet<Annotation>,
    pub support_links: Vec<CandidateLink>,
}

/// group -> value -> number of hits carrying it.
pub type FacetCounts = BTreeMap<String, BTreeMap<String, usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub hits: Vec<ResultHit>,
    pub joint_meaning: JointMeaning,
    pub warnings: Vec<String>,
}

/// Whether `link` reaches `annotation`: the annotation is the link's own
/// speaker claim, or its facet value is grounded by the link's concept.
pub fn link_supports(link: &CandidateLink, annotation: &Annotation, ontology: &Ontology) -> bool {
    (annotation.value == link.pair.facet_value && annotation.speaker_id == link.pair.speaker_id)
        || ontology
            .concept_for_facet_value(&annotation.value)
            .is_ok_and(|c| c.id == link.concept)
}

/// Runs `query` in `session` and logs it as one query turn.
pub fn search(session: &mut Session, query: &Query) -> Result<SearchOutcome> {
    let tags = tokenize(&query.text)?;
    let view = session.view().clone();
    for f in &query.filters {
        view.facets.taxonomy.require(f)?;
    }
    let (jm, warnings) = session.compute_joint_meaning(&tags)?;
    session.log_query(&query.text);

    let corpus = &view.corpus;
    let facets: &FacetModel = &view.facets;

    let mut lexical: BTreeMap<&str, usize> = BTreeMap::new();
    for tag in &tags {
        let mut matched = corpus.resources_with_phrase(&words(tag.as_str()));
        matched.extend(corpus.resources_with_tag(tag));
        for r in matched {
            *lexical.entry(r).or_default() += 1;
        }
    }

    // Resources reachable from each link, found through the tag index.
    let mut support: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, link) in jm.links.iter().enumerate() {
        let mut reached = BTreeSet::new();
        let own = &link.pair;
        for p in facets.associations.pairs() {
            let via_claim = p.facet_value == own.facet_value && p.speaker_id == own.speaker_id;
            let via_concept = view
                .ontology
                .concept_for_facet_value(&p.facet_value)
                .is_ok_and(|c| c.id == link.concept);
            if via_claim || via_concept {
                reached.extend(corpus.resources_with_tag(&p.tag));
            }
        }
        for r in reached {
            support.entry(r).or_default().push(i);
        }
    }

    let candidates: BTreeSet<&str> = lexical.keys().chain(support.keys()).copied().collect();
    let mut hits = Vec::new();
    for id in candidates {
        let Some(resource) = corpus.resource(id) else {
            continue;
        };
        let lex = lexical.get(id).copied().unwrap_or(0) as f64 / tags.len() as f64;
        let links: Vec<CandidateLink> = support
            .get(id)
            .map(|ix| ix.iter().map(|&i| jm.links[i].clone()).collect())
            .unwrap_or_default();
        let jms = if jm.is_empty() {
            0.0
        } else {
            links.len() as f64 / jm.len() as f64
        };
        let score = view.params.alpha * lex + view.params.beta * jms;
        hits.push(ResultHit {
            resource: resource.clone(),
            score,
            annotations: facets.classify(id, corpus),
            support_links: links,
        });
    }

    for f in &query.filters {
        hits.retain(|h| carries(&facets.taxonomy, h, f));
    }
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| {
                corpus
                    .popularity(&b.resource.id)
                    .cmp(&corpus.popularity(&a.resource.id))
            })
            .then_with(|| a.resource.id.cmp(&b.resource.id))
    });

    Ok(SearchOutcome {
        hits,
        joint_meaning: jm,
        warnings,
    })
}

fn carries(taxonomy: &Taxonomy, hit: &ResultHit, value: &FacetValueRef) -> bool {
    hit.annotations
        .iter()
        .any(|a| taxonomy.is_ancestor_or_self(value, &a.value))
}

/// Distinct hits per annotated value; several speakers asserting the same
/// value on one hit count once.
pub fn facet_counts(hits: &[ResultHit]) -> FacetCounts {
    let mut counts = FacetCounts::new();
    for hit in hits {
        let values: BTreeSet<&FacetValueRef> = hit.annotations.iter().map(|a| &a.value).collect();
        for v in values {
            *counts
                .entry(v.group.clone())
                .or_default()
                .entry(v.value.clone())
                .or_default() += 1;
        }
    }
    counts
}

/// Keeps hits annotated with `value` or any of its descendants, in order.
pub fn apply_filter(
    hits: &[ResultHit],
    taxonomy: &Taxonomy,
    value: &FacetValueRef,
) -> Result<Vec<ResultHit>> {
    taxonomy.require(value)?;
    Ok(hits
        .iter()
        .filter(|h| carries(taxonomy, h, value))
        .cloned()
        .collect())
}
