//! The reader-side domain ontology: concepts, `isA` subsumption and facet
//! grounding.
//!
//! The source format is one triple per line:
//!
//! ```text
//! # comment
//! SUV isA Car
//! SUV label "sport utility vehicle"
//! SUV facetOf BodyStyle=SUV
//! TrendyCar relatedTo SportsCar
//! Auto sameAs Car
//! ```
//!
//! Concepts are declared by appearing in any triple. Every concept gets a
//! default label derived from its id (`SportsCar` becomes `sports car`).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_tag, NormalizedTag};
use crate::error::{Error, Result};
use crate::taxonomy::{FacetValueRef, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub labels: BTreeSet<NormalizedTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Predicate {
    #[serde(rename = "isA")]
    IsA,
    #[serde(rename = "relatedTo")]
    RelatedTo,
    #[serde(rename = "facetOf")]
    FacetOf,
    #[serde(rename = "sameAs")]
    SameAs,
}

impl Predicate {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "isA" => Self::IsA,
            "relatedTo" => Self::RelatedTo,
            "facetOf" => Self::FacetOf,
            "sameAs" => Self::SameAs,
            _ => return None,
        })
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::IsA => "isA",
            Self::RelatedTo => "relatedTo",
            Self::FacetOf => "facetOf",
            Self::SameAs => "sameAs",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeObject {
    Concept(String),
    FacetValue(FacetValueRef),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OntologyEdge {
    pub subject: String,
    pub predicate: Predicate,
    pub object: EdgeObject,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    concepts: BTreeMap<String, Concept>,
    parents: BTreeMap<String, BTreeSet<String>>,
    related: BTreeSet<(String, String)>,
    same_as: BTreeSet<(String, String)>,
    groundings: BTreeMap<FacetValueRef, BTreeSet<String>>,
    grounded_by: BTreeMap<String, BTreeSet<FacetValueRef>>,
    depth: usize,
    pub version: u64,
}

/// Splits a concept id at case boundaries: `SportsCar` -> `sports car`,
/// `CompactSUV` -> `compact suv`, `HummerH1` -> `hummer h1`.
pub fn label_from_id(id: &str) -> String {
    let chars: Vec<char> = id.chars().collect();
    let mut out = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' || c == '-' {
            out.push(' ');
            continue;
        }
        if i > 0 && c.is_uppercase() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower) {
                out.push(' ');
            }
        }
        out.push(c);
    }
    out
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses and validates an ontology. When a taxonomy is supplied, every
    /// `facetOf` object must name one of its values.
    pub fn parse(text: &str, taxonomy: Option<&Taxonomy>) -> Result<Self> {
        let mut o = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (subject, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| parse_error(lineno, "expected `subject predicate object`"))?;
            let rest = rest.trim_start();
            let (predicate, object) = rest
                .split_once(char::is_whitespace)
                .map(|(p, o)| (p, o.trim()))
                .ok_or_else(|| parse_error(lineno, "expected `subject predicate object`"))?;
            if predicate == "label" {
                let text = object
                    .strip_prefix('"')
                    .and_then(|s| s.strip_suffix('"'))
                    .unwrap_or(object);
                let label = normalize_tag(text).map_err(|_| parse_error(lineno, "empty label"))?;
                o.declare(subject).labels.insert(label);
                continue;
            }
            if object.split_whitespace().count() != 1 {
                return Err(parse_error(lineno, format!("malformed object `{object}`")));
            }
            let predicate = Predicate::parse(predicate)
                .ok_or_else(|| parse_error(lineno, format!("unknown predicate `{predicate}`")))?;
            o.declare(subject);
            match predicate {
                Predicate::FacetOf => {
                    let fv: FacetValueRef = object
                        .parse()
                        .map_err(|e: Error| parse_error(lineno, e.to_string()))?;
                    if let Some(t) = taxonomy {
                        if !t.contains(&fv) {
                            return Err(Error::DanglingReference(format!(
                                "line {lineno}: `{line}`: facet value {fv} not in taxonomy"
                            )));
                        }
                    }
                    o.groundings
                        .entry(fv.clone())
                        .or_default()
                        .insert(subject.to_string());
                    o.grounded_by
                        .entry(subject.to_string())
                        .or_default()
                        .insert(fv);
                }
                _ => {
                    o.declare(object);
                    let (s, t) = (subject.to_string(), object.to_string());
                    match predicate {
                        Predicate::IsA => {
                            o.parents.entry(s).or_default().insert(t);
                        }
                        Predicate::RelatedTo => {
                            o.related.insert((s, t));
                        }
                        Predicate::SameAs => {
                            o.same_as.insert((s.clone(), t.clone()));
                            o.same_as.insert((t, s));
                        }
                        Predicate::FacetOf => unreachable!(),
                    }
                }
            }
        }
        if let Some(cycle) = o.find_isa_cycle() {
            return Err(Error::CycleDetected(cycle));
        }
        o.depth = o.compute_depth();
        Ok(o)
    }

    fn declare(&mut self, id: &str) -> &mut Concept {
        self.concepts.entry(id.to_string()).or_insert_with(|| {
            let mut labels = BTreeSet::new();
            if let Ok(l) = normalize_tag(&label_from_id(id)) {
                labels.insert(l);
            }
            Concept {
                id: id.to_string(),
                labels,
            }
        })
    }

    fn find_isa_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        fn visit<'a>(
            o: &'a Ontology,
            node: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            match marks.get(node) {
                Some(Mark::Done) => return None,
                Some(Mark::Open) => {
                    let start = stack.iter().position(|n| *n == node).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(node.to_string());
                    return Some(cycle);
                }
                None => {}
            }
            marks.insert(node, Mark::Open);
            stack.push(node);
            for p in o.parents.get(node).into_iter().flatten() {
                if let Some(c) = visit(o, p, marks, stack) {
                    return Some(c);
                }
            }
            stack.pop();
            marks.insert(node, Mark::Done);
            None
        }
        let mut marks = BTreeMap::new();
        for id in self.concepts.keys() {
            if let Some(c) = visit(self, id, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
        None
    }

    // Longest isA chain, in edges.
    fn compute_depth(&self) -> usize {
        fn height<'a>(
            o: &'a Ontology,
            node: &'a str,
            memo: &mut BTreeMap<&'a str, usize>,
        ) -> usize {
            if let Some(&h) = memo.get(node) {
                return h;
            }
            let h = o
                .parents
                .get(node)
                .into_iter()
                .flatten()
                .map(|p| 1 + height(o, p, memo))
                .max()
                .unwrap_or(0);
            memo.insert(node, h);
            h
        }
        let mut memo = BTreeMap::new();
        self.concepts
            .keys()
            .map(|id| height(self, id, &mut memo))
            .max()
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Concepts in ascending id order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn concept(&self, id: &str) -> Result<&Concept> {
        self.concepts
            .get(id)
            .ok_or_else(|| Error::UnknownConcept(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.concepts.contains_key(id)
    }

    /// Length of the longest `isA` chain.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn parents(&self, id: &str) -> impl Iterator<Item = &str> {
        self.parents
            .get(id)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    pub fn is_same_as(&self, a: &str, b: &str) -> bool {
        self.same_as.contains(&(a.to_string(), b.to_string()))
    }

    /// All edges, sorted.
    pub fn edges(&self) -> Vec<OntologyEdge> {
        let mut out = Vec::new();
        for (child, parents) in &self.parents {
            for p in parents {
                out.push(OntologyEdge {
                    subject: child.clone(),
                    predicate: Predicate::IsA,
                    object: EdgeObject::Concept(p.clone()),
                });
            }
        }
        for (pred, set) in [
            (Predicate::RelatedTo, &self.related),
            (Predicate::SameAs, &self.same_as),
        ] {
            for (s, o) in set {
                out.push(OntologyEdge {
                    subject: s.clone(),
                    predicate: pred,
                    object: EdgeObject::Concept(o.clone()),
                });
            }
        }
        for (fv, concepts) in &self.groundings {
            for c in concepts {
                out.push(OntologyEdge {
                    subject: c.clone(),
                    predicate: Predicate::FacetOf,
                    object: EdgeObject::FacetValue(fv.clone()),
                });
            }
        }
        out.sort();
        out
    }

    /// `general` is reachable from `specific` through zero or more `isA`
    /// edges.
    pub fn subsumes(&self, general: &str, specific: &str) -> Result<bool> {
        self.concept(general)?;
        self.concept(specific)?;
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([specific]);
        while let Some(n) = queue.pop_front() {
            if n == general {
                return Ok(true);
            }
            if seen.insert(n) {
                queue.extend(self.parents(n));
            }
        }
        Ok(false)
    }

    /// Shortest undirected `isA` path length divided by twice the hierarchy
    /// depth, clamped to 1. Disconnected pairs score 1; identical or `sameAs`
    /// pairs score 0.
    pub fn path_distance(&self, a: &str, b: &str) -> Result<f64> {
        self.concept(a)?;
        self.concept(b)?;
        if a == b || self.is_same_as(a, b) {
            return Ok(0.0);
        }
        if self.depth == 0 {
            return Ok(1.0);
        }
        let mut dist: BTreeMap<&str, usize> = BTreeMap::from([(a, 0)]);
        let mut queue = VecDeque::from([a]);
        while let Some(n) = queue.pop_front() {
            let d = dist[n];
            if n == b {
                let norm = d as f64 / (2 * self.depth) as f64;
                return Ok(norm.min(1.0));
            }
            for m in self.undirected_neighbors(n) {
                if !dist.contains_key(m) {
                    dist.insert(m, d + 1);
                    queue.push_back(m);
                }
            }
        }
        Ok(1.0)
    }

    fn undirected_neighbors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        let up = self.parents(id);
        let down = self
            .parents
            .iter()
            .filter(move |(_, ps)| ps.contains(id))
            .map(|(c, _)| c.as_str());
        up.chain(down)
    }

    /// Facet values a concept grounds through `facetOf`.
    pub fn grounded_values(&self, id: &str) -> impl Iterator<Item = &FacetValueRef> {
        self.grounded_by.get(id).into_iter().flatten()
    }

    pub fn concept_for_facet_value(&self, v: &FacetValueRef) -> Result<&Concept> {
        let set = self
            .groundings
            .get(v)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::UngroundedFacetValue(v.clone()))?;
        if set.len() > 1 {
            return Err(Error::AmbiguousGrounding {
                value: v.clone(),
                concepts: set.iter().cloned().collect(),
            });
        }
        let id = set.iter().next().expect("nonempty");
        self.concept(id)
    }

    /// Facet values whose `facetOf` objects are missing from `taxonomy`.
    pub fn dangling_groundings(&self, taxonomy: &Taxonomy) -> Vec<FacetValueRef> {
        self.groundings
            .keys()
            .filter(|v| !taxonomy.contains(v))
            .cloned()
            .collect()
    }
}
