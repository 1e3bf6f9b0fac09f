//! Facet groups, value hierarchies and the speaker-contributed tag–facet
//! association set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_tag, CorpusSnapshot, NormalizedTag};
use crate::error::{Error, Result};

/// A value inside a named facet group, written `group=value`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FacetValueRef {
    pub group: String,
    pub value: String,
}

impl FacetValueRef {
    pub fn new(group: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            group: group.into(),
            value: value.into(),
        }
    }
}

impl fmt::Display for FacetValueRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.group, self.value)
    }
}

impl FromStr for FacetValueRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((g, v)) if !g.trim().is_empty() && !v.trim().is_empty() => {
                Ok(Self::new(g.trim(), v.trim()))
            }
            _ => Err(Error::InvalidRecord(format!(
                "facet value `{s}` is not of the form group=value"
            ))),
        }
    }
}

/// Taxonomy file record. An empty `value` only declares the group; an empty
/// `parent` makes the value a root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyRecord {
    pub group: String,
    #[serde(default)]
    pub value: String,
    #[serde(default)]
    pub parent: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    // group -> value -> parent value
    groups: BTreeMap<String, BTreeMap<String, Option<String>>>,
}

impl Taxonomy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_group(&mut self, name: &str) -> Result<()> {
        if name.is_empty() {
            return Err(Error::InvalidRecord("facet group name is empty".into()));
        }
        if self.groups.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        self.groups.insert(name.to_string(), BTreeMap::new());
        Ok(())
    }

    pub fn add_value(
        &mut self,
        group: &str,
        value: &str,
        parent: Option<&str>,
    ) -> Result<FacetValueRef> {
        if value.is_empty() {
            return Err(Error::InvalidRecord("facet value is empty".into()));
        }
        let values = self
            .groups
            .get_mut(group)
            .ok_or_else(|| Error::DanglingReference(format!("unknown facet group `{group}`")))?;
        if values.contains_key(value) {
            return Err(Error::DuplicateName(format!("{group}={value}")));
        }
        if let Some(p) = parent {
            if p == value {
                return Err(Error::CycleDetected(vec![
                    format!("{group}={value}"),
                    format!("{group}={value}"),
                ]));
            }
            if !values.contains_key(p) {
                return Err(Error::DanglingReference(format!(
                    "parent `{p}` of `{value}` not in group `{group}`"
                )));
            }
        }
        values.insert(value.to_string(), parent.map(str::to_string));
        Ok(FacetValueRef::new(group, value))
    }

    /// Applies records in any order. Values may name parents that appear
    /// later in the batch; records identical to existing entries are no-ops.
    pub fn apply_records(&mut self, records: &[TaxonomyRecord]) -> Result<usize> {
        let mut staged = self.clone();
        let mut pending: Vec<&TaxonomyRecord> = Vec::new();
        let mut added = 0;
        for r in records {
            if !staged.groups.contains_key(&r.group) {
                staged.add_group(&r.group)?;
                added += 1;
            }
            if r.value.is_empty() {
                continue;
            }
            let parent = (!r.parent.is_empty()).then_some(r.parent.as_str());
            match staged.groups[&r.group].get(&r.value) {
                Some(existing) if existing.as_deref() == parent => {}
                Some(_) => return Err(Error::DuplicateName(format!("{}={}", r.group, r.value))),
                None => {
                    if pending
                        .iter()
                        .any(|p| p.group == r.group && p.value == r.value)
                    {
                        return Err(Error::DuplicateName(format!("{}={}", r.group, r.value)));
                    }
                    pending.push(r);
                }
            }
        }

        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for r in pending {
                let parent = (!r.parent.is_empty()).then_some(r.parent.as_str());
                let ready = parent.is_none_or(|p| staged.groups[&r.group].contains_key(p));
                if ready {
                    staged.add_value(&r.group, &r.value, parent)?;
                    added += 1;
                } else {
                    rest.push(r);
                }
            }
            if rest.len() == before {
                return Err(stuck_error(&rest));
            }
            pending = rest;
        }
        *self = staged;
        Ok(added)
    }

    pub fn from_records(records: &[TaxonomyRecord]) -> Result<Self> {
        let mut t = Self::new();
        t.apply_records(records)?;
        Ok(t)
    }

    /// Records in an order that [`Taxonomy::from_records`] accepts.
    pub fn to_records(&self) -> Vec<TaxonomyRecord> {
        let mut out = Vec::new();
        for (group, values) in &self.groups {
            if values.is_empty() {
                out.push(TaxonomyRecord {
                    group: group.clone(),
                    value: String::new(),
                    parent: String::new(),
                });
            }
            for (value, parent) in values {
                out.push(TaxonomyRecord {
                    group: group.clone(),
                    value: value.clone(),
                    parent: parent.clone().unwrap_or_default(),
                });
            }
        }
        out
    }

    pub fn groups(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    pub fn has_group(&self, group: &str) -> bool {
        self.groups.contains_key(group)
    }

    /// Values of a group with their parents.
    pub fn values(&self, group: &str) -> impl Iterator<Item = (&str, Option<&str>)> {
        self.groups
            .get(group)
            .into_iter()
            .flat_map(|vals| vals.iter().map(|(v, p)| (v.as_str(), p.as_deref())))
    }

    pub fn all_values(&self) -> impl Iterator<Item = FacetValueRef> + '_ {
        self.groups.iter().flat_map(|(g, vals)| {
            vals.keys()
                .map(move |v| FacetValueRef::new(g.as_str(), v.as_str()))
        })
    }

    pub fn contains(&self, v: &FacetValueRef) -> bool {
        self.groups
            .get(&v.group)
            .is_some_and(|vals| vals.contains_key(&v.value))
    }

    pub fn require(&self, v: &FacetValueRef) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::DanglingReference(format!("unknown facet value {v}")))
        }
    }

    pub fn parent(&self, v: &FacetValueRef) -> Option<FacetValueRef> {
        self.groups
            .get(&v.group)?
            .get(&v.value)?
            .as_ref()
            .map(|p| FacetValueRef::new(v.group.as_str(), p.as_str()))
    }

    /// `ancestor` equals `v` or lies on its parent chain.
    pub fn is_ancestor_or_self(&self, ancestor: &FacetValueRef, v: &FacetValueRef) -> bool {
        if ancestor.group != v.group {
            return false;
        }
        let mut cur = Some(v.clone());
        while let Some(c) = cur {
            if c.value == ancestor.value {
                return true;
            }
            cur = self.parent(&c);
        }
        false
    }

    pub fn descendants_or_self(&self, v: &FacetValueRef) -> BTreeSet<FacetValueRef> {
        self.all_values()
            .filter(|d| self.is_ancestor_or_self(v, d))
            .chain(std::iter::once(v.clone()))
            .collect()
    }

    /// Two values are mutually exclusive when they share a group and neither
    /// refines the other. Distinct groups are orthogonal.
    pub fn conflicting(&self, v1: &FacetValueRef, v2: &FacetValueRef) -> bool {
        v1.group == v2.group
            && !self.is_ancestor_or_self(v1, v2)
            && !self.is_ancestor_or_self(v2, v1)
    }
}

fn stuck_error(rest: &[&TaxonomyRecord]) -> Error {
    // Either a parent never shows up, or the remaining parent links loop.
    for r in rest {
        if !rest
            .iter()
            .any(|o| o.group == r.group && o.value == r.parent)
        {
            return Error::DanglingReference(format!(
                "parent `{}` of `{}={}` does not exist",
                r.parent, r.group, r.value
            ));
        }
    }
    let start = rest[0];
    let mut cycle = vec![format!("{}={}", start.group, start.value)];
    let mut seen = BTreeSet::new();
    let mut cur = start;
    while seen.insert((cur.group.as_str(), cur.value.as_str())) {
        let next = rest
            .iter()
            .find(|o| o.group == cur.group && o.value == cur.parent)
            .expect("parent present in stuck set");
        cycle.push(format!("{}={}", next.group, next.value));
        cur = next;
    }
    Error::CycleDetected(cycle)
}

/// One speaker's claim that a tag expresses a facet value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagFacetPair {
    pub tag: NormalizedTag,
    pub facet_value: FacetValueRef,
    pub speaker_id: String,
    pub asserted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub tag: String,
    pub group: String,
    pub value: String,
    pub speaker_id: String,
    pub asserted_at: DateTime<Utc>,
}

impl From<&TagFacetPair> for AssociationRecord {
    fn from(p: &TagFacetPair) -> Self {
        Self {
            tag: p.tag.to_string(),
            group: p.facet_value.group.clone(),
            value: p.facet_value.value.clone(),
            speaker_id: p.speaker_id.clone(),
            asserted_at: p.asserted_at,
        }
    }
}

type PairKey = (NormalizedTag, FacetValueRef, String);

/// The relation of tag–facet pairs, keyed by (tag, value, speaker).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssociationSet {
    pairs: BTreeMap<PairKey, DateTime<Utc>>,
}

impl AssociationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Idempotent: asserting an existing (tag, value, speaker) keeps the
    /// first assertion untouched.
    pub fn assert_pair(
        &mut self,
        taxonomy: &Taxonomy,
        tag: NormalizedTag,
        facet_value: FacetValueRef,
        speaker_id: &str,
        asserted_at: DateTime<Utc>,
    ) -> Result<TagFacetPair> {
        taxonomy.require(&facet_value)?;
        let key = (tag, facet_value, speaker_id.to_string());
        let at = *self.pairs.entry(key.clone()).or_insert(asserted_at);
        Ok(TagFacetPair {
            tag: key.0,
            facet_value: key.1,
            speaker_id: key.2,
            asserted_at: at,
        })
    }

    /// Applies a batch atomically; returns the number of distinct pairs in it.
    pub fn apply_records(
        &mut self,
        taxonomy: &Taxonomy,
        records: &[AssociationRecord],
    ) -> Result<usize> {
        let mut staged = self.clone();
        let mut keys = BTreeSet::new();
        for r in records {
            let tag = normalize_tag(&r.tag)?;
            let fv = FacetValueRef::new(r.group.as_str(), r.value.as_str());
            let p = staged.assert_pair(taxonomy, tag, fv, &r.speaker_id, r.asserted_at)?;
            keys.insert((p.tag, p.facet_value, p.speaker_id));
        }
        *self = staged;
        Ok(keys.len())
    }

    pub fn pairs(&self) -> impl Iterator<Item = TagFacetPair> + '_ {
        self.pairs
            .iter()
            .map(|((tag, fv, speaker), at)| TagFacetPair {
                tag: tag.clone(),
                facet_value: fv.clone(),
                speaker_id: speaker.clone(),
                asserted_at: *at,
            })
    }

    pub fn contains(&self, pair: &TagFacetPair) -> bool {
        let key = (
            pair.tag.clone(),
            pair.facet_value.clone(),
            pair.speaker_id.clone(),
        );
        self.pairs.get(&key) == Some(&pair.asserted_at)
    }

    /// Pairs whose tag equals `tag`, in key order.
    pub fn associations_for(&self, tag: &NormalizedTag) -> Vec<TagFacetPair> {
        let lower = (tag.clone(), FacetValueRef::new("", ""), String::new());
        self.pairs
            .range(lower..)
            .take_while(|((t, _, _), _)| t == tag)
            .map(|((t, fv, s), at)| TagFacetPair {
                tag: t.clone(),
                facet_value: fv.clone(),
                speaker_id: s.clone(),
                asserted_at: *at,
            })
            .collect()
    }

    /// Facet values any speaker associated with `tag`.
    pub fn values_for(&self, tag: &NormalizedTag) -> BTreeSet<FacetValueRef> {
        self.associations_for(tag)
            .into_iter()
            .map(|p| p.facet_value)
            .collect()
    }
}

/// A facet value attached to a resource, with the speaker who asserted the
/// underlying tag–facet pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub value: FacetValueRef,
    pub speaker_id: String,
}

pub fn classify_resource(
    resource_id: &str,
    snapshot: &CorpusSnapshot,
    associations: &AssociationSet,
) -> BTreeSet<Annotation> {
    snapshot
        .tags_of(resource_id)
        .flat_map(|tag| associations.associations_for(tag))
        .map(|p| Annotation {
            value: p.facet_value,
            speaker_id: p.speaker_id,
        })
        .collect()
}

/// Taxonomy plus association set, published together under one version.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FacetModel {
    pub taxonomy: Taxonomy,
    pub associations: AssociationSet,
    pub version: u64,
}

impl FacetModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn classify(&self, resource_id: &str, snapshot: &CorpusSnapshot) -> BTreeSet<Annotation> {
        classify_resource(resource_id, snapshot, &self.associations)
    }
}
