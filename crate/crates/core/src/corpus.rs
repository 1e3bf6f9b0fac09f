//! Resources, folksonomy tag assignments and immutable corpus snapshots.
//!
//! A [`CorpusStore`] is the single writer. Every successful non-empty ingest
//! publishes a fresh [`CorpusSnapshot`] with a higher version; snapshots that
//! were handed out earlier are never touched again.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// A tag in canonical form: NFC, lowercase, trimmed, single inner spaces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NormalizedTag(String);

impl NormalizedTag {
    pub fn new(raw: &str) -> Result<Self> {
        normalize_tag(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NormalizedTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for NormalizedTag {
    type Error = Error;

    fn try_from(raw: String) -> Result<Self> {
        normalize_tag(&raw)
    }
}

impl From<NormalizedTag> for String {
    fn from(tag: NormalizedTag) -> Self {
        tag.0
    }
}

impl AsRef<str> for NormalizedTag {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

pub fn normalize_tag(raw: &str) -> Result<NormalizedTag> {
    let composed: String = raw.nfc().collect();
    let lowered = composed.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    // Lowercasing can decompose a handful of code points; recompose.
    let normalized: String = collapsed.nfc().collect();
    if normalized.is_empty() {
        return Err(Error::EmptyTag);
    }
    Ok(NormalizedTag(normalized))
}

/// Lowercased words of free text with surrounding punctuation stripped.
/// Inner apostrophes and hyphens survive (`I'm` -> `i'm`).
pub fn words(text: &str) -> Vec<String> {
    let composed: String = text.nfc().collect::<String>().to_lowercase();
    composed
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentType {
    Text,
    Image,
    Video,
    Audio,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub id: String,
    pub title: String,
    pub body: String,
    pub content_type: ContentType,
}

/// Assignment as it appears in an ingest file, before tag normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub user_id: String,
    pub resource_id: String,
    pub tag: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagAssignment {
    pub user_id: String,
    pub resource_id: String,
    pub tag: NormalizedTag,
    pub timestamp: DateTime<Utc>,
}

type AssignmentKey = (String, String, NormalizedTag);

const TITLE: u8 = 0;
const BODY: u8 = 1;

// word -> resource -> (field, position)
type Postings = BTreeMap<String, BTreeMap<String, Vec<(u8, u32)>>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSnapshot {
    version: u64,
    resources: BTreeMap<String, Resource>,
    assignments: BTreeMap<AssignmentKey, DateTime<Utc>>,
    by_tag: BTreeMap<NormalizedTag, BTreeSet<(String, String)>>,
    by_resource: BTreeMap<String, BTreeMap<NormalizedTag, usize>>,
    postings: Postings,
}

impl CorpusSnapshot {
    fn build(
        version: u64,
        resources: BTreeMap<String, Resource>,
        assignments: BTreeMap<AssignmentKey, DateTime<Utc>>,
    ) -> Self {
        let mut by_tag: BTreeMap<NormalizedTag, BTreeSet<(String, String)>> = BTreeMap::new();
        let mut by_resource: BTreeMap<String, BTreeMap<NormalizedTag, usize>> = BTreeMap::new();
        for (user, resource, tag) in assignments.keys() {
            by_tag
                .entry(tag.clone())
                .or_default()
                .insert((user.clone(), resource.clone()));
            *by_resource
                .entry(resource.clone())
                .or_default()
                .entry(tag.clone())
                .or_default() += 1;
        }
        let mut postings: Postings = BTreeMap::new();
        for r in resources.values() {
            for (field, text) in [(TITLE, &r.title), (BODY, &r.body)] {
                for (pos, w) in words(text).into_iter().enumerate() {
                    postings
                        .entry(w)
                        .or_default()
                        .entry(r.id.clone())
                        .or_default()
                        .push((field, pos as u32));
                }
            }
        }
        Self {
            version,
            resources,
            assignments,
            by_tag,
            by_resource,
            postings,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn resource_count(&self) -> usize {
        self.resources.len()
    }

    pub fn assignment_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn resource(&self, id: &str) -> Option<&Resource> {
        self.resources.get(id)
    }

    /// Resources in ascending id order.
    pub fn resources(&self) -> impl Iterator<Item = &Resource> {
        self.resources.values()
    }

    pub fn assignments(&self) -> impl Iterator<Item = TagAssignment> + '_ {
        self.assignments
            .iter()
            .map(|((user, resource, tag), ts)| TagAssignment {
                user_id: user.clone(),
                resource_id: resource.clone(),
                tag: tag.clone(),
                timestamp: *ts,
            })
    }

    /// Number of distinct (user, resource) pairs carrying `tag`.
    pub fn tag_frequency(&self, tag: &NormalizedTag) -> usize {
        self.by_tag.get(tag).map_or(0, BTreeSet::len)
    }

    /// Ids of resources carrying `tag` from any user.
    pub fn resources_with_tag(&self, tag: &NormalizedTag) -> BTreeSet<&str> {
        self.by_tag
            .get(tag)
            .map(|set| set.iter().map(|(_, r)| r.as_str()).collect())
            .unwrap_or_default()
    }

    /// Distinct tags on a resource.
    pub fn tags_of(&self, resource_id: &str) -> impl Iterator<Item = &NormalizedTag> {
        self.by_resource
            .get(resource_id)
            .into_iter()
            .flat_map(|tags| tags.keys())
    }

    /// Number of (user, tag) assignments on a resource.
    pub fn popularity(&self, resource_id: &str) -> usize {
        self.by_resource
            .get(resource_id)
            .map_or(0, |tags| tags.values().sum())
    }

    /// Resources whose title or body contains `phrase` as a contiguous word
    /// sequence.
    pub fn resources_with_phrase(&self, phrase: &[String]) -> BTreeSet<&str> {
        let Some((first, rest)) = phrase.split_first() else {
            return BTreeSet::new();
        };
        let Some(starts) = self.postings.get(first) else {
            return BTreeSet::new();
        };
        let mut out = BTreeSet::new();
        for (resource, occurrences) in starts {
            let found = occurrences.iter().any(|&(field, pos)| {
                rest.iter().enumerate().all(|(k, w)| {
                    self.postings
                        .get(w)
                        .and_then(|m| m.get(resource))
                        .is_some_and(|occ| occ.contains(&(field, pos + 1 + k as u32)))
                })
            });
            if found {
                out.insert(resource.as_str());
            }
        }
        out
    }

    /// Every distinct user id seen in assignments.
    pub fn users(&self) -> BTreeSet<&str> {
        self.assignments
            .keys()
            .map(|(u, _, _)| u.as_str())
            .collect()
    }
}

/// Single-writer owner of the current corpus.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    current: Arc<CorpusSnapshot>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a store from previously persisted records, keeping `version`.
    pub fn restore(
        resources: Vec<Resource>,
        assignments: Vec<AssignmentRecord>,
        version: u64,
    ) -> Result<Self> {
        let mut store = Self::new();
        store.ingest(resources, assignments)?;
        let snap = Arc::make_mut(&mut store.current);
        snap.version = version;
        Ok(store)
    }

    pub fn snapshot(&self) -> Arc<CorpusSnapshot> {
        Arc::clone(&self.current)
    }

    pub fn ingest_resources(&mut self, records: Vec<Resource>) -> Result<usize> {
        Ok(self.ingest(records, Vec::new())?.0)
    }

    pub fn ingest_assignments(&mut self, records: Vec<AssignmentRecord>) -> Result<usize> {
        Ok(self.ingest(Vec::new(), records)?.1)
    }

    /// Ingests one batch atomically: either every record is accepted or the
    /// current snapshot is left untouched. Returns the accepted resource and
    /// assignment counts. The version advances only when the data changes.
    pub fn ingest(
        &mut self,
        resources: Vec<Resource>,
        assignments: Vec<AssignmentRecord>,
    ) -> Result<(usize, usize)> {
        if resources.is_empty() && assignments.is_empty() {
            return Ok((0, 0));
        }

        let mut batch_ids = BTreeSet::new();
        for r in &resources {
            if r.id.is_empty() {
                return Err(Error::InvalidRecord("resource id is empty".into()));
            }
            if !batch_ids.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }

        let mut batch: BTreeMap<AssignmentKey, DateTime<Utc>> = BTreeMap::new();
        for a in &assignments {
            if !batch_ids.contains(a.resource_id.as_str())
                && self.current.resource(&a.resource_id).is_none()
            {
                return Err(Error::DanglingReference(format!(
                    "assignment by `{}` references unknown resource `{}`",
                    a.user_id, a.resource_id
                )));
            }
            let tag = normalize_tag(&a.tag)?;
            let key = (a.user_id.clone(), a.resource_id.clone(), tag);
            batch
                .entry(key)
                .and_modify(|ts| *ts = (*ts).min(a.timestamp))
                .or_insert(a.timestamp);
        }

        let accepted = (resources.len(), batch.len());
        let mut all_resources = self.current.resources.clone();
        for r in resources {
            all_resources.insert(r.id.clone(), r);
        }
        let mut all_assignments = self.current.assignments.clone();
        for (key, ts) in batch {
            all_assignments
                .entry(key)
                .and_modify(|old| *old = (*old).min(ts))
                .or_insert(ts);
        }
        // Re-ingesting records already present publishes nothing new.
        if all_resources == self.current.resources && all_assignments == self.current.assignments {
            return Ok(accepted);
        }
        self.current = Arc::new(CorpusSnapshot::build(
            self.current.version + 1,
            all_resources,
            all_assignments,
        ));
        Ok(accepted)
    }
}
