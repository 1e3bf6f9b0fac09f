//! Reader sessions: commitments, turn log and pinned data versions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{candidate_links, fixpoint, JointMeaning};
use crate::corpus::NormalizedTag;
use crate::error::{Error, Result};
use crate::taxonomy::FacetValueRef;
use crate::view::{KnowledgeView, PinnedVersions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnAction {
    Query,
    Commit,
    Retract,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub index: u64,
    pub action: TurnAction,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    pub value: FacetValueRef,
    pub turn: u64,
}

/// Serializable session state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub reader_id: String,
    /// At most one commitment per facet group, keyed by group.
    pub commitments: BTreeMap<String, Commitment>,
    pub turn_log: Vec<Turn>,
    pub versions: PinnedVersions,
}

/// A reader's conversation with the engine. Operations on one session take
/// `&mut self`, which serializes them.
#[derive(Debug, Clone)]
pub struct Session {
    record: SessionRecord,
    view: KnowledgeView,
}

impl Session {
    pub fn open(id: impl Into<String>, reader_id: impl Into<String>, view: KnowledgeView) -> Self {
        let record = SessionRecord {
            id: id.into(),
            reader_id: reader_id.into(),
            commitments: BTreeMap::new(),
            turn_log: Vec::new(),
            versions: view.versions(),
        };
        Self { record, view }
    }

    /// Reattaches a persisted record. The view must carry exactly the
    /// versions the record was pinned to.
    pub fn restore(record: SessionRecord, view: KnowledgeView) -> Result<Self> {
        if record.versions != view.versions() {
            return Err(Error::StaleSession(record.id));
        }
        Ok(Self { record, view })
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn reader_id(&self) -> &str {
        &self.record.reader_id
    }

    pub fn record(&self) -> &SessionRecord {
        &self.record
    }

    pub fn view(&self) -> &KnowledgeView {
        &self.view
    }

    pub fn commitments(&self) -> Vec<FacetValueRef> {
        self.record
            .commitments
            .values()
            .map(|c| c.value.clone())
            .collect()
    }

    pub fn commitment(&self, group: &str) -> Option<&FacetValueRef> {
        self.record.commitments.get(group).map(|c| &c.value)
    }

    fn log(&mut self, action: TurnAction, payload: String) -> u64 {
        let index = self.record.turn_log.last().map_or(0, |t| t.index + 1);
        self.record.turn_log.push(Turn {
            index,
            action,
            payload,
        });
        index
    }

    /// Commits to a facet value. Refining the group's current commitment (or
    /// generalizing it) is allowed; switching to a conflicting value needs a
    /// retract first.
    pub fn commit(&mut self, value: FacetValueRef) -> Result<()> {
        let taxonomy = &self.view.facets.taxonomy;
        taxonomy.require(&value)?;
        if let Some(existing) = self.commitment(&value.group) {
            if taxonomy.conflicting(existing, &value) {
                return Err(Error::CommitmentConflict {
                    existing: existing.clone(),
                    requested: value,
                });
            }
        }
        let turn = self.log(TurnAction::Commit, value.to_string());
        self.record
            .commitments
            .insert(value.group.clone(), Commitment { value, turn });
        Ok(())
    }

    pub fn retract(&mut self, group: &str) -> Result<FacetValueRef> {
        let removed = self
            .record
            .commitments
            .remove(group)
            .ok_or_else(|| Error::NoSuchCommitment(group.to_string()))?;
        self.log(TurnAction::Retract, group.to_string());
        Ok(removed.value)
    }

    /// Joint meaning for `query_tags` without touching the turn log.
    pub fn compute_joint_meaning(
        &self,
        query_tags: &BTreeSet<NormalizedTag>,
    ) -> Result<(JointMeaning, Vec<String>)> {
        let view = &self.view;
        let ctx = view.match_context();
        let reader = self.reader_id();
        // The relation comes from the other users only.
        let speakers = view
            .facets
            .associations
            .pairs()
            .filter(|p| p.speaker_id != reader);
        let candidates =
            candidate_links(query_tags, speakers, &ctx, &view.weights, view.params.theta)?;
        let jm = fixpoint(
            candidates.links,
            &self.commitments(),
            &view.facets.taxonomy,
            &view.ontology,
        );
        Ok((jm, candidates.warnings))
    }

    /// Computes the joint meaning and logs the query as a turn.
    pub fn joint_meaning(&mut self, query_tags: &BTreeSet<NormalizedTag>) -> Result<JointMeaning> {
        let (jm, _) = self.compute_joint_meaning(query_tags)?;
        let payload = query_tags
            .iter()
            .map(NormalizedTag::as_str)
            .collect::<Vec<_>>()
            .join(", ");
        self.log(TurnAction::Query, payload);
        Ok(jm)
    }

    pub(crate) fn log_query(&mut self, text: &str) {
        self.log(TurnAction::Query, text.to_string());
    }
}
