use thiserror::Error;

use crate::evaluation::Violation;
use crate::taxonomy::FacetValueRef;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("tag is empty after normalization")]
    EmptyTag,

    #[error("duplicate id `{0}` in batch")]
    DuplicateId(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("dangling reference: {0}")]
    DanglingReference(String),

    #[error("duplicate name `{0}`")]
    DuplicateName(String),

    #[error("cycle detected: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("facet value {0} is not grounded by any concept")]
    UngroundedFacetValue(FacetValueRef),

    #[error("facet value {value} is grounded by several concepts: {}", .concepts.join(", "))]
    AmbiguousGrounding {
        value: FacetValueRef,
        concepts: Vec<String>,
    },

    #[error("training set must contain both match and nonmatch pairs")]
    DegenerateTraining,

    #[error("no candidates to disambiguate")]
    EmptyCandidates,

    #[error("commitment {requested} conflicts with existing commitment {existing}")]
    CommitmentConflict {
        existing: FacetValueRef,
        requested: FacetValueRef,
    },

    #[error("no commitment for facet group `{0}`")]
    NoSuchCommitment(String),

    #[error("session `{0}` is pinned to data versions that are no longer loaded")]
    StaleSession(String),

    #[error("query contains no searchable terms")]
    EmptyQuery,

    #[error("invalid evaluation matrix: {0:?}")]
    InvalidMatrix(Vec<Violation>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::EmptyTag => "EmptyTag",
            Self::DuplicateId(_) => "DuplicateId",
            Self::Parse { .. } => "ParseError",
            Self::InvalidRecord(_) => "InvalidRecord",
            Self::DanglingReference(_) => "DanglingReference",
            Self::DuplicateName(_) => "DuplicateName",
            Self::CycleDetected(_) => "CycleDetected",
            Self::UnknownConcept(_) => "UnknownConcept",
            Self::UngroundedFacetValue(_) => "UngroundedFacetValue",
            Self::AmbiguousGrounding { .. } => "AmbiguousGrounding",
            Self::DegenerateTraining => "DegenerateTraining",
            Self::EmptyCandidates => "EmptyCandidates",
            Self::CommitmentConflict { .. } => "CommitmentConflict",
            Self::NoSuchCommitment(_) => "NoSuchCommitment",
            Self::StaleSession(_) => "StaleSession",
            Self::EmptyQuery => "EmptyQuery",
            Self::InvalidMatrix(_) => "InvalidMatrix",
            Self::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
