//! Faceted search over folksonomy-tagged corpora, personalized per reader.
//!
//! Speakers tag resources and associate tags with facet values; a reader
//! searches within a [`Session`], committing to facet values as the
//! conversation goes. Each query computes the reader's joint meaning: the
//! speaker tag–facet pairs linked to ontology concepts that survive the
//! reader's commitments. Results blend lexical matches with support from
//! that joint meaning.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod joint;
pub mod matcher;
pub mod ontology;
pub mod query;
pub mod records;
pub mod taxonomy;
pub mod view;

pub use corpus::{
    normalize_tag, words, AssignmentRecord, ContentType, CorpusSnapshot, CorpusStore,
    NormalizedTag, Resource, TagAssignment,
};
pub use error::{Error, Result};
pub use evaluation::{Criterion, EvaluationMatrix, Violation};
pub use joint::{
    candidate_links, conflicts_with_commitments, fixpoint, CandidateLink, CandidateSet,
    JointMeaning, Session, SessionRecord, Turn, TurnAction,
};
pub use matcher::{
    dissimilarity, form_superconcepts, train_on_vectors, train_weights, DissimilarityVector,
    LabeledPair, MatchContext, MatchLabel, MatcherWeights, Superconcept, TrainingConfig,
    WeightsRecord, DEFAULT_THETA,
};
pub use ontology::{Concept, EdgeObject, Ontology, OntologyEdge, Predicate};
pub use query::{
    apply_filter, facet_counts, link_supports, search, tokenize, FacetCounts, Query, ResultHit,
    SearchOutcome,
};
pub use taxonomy::{
    classify_resource, Annotation, AssociationRecord, AssociationSet, FacetModel, FacetValueRef,
    TagFacetPair, Taxonomy, TaxonomyRecord,
};
pub use view::{KnowledgeView, PinnedVersions, SearchParams};
