//! Bundled data: the default upper ontology and a small car corpus in which
//! two speakers annotate the same SUV with different facets.

use std::sync::Arc;

use crate::corpus::{AssignmentRecord, CorpusStore, Resource};
use crate::error::Result;
use crate::evaluation::EvaluationMatrix;
use crate::matcher::train::parse_training_pairs;
use crate::matcher::{train_weights, LabeledPair, MatcherWeights, TrainingConfig};
use crate::ontology::Ontology;
use crate::records::parse_jsonl;
use crate::taxonomy::{AssociationRecord, FacetModel, Taxonomy, TaxonomyRecord};
use crate::view::{KnowledgeView, SearchParams};

/// Default ontology: Entity → Object → Artifact → Vehicle → Car →
/// {SUV, SportsCar, Van}, plus TrendyCar relatedTo SportsCar.
pub const UPPER_ONTOLOGY: &str = include_str!("../data/upper.ont");

pub mod cars {
    pub const ONTOLOGY: &str = include_str!("../data/cars/ontology.ont");
    pub const TAXONOMY: &str = include_str!("../data/cars/taxonomy.jsonl");
    pub const RESOURCES: &str = include_str!("../data/cars/resources.jsonl");
    pub const ASSIGNMENTS: &str = include_str!("../data/cars/assignments.jsonl");
    pub const ASSOCIATIONS: &str = include_str!("../data/cars/associations.jsonl");
    pub const TRAINING_PAIRS: &str = include_str!("../data/cars/training.pairs");
    pub const USABILITY_MATRIX: &str = include_str!("../data/cars/usability.json");
    pub const MARK_SESSION: &str = include_str!("../data/cars/mark.session");

    /// Upper ontology followed by the car extension.
    pub fn ontology_source() -> String {
        format!("{}\n{}", super::UPPER_ONTOLOGY, ONTOLOGY)
    }
}

pub fn upper_ontology() -> Ontology {
    Ontology::parse(UPPER_ONTOLOGY, None).expect("bundled ontology is valid")
}

pub fn usability_matrix() -> EvaluationMatrix {
    serde_json::from_str(cars::USABILITY_MATRIX).expect("bundled matrix is valid")
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub corpus: CorpusStore,
    pub facets: FacetModel,
    pub ontology: Ontology,
    pub training: Vec<LabeledPair>,
}

pub fn cars() -> Result<Fixture> {
    let resources: Vec<Resource> = parse_jsonl(cars::RESOURCES)?;
    let assignments: Vec<AssignmentRecord> = parse_jsonl(cars::ASSIGNMENTS)?;
    let mut corpus = CorpusStore::new();
    corpus.ingest(resources, assignments)?;

    let taxonomy_records: Vec<TaxonomyRecord> = parse_jsonl(cars::TAXONOMY)?;
    let mut facets = FacetModel {
        taxonomy: Taxonomy::from_records(&taxonomy_records)?,
        ..FacetModel::default()
    };
    let associations: Vec<AssociationRecord> = parse_jsonl(cars::ASSOCIATIONS)?;
    let taxonomy = facets.taxonomy.clone();
    facets
        .associations
        .apply_records(&taxonomy, &associations)?;
    facets.version = 1;

    let mut ontology = Ontology::parse(&cars::ontology_source(), Some(&facets.taxonomy))?;
    ontology.version = 1;

    Ok(Fixture {
        corpus,
        facets,
        ontology,
        training: parse_training_pairs(cars::TRAINING_PAIRS)?,
    })
}

impl Fixture {
    pub fn train(&self, config: &TrainingConfig) -> Result<MatcherWeights> {
        let snap = self.corpus.snapshot();
        let ctx =
            crate::matcher::MatchContext::new(&snap, &self.facets.associations, &self.ontology);
        train_weights(&self.training, &ctx, config, 1)
    }

    pub fn view(&self, weights: MatcherWeights, params: SearchParams) -> KnowledgeView {
        KnowledgeView {
            corpus: self.corpus.snapshot(),
            facets: Arc::new(self.facets.clone()),
            ontology: Arc::new(self.ontology.clone()),
            weights: Arc::new(weights),
            params,
        }
    }

    /// View with weights trained on the bundled pairs and default params.
    pub fn default_view(&self) -> Result<KnowledgeView> {
        Ok(self.view(
            self.train(&TrainingConfig::default())?,
            SearchParams::default(),
        ))
    }
}
