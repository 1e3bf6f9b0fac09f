//! The data directory: every published piece of state as plain files.
//!
//! ```text
//! <dir>/resources.jsonl     <dir>/taxonomy.jsonl    <dir>/weights.json
//! <dir>/assignments.jsonl   <dir>/ontology.ont      <dir>/versions.json
//! <dir>/associations.jsonl  <dir>/sessions/<id>.json
//! ```
//!
//! Writes go to a temporary sibling and are renamed into place, so a crash
//! never leaves a half-written file behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use fm_core::fixtures::UPPER_ONTOLOGY;
use fm_core::matcher::train::parse_training_pairs;
use fm_core::records::{parse_jsonl, to_jsonl};
use fm_core::{
    train_weights, AssignmentRecord, AssociationRecord, CorpusStore, FacetModel, KnowledgeView,
    MatcherWeights, Ontology, PinnedVersions, Resource, SearchParams, SessionRecord, Taxonomy,
    TaxonomyRecord, TrainingConfig, WeightsRecord,
};
use serde::{Deserialize, Serialize};

const RESOURCES: &str = "resources.jsonl";
const ASSIGNMENTS: &str = "assignments.jsonl";
const ASSOCIATIONS: &str = "associations.jsonl";
const TAXONOMY: &str = "taxonomy.jsonl";
const ONTOLOGY: &str = "ontology.ont";
const WEIGHTS: &str = "weights.json";
const VERSIONS: &str = "versions.json";
const SESSIONS: &str = "sessions";

/// Records found in one ingest file, by kind.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct IngestBatch {
    pub resources: Vec<Resource>,
    pub assignments: Vec<AssignmentRecord>,
    pub associations: Vec<AssociationRecord>,
    pub taxonomy: Vec<TaxonomyRecord>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub resources: usize,
    pub assignments: usize,
    pub associations: usize,
    pub taxonomy: usize,
}

/// Sorts each line of a mixed JSON-lines file into its record kind by the
/// fields it carries.
pub fn parse_ingest(text: &str) -> Result<IngestBatch> {
    let mut batch = IngestBatch::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let n = idx + 1;
        let value: serde_json::Value =
            serde_json::from_str(line).with_context(|| format!("line {n}: malformed JSON"))?;
        let has = |k: &str| value.get(k).is_some();
        let ctx = || format!("line {n}: invalid record");
        if has("speaker_id") {
            batch
                .associations
                .push(serde_json::from_value(value).with_context(ctx)?);
        } else if has("user_id") {
            batch
                .assignments
                .push(serde_json::from_value(value).with_context(ctx)?);
        } else if has("title") || has("content_type") {
            batch
                .resources
                .push(serde_json::from_value(value).with_context(ctx)?);
        } else if has("group") {
            batch
                .taxonomy
                .push(serde_json::from_value(value).with_context(ctx)?);
        } else {
            bail!("line {n}: unrecognized record");
        }
    }
    Ok(batch)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Versions {
    corpus: u64,
    facets: u64,
    ontology: u64,
}

/// Counts describing the loaded data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stats {
    pub resources: usize,
    pub assignments: usize,
    pub associations: usize,
    pub facet_groups: usize,
    pub facet_values: usize,
    pub concepts: usize,
    pub ontology_depth: usize,
    pub weights: [f64; 4],
    pub versions: PinnedVersions,
}

/// Single-writer owner of the data directory and everything loaded from it.
#[derive(Debug, Clone)]
pub struct Workspace {
    dir: PathBuf,
    corpus: CorpusStore,
    facets: Arc<FacetModel>,
    ontology: Arc<Ontology>,
    ontology_source: String,
    weights: Arc<MatcherWeights>,
    params: SearchParams,
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e).with_context(|| format!("cannot read {}", path.display())),
    }
}

fn corrupt(path: &Path) -> String {
    format!("corrupt data file {}", path.display())
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot replace {}", path.display()))
}

impl Workspace {
    /// Loads the directory, creating it when missing. `default_ontology`
    /// is used until an ontology has been loaded explicitly; without it the
    /// bundled upper ontology applies.
    pub fn open(dir: &Path, params: SearchParams, default_ontology: Option<&Path>) -> Result<Self> {
        params.validate()?;
        fs::create_dir_all(dir.join(SESSIONS))
            .with_context(|| format!("cannot create data directory {}", dir.display()))?;
        let file = |name: &str| dir.join(name);

        let versions: Versions = match read_optional(&file(VERSIONS))? {
            Some(s) => serde_json::from_str(&s).with_context(|| corrupt(&file(VERSIONS)))?,
            None => Versions::default(),
        };
        fn records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
            match read_optional(path)? {
                Some(s) => parse_jsonl(&s).with_context(|| corrupt(path)),
                None => Ok(Vec::new()),
            }
        }

        let resources: Vec<Resource> = records(&file(RESOURCES))?;
        let assignments: Vec<AssignmentRecord> = records(&file(ASSIGNMENTS))?;
        let corpus = CorpusStore::restore(resources, assignments, versions.corpus)
            .with_context(|| corrupt(&file(ASSIGNMENTS)))?;

        let tax_records: Vec<TaxonomyRecord> = records(&file(TAXONOMY))?;
        let taxonomy =
            Taxonomy::from_records(&tax_records).with_context(|| corrupt(&file(TAXONOMY)))?;
        let assoc_records: Vec<AssociationRecord> = records(&file(ASSOCIATIONS))?;
        let mut facets = FacetModel {
            taxonomy,
            version: versions.facets,
            ..FacetModel::default()
        };
        let tax = facets.taxonomy.clone();
        facets
            .associations
            .apply_records(&tax, &assoc_records)
            .with_context(|| corrupt(&file(ASSOCIATIONS)))?;

        let (ontology_source, origin) = match read_optional(&file(ONTOLOGY))? {
            Some(s) => (s, file(ONTOLOGY)),
            None => match default_ontology {
                Some(p) => (
                    fs::read_to_string(p)
                        .with_context(|| format!("cannot read ontology {}", p.display()))?,
                    p.to_path_buf(),
                ),
                None => (UPPER_ONTOLOGY.to_string(), PathBuf::from("<bundled>")),
            },
        };
        let mut ontology = Ontology::parse(&ontology_source, Some(&facets.taxonomy))
            .with_context(|| format!("invalid ontology {}", origin.display()))?;
        ontology.version = versions.ontology;

        let weights = match read_optional(&file(WEIGHTS))? {
            Some(s) => serde_json::from_str::<WeightsRecord>(&s)
                .map_err(anyhow::Error::from)
                .and_then(|r| Ok(r.weights()?))
                .with_context(|| corrupt(&file(WEIGHTS)))?,
            None => MatcherWeights::uniform(),
        };

        Ok(Self {
            dir: dir.to_path_buf(),
            corpus,
            facets: Arc::new(facets),
            ontology: Arc::new(ontology),
            ontology_source,
            weights: Arc::new(weights),
            params,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn params(&self) -> SearchParams {
        self.params
    }

    pub fn view(&self) -> KnowledgeView {
        KnowledgeView {
            corpus: self.corpus.snapshot(),
            facets: Arc::clone(&self.facets),
            ontology: Arc::clone(&self.ontology),
            weights: Arc::clone(&self.weights),
            params: self.params,
        }
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.facets.taxonomy
    }

    pub fn stats(&self) -> Stats {
        let snap = self.corpus.snapshot();
        Stats {
            resources: snap.resource_count(),
            assignments: snap.assignment_count(),
            associations: self.facets.associations.len(),
            facet_groups: self.facets.taxonomy.groups().count(),
            facet_values: self.facets.taxonomy.all_values().count(),
            concepts: self.ontology.len(),
            ontology_depth: self.ontology.depth(),
            weights: self.weights.weights(),
            versions: self.view().versions(),
        }
    }

    /// Facet values no concept grounds, and groundings naming values the
    /// taxonomy lacks.
    pub fn grounding_report(&self) -> (Vec<String>, Vec<String>) {
        let ungrounded = self
            .facets
            .taxonomy
            .all_values()
            .filter(|v| self.ontology.concept_for_facet_value(v).is_err())
            .map(|v| v.to_string())
            .collect();
        let dangling = self
            .ontology
            .dangling_groundings(&self.facets.taxonomy)
            .into_iter()
            .map(|v| v.to_string())
            .collect();
        (ungrounded, dangling)
    }

    /// Applies a mixed batch atomically: taxonomy first, then corpus
    /// records, then associations.
    pub fn ingest(&mut self, batch: IngestBatch) -> Result<IngestSummary> {
        let mut corpus = self.corpus.clone();
        let mut facets = (*self.facets).clone();
        let mut summary = IngestSummary::default();
        let mut facets_changed = false;

        if !batch.taxonomy.is_empty() {
            summary.taxonomy = facets.taxonomy.apply_records(&batch.taxonomy)?;
            facets_changed = true;
        }
        let (r, a) = corpus.ingest(batch.resources, batch.assignments)?;
        summary.resources = r;
        summary.assignments = a;
        if !batch.associations.is_empty() {
            let tax = facets.taxonomy.clone();
            summary.associations = facets
                .associations
                .apply_records(&tax, &batch.associations)?;
            facets_changed = true;
        }

        if facets_changed && facets != *self.facets {
            facets.version += 1;
        }
        self.corpus = corpus;
        self.facets = Arc::new(facets);
        self.persist()?;
        Ok(summary)
    }

    pub fn apply_taxonomy(&mut self, records: Vec<TaxonomyRecord>) -> Result<usize> {
        Ok(self
            .ingest(IngestBatch {
                taxonomy: records,
                ..IngestBatch::default()
            })?
            .taxonomy)
    }

    /// Replaces the ontology. Its `facetOf` groundings must name values in
    /// the current taxonomy.
    pub fn load_ontology(&mut self, source: &str) -> Result<&Ontology> {
        let mut ontology = Ontology::parse(source, Some(&self.facets.taxonomy))?;
        ontology.version = self.ontology.version + 1;
        self.ontology = Arc::new(ontology);
        self.ontology_source = source.to_string();
        self.persist()?;
        Ok(&self.ontology)
    }

    pub fn train(&mut self, pairs_text: &str, config: &TrainingConfig) -> Result<&MatcherWeights> {
        let pairs = parse_training_pairs(pairs_text)?;
        let view = self.view();
        let ctx = view.match_context();
        let weights = train_weights(&pairs, &ctx, config, self.weights.version() + 1)?;
        self.weights = Arc::new(weights);
        self.persist()?;
        Ok(&self.weights)
    }

    /// Rewrites every data file from the loaded state.
    pub fn persist(&self) -> Result<()> {
        let snap = self.corpus.snapshot();
        let file = |name: &str| self.dir.join(name);
        write_atomic(&file(RESOURCES), &to_jsonl(snap.resources()))?;
        let assignments: Vec<AssignmentRecord> = snap
            .assignments()
            .map(|a| AssignmentRecord {
                user_id: a.user_id,
                resource_id: a.resource_id,
                tag: a.tag.to_string(),
                timestamp: a.timestamp,
            })
            .collect();
        write_atomic(&file(ASSIGNMENTS), &to_jsonl(&assignments))?;
        let assoc: Vec<AssociationRecord> = self
            .facets
            .associations
            .pairs()
            .map(|p| (&p).into())
            .collect();
        write_atomic(&file(ASSOCIATIONS), &to_jsonl(&assoc))?;
        write_atomic(
            &file(TAXONOMY),
            &to_jsonl(&self.facets.taxonomy.to_records()),
        )?;
        write_atomic(&file(ONTOLOGY), &self.ontology_source)?;
        let weights = self.weights.to_record(self.params.theta);
        write_atomic(&file(WEIGHTS), &serde_json::to_string_pretty(&weights)?)?;
        let versions = Versions {
            corpus: snap.version(),
            facets: self.facets.version,
            ontology: self.ontology.version,
        };
        write_atomic(&file(VERSIONS), &serde_json::to_string_pretty(&versions)?)
    }

    fn session_path(&self, id: &str) -> Result<PathBuf> {
        let valid = !id.is_empty()
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !valid {
            bail!("invalid session id `{id}`");
        }
        Ok(self.dir.join(SESSIONS).join(format!("{id}.json")))
    }

    pub fn save_session(&self, record: &SessionRecord) -> Result<()> {
        write_atomic(
            &self.session_path(&record.id)?,
            &serde_json::to_string_pretty(record)?,
        )
    }

    /// Every persisted session; a file that does not parse is an error
    /// naming it.
    pub fn load_sessions(&self) -> Result<Vec<SessionRecord>> {
        let mut paths: Vec<PathBuf> = fs::read_dir(self.dir.join(SESSIONS))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths
            .into_iter()
            .map(|p| {
                let text = fs::read_to_string(&p).with_context(|| corrupt(&p))?;
                serde_json::from_str(&text).with_context(|| corrupt(&p))
            })
            .collect()
    }

    /// Next free id of the form `sess-000001`.
    pub fn next_session_id(&self) -> Result<String> {
        let max = self
            .load_sessions()?
            .iter()
            .filter_map(|r| r.id.strip_prefix("sess-")?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        Ok(format!("sess-{:06}", max + 1))
    }
}
