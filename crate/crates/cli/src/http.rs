//! HTTP gateway. Request and response bodies are JSON in the same record
//! shapes as the data files.
//!
//! Concurrency: writes take the workspace lock (single writer) and then
//! publish a fresh view; reads clone the published view, which is cheap.
//! Each session has its own lock, so turns within one session are
//! serialized while different sessions proceed in parallel.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fm_core::{
    facet_counts, search, AssignmentRecord, AssociationRecord, CandidateLink, FacetCounts,
    FacetValueRef, KnowledgeView, PinnedVersions, Query, Resource, ResultHit, Session,
    SessionRecord, TaxonomyRecord, TrainingConfig, WeightsRecord,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::workspace::{IngestBatch, Workspace};

/// Persisted session whose pinned data is no longer loaded: readable, but
/// not resumable.
enum Slot {
    Live(Session),
    Stale(SessionRecord),
}

impl Slot {
    fn record(&self) -> &SessionRecord {
        match self {
            Slot::Live(s) => s.record(),
            Slot::Stale(r) => r,
        }
    }
}

pub struct AppState {
    workspace: Mutex<Workspace>,
    published: RwLock<KnowledgeView>,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Slot>>>>,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    /// Wraps a loaded workspace and restores its persisted sessions.
    pub fn new(workspace: Workspace) -> anyhow::Result<SharedState> {
        let view = workspace.view();
        let mut sessions = BTreeMap::new();
        for record in workspace.load_sessions()? {
            let id = record.id.clone();
            let slot = match Session::restore(record.clone(), view.clone()) {
                Ok(s) => Slot::Live(s),
                Err(_) => Slot::Stale(record),
            };
            sessions.insert(id, Arc::new(Mutex::new(slot)));
        }
        Ok(Arc::new(Self {
            workspace: Mutex::new(workspace),
            published: RwLock::new(view),
            sessions: Mutex::new(sessions),
        }))
    }

    fn view(&self) -> KnowledgeView {
        self.published.read().expect("view lock").clone()
    }

    /// Runs a mutation under the writer lock and publishes the result.
    fn write<T>(&self, f: impl FnOnce(&mut Workspace) -> anyhow::Result<T>) -> Result<T, ApiError> {
        let mut ws = self.workspace.lock().expect("workspace lock");
        let out = f(&mut ws)?;
        *self.published.write().expect("view lock") = ws.view();
        Ok(out)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ApiError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }

    fn persist(&self, record: &SessionRecord) -> Result<(), ApiError> {
        let ws = self.workspace.lock().expect("workspace lock");
        ws.save_session(record)?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            kind: "NotFound",
            message,
        }
    }
}

impl From<fm_core::Error> for ApiError {
    fn from(e: fm_core::Error) -> Self {
        use fm_core::Error as E;
        let status = match &e {
            E::CommitmentConflict { .. } | E::StaleSession(_) => StatusCode::CONFLICT,
            E::NoSuchCommitment(_) | E::UnknownConcept(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        Self {
            status,
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<fm_core::Error>() {
            Ok(core) => core.into(),
            Err(e) => Self {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                kind: "Internal",
                message: format!("{e:#}"),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.kind, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/facets", get(facets))
        .route("/ingest/resources", post(ingest_resources))
        .route("/ingest/assignments", post(ingest_assignments))
        .route("/ingest/associations", post(ingest_associations))
        .route("/taxonomy", post(load_taxonomy))
        .route("/ontology/load", post(load_ontology))
        .route("/matcher/train", post(train))
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/commit", post(commit))
        .route("/sessions/{id}/retract", post(retract))
        .with_state(state)
}

async fn healthz(State(st): State<SharedState>) -> Json<Value> {
    Json(json!({ "status": "ok", "versions": st.view().versions() }))
}

#[derive(Serialize)]
struct FacetGroupView {
    name: String,
    values: Vec<FacetValueView>,
}

#[derive(Serialize)]
struct FacetValueView {
    value: String,
    parent: Option<String>,
}

async fn facets(State(st): State<SharedState>) -> Json<Value> {
    let view = st.view();
    let taxonomy = &view.facets.taxonomy;
    let groups: Vec<FacetGroupView> = taxonomy
        .groups()
        .map(|g| FacetGroupView {
            name: g.to_string(),
            values: taxonomy
                .values(g)
                .map(|(v, p)| FacetValueView {
                    value: v.to_string(),
                    parent: p.map(str::to_string),
                })
                .collect(),
        })
        .collect();
    Json(json!({ "groups": groups, "version": view.facets.version }))
}

fn ingest_response(st: &AppState, accepted: usize) -> Json<Value> {
    let view = st.view();
    Json(json!({
        "accepted": accepted,
        "resources": view.corpus.resource_count(),
        "assignments": view.corpus.assignment_count(),
        "associations": view.facets.associations.len(),
        "versions": view.versions(),
    }))
}

async fn ingest_resources(
    State(st): State<SharedState>,
    Json(records): Json<Vec<Resource>>,
) -> ApiResult<Value> {
    let n = st.write(|ws| {
        Ok(ws
            .ingest(IngestBatch {
                resources: records,
                ..IngestBatch::default()
            })?
            .resources)
    })?;
    Ok(ingest_response(&st, n))
}

async fn ingest_assignments(
    State(st): State<SharedState>,
    Json(records): Json<Vec<AssignmentRecord>>,
) -> ApiResult<Value> {
    let n = st.write(|ws| {
        Ok(ws
            .ingest(IngestBatch {
                assignments: records,
                ..IngestBatch::default()
            })?
            .assignments)
    })?;
    Ok(ingest_response(&st, n))
}

async fn ingest_associations(
    State(st): State<SharedState>,
    Json(records): Json<Vec<AssociationRecord>>,
) -> ApiResult<Value> {
    let n = st.write(|ws| {
        Ok(ws
            .ingest(IngestBatch {
                associations: records,
                ..IngestBatch::default()
            })?
            .associations)
    })?;
    Ok(ingest_response(&st, n))
}

async fn load_taxonomy(
    State(st): State<SharedState>,
    Json(records): Json<Vec<TaxonomyRecord>>,
) -> ApiResult<Value> {
    let added = st.write(|ws| ws.apply_taxonomy(records))?;
    Ok(Json(
        json!({ "added": added, "versions": st.view().versions() }),
    ))
}

#[derive(Deserialize)]
struct OntologyBody {
    path: Option<PathBuf>,
    text: Option<String>,
}

async fn load_ontology(
    State(st): State<SharedState>,
    Json(body): Json<OntologyBody>,
) -> ApiResult<Value> {
    let source = match (body.text, body.path) {
        (Some(t), _) => t,
        (None, Some(p)) => std::fs::read_to_string(&p).map_err(|e| ApiError {
            status: StatusCode::BAD_REQUEST,
            kind: "InvalidRequest",
            message: format!("cannot read {}: {e}", p.display()),
        })?,
        (None, None) => {
            return Err(ApiError {
                status: StatusCode::BAD_REQUEST,
                kind: "InvalidRequest",
                message: "expected `text` or `path`".into(),
            })
        }
    };
    let (concepts, version) = st.write(|ws| {
        let o = ws.load_ontology(&source)?;
        Ok((o.len(), o.version))
    })?;
    Ok(Json(json!({ "concepts": concepts, "version": version })))
}

#[derive(Deserialize)]
struct TrainBody {
    pairs_path: Option<PathBuf>,
    pairs: Option<String>,
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    seed: Option<u64>,
}

async fn train(
    State(st): State<SharedState>,
    Json(body): Json<TrainBody>,
) -> ApiResult<WeightsRecord> {
    let text = match (body.pairs, body.pairs_path) {
        (Some(t), _) => t,
        (None, Some(p)) => std::fs::read_to_string(&p).map_err(|e| ApiError {
            status: StatusCode::BAD_REQUEST,
            kind: "InvalidRequest",
            message: format!("cannot read {}: {e}", p.display()),
        })?,
        (None, None) => {
            return Err(ApiError {
                status: StatusCode::BAD_REQUEST,
                kind: "InvalidRequest",
                message: "expected `pairs` or `pairs_path`".into(),
            })
        }
    };
    let defaults = TrainingConfig::default();
    let config = TrainingConfig {
        learning_rate: body.learning_rate.unwrap_or(defaults.learning_rate),
        epochs: body.epochs.unwrap_or(defaults.epochs),
        seed: body.seed.unwrap_or(defaults.seed),
    };
    let record = st.write(|ws| {
        let theta = ws.params().theta;
        Ok(ws.train(&text, &config)?.to_record(theta))
    })?;
    Ok(Json(record))
}

#[derive(Deserialize)]
struct OpenBody {
    reader_id: String,
}

#[derive(Serialize)]
struct Opened {
    session_id: String,
    versions: PinnedVersions,
}

async fn open_session(
    State(st): State<SharedState>,
    Json(body): Json<OpenBody>,
) -> Result<(StatusCode, Json<Opened>), ApiError> {
    let view = st.view();
    let mut sessions = st.sessions.lock().expect("sessions lock");
    let id = {
        let ws = st.workspace.lock().expect("workspace lock");
        let on_disk = ws.next_session_id()?;
        let in_memory = sessions
            .keys()
            .filter_map(|k| k.strip_prefix("sess-")?.parse::<u64>().ok())
            .max()
            .map_or(1, |m| m + 1);
        let from_disk: u64 = on_disk["sess-".len()..].parse().unwrap_or(1);
        format!("sess-{:06}", from_disk.max(in_memory))
    };
    let session = Session::open(id.clone(), body.reader_id, view);
    st.persist(session.record())?;
    let versions = session.record().versions;
    sessions.insert(id.clone(), Arc::new(Mutex::new(Slot::Live(session))));
    Ok((
        StatusCode::CREATED,
        Json(Opened {
            session_id: id,
            versions,
        }),
    ))
}

async fn get_session(
    State(st): State<SharedState>,
    Path(id): Path<String>,
) -> ApiResult<SessionRecord> {
    let slot = st.session(&id)?;
    let guard = slot.lock().expect("session lock");
    Ok(Json(guard.record().clone()))
}

/// Runs `f` on a live session and persists its record afterwards.
fn with_live<T>(
    st: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> Result<T, ApiError>,
) -> Result<T, ApiError> {
    let slot = st.session(id)?;
    let mut guard = slot.lock().expect("session lock");
    let Slot::Live(session) = &mut *guard else {
        return Err(fm_core::Error::StaleSession(id.to_string()).into());
    };
    let out = f(session)?;
    st.persist(session.record())?;
    Ok(out)
}

#[derive(Deserialize)]
struct QueryBody {
    text: String,
    #[serde(default)]
    filters: Vec<FacetValueRef>,
}

#[derive(Serialize)]
struct JointMeaningView {
    links: Vec<CandidateLink>,
    iterations: usize,
}

#[derive(Serialize)]
struct QueryResponse {
    hits: Vec<ResultHit>,
    facet_counts: FacetCounts,
    joint_meaning: JointMeaningView,
    warnings: Vec<String>,
}

async fn query(
    State(st): State<SharedState>,
    Path(id): Path<String>,
    Json(body): Json<QueryBody>,
) -> ApiResult<QueryResponse> {
    let q = Query {
        text: body.text,
        filters: body.filters,
    };
    let outcome = with_live(&st, &id, |s| Ok(search(s, &q)?))?;
    Ok(Json(QueryResponse {
        facet_counts: facet_counts(&outcome.hits),
        hits: outcome.hits,
        joint_meaning: JointMeaningView {
            iterations: outcome.joint_meaning.fixpoint_iterations,
            links: outcome.joint_meaning.links,
        },
        warnings: outcome.warnings,
    }))
}

async fn commit(
    State(st): State<SharedState>,
    Path(id): Path<String>,
    Json(value): Json<FacetValueRef>,
) -> ApiResult<SessionRecord> {
    let record = with_live(&st, &id, |s| {
        s.commit(value)?;
        Ok(s.record().clone())
    })?;
    Ok(Json(record))
}

#[derive(Deserialize)]
struct RetractBody {
    group: String,
}

async fn retract(
    State(st): State<SharedState>,
    Path(id): Path<String>,
    Json(body): Json<RetractBody>,
) -> ApiResult<SessionRecord> {
    let record = with_live(&st, &id, |s| {
        s.retract(&body.group)?;
        Ok(s.record().clone())
    })?;
    Ok(Json(record))
}

/// Serves until ctrl-c, letting in-flight requests finish.
pub async fn serve(state: SharedState, listen: &str) -> anyhow::Result<()> {
    use anyhow::Context;
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .with_context(|| format!("cannot listen on {listen}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
