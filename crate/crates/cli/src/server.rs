//! HTTP trial server: sessions with a familiarization phase and a test
//! phase, an append-only response log, and CSV export.
//!
//! Every session and response is appended to the log as one JSON line and
//! synced before the request returns; restarting with the same log restores
//! all sessions.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::Context;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::SliceRandom;
use raven_core::annotation::dataset::Split;
use raven_core::forge::{Problem, CANDIDATES};
use raven_core::grammar::FigureConfiguration;
use raven_core::render::render_panel;
use raven_core::{generate_indexed, RuleMode};
use serde::{Deserialize, Serialize};

pub const FAMILIARIZATION_COUNT: usize = 10;

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub familiarization_config: FigureConfiguration,
    pub familiarization_count: usize,
    pub test_per_config: usize,
    /// Seeds the familiarization problems.
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            familiarization_config: FigureConfiguration::Center,
            familiarization_count: FAMILIARIZATION_COUNT,
            test_per_config: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Familiarization,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanItem {
    pub problem_id: String,
    pub phase: Phase,
}

/// One answer as logged. Correctness is derived from the problem, never
/// stored, so the log itself does not reveal targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub session_id: String,
    pub problem_id: String,
    pub chosen_index: usize,
    pub latency_ms: u64,
    pub timestamp: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum LogEvent {
    Session { session_id: String, plan: Vec<PlanItem> },
    Response(ResponseRecord),
}

#[derive(Debug, Clone)]
struct Session {
    plan: Vec<PlanItem>,
    responses: HashMap<String, ResponseRecord>,
}

struct Inner {
    sessions: HashMap<String, Session>,
    /// Responses across sessions in log order.
    log_order: Vec<ResponseRecord>,
    log: File,
}

pub struct AppState {
    problems: HashMap<String, Arc<Problem>>,
    familiarization: Vec<String>,
    test_pool: BTreeMap<FigureConfiguration, Vec<String>>,
    config: TrialConfig,
    inner: Mutex<Inner>,
    panels: Mutex<PanelCache>,
}

/// Encoded PNGs keyed by problem id and panel index.
type PanelCache = HashMap<(String, usize), Arc<Vec<u8>>>;

impl AppState {
    /// Builds the server state from dataset problems, generating the
    /// familiarization set and replaying an existing log.
    pub fn new(dataset: Vec<Problem>, config: TrialConfig, log_path: &Path) -> anyhow::Result<Self> {
        let mut problems: HashMap<String, Arc<Problem>> = HashMap::new();
        let mut familiarization = Vec::new();
        for i in 0..config.familiarization_count {
            let mut p = generate_indexed(
                config.seed,
                config.familiarization_config,
                i,
                RuleMode::SingleNonConstant,
            )
            .context("generating familiarization problems")?;
            p.id = format!("fam_{i:02}");
            familiarization.push(p.id.clone());
            problems.insert(p.id.clone(), Arc::new(p));
        }

        let mut pool: BTreeMap<FigureConfiguration, Vec<String>> = BTreeMap::new();
        for p in dataset {
            if problems.contains_key(&p.id) {
                anyhow::bail!("problem id {} is reserved", p.id);
            }
            pool.entry(p.config).or_default().push(p.id.clone());
            problems.insert(p.id.clone(), Arc::new(p));
        }
        let test_pool = test_pool(pool, &problems, config.test_per_config);

        let (sessions, log_order, valid_len) = replay(log_path, &problems)?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)
            .with_context(|| format!("opening response log {}", log_path.display()))?;
        // Cut a torn tail so later appends never bury it mid-file.
        if log.metadata()?.len() != valid_len {
            log.set_len(valid_len)?;
            log.sync_data()?;
        }
        Ok(AppState {
            problems,
            familiarization,
            test_pool,
            config,
            inner: Mutex::new(Inner {
                sessions,
                log_order,
                log,
            }),
            panels: Mutex::new(HashMap::new()),
        })
    }

    pub fn problem(&self, id: &str) -> Option<&Problem> {
        self.problems.get(id).map(Arc::as_ref)
    }

    pub fn familiarization_ids(&self) -> &[String] {
        &self.familiarization
    }

    fn new_plan(&self) -> Vec<PlanItem> {
        let mut rng = rand::thread_rng();
        let mut plan: Vec<PlanItem> = self
            .familiarization
            .iter()
            .map(|id| PlanItem {
                problem_id: id.clone(),
                phase: Phase::Familiarization,
            })
            .collect();
        let mut test: Vec<PlanItem> = self
            .test_pool
            .values()
            .flat_map(|ids| {
                ids.choose_multiple(&mut rng, self.config.test_per_config.min(ids.len()))
                    .map(|id| PlanItem {
                        problem_id: id.clone(),
                        phase: Phase::Test,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        test.shuffle(&mut rng);
        plan.extend(test);
        plan
    }
}

/// Per configuration, the test split, or every problem when the test split
/// holds fewer than a session draws.
fn test_pool(
    pool: BTreeMap<FigureConfiguration, Vec<String>>,
    problems: &HashMap<String, Arc<Problem>>,
    per_config: usize,
) -> BTreeMap<FigureConfiguration, Vec<String>> {
    pool.into_iter()
        .map(|(config, ids)| {
            let test: Vec<String> = ids
                .iter()
                .filter(|id| Split::of_fold(problems[*id].fold) == Split::Test)
                .cloned()
                .collect();
            if test.len() >= per_config {
                (config, test)
            } else {
                (config, ids)
            }
        })
        .collect()
}

/// Replays the log. Also returns the byte length of the intact prefix.
fn replay(
    path: &Path,
    problems: &HashMap<String, Arc<Problem>>,
) -> anyhow::Result<(HashMap<String, Session>, Vec<ResponseRecord>, u64)> {
    let mut sessions: HashMap<String, Session> = HashMap::new();
    let mut order = Vec::new();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((sessions, order, 0)),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    let mut valid_len = 0;
    let mut start = 0;
    let mut n = 0;
    while start < bytes.len() {
        let end = bytes[start..].iter().position(|b| *b == b'\n').map(|i| start + i + 1);
        let line = &bytes[start..end.unwrap_or(bytes.len())];
        n += 1;
        let is_last = bytes[end.unwrap_or(bytes.len())..].iter().all(u8::is_ascii_whitespace);
        start = end.unwrap_or(bytes.len());
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        // A torn final line from a crash is dropped; anything else is fatal.
        // An unterminated line was never fully written either.
        let event: LogEvent = match (serde_json::from_slice(line), end) {
            (Ok(e), Some(_)) => e,
            _ if is_last => {
                eprintln!("warning: dropping torn last line {n} of {}", path.display());
                break;
            }
            (Err(e), _) => anyhow::bail!("log line {n} of {}: {e}", path.display()),
            (Ok(_), None) => unreachable!("an unterminated line is always the last"),
        };
        valid_len = start as u64;
        match event {
            LogEvent::Session { session_id, plan } => {
                if let Some(missing) = plan.iter().find(|i| !problems.contains_key(&i.problem_id)) {
                    anyhow::bail!(
                        "log session {session_id} refers to unknown problem {}",
                        missing.problem_id
                    );
                }
                sessions.insert(
                    session_id,
                    Session {
                        plan,
                        responses: HashMap::new(),
                    },
                );
            }
            LogEvent::Response(r) => {
                let session = sessions
                    .get_mut(&r.session_id)
                    .with_context(|| format!("log line {n} answers unknown session"))?;
                session.responses.insert(r.problem_id.clone(), r.clone());
                order.push(r);
            }
        }
    }
    Ok((sessions, order, valid_len))
}

fn append(log: &mut File, event: &LogEvent) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(event).map_err(std::io::Error::other)?;
    line.push(b'\n');
    log.write_all(&line)?;
    log.flush()?;
    log.sync_data()
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Conflict(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phase: Phase,
    pub count: usize,
    pub configs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub total: usize,
    pub phases: Vec<PhasePlan>,
}

/// A problem as shown to a participant. There is deliberately no target.
#[derive(Debug, Serialize, Deserialize)]
pub struct ProblemView {
    pub session_id: String,
    pub index: usize,
    pub total: usize,
    pub phase: Phase,
    pub problem_id: String,
    pub config: String,
    pub context: Vec<String>,
    pub candidates: Vec<String>,
    pub feedback: bool,
    pub answered: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResponseSubmission {
    pub session_id: String,
    pub problem_id: String,
    pub chosen_index: usize,
    pub latency_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResponseAck {
    pub recorded: ResponseRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigSummary {
    pub config: String,
    pub label: String,
    pub answered: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub mean_latency_ms: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryView {
    pub session_id: String,
    pub complete: bool,
    pub answered: usize,
    pub total: usize,
    pub familiarization: ConfigSummary,
    pub per_config: Vec<ConfigSummary>,
    pub overall: ConfigSummary,
}

#[derive(Debug, Deserialize)]
struct ProblemQuery {
    session: String,
    index: usize,
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: String,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
    session: Option<String>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/problem", get(get_problem))
        .route("/api/panel/{id}/{file}", get(get_panel))
        .route("/api/response", post(post_response))
        .route("/api/summary", get(get_summary))
        .route("/api/export", get(get_export))
        .with_state(state)
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn create_session(State(state): State<Arc<AppState>>) -> ApiResult<Json<SessionCreated>> {
    let session_id = uuid::Uuid::new_v4().to_string();
    let plan = state.new_plan();
    let mut inner = lock(&state.inner);
    append(
        &mut inner.log,
        &LogEvent::Session {
            session_id: session_id.clone(),
            plan: plan.clone(),
        },
    )
    .map_err(|e| ApiError::Internal(format!("response log: {e}")))?;
    inner.sessions.insert(
        session_id.clone(),
        Session {
            plan: plan.clone(),
            responses: HashMap::new(),
        },
    );
    let phases = [Phase::Familiarization, Phase::Test]
        .into_iter()
        .map(|phase| {
            let ids: Vec<&PlanItem> = plan.iter().filter(|i| i.phase == phase).collect();
            let mut configs: Vec<String> = ids
                .iter()
                .map(|i| state.problems[&i.problem_id].config.as_str().to_string())
                .collect();
            configs.sort();
            configs.dedup();
            PhasePlan {
                phase,
                count: ids.len(),
                configs,
            }
        })
        .collect();
    Ok(Json(SessionCreated {
        session_id,
        total: plan.len(),
        phases,
    }))
}

async fn get_problem(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ProblemQuery>,
) -> ApiResult<Json<ProblemView>> {
    let inner = lock(&state.inner);
    let session = inner
        .sessions
        .get(&q.session)
        .ok_or_else(|| ApiError::NotFound(format!("unknown session {}", q.session)))?;
    let item = session
        .plan
        .get(q.index)
        .ok_or_else(|| ApiError::NotFound(format!("session has no problem {}", q.index)))?;
    let problem = &state.problems[&item.problem_id];
    let url = |k: usize| format!("/api/panel/{}/{k}.png", problem.id);
    Ok(Json(ProblemView {
        session_id: q.session.clone(),
        index: q.index,
        total: session.plan.len(),
        phase: item.phase,
        problem_id: problem.id.clone(),
        config: problem.config.as_str().to_string(),
        context: (0..8).map(url).collect(),
        candidates: (8..8 + CANDIDATES).map(url).collect(),
        feedback: item.phase == Phase::Familiarization,
        answered: session.responses.contains_key(&problem.id),
    }))
}

async fn get_panel(
    State(state): State<Arc<AppState>>,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let problem = state
        .problems
        .get(&id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown problem {id}")))?;
    let k: usize = file
        .strip_suffix(".png")
        .and_then(|k| k.parse().ok())
        .filter(|k| *k < 8 + CANDIDATES)
        .ok_or_else(|| ApiError::NotFound(format!("no panel {file}")))?;
    let key = (id.clone(), k);
    let cached = lock(&state.panels).get(&key).cloned();
    let bytes = match cached {
        Some(b) => b,
        None => {
            let panel = problem.panels().nth(k).expect("sixteen panels");
            let png = render_panel(panel)
                .to_png()
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            let png = Arc::new(png);
            lock(&state.panels).insert(key, png.clone());
            png
        }
    };
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes.as_ref().clone()).into_response())
}

async fn post_response(
    State(state): State<Arc<AppState>>,
    Json(body): Json<ResponseSubmission>,
) -> ApiResult<Json<ResponseAck>> {
    if body.chosen_index >= CANDIDATES {
        return Err(ApiError::BadRequest(format!("chosen_index must be below {CANDIDATES}")));
    }
    let mut inner = lock(&state.inner);
    let session = inner
        .sessions
        .get(&body.session_id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown session {}", body.session_id)))?;
    let item = session
        .plan
        .iter()
        .find(|i| i.problem_id == body.problem_id)
        .ok_or_else(|| ApiError::NotFound(format!("problem {} is not in this session", body.problem_id)))?;
    let phase = item.phase;
    if session.responses.contains_key(&body.problem_id) {
        return Err(ApiError::Conflict(format!(
            "problem {} already answered",
            body.problem_id
        )));
    }
    let record = ResponseRecord {
        session_id: body.session_id.clone(),
        problem_id: body.problem_id.clone(),
        chosen_index: body.chosen_index,
        latency_ms: body.latency_ms,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    append(&mut inner.log, &LogEvent::Response(record.clone()))
        .map_err(|e| ApiError::Internal(format!("response log: {e}")))?;
    inner
        .sessions
        .get_mut(&body.session_id)
        .expect("checked above")
        .responses
        .insert(record.problem_id.clone(), record.clone());
    inner.log_order.push(record.clone());
    let correct =
        (phase == Phase::Familiarization).then(|| state.problems[&body.problem_id].target == body.chosen_index);
    Ok(Json(ResponseAck {
        recorded: record,
        correct,
    }))
}

fn summarize<'a>(
    state: &AppState,
    config: String,
    label: String,
    records: impl Iterator<Item = &'a ResponseRecord>,
) -> ConfigSummary {
    let (mut answered, mut correct, mut latency) = (0usize, 0usize, 0u64);
    for r in records {
        answered += 1;
        correct += (state.problems[&r.problem_id].target == r.chosen_index) as usize;
        latency += r.latency_ms;
    }
    ConfigSummary {
        config,
        label,
        answered,
        correct,
        accuracy: (answered > 0).then(|| 100.0 * correct as f64 / answered as f64),
        mean_latency_ms: (answered > 0).then(|| latency as f64 / answered as f64),
    }
}

async fn get_summary(
    State(state): State<Arc<AppState>>,
    Query(q): Query<SessionQuery>,
) -> ApiResult<Json<SummaryView>> {
    let inner = lock(&state.inner);
    let session = inner
        .sessions
        .get(&q.session)
        .ok_or_else(|| ApiError::NotFound(format!("unknown session {}", q.session)))?;
    let answered_in = |phase: Phase| {
        session
            .plan
            .iter()
            .filter(move |i| i.phase == phase)
            .filter_map(|i| session.responses.get(&i.problem_id))
    };
    let fam_config = state.config.familiarization_config;
    let familiarization = summarize(
        &state,
        fam_config.as_str().into(),
        fam_config.label().into(),
        answered_in(Phase::Familiarization),
    );
    let per_config = FigureConfiguration::ALL
        .into_iter()
        .map(|config| {
            summarize(
                &state,
                config.as_str().into(),
                config.label().into(),
                answered_in(Phase::Test).filter(|r| state.problems[&r.problem_id].config == config),
            )
        })
        .collect();
    let overall = summarize(&state, "overall".into(), "Acc".into(), answered_in(Phase::Test));
    Ok(Json(SummaryView {
        session_id: q.session.clone(),
        complete: session.responses.len() == session.plan.len(),
        answered: session.responses.len(),
        total: session.plan.len(),
        familiarization,
        per_config,
        overall,
    }))
}

pub const CSV_HEADER: [&str; 8] = [
    "session_id",
    "problem_id",
    "config",
    "chosen",
    "target",
    "correct",
    "latency_ms",
    "timestamp",
];

async fn get_export(State(state): State<Arc<AppState>>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    match q.format.as_deref() {
        None | Some("csv") => {}
        Some(other) => return Err(ApiError::BadRequest(format!("unsupported export format {other}"))),
    }
    let inner = lock(&state.inner);
    if let Some(s) = &q.session {
        if !inner.sessions.contains_key(s) {
            return Err(ApiError::NotFound(format!("unknown session {s}")));
        }
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| ApiError::Internal(e.to_string());
    writer.write_record(CSV_HEADER).map_err(internal)?;
    for r in inner
        .log_order
        .iter()
        .filter(|r| q.session.as_ref().is_none_or(|s| *s == r.session_id))
    {
        let problem = &state.problems[&r.problem_id];
        writer
            .write_record([
                r.session_id.clone(),
                r.problem_id.clone(),
                problem.config.as_str().to_string(),
                r.chosen_index.to_string(),
                problem.target.to_string(),
                (problem.target == r.chosen_index).to_string(),
                r.latency_ms.to_string(),
                r.timestamp.clone(),
            ])
            .map_err(internal)?;
    }
    let body = writer.into_inner().map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"responses.csv\""),
        ],
        body,
    )
        .into_response())
}

/// Default log location next to the working directory.
pub fn default_log_path() -> PathBuf {
    PathBuf::from("responses.jsonl")
}

pub async fn serve(state: AppState, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    eprintln!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server stopped")
}
