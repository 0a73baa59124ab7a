//! HTTP front end for the provisioning simulator.
//!
//! Batch endpoints run a scenario and return the generated files inline.
//! Loop endpoints keep a live provisioning loop per session, fed one
//! observation per control interval.
//!
//! | method | path                     | body                 |
//! |--------|--------------------------|----------------------|
//! | GET    | `/healthz`               |                      |
//! | POST   | `/v1/run`                | `RunRequest`         |
//! | POST   | `/v1/compare`            | `CompareRequest`     |
//! | POST   | `/v1/sweep`              | `SweepRequest`       |
//! | POST   | `/v1/replay`             | `ReplayRequest`      |
//! | POST   | `/v1/loops`              | `CreateLoopRequest`  |
//! | GET    | `/v1/loops/{id}`         |                      |
//! | POST   | `/v1/loops/{id}/observe` | `ObserveRequest`     |
//! | POST   | `/v1/loops/{id}/reset`   |                      |
//! | DELETE | `/v1/loops/{id}`         |                      |

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use provisim_core::api::*;
use provisim_core::experiment::{self, parse_variants, SweepParam};
use provisim_core::provisioner::{smooth, ProvisioningLoop};
use provisim_core::scenario::Scenario;
use provisim_core::Error;
use tokio::net::TcpListener;

/// Traces for replay can be large.
const BODY_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Debug)]
pub struct ServiceError {
    status: StatusCode,
    body: ApiError,
}

impl ServiceError {
    fn not_found(what: impl Into<String>) -> Self {
        ServiceError {
            status: StatusCode::NOT_FOUND,
            body: ApiError::new("not_found", what),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ServiceError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ApiError::new("internal", message),
        }
    }
}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Input(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ref e if e.is_usage() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ServiceError {
            status,
            body: ApiError::from(&e),
        }
    }
}

impl From<JsonRejection> for ServiceError {
    fn from(r: JsonRejection) -> Self {
        ServiceError {
            status: StatusCode::BAD_REQUEST,
            body: ApiError::new("bad_request", r.body_text()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(error = %self.body, "request failed");
        } else {
            tracing::debug!(error = %self.body, "request rejected");
        }
        (self.status, Json(self.body)).into_response()
    }
}

type Reply<T> = Result<Json<T>, ServiceError>;

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, Error> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::internal(format!("worker failed: {e}")))?
        .map_err(ServiceError::from)
}

struct Session {
    components: usize,
    lp: ProvisioningLoop,
}

#[derive(Clone, Default)]
pub struct AppState {
    loops: Arc<Mutex<HashMap<u64, Session>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn loop_count(&self) -> usize {
        self.loops.lock().expect("loop table poisoned").len()
    }

    fn with_loop<T>(
        &self,
        id: u64,
        f: impl FnOnce(&mut Session) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let mut loops = self.loops.lock().expect("loop table poisoned");
        let session = loops
            .get_mut(&id)
            .ok_or_else(|| ServiceError::not_found(format!("no loop with id {id}")))?;
        f(session)
    }
}

fn parse_source(src: &ScenarioSource) -> Result<Scenario, Error> {
    Scenario::parse_with(&src.scenario, &src.overrides, src.seed)
}

async fn healthz() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn run(req: Result<Json<RunRequest>, JsonRejection>) -> Reply<RunResponse> {
    let Json(req) = req?;
    blocking(move || {
        let s = parse_source(&req.source)?;
        let out = experiment::run(&s)?;
        Ok(RunResponse {
            metrics: out.run.metrics,
            telemetry: out.run.telemetry,
            flagged_steps: out.run.flagged_steps,
            output: s.output,
            files: out.files,
        })
    })
    .await
    .map(Json)
}

async fn compare(req: Result<Json<CompareRequest>, JsonRejection>) -> Reply<CompareResponse> {
    let Json(req) = req?;
    blocking(move || {
        let s = parse_source(&req.source)?;
        let variants = if req.controllers.is_empty() {
            experiment::all_variants()
        } else {
            parse_variants(&req.controllers)?
        };
        let out = experiment::compare(&s, &variants)?;
        Ok(CompareResponse {
            rows: out.rows,
            output: s.output,
            files: out.files,
        })
    })
    .await
    .map(Json)
}

async fn sweep(req: Result<Json<SweepRequest>, JsonRejection>) -> Reply<SweepResponse> {
    let Json(req) = req?;
    blocking(move || {
        let param: SweepParam = req.parameter.parse()?;
        let s = parse_source(&req.source)?;
        let out = experiment::sweep(&s, param, &req.values)?;
        Ok(SweepResponse {
            parameter: param.name().into(),
            rows: out.rows,
            output: s.output,
            files: out.files,
        })
    })
    .await
    .map(Json)
}

async fn replay(req: Result<Json<ReplayRequest>, JsonRejection>) -> Reply<ReplayResponse> {
    let Json(req) = req?;
    blocking(move || {
        let s = parse_source(&req.source)?;
        let out = experiment::replay(&req.trace, &s.controller)?;
        Ok(ReplayResponse {
            telemetry: out.telemetry,
            output: s.output,
            files: out.files,
        })
    })
    .await
    .map(Json)
}

fn status(id: u64, s: &Session) -> LoopStatus {
    LoopStatus {
        id,
        components: s.components,
        spec: s.lp.spec().clone(),
        allocation: s.lp.allocation().to_vec(),
        telemetry: s.lp.telemetry().clone(),
    }
}

async fn create_loop(
    State(state): State<AppState>,
    req: Result<Json<CreateLoopRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<LoopStatus>), ServiceError> {
    let Json(req) = req?;
    if req.components == 0 || req.components > provisim_core::matrix::MAX_DIM {
        return Err(Error::usage(format!(
            "components must lie in 1..={}, got {}",
            provisim_core::matrix::MAX_DIM,
            req.components
        ))
        .into());
    }
    let spec = parse_source(&req.source)?.controller.spec()?;
    let session = Session {
        components: req.components,
        lp: ProvisioningLoop::new(spec, req.components)?,
    };
    let id = state.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let body = status(id, &session);
    state
        .loops
        .lock()
        .expect("loop table poisoned")
        .insert(id, session);
    tracing::info!(id, "loop created");
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_loop(State(state): State<AppState>, Path(id): Path<u64>) -> Reply<LoopStatus> {
    state.with_loop(id, |s| Ok(Json(status(id, s))))
}

async fn observe(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    req: Result<Json<ObserveRequest>, JsonRejection>,
) -> Reply<ObserveResponse> {
    let Json(req) = req?;
    let y = match req {
        ObserveRequest::Observation { observation } => observation,
        ObserveRequest::Samples { samples } => smooth(&samples)?,
    };
    state.with_loop(id, |s| {
        let decision = s.lp.control_step(&y)?;
        Ok(Json(ObserveResponse { id, decision }))
    })
}

async fn reset_loop(State(state): State<AppState>, Path(id): Path<u64>) -> Reply<LoopStatus> {
    state.with_loop(id, |s| {
        s.lp.reset();
        Ok(Json(status(id, s)))
    })
}

async fn delete_loop(
    State(state): State<AppState>,
    Path(id): Path<u64>,
) -> Result<StatusCode, ServiceError> {
    let removed = state
        .loops
        .lock()
        .expect("loop table poisoned")
        .remove(&id);
    match removed {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ServiceError::not_found(format!("no loop with id {id}"))),
    }
}

async fn fallback() -> ServiceError {
    ServiceError::not_found("no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/run", post(run))
        .route("/v1/compare", post(compare))
        .route("/v1/sweep", post(sweep))
        .route("/v1/replay", post(replay))
        .route("/v1/loops", post(create_loop))
        .route("/v1/loops/{id}", get(get_loop).delete(delete_loop))
        .route("/v1/loops/{id}/observe", post(observe))
        .route("/v1/loops/{id}/reset", post(reset_loop))
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until the future resolves or the listener fails.
pub async fn serve_until(
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new()))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` (port 0 picks a free port) and serves in a background task.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(AppState::new())).await {
            tracing::error!(error = %e, "embedded server stopped");
        }
    });
    Ok((local, handle))
}
