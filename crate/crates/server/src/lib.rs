//! HTTP front end for [`qfaas_core::gateway::Gateway`].
//!
//! Routes:
//!
//! | method | path | auth |
//! |---|---|---|
//! | POST | `/api/auth/login` | none |
//! | GET, POST | `/api/users` | admin |
//! | GET, POST | `/api/functions` | bearer |
//! | GET, PUT, DELETE | `/api/functions/{identifier}` | bearer |
//! | GET | `/api/functions/{identifier}/deployments` | bearer |
//! | POST | `/api/function/{identifier}` | bearer |
//! | GET | `/api/job/{id}` | bearer |
//! | GET | `/api/jobs` | bearer |
//! | GET | `/api/backends` | bearer |
//! | GET | `/metrics` | none |
//! | GET | `/ui/` | none |

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{Html, IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Form, Json, Router};
use qfaas_core::auth::User;
use qfaas_core::gateway::{ApiError, Gateway, InvocationRequest, NewUser};
use qfaas_core::jobstore::{JobFilter, JobStatus, Page};
use qfaas_core::providers::{BackendFilter, BackendKind};
use qfaas_core::registry::{CreateFunction, DeploymentRecord, FunctionRecord, UpdateFunction};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

const BUILTIN_UI: &str = include_str!("../ui/index.html");

/// An [`ApiError`] rendered as its status code and JSON envelope.
#[derive(Debug)]
pub struct Failure(pub ApiError);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Self(e)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

type Reply = Result<Response, Failure>;

#[derive(Clone)]
pub struct AppState {
    pub gateway: Arc<Gateway>,
}

/// The authenticated user behind the request's bearer token.
pub struct Caller(pub User);

impl FromRequestParts<AppState> for Caller {
    type Rejection = Failure;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Failure> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| {
                let (scheme, token) = v.split_once(' ')?;
                scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
            });
        Ok(Self(state.gateway.authenticate(token)?))
    }
}

/// JSON body whose parse errors come back as 422 envelopes.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = Failure;

    async fn from_request(req: Request, state: &S) -> Result<Self, Failure> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Self(v))
            .map_err(|r| Failure(ApiError::invalid(r.body_text())))
    }
}

/// Query string whose parse errors come back as 422 envelopes.
pub struct Params<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for Params<T> {
    type Rejection = Failure;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Failure> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| Self(v))
            .map_err(|r| Failure(ApiError::invalid(r.body_text())))
    }
}

/// Runs a core call off the async workers; invocations may block for the
/// whole result threshold.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, Failure> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Failure(ApiError::internal(format!("worker failed: {e}"))))?
        .map_err(Failure)
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    let ui_dir = gateway.config().ui_dir.clone();
    let state = AppState { gateway };
    let api = Router::new()
        .route("/api/auth/login", post(login))
        .route("/api/users", get(list_users).post(create_user))
        .route("/api/functions", get(list_functions).post(create_function))
        .route(
            "/api/functions/{identifier}",
            get(get_function).put(update_function).delete(delete_function),
        )
        .route("/api/functions/{identifier}/deployments", get(deployments))
        .route("/api/function/{identifier}", post(invoke))
        .route("/api/job/{id}", get(get_job))
        .route("/api/jobs", get(list_jobs))
        .route("/api/backends", get(backends))
        .route("/metrics", get(metrics));
    let api = match ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir)),
        None => api
            .route("/ui", get(|| async { Redirect::permanent("/ui/") }))
            .route("/ui/", get(|| async { Html(BUILTIN_UI) })),
    };
    api.fallback(|| async { Failure(ApiError::not_found("no such route")) })
        .layer(middleware::from_fn_with_state(state.clone(), count_responses))
        .with_state(state)
}

async fn count_responses(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let response = next.run(req).await;
    state.gateway.metrics.record_http(response.status().as_u16());
    response
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Credentials {
    username: String,
    password: String,
    #[serde(default)]
    #[allow(dead_code)]
    grant_type: Option<String>,
}

/// Accepts a JSON body or an OAuth2 password-grant form.
async fn login(State(state): State<AppState>, req: Request) -> Reply {
    let is_form = req
        .headers()
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/x-www-form-urlencoded"));
    let creds = if is_form {
        Form::<Credentials>::from_request(req, &())
            .await
            .map(|Form(c)| c)
            .map_err(|r| Failure(ApiError::invalid(r.body_text())))?
    } else {
        Body::<Credentials>::from_request(req, &()).await?.0
    };
    let g = state.gateway;
    let token = blocking(move || g.login(&creds.username, &creds.password)).await?;
    Ok(Json(token).into_response())
}

async fn list_users(State(state): State<AppState>, Caller(user): Caller) -> Reply {
    Ok(Json(state.gateway.list_users(&user)?).into_response())
}

async fn create_user(State(state): State<AppState>, Caller(user): Caller, Body(new): Body<NewUser>) -> Reply {
    let g = state.gateway;
    let info = blocking(move || g.create_user(&user, new)).await?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

/// A function record with its newest deployment attached.
fn with_deployment(record: FunctionRecord, deployment: DeploymentRecord) -> Value {
    let mut body = json!(record);
    body["deployment"] = json!(deployment);
    body
}

async fn list_functions(State(state): State<AppState>, Caller(user): Caller) -> Reply {
    Ok(Json(state.gateway.list_functions(&user)).into_response())
}

async fn create_function(State(state): State<AppState>, Caller(user): Caller, Body(req): Body<CreateFunction>) -> Reply {
    let g = state.gateway;
    let (record, deployment) = blocking(move || g.create_function(&user, req)).await?;
    Ok((StatusCode::ACCEPTED, Json(with_deployment(record, deployment))).into_response())
}

async fn get_function(State(state): State<AppState>, Caller(user): Caller, Path(id): Path<String>) -> Reply {
    Ok(Json(state.gateway.get_function(&user, &id)?).into_response())
}

async fn update_function(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path(id): Path<String>,
    Body(req): Body<UpdateFunction>,
) -> Reply {
    let g = state.gateway;
    let (record, deployment) = blocking(move || g.update_function(&user, &id, req)).await?;
    Ok((StatusCode::ACCEPTED, Json(with_deployment(record, deployment))).into_response())
}

async fn delete_function(State(state): State<AppState>, Caller(user): Caller, Path(id): Path<String>) -> Reply {
    let g = state.gateway;
    Ok(Json(blocking(move || g.delete_function(&user, &id)).await?).into_response())
}

async fn deployments(State(state): State<AppState>, Caller(user): Caller, Path(id): Path<String>) -> Reply {
    Ok(Json(state.gateway.deployments(&user, &id)?).into_response())
}

async fn invoke(
    State(state): State<AppState>,
    Caller(user): Caller,
    Path(id): Path<String>,
    Body(req): Body<InvocationRequest>,
) -> Reply {
    let g = state.gateway;
    Ok(Json(blocking(move || g.invoke(&user, &id, req)).await?).into_response())
}

async fn get_job(State(state): State<AppState>, Caller(user): Caller, Path(id): Path<String>) -> Reply {
    Ok(Json(state.gateway.get_job(&user, &id)?).into_response())
}

#[derive(Deserialize)]
struct JobsQuery {
    owner: Option<String>,
    status: Option<String>,
    function: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn list_jobs(State(state): State<AppState>, Caller(user): Caller, Params(q): Params<JobsQuery>) -> Reply {
    let status = q
        .status
        .map(|s| s.parse::<JobStatus>())
        .transpose()
        .map_err(|e| ApiError::invalid(format!("status: {e}")))?;
    let filter = JobFilter {
        owner: q.owner,
        function: q.function,
        status,
    };
    let default = Page::default();
    let page = Page {
        offset: q.offset.unwrap_or(default.offset),
        limit: q.limit.unwrap_or(default.limit),
    };
    Ok(Json(state.gateway.list_jobs(&user, &filter, page)).into_response())
}

#[derive(Deserialize)]
struct BackendsQuery {
    provider: Option<String>,
    #[serde(rename = "type")]
    kind: Option<BackendKind>,
    operational: Option<bool>,
}

async fn backends(State(state): State<AppState>, Caller(_): Caller, Params(q): Params<BackendsQuery>) -> Reply {
    let filter = BackendFilter {
        provider: q.provider,
        kind: q.kind,
        operational: q.operational,
    };
    Ok(Json(state.gateway.backends(&filter)).into_response())
}

async fn metrics(State(state): State<AppState>) -> Response {
    let mut response = state.gateway.render_metrics().into_response();
    response.headers_mut().insert(
        CONTENT_TYPE,
        HeaderValue::from_static("text/plain; version=0.0.4; charset=utf-8"),
    );
    response
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    gateway: Arc<Gateway>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own thread and runtime; stops when dropped.
pub struct Background {
    pub addr: SocketAddr,
    pub gateway: Arc<Gateway>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Background {
    /// Binds an ephemeral port on 127.0.0.1.
    pub fn start(gateway: Arc<Gateway>) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(TcpListener::bind("127.0.0.1:0"))?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let g = Arc::clone(&gateway);
        let thread = std::thread::spawn(move || {
            let shutdown = async move {
                let _ = stopped.await;
            };
            if let Err(e) = runtime.block_on(serve(listener, g, shutdown)) {
                tracing::error!(error = %e, "server stopped");
            }
        });
        Ok(Self {
            addr,
            gateway,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for Background {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
