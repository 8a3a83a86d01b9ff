//! HTTP+JSON host for [`Medis`].
//!
//! Every request authenticates through the `Authorization` header (Basic for
//! authority staff, Bearer SSO tokens for applicants). Mutations honour an
//! optional `Idempotency-Key` header. Dossier paths accept either the protocol
//! code, percent-encoded, or the storage id.

mod dto;
mod error;

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{FromRequestParts, Path, Query as Params, RawQuery, Request, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::Duration;
use medis_core::evaluation::ReportKind;
use medis_core::model::{CommunicationId, DocumentId, FormData};
use medis_core::search::Query;
use medis_core::service::{
    Credential, DecisionRequest, DraftRequest, ExportFormat, RegistrationForm, ServiceError, TeamRequest,
};
use medis_core::store::{EntryKind, TimelineOptions};
use medis_core::{Medis, Session};
use serde::Serialize;
use serde_json::Value;

pub use dto::{CommunicationBody, DeadlineBody, EventBody, ReportSave, UploadBody};
pub use error::{status_of, ApiError};

pub type AppState = Arc<Medis>;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

/// An authenticated request.
pub struct Caller {
    pub session: Session,
    pub idempotency_key: Option<String>,
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, medis: &AppState) -> Result<Self, Self::Rejection> {
        let header = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthenticated", "missing credential"))?;
        let credential = Credential::from_header(header)
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthenticated", "malformed credential"))?;
        let session = medis.authenticate(&credential)?;
        let idempotency_key = parts
            .headers
            .get(IDEMPOTENCY_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned);
        Ok(Caller { session, idempotency_key })
    }
}

/// Refuses plaintext when the configuration demands transport security.
/// TLS terminates in front of the service, which reports the scheme in
/// `X-Forwarded-Proto`.
async fn require_tls(State(medis): State<AppState>, request: Request, next: Next) -> Response {
    let secure = request
        .headers()
        .get("x-forwarded-proto")
        .and_then(|v| v.to_str().ok())
        .is_some_and(|p| p.eq_ignore_ascii_case("https"));
    if medis.config().require_tls && !secure {
        return ApiError::new(StatusCode::UPGRADE_REQUIRED, "plaintext-refused", "HTTPS is required").into_response();
    }
    next.run(request).await
}

pub fn router(medis: AppState) -> Router {
    Router::new()
        .route("/registrations", get(list_registrations).post(register))
        .route("/registrations/{id}/approve", post(approve_registration))
        .route("/registrations/{id}/deny", post(deny_registration))
        .route("/notifications", get(own_notifications).post(create_draft))
        .route("/notifications/{id}/form", put(set_form))
        .route("/notifications/{id}/check", get(check_draft))
        .route("/notifications/{id}/documents", post(upload))
        .route("/notifications/{id}/submit", post(submit))
        .route("/dossiers/{code}", get(dossier_view))
        .route("/dossiers/{code}/documents", post(upload))
        .route("/dossiers/{code}/documents/{doc}", get(document_content))
        .route("/dossiers/{code}/team", post(assign_team))
        .route("/dossiers/{code}/deadline", put(set_deadline))
        .route("/dossiers/{code}/reports/{kind}", get(read_report).put(save_report))
        .route("/dossiers/{code}/reports/{kind}/share", post(share_report))
        .route("/dossiers/{code}/oriented-denial", post(oriented_denial))
        .route("/dossiers/{code}/decision", post(decide))
        .route("/dossiers/{code}/communications", post(open_communication))
        .route("/communications/{id}/reply", post(reply))
        .route("/dossiers/{code}/events", post(report_event))
        .route("/dossiers/{code}/timeline", get(timeline))
        .route("/dossiers/{code}/open-requests", get(open_requests))
        .route("/dossiers/{code}/export", get(export))
        .route("/search", get(search))
        .route("/stats", get(stats))
        .route("/monitoring/overdue", get(overdue))
        .route("/vocabularies/{scheme}", get(vocabulary))
        .layer(middleware::from_fn_with_state(medis.clone(), require_tls))
        .with_state(medis)
}

/// Serves until ctrl-c.
pub async fn serve(medis: AppState, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(medis))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

type Reply = Result<Json<Value>, ApiError>;

fn to_json<T: Serialize>(value: T) -> Value {
    serde_json::to_value(value).expect("responses serialize")
}

/// Runs a mutation once per idempotency key.
fn mutate<T: Serialize>(medis: &Medis, caller: &Caller, f: impl FnOnce() -> Result<T, ServiceError>) -> Reply {
    let value = medis.idempotent(&caller.session, caller.idempotency_key.as_deref(), || f().map(to_json))?;
    Ok(Json(value))
}

fn created(reply: Reply) -> Result<(StatusCode, Json<Value>), ApiError> {
    reply.map(|j| (StatusCode::CREATED, j))
}

fn report_kind(text: &str) -> Result<ReportKind, ApiError> {
    text.parse().map_err(|e: medis_core::model::ModelError| ApiError::invalid(e.to_string()))
}

// ---- registrations ------------------------------------------------------

async fn list_registrations(State(medis): State<AppState>, caller: Caller) -> Reply {
    Ok(Json(to_json(medis.registrations(&caller.session)?)))
}

async fn register(
    State(medis): State<AppState>,
    caller: Caller,
    Json(form): Json<RegistrationForm>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    created(mutate(&medis, &caller, || medis.register_applicant(&caller.session, form)))
}

async fn approve_registration(State(medis): State<AppState>, caller: Caller, Path(id): Path<String>) -> Reply {
    mutate(&medis, &caller, || medis.approve_registration(&caller.session, &id))
}

async fn deny_registration(State(medis): State<AppState>, caller: Caller, Path(id): Path<String>) -> Reply {
    mutate(&medis, &caller, || medis.deny_registration(&caller.session, &id).map(|_| serde_json::json!({ "denied": id })))
}

// ---- intake -------------------------------------------------------------

async fn own_notifications(State(medis): State<AppState>, caller: Caller) -> Reply {
    let views = medis
        .own_dossiers(&caller.session)?
        .iter()
        .map(|d| medis.view(&caller.session, d.id.as_str()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Json(to_json(views)))
}

async fn create_draft(
    State(medis): State<AppState>,
    caller: Caller,
    Json(request): Json<DraftRequest>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    created(mutate(&medis, &caller, || {
        let d = medis.create_draft(&caller.session, &request)?;
        medis.view(&caller.session, d.id.as_str())
    }))
}

async fn set_form(State(medis): State<AppState>, caller: Caller, Path(id): Path<String>, Json(form): Json<FormData>) -> Reply {
    mutate(&medis, &caller, || {
        medis.set_form(&caller.session, &id, form)?;
        medis.view(&caller.session, &id)
    })
}

async fn check_draft(State(medis): State<AppState>, caller: Caller, Path(id): Path<String>) -> Reply {
    Ok(Json(to_json(medis.check_draft(&caller.session, &id)?)))
}

async fn upload(
    State(medis): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Json(body): Json<UploadBody>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let up = body.into_upload()?;
    created(mutate(&medis, &caller, || medis.upload(&caller.session, &id, up)))
}

async fn submit(State(medis): State<AppState>, caller: Caller, Path(id): Path<String>) -> Reply {
    mutate(&medis, &caller, || {
        medis.submit(&caller.session, &id)?;
        medis.view(&caller.session, &id)
    })
}

// ---- dossiers -----------------------------------------------------------

async fn dossier_view(State(medis): State<AppState>, caller: Caller, Path(code): Path<String>) -> Reply {
    Ok(Json(to_json(medis.view(&caller.session, &code)?)))
}

async fn document_content(
    State(medis): State<AppState>,
    caller: Caller,
    Path((code, doc)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let (document, bytes) = medis.document_content(&caller.session, &code, &DocumentId::from(doc))?;
    Ok(([(CONTENT_TYPE, document.blob.media_type)], bytes).into_response())
}

async fn assign_team(State(medis): State<AppState>, caller: Caller, Path(code): Path<String>, Json(team): Json<TeamRequest>) -> Reply {
    mutate(&medis, &caller, || {
        medis.assign_team(&caller.session, &code, &team)?;
        medis.view(&caller.session, &code)
    })
}

async fn set_deadline(State(medis): State<AppState>, caller: Caller, Path(code): Path<String>, Json(body): Json<DeadlineBody>) -> Reply {
    mutate(&medis, &caller, || {
        medis.set_deadline(&caller.session, &code, body.deadline)?;
        medis.view(&caller.session, &code)
    })
}

async fn read_report(State(medis): State<AppState>, caller: Caller, Path((code, kind)): Path<(String, String)>) -> Reply {
    Ok(Json(to_json(medis.read_report(&caller.session, &code, report_kind(&kind)?)?)))
}

async fn save_report(
    State(medis): State<AppState>,
    caller: Caller,
    Path((code, kind)): Path<(String, String)>,
    Json(save): Json<ReportSave>,
) -> Reply {
    let kind = report_kind(&kind)?;
    mutate(&medis, &caller, || {
        let revision = medis.save_report(&caller.session, &code, kind, save.body, save.expected_revision)?;
        Ok(serde_json::json!({ "revision": revision }))
    })
}

async fn share_report(State(medis): State<AppState>, caller: Caller, Path((code, kind)): Path<(String, String)>) -> Reply {
    let kind = report_kind(&kind)?;
    mutate(&medis, &caller, || medis.share_report(&caller.session, &code, kind))
}

async fn oriented_denial(
    State(medis): State<AppState>,
    caller: Caller,
    Path(code): Path<String>,
    Json(body): Json<CommunicationBody>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let draft = body.into_draft()?;
    created(mutate(&medis, &caller, || medis.mark_oriented_denial(&caller.session, &code, draft)))
}

async fn decide(State(medis): State<AppState>, caller: Caller, Path(code): Path<String>, Json(request): Json<DecisionRequest>) -> Reply {
    mutate(&medis, &caller, || {
        medis.decide(&caller.session, &code, &request)?;
        medis.view(&caller.session, &code)
    })
}

// ---- communications and investigation events ---------------------------

async fn open_communication(
    State(medis): State<AppState>,
    caller: Caller,
    Path(code): Path<String>,
    Json(body): Json<CommunicationBody>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let draft = body.into_draft()?;
    created(mutate(&medis, &caller, || medis.open_communication(&caller.session, &code, draft)))
}

async fn reply(
    State(medis): State<AppState>,
    caller: Caller,
    Path(id): Path<String>,
    Json(body): Json<CommunicationBody>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let draft = body.into_draft()?;
    created(mutate(&medis, &caller, || medis.reply(&caller.session, &CommunicationId::from(id), draft)))
}

async fn report_event(State(medis): State<AppState>, caller: Caller, Path(code): Path<String>, Json(body): Json<EventBody>) -> Reply {
    let (kind, report) = body.into_report()?;
    mutate(&medis, &caller, || {
        medis.report_event(&caller.session, &code, kind, report)?;
        medis.view(&caller.session, &code)
    })
}

// ---- monitoring ---------------------------------------------------------

async fn timeline(
    State(medis): State<AppState>,
    caller: Caller,
    Path(code): Path<String>,
    Params(params): Params<HashMap<String, String>>,
) -> Reply {
    let mut opts = TimelineOptions::default();
    if let Some(kinds) = params.get("kinds").filter(|k| !k.is_empty()) {
        for k in kinds.split(',') {
            opts.kinds.insert(EntryKind::parse(k).ok_or_else(|| ApiError::invalid(format!("unknown entry kind `{k}`")))?);
        }
    }
    match params.get("order").map(String::as_str) {
        None | Some("desc") => {}
        Some("asc") => opts.ascending = true,
        Some(other) => return Err(ApiError::invalid(format!("unknown order `{other}`"))),
    }
    Ok(Json(to_json(medis.timeline(&caller.session, &code, opts)?)))
}

async fn open_requests(State(medis): State<AppState>, caller: Caller, Path(code): Path<String>) -> Reply {
    Ok(Json(to_json(medis.open_requests(&caller.session, &code)?)))
}

fn parse_query(raw: Option<String>) -> Result<Query, ApiError> {
    Ok(Query::from_query_string(raw.as_deref().unwrap_or("")).map_err(ServiceError::from)?)
}

async fn search(State(medis): State<AppState>, caller: Caller, RawQuery(raw): RawQuery) -> Reply {
    Ok(Json(to_json(medis.search(&caller.session, &parse_query(raw)?)?)))
}

async fn stats(State(medis): State<AppState>, caller: Caller, RawQuery(raw): RawQuery) -> Reply {
    Ok(Json(to_json(medis.stats(&caller.session, &parse_query(raw)?)?)))
}

async fn overdue(State(medis): State<AppState>, caller: Caller, Params(params): Params<HashMap<String, String>>) -> Reply {
    let days: i64 = match params.get("days") {
        None => 30,
        Some(d) => d.parse().map_err(|_| ApiError::invalid(format!("days must be an integer, got `{d}`")))?,
    };
    Ok(Json(to_json(medis.overdue(&caller.session, Duration::days(days))?)))
}

async fn vocabulary(
    State(medis): State<AppState>,
    caller: Caller,
    Path(scheme): Path<String>,
    Params(params): Params<HashMap<String, String>>,
) -> Reply {
    let needle = params.get("q").map(String::as_str).unwrap_or("");
    let limit = params.get("limit").and_then(|l| l.parse().ok()).unwrap_or(20);
    Ok(Json(to_json(medis.lookup_vocabulary(&caller.session, &scheme, needle, limit)?)))
}

async fn export(
    State(medis): State<AppState>,
    caller: Caller,
    Path(code): Path<String>,
    Params(params): Params<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let format: ExportFormat = params.get("format").map(String::as_str).unwrap_or("xml").parse()?;
    let body = medis.export(&caller.session, &code, format)?;
    let media = match format {
        ExportFormat::Xml => "application/xml; charset=utf-8",
        ExportFormat::Extract => "text/tab-separated-values; charset=utf-8",
    };
    Ok(([(CONTENT_TYPE, media)], body).into_response())
}
