//! HTTP front end over [`AuctionService`].
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | POST | `/auctions` | auction config | `201 {"id": n}` |
//! | POST | `/auctions/{id}/bids` | bid | `202 {"id", "tenant_id", "accepted"}` |
//! | POST | `/auctions/{id}/close?algorithm=fptas` | none | outcome |
//! | GET | `/auctions/{id}[?tenant=ID]` | none | auction or tenant view |
//!
//! Errors come back as `{"error": message}` with a 4xx/5xx status.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use medr::service::{AuctionId, AuctionService, ServiceError};
use medr::{AllocatorTag, AuctionConfig, Bid, TenantId};

pub fn router(service: Arc<AuctionService>) -> Router {
    Router::new()
        .route("/auctions", post(create))
        .route("/auctions/{id}", get(results))
        .route("/auctions/{id}/bids", post(submit))
        .route("/auctions/{id}/close", post(close))
        .with_state(service)
}

struct ApiError(StatusCode, String);

impl From<ServiceError> for ApiError {
    fn from(err: ServiceError) -> Self {
        let status =
            StatusCode::from_u16(err.status_code()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        ApiError(status, err.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError(rejection.status(), rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

async fn create(
    State(svc): State<Arc<AuctionService>>,
    body: Result<Json<AuctionConfig>, JsonRejection>,
) -> ApiResult {
    let Json(config) = body?;
    let id = svc.create_auction(config)?;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))).into_response())
}

async fn submit(
    State(svc): State<Arc<AuctionService>>,
    Path(id): Path<AuctionId>,
    body: Result<Json<Bid>, JsonRejection>,
) -> ApiResult {
    let Json(bid) = body?;
    let tenant = bid.tenant_id.clone();
    svc.submit_bid(id, bid)?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"id": id, "tenant_id": tenant, "accepted": true})),
    )
        .into_response())
}

#[derive(Deserialize)]
struct CloseQuery {
    algorithm: Option<String>,
}

async fn close(
    State(svc): State<Arc<AuctionService>>,
    Path(id): Path<AuctionId>,
    Query(query): Query<CloseQuery>,
) -> ApiResult {
    let algorithm: AllocatorTag = match query.algorithm.as_deref() {
        None => AllocatorTag::Fptas,
        Some(name) => name
            .parse()
            .map_err(|msg| ApiError(StatusCode::BAD_REQUEST, msg))?,
    };
    // Clearing is CPU-bound; keep it off the async workers.
    let outcome = tokio::task::spawn_blocking(move || svc.close_auction(id, algorithm))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/json")],
        outcome.to_json(),
    )
        .into_response())
}

#[derive(Deserialize)]
struct ResultsQuery {
    tenant: Option<String>,
}

async fn results(
    State(svc): State<Arc<AuctionService>>,
    Path(id): Path<AuctionId>,
    Query(query): Query<ResultsQuery>,
) -> ApiResult {
    let body = match query.tenant {
        Some(tenant) => svc.tenant_status(id, &TenantId::new(tenant))?.to_json(),
        None => svc.get_results(id)?.to_json(),
    };
    Ok(Json(body).into_response())
}
