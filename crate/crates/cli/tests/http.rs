use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use medr::dataset::published_instance;
use medr::service::{AuctionService, ServiceOptions};
use medr::{run_mechanism, AllocatorTag, AuctionConfig};

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, String) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn app() -> Router {
    medr_cli::router(Arc::new(AuctionService::in_memory()))
}

fn hour5_config() -> Value {
    json!({"target_mw": 68, "alpha_usd_per_mwh": "180", "gamma_pue": "1.6", "epsilon": "0.5"})
}

#[tokio::test]
async fn full_auction_round_trip() {
    let app = app();
    let (status, body) = call(&app, Method::POST, "/auctions", Some(hour5_config())).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = serde_json::from_str::<Value>(&body).unwrap()["id"]
        .as_u64()
        .unwrap();

    let instance = published_instance(5, AuctionConfig::from_tenths(68, 180, 16, 5));
    for bid in &instance.bids {
        let (status, _) = call(
            &app,
            Method::POST,
            &format!("/auctions/{id}/bids"),
            Some(serde_json::to_value(bid).unwrap()),
        )
        .await;
        assert_eq!(status, StatusCode::ACCEPTED);
    }

    let (status, body) = call(&app, Method::GET, &format!("/auctions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        serde_json::from_str::<Value>(&body).unwrap(),
        json!({"id": id, "state": "open", "bids": 9})
    );

    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/auctions/{id}/close?algorithm=fptas"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        run_mechanism(&instance, &AllocatorTag::Fptas)
            .unwrap()
            .to_json()
    );

    let (status, _) = call(&app, Method::POST, &format!("/auctions/{id}/close"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, body) = call(
        &app,
        Method::GET,
        &format!("/auctions/{id}?tenant=tenant7"),
        None,
    )
    .await;
    let view: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(view["won"], true);
    // Above 2^12 the bid leaves scale 12, and at scale 13 {2,3,5} rounds cheaper.
    assert_eq!(view["payment_usd"], 4096);
    let (_, body) = call(
        &app,
        Method::GET,
        &format!("/auctions/{id}?tenant=tenant1"),
        None,
    )
    .await;
    let view: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(view["won"], false);
    assert_eq!(view["payment_usd"], 0);
    assert!(!body.contains("tenant7"));
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (status, _) = call(&app, Method::GET, "/auctions/7", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let mut bad = hour5_config();
    bad["gamma_pue"] = json!("0.5");
    let (status, body) = call(&app, Method::POST, "/auctions", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");

    let request = Request::builder()
        .method(Method::POST)
        .uri("/auctions")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(
        app.clone().oneshot(request).await.unwrap().status(),
        StatusCode::BAD_REQUEST
    );

    let (_, body) = call(&app, Method::POST, "/auctions", Some(hour5_config())).await;
    let id = serde_json::from_str::<Value>(&body).unwrap()["id"]
        .as_u64()
        .unwrap();
    let bid = json!({"tenant_id": "t", "size_mw": 4, "cost_usd": 10});
    let uri = format!("/auctions/{id}/bids");
    assert_eq!(
        call(&app, Method::POST, &uri, Some(bid.clone())).await.0,
        StatusCode::ACCEPTED
    );
    assert_eq!(
        call(&app, Method::POST, &uri, Some(bid)).await.0,
        StatusCode::CONFLICT
    );
    let negative = json!({"tenant_id": "u", "size_mw": -4, "cost_usd": 10});
    assert_eq!(
        call(&app, Method::POST, &uri, Some(negative)).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/auctions/{id}/close?algorithm=magic"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/auctions/{id}/close?algorithm=bes"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn oversized_close_is_rejected() {
    let service = AuctionService::open(ServiceOptions {
        max_bids: 1,
        ..ServiceOptions::default()
    })
    .unwrap();
    let app = medr_cli::router(Arc::new(service));
    let (_, body) = call(&app, Method::POST, "/auctions", Some(hour5_config())).await;
    let id = serde_json::from_str::<Value>(&body).unwrap()["id"]
        .as_u64()
        .unwrap();
    for t in ["a", "b"] {
        let bid = json!({"tenant_id": t, "size_mw": 4, "cost_usd": 10});
        call(
            &app,
            Method::POST,
            &format!("/auctions/{id}/bids"),
            Some(bid),
        )
        .await;
    }
    let (status, _) = call(&app, Method::POST, &format!("/auctions/{id}/close"), None).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}
