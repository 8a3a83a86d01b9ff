#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine;
use chrono::Duration;
use http_body_util::BodyExt;
use medis_core::scenario::{self, RunReport, Script};
use medis_core::time::{utc_day, ManualClock};
use medis_core::{Config, Medis, PartyId};
use serde_json::{json, Value};
use tower::ServiceExt;

#[derive(Debug, Clone, Copy)]
pub enum Auth<'a> {
    None,
    /// Basic credential; fixture staff use their id as login and password.
    Staff(&'a str),
    /// SSO bearer token for an applicant organization.
    Org(&'a str),
}

pub struct Client {
    pub medis: Arc<Medis>,
    pub clock: Arc<ManualClock>,
    pub router: Router,
}

pub struct Response {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub bytes: Vec<u8>,
}

impl Response {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|_| panic!("not json: {}", String::from_utf8_lossy(&self.bytes)))
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.bytes.clone()).unwrap()
    }
}

pub fn basic(login: &str, password: &str) -> String {
    format!("Basic {}", base64::engine::general_purpose::STANDARD.encode(format!("{login}:{password}")))
}

/// Percent-encodes the slashes of a protocol code for use as a path segment.
pub fn seg(code: &str) -> String {
    code.replace('/', "%2F")
}

pub fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn upload(doc_type: &str, label: &str) -> Value {
    json!({ "doc_type": doc_type, "label": label, "content": b64(format!("{doc_type}:{label}").as_bytes()) })
}

impl Client {
    pub fn new(config: Config) -> Self {
        let clock = Arc::new(ManualClock::new(utc_day(2009, 3, 1)));
        let medis = Arc::new(Medis::with_clock(config, clock.clone()).unwrap());
        let router = medis_server::router(medis.clone());
        Client { medis, clock, router }
    }

    pub fn replay(script: &Script) -> (Self, RunReport) {
        let clock = Arc::new(ManualClock::new(utc_day(2008, 1, 1)));
        let medis = Arc::new(Medis::with_clock(Config::default(), clock.clone()).unwrap());
        let report = scenario::run(&medis, &clock, script).unwrap_or_else(|e| panic!("{e}"));
        let router = medis_server::router(medis.clone());
        (Client { medis, clock, router }, report)
    }

    pub fn header(&self, auth: Auth<'_>) -> Option<String> {
        match auth {
            Auth::None => None,
            Auth::Staff(id) => Some(basic(id, id)),
            Auth::Org(party) => {
                let token = self.medis.issue_sso_token(&PartyId::from(party), self.medis.now() + Duration::hours(1));
                Some(format!("Bearer {token}"))
            }
        }
    }

    pub async fn send(&self, method: &str, path: &str, auth: Auth<'_>, body: Option<Value>, extra: &[(&str, &str)]) -> Response {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(h) = self.header(auth) {
            req = req.header("authorization", h);
        }
        for (k, v) in extra {
            req = req.header(*k, *v);
        }
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let res = self.router.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let content_type = res.headers().get("content-type").map(|v| v.to_str().unwrap().to_owned());
        let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        Response { status, content_type, bytes }
    }

    pub async fn get(&self, path: &str, auth: Auth<'_>) -> Response {
        self.send("GET", path, auth, None, &[]).await
    }

    pub async fn post(&self, path: &str, auth: Auth<'_>, body: Value) -> Response {
        self.send("POST", path, auth, Some(body), &[]).await
    }

    pub async fn put(&self, path: &str, auth: Auth<'_>, body: Value) -> Response {
        self.send("PUT", path, auth, Some(body), &[]).await
    }
}
