mod common;

use std::collections::BTreeSet;

use axum::http::StatusCode;
use medis_core::export::ExportView;
use medis_core::fixtures::{self, FIG4_ALIAS, FIG4_SUPERVISOR, FIG5_SUPERVISOR};
use medis_core::model::{Party, PartyKind};
use medis_core::service::{export_bytes, ExportFormat, RegistrationForm};
use medis_core::{Config, Role};
use serde_json::json;

use common::{seg, upload, Auth, Client};

const REQUIRED: [&str; 8] = [
    "ethics-committee-opinion",
    "declaration",
    "clinical-protocol",
    "investigator-brochure",
    "risk-analysis",
    "literature-analysis",
    "instructions-for-use",
    "payment-proof",
];

fn with_staff(config: Config) -> Client {
    let client = Client::new(config);
    for (id, role) in [
        ("sec", Role::AdministrativeSecretary),
        ("sup", Role::Supervisor),
        ("te", Role::TechnicalEvaluator),
        ("me", Role::MedicalEvaluator),
    ] {
        let party = Party::new(id, PartyKind::NcaUser, id.to_uppercase(), "", "IT").unwrap();
        client.medis.add_staff(party, [role].into(), id, id).unwrap();
    }
    client
}

fn registration(org: &str) -> serde_json::Value {
    let form = RegistrationForm {
        organization: Party::new(org, PartyKind::ApplicantOrganization, format!("{org} S.r.l."), "", "IT").unwrap(),
        requested_roles: [Role::Manufacturer].into(),
        delegating_manufacturer: None,
        delegation_valid_to: None,
    };
    serde_json::to_value(form).unwrap()
}

/// A valid notification form borrowed from the single-dossier fixture.
fn sample_form() -> serde_json::Value {
    let (client, report) = Client::replay(&fixtures::fig4());
    let sup = client.medis.session_for(&FIG4_SUPERVISOR.into()).unwrap();
    let d = client.medis.dossier(&sup, report.aliases[FIG4_ALIAS].as_str()).unwrap();
    serde_json::to_value(d.notification.form()).unwrap()
}

#[tokio::test]
async fn full_lifecycle_over_http() {
    let c = with_staff(Config::default());
    let acme = Auth::Org("acme");

    let res = c.post("/notifications", acme, json!({ "role": "manufacturer" })).await;
    assert_eq!(res.status, StatusCode::FORBIDDEN, "unregistered party");
    let res = c.post("/registrations", acme, registration("acme")).await;
    assert_eq!(res.status, StatusCode::CREATED);
    let reg = res.json()["id"].as_str().unwrap().to_owned();
    assert_eq!(c.post(&format!("/registrations/{reg}/approve"), acme, json!({})).await.status, StatusCode::FORBIDDEN);
    let res = c.post(&format!("/registrations/{reg}/approve"), Auth::Staff("sec"), json!({})).await;
    assert_eq!(res.status, StatusCode::OK, "{}", res.text());

    let res = c.post("/notifications", acme, json!({ "role": "manufacturer" })).await;
    assert_eq!(res.status, StatusCode::CREATED, "{}", res.text());
    let id = res.json()["id"].as_str().unwrap().to_owned();
    assert_eq!(res.json()["state"], "draft");
    assert_eq!(c.get(&format!("/dossiers/{id}"), Auth::Staff("sup")).await.status, StatusCode::NOT_FOUND);

    let res = c.put(&format!("/notifications/{id}/form"), acme, sample_form()).await;
    assert_eq!(res.status, StatusCode::OK, "{}", res.text());
    let res = c.post(&format!("/notifications/{id}/submit"), acme, json!({})).await;
    assert_eq!(res.status, StatusCode::UNPROCESSABLE_ENTITY);
    let missing: BTreeSet<String> =
        serde_json::from_value(res.json()["report"]["missing"].clone()).unwrap();
    assert_eq!(missing, REQUIRED.iter().map(|s| s.to_string()).collect());
    for t in REQUIRED {
        let res = c.post(&format!("/notifications/{id}/documents"), acme, upload(t, &format!("{t}.pdf"))).await;
        assert_eq!(res.status, StatusCode::CREATED, "{}", res.text());
    }
    let check = c.get(&format!("/notifications/{id}/check"), acme).await.json();
    assert_eq!(check["missing"], json!([]));
    let res = c.post(&format!("/notifications/{id}/submit"), acme, json!({})).await;
    assert_eq!(res.status, StatusCode::OK, "{}", res.text());
    let code = res.json()["code"].as_str().unwrap().to_owned();
    assert_eq!(res.json()["state"], "submitted");
    let path = format!("/dossiers/{}", seg(&code));
    assert_eq!(c.get(&path, Auth::Staff("sup")).await.json()["id"], id);
    assert_eq!(c.put(&format!("/notifications/{id}/form"), acme, sample_form()).await.status, StatusCode::CONFLICT);

    let res = c.post(&format!("{path}/team"), Auth::Staff("sec"), json!({ "supervisor": "sup", "technical": "te", "medical": "me" })).await;
    assert_eq!(res.status, StatusCode::OK, "{}", res.text());
    assert_eq!(res.json()["state"], "evaluation:in-progress");
    let body = json!({ "body": {
        "device_characteristics": "adequate",
        "risk_analysis": "acceptable",
        "patient_safety": "ensured"
    }});
    for (who, kind) in [("te", "technical"), ("me", "medical")] {
        let res = c.put(&format!("{path}/reports/{kind}"), Auth::Staff(who), body.clone()).await;
        assert_eq!(res.status, StatusCode::OK, "{}", res.text());
        assert_eq!(res.json()["revision"], 1);
    }
    assert_eq!(c.get(&format!("{path}/reports/technical"), Auth::Staff("sup")).await.status, StatusCode::FORBIDDEN);
    assert_eq!(c.put(&format!("{path}/reports/technical"), Auth::Staff("me"), body.clone()).await.status, StatusCode::FORBIDDEN);
    let res = c.post(&format!("{path}/decision"), Auth::Staff("sup"), json!({ "outcome": "approve" })).await;
    assert_eq!(res.status, StatusCode::CONFLICT, "both reports must be shared first");
    for (who, kind) in [("te", "technical"), ("me", "medical")] {
        let res = c.post(&format!("{path}/reports/{kind}/share"), Auth::Staff(who), json!({})).await;
        assert_eq!(res.status, StatusCode::OK, "{}", res.text());
    }
    assert_eq!(c.get(&format!("{path}/reports/technical"), Auth::Staff("sup")).await.status, StatusCode::OK);
    assert_eq!(c.get(&format!("{path}/reports/technical"), acme).await.status, StatusCode::FORBIDDEN);
    let res = c.post(&format!("{path}/decision"), Auth::Staff("sup"), json!({ "outcome": "approve", "rationale": "ok" })).await;
    assert_eq!(res.status, StatusCode::OK, "{}", res.text());
    assert_eq!(res.json()["state"], "evaluation:approved");

    let start = json!({ "kind": "report-start", "date": "2009-04-01", "documents": [upload("civ-start", "Inizio.pdf")] });
    assert_eq!(c.post(&format!("{path}/events"), Auth::Staff("sup"), start.clone()).await.status, StatusCode::FORBIDDEN);
    let res = c.post(&format!("{path}/events"), acme, start).await;
    assert_eq!(res.status, StatusCode::OK, "{}", res.text());
    assert_eq!(res.json()["state"], "investigation:started");
    let sae = json!({ "kind": "report-sae-initial", "narrative": "hospitalisation" });
    assert_eq!(c.post(&format!("{path}/events"), acme, sae).await.status, StatusCode::OK);

    let res = c.post(&format!("{path}/communications"), Auth::Staff("sup"), json!({ "type": "info-request", "subject": "SAE details" })).await;
    assert_eq!(res.status, StatusCode::CREATED, "{}", res.text());
    let request = res.json()["id"].as_str().unwrap().to_owned();
    assert_eq!(c.get(&format!("{path}/open-requests"), acme).await.json().as_array().unwrap().len(), 1);
    let answer = json!({ "type": "info-response", "subject": "Details", "attachments": [upload("clarification", "Dettagli.pdf")] });
    let res = c.post(&format!("/communications/{request}/reply"), acme, answer).await;
    assert_eq!(res.status, StatusCode::CREATED, "{}", res.text());
    assert_eq!(c.get(&format!("{path}/open-requests"), Auth::Staff("sup")).await.json(), json!([]));

    let timeline = c.get(&format!("{path}/timeline?order=asc&kinds=document"), acme).await.json();
    let at: Vec<&str> = timeline.as_array().unwrap().iter().map(|e| e["at"].as_str().unwrap()).collect();
    assert!(at.windows(2).all(|w| w[0] <= w[1]));
    let labels: Vec<&str> = timeline.as_array().unwrap().iter().map(|e| e["label"].as_str().unwrap()).collect();
    assert_eq!(labels, [code.as_str(), "Notification approved", "Inizio.pdf"]);
    assert_eq!(timeline[0]["refs"].as_array().unwrap().len(), 1 + REQUIRED.len());
    assert_eq!(c.get(&format!("{path}/timeline?order=sideways"), acme).await.status, StatusCode::BAD_REQUEST);

    let rows = c.get(&format!("/search?number={}", code.rsplit('/').nth(1).unwrap()), Auth::Staff("te")).await.json();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["code"], code);
    assert_eq!(c.get("/stats", acme).await.json()["total"], 1);

    let sup = c.medis.session_for(&"sup".into()).unwrap();
    let d = c.medis.dossier(&sup, &code).unwrap();
    let res = c.get(&format!("{path}/export?format=xml"), Auth::Staff("sup")).await;
    assert_eq!(res.text(), export_bytes(&d, ExportFormat::Xml, ExportView::Full).unwrap());
    assert!(res.content_type.as_deref().unwrap().starts_with("application/xml"));
    let res = c.get(&format!("{path}/export"), acme).await;
    assert_eq!(res.text(), export_bytes(&d, ExportFormat::Xml, ExportView::Applicant).unwrap());
    assert_eq!(c.get(&format!("{path}/export?format=pdf"), acme).await.status, StatusCode::BAD_REQUEST);

    let doc = &d.documents[0];
    let res = c.get(&format!("{path}/documents/{}", doc.id), acme).await;
    assert_eq!(res.status, StatusCode::OK);
    assert_eq!(medis_core::store::sha256_hex(&res.bytes), doc.blob.digest);
}

#[tokio::test]
async fn authentication_failures_map_to_401_and_403() {
    let c = with_staff(Config::default());
    assert_eq!(c.get("/search", Auth::None).await.status, StatusCode::UNAUTHORIZED);
    let res = c.send("GET", "/search", Auth::None, None, &[("authorization", &common::basic("sup", "wrong"))]).await;
    assert_eq!(res.status, StatusCode::UNAUTHORIZED);
    assert_eq!(res.json()["kind"], "unauthenticated");
    let res = c.send("GET", "/search", Auth::None, None, &[("authorization", "Token abc")]).await;
    assert_eq!(res.status, StatusCode::UNAUTHORIZED);

    let token = c.medis.issue_sso_token(&"acme".into(), c.medis.now() + chrono::Duration::minutes(5));
    c.clock.set(c.medis.now() + chrono::Duration::minutes(10));
    let res = c.send("GET", "/search", Auth::None, None, &[("authorization", &format!("Bearer {token}"))]).await;
    assert_eq!(res.status, StatusCode::UNAUTHORIZED);
    assert!(res.json()["error"].as_str().unwrap().contains("expired"));

    assert_eq!(c.get("/registrations", Auth::Org("acme")).await.status, StatusCode::FORBIDDEN);
    assert_eq!(c.get("/monitoring/overdue", Auth::Org("acme")).await.status, StatusCode::FORBIDDEN);
    assert_eq!(c.get("/registrations", Auth::Staff("sec")).await.status, StatusCode::OK);
    assert_eq!(c.get("/registrations", Auth::Staff("sup")).await.status, StatusCode::FORBIDDEN);
    assert_eq!(c.get("/dossiers/nope", Auth::Staff("sup")).await.status, StatusCode::NOT_FOUND);
    let res = c.post("/registrations", Auth::Org("acme"), registration("someone-else")).await;
    assert_eq!(res.status, StatusCode::FORBIDDEN);
    let res = c.post("/registrations", Auth::Org("acme"), json!({ "organization": 1 })).await;
    assert!(res.status.is_client_error());
}

#[tokio::test]
async fn plaintext_is_refused_only_when_required() {
    let open = with_staff(Config::default());
    assert_eq!(open.get("/search", Auth::Staff("sup")).await.status, StatusCode::OK);
    let strict = with_staff(Config { require_tls: true, ..Config::default() });
    let res = strict.get("/search", Auth::Staff("sup")).await;
    assert_eq!(res.status, StatusCode::UPGRADE_REQUIRED);
    assert_eq!(strict.get("/nowhere", Auth::None).await.status, StatusCode::UPGRADE_REQUIRED);
    let res = strict.send("GET", "/search", Auth::Staff("sup"), None, &[("x-forwarded-proto", "https")]).await;
    assert_eq!(res.status, StatusCode::OK);
}

#[tokio::test]
async fn idempotency_key_applies_a_request_once() {
    let (c, report) = Client::replay(&fixtures::fig4());
    let id = report.aliases[FIG4_ALIAS].to_string();
    let path = format!("/dossiers/{id}/communications");
    let body = json!({ "type": "info-request", "subject": "Aggiornamento" });
    let key = [("idempotency-key", "retry-1")];
    let first = c.send("POST", &path, Auth::Staff(FIG4_SUPERVISOR), Some(body.clone()), &key).await;
    let second = c.send("POST", &path, Auth::Staff(FIG4_SUPERVISOR), Some(body.clone()), &key).await;
    assert_eq!(first.status, StatusCode::CREATED);
    assert_eq!(first.json(), second.json());
    let open = c.get(&format!("/dossiers/{id}/open-requests"), Auth::Staff(FIG4_SUPERVISOR)).await.json();
    assert_eq!(open.as_array().unwrap().len(), 2);
    let third = c.post(&path, Auth::Staff(FIG4_SUPERVISOR), body).await;
    assert_ne!(third.json()["id"], first.json()["id"]);
}

#[tokio::test]
async fn fig4_and_fig5_views_match_the_service() {
    let (c, report) = Client::replay(&fixtures::fig4());
    let id = report.aliases[FIG4_ALIAS].to_string();
    let open = c.get(&format!("/dossiers/{id}/open-requests"), Auth::Org("medtech-italia")).await.json();
    assert_eq!(open.as_array().unwrap().len(), 1);
    assert_eq!(c.get(&format!("/dossiers/{id}"), Auth::Org("cardio-devices")).await.status, StatusCode::FORBIDDEN);
    let overdue = c.get("/monitoring/overdue?days=0", Auth::Staff(FIG4_SUPERVISOR)).await.json();
    assert_eq!(overdue.as_array().unwrap().len(), 1);
    let view = c.get(&format!("/dossiers/{id}"), Auth::Staff(FIG4_SUPERVISOR)).await.json();
    assert_eq!(view["state"], "investigation:concluded-early");
    let extract = c.get(&format!("/dossiers/{}/export?format=extract", seg(view["code"].as_str().unwrap())), Auth::Staff(FIG4_SUPERVISOR)).await;
    assert!(extract.content_type.as_deref().unwrap().starts_with("text/tab-separated-values"));
    assert!(extract.text().lines().count() >= 20);

    let (c, _) = Client::replay(&fixtures::fig5());
    let q = fixtures::fig5_query();
    let res = c.get(&format!("/search?{}", q.to_query_string()), Auth::Staff(FIG5_SUPERVISOR)).await;
    assert_eq!(res.status, StatusCode::OK);
    let sup = c.medis.session_for(&FIG5_SUPERVISOR.into()).unwrap();
    let direct = serde_json::to_value(c.medis.search(&sup, &q).unwrap()).unwrap();
    assert_eq!(res.json(), direct);
    assert_eq!(direct.as_array().unwrap().len(), 4);
    assert_eq!(c.get("/search?colour=red", Auth::Staff(FIG5_SUPERVISOR)).await.status, StatusCode::BAD_REQUEST);
    let hits = c.get("/vocabularies/anatomy?q=heart&limit=3", Auth::Staff(FIG5_SUPERVISOR)).await;
    assert_eq!(hits.status, StatusCode::OK);
    assert_eq!(c.get("/vocabularies/colours", Auth::Staff(FIG5_SUPERVISOR)).await.status, StatusCode::NOT_FOUND);
}
