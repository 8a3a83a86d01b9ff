mod common;

use std::cell::Cell;
use std::sync::Arc;

use chrono::{Duration, NaiveDate};
use medis_core::export::{registry_extract, RegistryExtract};
use medis_core::fixtures::{self, FIG4_ALIAS, FIG4_SUPERVISOR};
use medis_core::model::{Party, PartyKind};
use medis_core::scenario;
use medis_core::search::Query;
use medis_core::service::{
    Credential, DraftRequest, ErrorKind, ExportFormat, Origin, RegistrationForm, ServiceError, Session,
};
use medis_core::store::{CommunicationDraft, DocumentUpload, TimelineOptions};
use medis_core::time::{utc_day, ManualClock};
use medis_core::{Config, Medis, PartyId, Role};

use common::{replay, staff};

fn sso_session(party: &str, medis: &Medis) -> Session {
    Session {
        party: PartyId::from(party),
        roles: Default::default(),
        origin: Origin::ExternalSso,
        expires_at: medis.now() + Duration::hours(1),
    }
}

fn org(id: &str) -> Party {
    Party::new(id, PartyKind::ApplicantOrganization, format!("{id} S.p.A."), "", "IT").unwrap()
}

fn fresh() -> (Medis, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(utc_day(2009, 3, 1)));
    let medis = Medis::with_clock(Config::default(), clock.clone()).unwrap();
    let secretary = Party::new("sec", PartyKind::NcaUser, "Secretary", "", "IT").unwrap();
    medis.add_staff(secretary, [Role::AdministrativeSecretary].into(), "sec", "s3cret").unwrap();
    (medis, clock)
}

#[test]
fn basic_and_sso_authentication() {
    let (medis, clock) = fresh();
    let s = medis.authenticate(&Credential::Basic { login: "sec".into(), password: "s3cret".into() }).unwrap();
    assert_eq!(s.origin, Origin::Internal);
    assert!(s.holds(Role::AdministrativeSecretary));
    let bad = medis.authenticate(&Credential::Basic { login: "sec".into(), password: "nope".into() });
    assert_eq!(bad.unwrap_err().kind(), ErrorKind::Unauthenticated);

    let form = RegistrationForm {
        organization: org("acme"),
        requested_roles: [Role::Manufacturer].into(),
        delegating_manufacturer: None,
        delegation_valid_to: None,
    };
    let reg = medis.register_applicant(&sso_session("acme", &medis), form).unwrap();
    medis.approve_registration(&s, &reg.id).unwrap();
    let token = medis.issue_sso_token(&"acme".into(), medis.now() + Duration::hours(2));
    let ext = medis.authenticate(&Credential::Bearer(token.clone())).unwrap();
    assert!(ext.is_external() && ext.holds(Role::Manufacturer));
    clock.set(medis.now() + Duration::hours(3));
    assert!(matches!(medis.authenticate(&Credential::Bearer(token)), Err(ServiceError::Expired)));
    assert_eq!(medis.authenticate(&Credential::Bearer("x.y".into())).unwrap_err().kind(), ErrorKind::Unauthenticated);
}

#[test]
fn registration_rules() {
    let (medis, _) = fresh();
    let sec = staff(&medis, "sec");
    let form = |id: &str| RegistrationForm {
        organization: org(id),
        requested_roles: [Role::Manufacturer].into(),
        delegating_manufacturer: None,
        delegation_valid_to: None,
    };
    let err = medis.register_applicant(&sso_session("someone-else", &medis), form("acme")).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Forbidden);
    let reg = medis.register_applicant(&sso_session("acme", &medis), form("acme")).unwrap();
    let dup = medis.register_applicant(&sso_session("acme", &medis), form("acme")).unwrap_err();
    assert_eq!(dup.kind(), ErrorKind::Conflict);
    assert_eq!(medis.registrations(&sso_session("acme", &medis)).unwrap_err().kind(), ErrorKind::Forbidden);
    medis.deny_registration(&sec, &reg.id).unwrap();
    assert!(medis.register_applicant(&sso_session("acme", &medis), form("acme")).is_ok());

    let mut rep = form("rep");
    rep.requested_roles = [Role::AuthorizedRepresentative].into();
    assert_eq!(medis.register_applicant(&sso_session("rep", &medis), rep.clone()).unwrap_err().kind(), ErrorKind::Invalid);
    rep.delegating_manufacturer = Some(org("overseas"));
    rep.delegation_valid_to = NaiveDate::from_ymd_opt(2009, 12, 31);
    let reg = medis.register_applicant(&sso_session("rep", &medis), rep).unwrap();
    medis.approve_registration(&sec, &reg.id).unwrap();
    let rep_session = medis.session_for(&"rep".into()).unwrap();
    let draft = medis
        .create_draft(&rep_session, &DraftRequest { role: Role::AuthorizedRepresentative, manufacturer: Some("overseas".into()) })
        .unwrap();
    assert_eq!(draft.notification.manufacturer.id.as_str(), "overseas");
    let other = medis.create_draft(&rep_session, &DraftRequest { role: Role::AuthorizedRepresentative, manufacturer: Some("acme".into()) });
    assert_eq!(other.unwrap_err().kind(), ErrorKind::Forbidden);
    assert!(medis.dossier(&sec, draft.id.as_str()).is_err(), "staff must not see drafts");
}

#[test]
fn applicants_see_only_their_dossiers() {
    let (medis, _, report) = replay(&fixtures::fig4());
    let id = report.aliases[FIG4_ALIAS].to_string();
    let owner = medis.session_for(&"medtech-italia".into()).unwrap();
    let other = medis.session_for(&"cardio-devices".into()).unwrap();
    assert!(medis.dossier(&owner, &id).is_ok());
    assert_eq!(medis.dossier(&other, &id).unwrap_err().kind(), ErrorKind::Forbidden);
    assert_eq!(medis.search(&other, &Query::default()).unwrap().len(), 5);
    assert_eq!(medis.search(&owner, &Query::default()).unwrap().len(), 1);
    assert_eq!(medis.overdue(&owner, Duration::days(1)).unwrap_err().kind(), ErrorKind::Forbidden);
    let view = medis.view(&owner, &id).unwrap();
    assert!(!view.allowed_actions.is_empty());
}

#[test]
fn fig4_monitoring_and_exports() {
    let (medis, clock, report) = replay(&fixtures::fig4());
    let id = report.aliases[FIG4_ALIAS].to_string();
    clock.set(utc_day(2010, 6, 9));
    let sup = staff(&medis, FIG4_SUPERVISOR);
    let overdue = medis.overdue(&sup, Duration::days(30)).unwrap();
    assert_eq!(overdue.len(), 1);
    assert_eq!(overdue[0].age_days, 30);
    assert_eq!(overdue[0].subject, "Motivazioni conclusione anticipata");

    let d = medis.dossier(&sup, &id).unwrap();
    let extract = registry_extract(&d).unwrap();
    assert_eq!(extract.trial_id, "i.5.i.m.2/6/2009");
    assert_eq!(extract.early_termination.as_deref(), Some("2010-05-09"));
    let tsv = medis.export(&sup, &id, ExportFormat::Extract).unwrap();
    let fields: Vec<&str> = tsv.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(fields, RegistryExtract::FIELDS);

    let approve = d.lifecycle.audit().iter().find(|r| r.event.kind.as_str() == "approve").unwrap();
    assert!(approve.event.payload.keys().any(|k| k.starts_with("signature")));

    let stats = medis.stats(&sup, &Query::default()).unwrap();
    assert_eq!(stats.total, 6);
    assert_eq!(stats.by_year[&2009], 6);
    assert_eq!(stats.by_state["investigation:concluded-early"], 1);
    assert!(scenario::event_log(&d).lines().count() >= 10);
}

#[test]
fn reply_rules() {
    let (medis, _, report) = replay(&fixtures::fig4());
    let id = report.aliases[FIG4_ALIAS].to_string();
    let sup = staff(&medis, FIG4_SUPERVISOR);
    let owner = medis.session_for(&"medtech-italia".into()).unwrap();
    let open = medis.open_requests(&sup, &id).unwrap();
    let request = &open[0].id;
    let answer = || CommunicationDraft::new("info-response", "Motivazioni").body("Arruolamento insufficiente.");
    assert!(medis.reply(&owner, &"com-999".into(), answer()).is_err());
    assert!(medis.reply(&sup, request, answer()).is_err(), "same direction");
    medis.reply(&owner, request, answer()).unwrap();
    assert!(medis.reply(&owner, request, answer()).is_err(), "already answered");
    assert!(medis.open_requests(&sup, &id).unwrap().is_empty());
    let timeline = medis.timeline(&owner, &id, TimelineOptions::default()).unwrap();
    assert!(timeline.windows(2).all(|w| w[0].at >= w[1].at));
}

#[test]
fn idempotency_keys() {
    let (medis, _) = fresh();
    let s = staff(&medis, "sec");
    let calls = Cell::new(0);
    let run = || {
        calls.set(calls.get() + 1);
        Ok(calls.get())
    };
    assert_eq!(medis.idempotent(&s, Some("k1"), run).unwrap(), 1);
    assert_eq!(medis.idempotent(&s, Some("k1"), run).unwrap(), 1);
    assert_eq!(medis.idempotent(&s, Some("k2"), run).unwrap(), 2);
    assert_eq!(medis.idempotent(&s, None, run).unwrap(), 3);
}

#[test]
fn submitted_notification_is_frozen() {
    let (medis, _, report) = replay(&fixtures::fig4());
    let id = report.aliases[FIG4_ALIAS].to_string();
    let owner = medis.session_for(&"medtech-italia".into()).unwrap();
    assert!(medis.set_form(&owner, &id, Default::default()).is_err());
    assert!(medis.submit(&owner, &id).is_err());
    let upload = DocumentUpload::new("declaration", "Dichiarazione v2.pdf", "v2");
    assert!(medis.upload(&owner, &id, upload).is_err());
}

#[test]
fn store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = Config { data_dir: Some(dir.path().to_owned()), ..Config::default() };
    let clock = Arc::new(ManualClock::new(utc_day(2008, 1, 1)));
    let script = fixtures::fig4();
    let (before, id) = {
        let medis = Medis::with_clock(config.clone(), clock.clone()).unwrap();
        let report = scenario::run(&medis, &clock, &script).unwrap();
        let id = report.aliases[FIG4_ALIAS].to_string();
        (medis.dossier(&staff(&medis, FIG4_SUPERVISOR), &id).unwrap(), id)
    };
    let medis = Medis::with_clock(config, clock.clone()).unwrap();
    let sup = staff(&medis, FIG4_SUPERVISOR);
    let after = medis.dossier(&sup, &id).unwrap();
    assert_eq!(after, before);
    let (doc, bytes) = medis.document_content(&sup, &id, &after.documents[0].id).unwrap();
    assert_eq!(medis_core::store::sha256_hex(&bytes), doc.blob.digest);
    assert_eq!(medis.repository().codes().counters()[&2009], 6);
}
