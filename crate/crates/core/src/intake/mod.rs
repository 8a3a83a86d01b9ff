//! Notification intake: form handling, completeness and consistency checks,
//! protocol code allocation and sealing.

mod allocator;
mod bundle;
mod form;

pub use allocator::{next_protocol_code, CodeAllocator};
pub use bundle::{read_bundle, validate_bundle, Bundle, BundleError, BundleFile, FORM_FILE};
pub use form::{civ_from_form, civ_to_form, parse_form_text, render_form_text, FormError};

use chrono::Datelike;

use crate::lifecycle::{Actor, EventKind, LifecycleEvent};
use crate::model::{Catalogs, ClinicalInvestigation, Delegation, Notification, ProtocolCode, Role, ValidationReport};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IntakeError {
    #[error("submission incomplete or inconsistent:\n{0}")]
    IncompleteSubmission(ValidationReport),
    #[error("not authorized: {0}")]
    NotAuthorized(String),
    #[error("notification already submitted")]
    AlreadySubmitted,
    #[error("unknown document type `{0}`")]
    UnknownDocumentType(String),
}

pub fn check_completeness(draft: &Notification, catalogs: &Catalogs) -> Result<ValidationReport, IntakeError> {
    for a in draft.documents() {
        if catalogs.document_type(&a.doc_type).is_none() {
            return Err(IntakeError::UnknownDocumentType(a.doc_type.clone()));
        }
    }
    let missing = catalogs
        .required_document_types()
        .filter(|t| !draft.documents().iter().any(|a| a.doc_type == t.code))
        .map(|t| t.code.clone())
        .collect();
    Ok(ValidationReport { missing, violations: Vec::new() })
}

fn same_text(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// Cross-field rules over an investigation, on top of its structural invariants.
pub fn consistency_of(civ: &ClinicalInvestigation, catalogs: &Catalogs) -> ValidationReport {
    let mut report = civ.violations(catalogs);
    if civ.multicentric && civ.sites.len() < 2 {
        report.push("multicentric-sites", "multi-centric investigation requires at least two sites");
    }
    if civ.comparator.is_some() && civ.design.is_none() {
        report.push("comparator-design", "comparator requires a study design");
    }
    for d in civ.device.devices() {
        if let Some(ce) = &d.ce_mark {
            match &civ.investigated_intended_use {
                Some(used) if !same_text(used, &ce.intended_use) => {}
                _ => report.push(
                    "ce-intended-use",
                    format!("CE-marked device requires different intended use ({})", d.name),
                ),
            }
        }
    }
    report
}

/// Parses the draft's form and applies every consistency rule. A form that
/// cannot be parsed is reported as a single `form` violation.
pub fn check_consistency(draft: &Notification, catalogs: &Catalogs) -> ValidationReport {
    match civ_from_form(draft.form()) {
        Ok(civ) => consistency_of(&civ, catalogs),
        Err(e) => {
            let mut report = ValidationReport::default();
            report.push("form", e.to_string());
            report
        }
    }
}

/// Checks that `actor` may file `draft` on `at`'s day.
pub fn authorize_submission(
    draft: &Notification,
    actor: &Actor,
    delegations: &[Delegation],
    at: Timestamp,
) -> Result<(), IntakeError> {
    if actor.party != draft.applicant.id || actor.role != draft.applicant_role {
        return Err(IntakeError::NotAuthorized(format!("{actor} is not the applicant of this notification")));
    }
    match actor.role {
        Role::Manufacturer if draft.manufacturer.id == actor.party => Ok(()),
        Role::Manufacturer => Err(IntakeError::NotAuthorized("a manufacturer files only its own notifications".into())),
        Role::AuthorizedRepresentative => {
            let day = at.date_naive();
            if delegations
                .iter()
                .any(|d| d.delegator == draft.manufacturer.id && d.delegate == actor.party && d.covers(day))
            {
                Ok(())
            } else {
                Err(IntakeError::NotAuthorized(format!(
                    "no delegation from {} to {} covers {day}",
                    draft.manufacturer.id, actor.party
                )))
            }
        }
        other => Err(IntakeError::NotAuthorized(format!("{other} cannot submit notifications"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub code: ProtocolCode,
    pub civ: ClinicalInvestigation,
    pub event: LifecycleEvent,
}

/// Validates and seals `draft`. The code is drawn from `allocator` only after
/// every check passed, so rejected submissions never consume a number.
pub fn submit(
    draft: &mut Notification,
    actor: &Actor,
    delegations: &[Delegation],
    catalogs: &Catalogs,
    allocator: &CodeAllocator,
    at: Timestamp,
) -> Result<Submission, IntakeError> {
    if draft.is_sealed() {
        return Err(IntakeError::AlreadySubmitted);
    }
    authorize_submission(draft, actor, delegations, at)?;
    let report = check_completeness(draft, catalogs)?.merge(check_consistency(draft, catalogs));
    if !report.ok() {
        return Err(IntakeError::IncompleteSubmission(report));
    }
    let civ = civ_from_form(draft.form()).expect("consistency passed");
    let code = allocator.issue(at.year());
    draft.seal(code.clone(), at).expect("draft is not sealed");
    let event = LifecycleEvent::new(EventKind::SubmitNotification, actor.clone(), at).with("code", code.to_string());
    Ok(Submission { code, civ, event })
}
