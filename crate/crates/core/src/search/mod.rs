//! Faceted search over visible dossiers, aggregate counts and overdue
//! request monitoring.

mod query;

pub use query::{ProductType, Query};

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate};
use serde::Serialize;

use crate::export::Vocabulary;
use crate::lifecycle::{Actor, CivState};
use crate::model::{Catalogs, ClinicalInvestigation, CommunicationId, Dossier, DossierId, MedicalDevice, Role};
use crate::store::open_requests;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("unknown search parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid value `{value}` for `{key}`")]
    BadParameter { key: String, value: String },
    #[error("unknown {facet} code `{code}`")]
    UnknownCode { facet: &'static str, code: String },
}

/// Catalog data a search resolves facet values against.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub catalogs: &'a Catalogs,
    pub anatomy: Option<&'a Vocabulary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultRow {
    pub code: String,
    pub title: String,
    pub manufacturer: String,
    pub applicant_role: Role,
    pub sent_at: Timestamp,
    pub expected_deadline: Option<NaiveDate>,
    pub evaluators: Vec<String>,
    pub state: CivState,
    pub last_document: Option<String>,
    pub dossier: DossierId,
}

/// Applicants see only dossiers they own; authority staff see every
/// submitted dossier. Drafts never appear in search results.
pub fn visible_to(dossier: &Dossier, viewer: &Actor) -> bool {
    dossier.state().is_submitted() && (!viewer.role.is_external() || dossier.is_owned_by(&viewer.party))
}

fn contains(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.trim().to_lowercase())
}

fn any_or_empty<T>(facet: &[T], pred: impl Fn(&T) -> bool) -> bool {
    facet.is_empty() || facet.iter().any(pred)
}

fn anatomy_matches(ctx: &SearchContext<'_>, term: &str, device: &MedicalDevice) -> bool {
    let Some(location) = &device.anatomical_location else { return false };
    if let Some(vocab) = ctx.anatomy.filter(|v| v.has_hierarchy()) {
        if let Some(target) = vocab.resolve(term) {
            let below = vocab.descendants(&target.code);
            return vocab.resolve(location).is_some_and(|e| below.contains(e.code.as_str()));
        }
    }
    location.trim().eq_ignore_ascii_case(term.trim())
}

fn year_of(d: &Dossier) -> Option<i32> {
    d.notification.submitted_at().map(|t| t.year())
}

fn civ_matches(ctx: &SearchContext<'_>, q: &Query, civ: &ClinicalInvestigation) -> bool {
    let devices = civ.device.devices();
    q.product.as_ref().is_none_or(|p| civ.device.product_names().iter().any(|n| contains(n, p)))
        && q.product_type.is_none_or(|t| (t == ProductType::Kit) == civ.device.is_kit())
        && any_or_empty(&q.risk_classes, |c| devices.iter().any(|d| &d.risk_class == c))
        && q.application_field.as_ref().is_none_or(|f| civ.application_field.as_ref().is_some_and(|a| contains(a, f)))
        && any_or_empty(&q.characteristics, |c| devices.iter().any(|d| d.characteristics.contains(c)))
        && q.releases_drug.is_none_or(|b| devices.iter().any(|d| d.releases_drug.is_some()) == b)
        && q.classification_code.as_ref().is_none_or(|p| {
            devices.iter().any(|d| d.classification_code.as_ref().is_some_and(|c| c.starts_with(p.trim())))
        })
        && q.anatomical_location.as_ref().is_none_or(|t| devices.iter().any(|d| anatomy_matches(ctx, t, d)))
        && q.title.as_ref().is_none_or(|t| contains(&civ.title, t))
        && any_or_empty(&q.designs, |d| civ.design == Some(*d))
        && any_or_empty(&q.population, |p| civ.population.contains(p))
        && q.site_country.as_ref().is_none_or(|c| civ.sites.iter().any(|s| s.country.eq_ignore_ascii_case(c.trim())))
}

/// Whether a single dossier satisfies every facet of `q`, visibility aside.
pub fn matches(ctx: &SearchContext<'_>, q: &Query, d: &Dossier) -> bool {
    let Some(code) = d.code() else { return false };
    let n = &d.notification;
    let team = d.evaluation.assignment.as_ref();
    let number_ok = q.number.as_ref().is_none_or(|num| {
        let num = num.trim();
        code.to_string() == num || num.parse::<u32>().is_ok_and(|s| s == code.seq)
    });
    number_ok
        && any_or_empty(&q.years, |y| year_of(d) == Some(*y))
        && any_or_empty(&q.states, |s| d.state() == *s)
        && any_or_empty(&q.applicant_roles, |r| n.applicant_role == *r)
        && q.company.as_ref().is_none_or(|c| contains(&n.manufacturer.name, c) || contains(&n.applicant.name, c))
        && any_or_empty(&q.evaluators, |e| team.is_some_and(|t| t.is_member(e)))
        && d.civ.as_ref().is_some_and(|civ| civ_matches(ctx, q, civ))
}

fn validate(ctx: &SearchContext<'_>, q: &Query) -> Result<(), SearchError> {
    for c in &q.risk_classes {
        if !ctx.catalogs.has_risk_class(c) {
            return Err(SearchError::UnknownCode { facet: "risk-class", code: c.clone() });
        }
    }
    Ok(())
}

pub fn row(d: &Dossier) -> Option<ResultRow> {
    let code = d.code()?;
    let n = &d.notification;
    Some(ResultRow {
        code: code.to_string(),
        title: d.civ.as_ref().map(|c| c.title.clone()).unwrap_or_default(),
        manufacturer: n.manufacturer.name.clone(),
        applicant_role: n.applicant_role,
        sent_at: n.submitted_at()?,
        expected_deadline: d.expected_deadline,
        evaluators: d
            .evaluation
            .assignment
            .as_ref()
            .map(|a| a.evaluators().iter().map(|p| p.name.clone()).collect())
            .unwrap_or_default(),
        state: d.state(),
        last_document: d.last_document_label().map(str::to_owned),
        dossier: d.id.clone(),
    })
}

/// Matching dossiers visible to `viewer`, by send time then code.
pub fn search<'a, I>(ctx: &SearchContext<'_>, dossiers: I, viewer: &Actor, q: &Query) -> Result<Vec<ResultRow>, SearchError>
where
    I: IntoIterator<Item = &'a Dossier>,
{
    validate(ctx, q)?;
    let mut hits: Vec<(Timestamp, (i32, u32, String), ResultRow)> = dossiers
        .into_iter()
        .filter(|d| visible_to(d, viewer) && matches(ctx, q, d))
        .filter_map(|d| {
            let code = d.code()?;
            Some((row(d)?.sent_at, (code.year, code.seq, code.prefix.clone()), row(d)?))
        })
        .collect();
    hits.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    Ok(hits.into_iter().map(|(_, _, r)| r).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SummaryStats {
    pub total: usize,
    pub by_state: BTreeMap<String, usize>,
    pub by_year: BTreeMap<i32, usize>,
    pub by_role: BTreeMap<String, usize>,
    /// A kit counts once for each distinct class among its devices.
    pub by_risk_class: BTreeMap<String, usize>,
}

/// Counts of the dossiers `search` would return for `q`, broken down by facet.
pub fn summary_stats<'a, I>(ctx: &SearchContext<'_>, dossiers: I, viewer: &Actor, q: &Query) -> Result<SummaryStats, SearchError>
where
    I: IntoIterator<Item = &'a Dossier>,
{
    validate(ctx, q)?;
    let mut stats = SummaryStats::default();
    for s in CivState::ALL.into_iter().filter(|s| s.is_submitted()) {
        stats.by_state.insert(s.to_string(), 0);
    }
    for r in Role::APPLICANT {
        stats.by_role.insert(r.to_string(), 0);
    }
    for c in ctx.catalogs.risk_classes() {
        stats.by_risk_class.insert(c.code.clone(), 0);
    }
    for d in dossiers.into_iter().filter(|d| visible_to(d, viewer) && matches(ctx, q, d)) {
        stats.total += 1;
        *stats.by_state.entry(d.state().to_string()).or_default() += 1;
        if let Some(y) = year_of(d) {
            *stats.by_year.entry(y).or_default() += 1;
        }
        *stats.by_role.entry(d.notification.applicant_role.to_string()).or_default() += 1;
        if let Some(civ) = &d.civ {
            let mut classes: Vec<&str> = civ.device.devices().iter().map(|x| x.risk_class.as_str()).collect();
            classes.sort_unstable();
            classes.dedup();
            for c in classes {
                *stats.by_risk_class.entry(c.to_owned()).or_default() += 1;
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverdueRequest {
    pub dossier: DossierId,
    pub code: String,
    pub request: CommunicationId,
    pub subject: String,
    pub sent_at: Timestamp,
    pub age_days: i64,
}

/// Open requests at least `max_age` old at `now`, oldest first.
pub fn overdue_requests<'a, I>(dossiers: I, viewer: &Actor, max_age: Duration, now: Timestamp) -> Vec<OverdueRequest>
where
    I: IntoIterator<Item = &'a Dossier>,
{
    let max_age = max_age.max(Duration::zero());
    let mut out: Vec<OverdueRequest> = dossiers
        .into_iter()
        .filter(|d| visible_to(d, viewer))
        .flat_map(|d| {
            open_requests(d).into_iter().filter(move |c| now - c.sent_at >= max_age).map(move |c| OverdueRequest {
                dossier: d.id.clone(),
                code: d.display_code(),
                request: c.id.clone(),
                subject: c.subject.clone(),
                sent_at: c.sent_at,
                age_days: (now - c.sent_at).num_days(),
            })
        })
        .collect();
    out.sort_by(|a, b| (a.sent_at, &a.code, &a.request).cmp(&(b.sent_at, &b.code, &b.request)));
    out
}
