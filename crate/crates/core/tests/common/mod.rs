#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use medis_core::lifecycle::CivState;
use medis_core::model::{Role, StudyDesign};
use medis_core::scenario::{self, RunReport, Script};
use medis_core::search::{ProductType, Query};
use medis_core::time::{utc_day, ManualClock};
use medis_core::{Config, Dossier, Medis, PartyId};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn replay(script: &Script) -> (Medis, Arc<ManualClock>, RunReport) {
    let clock = Arc::new(ManualClock::new(utc_day(2008, 1, 1)));
    let medis = Medis::with_clock(Config::default(), clock.clone()).unwrap();
    let report = scenario::run(&medis, &clock, script).unwrap_or_else(|e| panic!("{e}"));
    (medis, clock, report)
}

pub fn staff(medis: &Medis, id: &str) -> medis_core::Session {
    medis.session_for(&PartyId::from(id)).unwrap()
}

/// A dossier flattened from its raw notification form, for oracle filters.
#[derive(Debug, Clone)]
pub struct Flat {
    pub code: String,
    pub seq: u32,
    pub year: i32,
    pub state: CivState,
    pub role: Role,
    pub names: Vec<String>,
    pub team: Vec<String>,
    pub form: BTreeMap<String, String>,
}

impl Flat {
    pub fn of(d: &Dossier) -> Option<Flat> {
        let code = d.code()?.to_string();
        let mut parts = code.rsplit('/');
        let year = parts.next()?.parse().ok()?;
        let seq = parts.next()?.parse().ok()?;
        let team = d
            .evaluation
            .assignment
            .as_ref()
            .map(|a| vec![a.supervisor.id.to_string(), a.technical.id.to_string(), a.medical.id.to_string()])
            .unwrap_or_default();
        Some(Flat {
            code,
            seq,
            year,
            state: d.state(),
            role: d.notification.applicant_role,
            names: vec![d.notification.manufacturer.name.clone(), d.notification.applicant.name.clone()],
            team,
            form: d.notification.form().clone(),
        })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.form.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn is_kit(&self) -> bool {
        self.get("device.type") == Some("kit")
    }

    fn kit_indices(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .form
            .keys()
            .filter_map(|k| k.strip_prefix("kit.")?.split_once('.')?.0.parse().ok())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Key prefixes of the investigational devices.
    fn device_prefixes(&self) -> Vec<String> {
        if !self.is_kit() {
            return vec!["device.".into()];
        }
        self.kit_indices()
            .into_iter()
            .filter(|n| self.get(&format!("kit.{n}.kind")) != Some("component"))
            .map(|n| format!("kit.{n}."))
            .collect()
    }

    fn product_names(&self) -> Vec<&str> {
        if !self.is_kit() {
            return self.get("device.name").into_iter().collect();
        }
        self.kit_indices().into_iter().filter_map(|n| self.get(&format!("kit.{n}.name"))).collect()
    }

    fn device_values(&self, field: &str) -> Vec<&str> {
        self.device_prefixes().iter().filter_map(|p| self.get(&format!("{p}{field}"))).collect()
    }

    fn list(&self, key: &str) -> Vec<&str> {
        self.get(key).map(|v| v.split(',').map(str::trim).collect()).unwrap_or_default()
    }
}

fn has(hay: &str, needle: &str) -> bool {
    hay.to_lowercase().contains(&needle.to_lowercase())
}

fn facet<T>(values: &[T], pred: impl Fn(&T) -> bool) -> bool {
    values.is_empty() || values.iter().any(pred)
}

/// Linear-scan filter written against the raw form, not the parsed model.
pub fn oracle(f: &Flat, q: &Query) -> bool {
    let sites: Vec<&str> = f
        .form
        .iter()
        .filter(|(k, _)| k.starts_with("site.") && k.ends_with(".country"))
        .map(|(_, v)| v.as_str())
        .collect();
    q.number.as_ref().is_none_or(|n| *n == f.code || n.parse::<u32>() == Ok(f.seq))
        && facet(&q.years, |y| *y == f.year)
        && facet(&q.states, |s| *s == f.state)
        && facet(&q.applicant_roles, |r| *r == f.role)
        && q.company.as_ref().is_none_or(|c| f.names.iter().any(|n| has(n, c)))
        && facet(&q.evaluators, |e| f.team.iter().any(|t| t == e.as_str()))
        && q.product.as_ref().is_none_or(|p| f.product_names().iter().any(|n| has(n, p)))
        && q.product_type.is_none_or(|t| (t == ProductType::Kit) == f.is_kit())
        && facet(&q.risk_classes, |c| f.device_values("risk-class").contains(&c.as_str()))
        && q.application_field.as_ref().is_none_or(|a| f.get("application-field").is_some_and(|v| has(v, a)))
        && facet(&q.characteristics, |c| {
            f.device_values("characteristics").iter().any(|v| v.split(',').any(|x| x.trim() == c))
        })
        && q.releases_drug.is_none_or(|b| !f.device_values("drug.name").is_empty() == b)
        && q.classification_code.as_ref().is_none_or(|p| f.device_values("cnd").iter().any(|c| c.starts_with(p.as_str())))
        && q.anatomical_location.as_ref().is_none_or(|t| {
            f.device_values("anatomical-location").iter().any(|l| *l == t || l.starts_with(&format!("{t}.")))
        })
        && q.title.as_ref().is_none_or(|t| f.get("title").is_some_and(|v| has(v, t)))
        && facet(&q.designs, |d| f.get("design") == Some(d.as_str()))
        && facet(&q.population, |p| f.list("population").contains(&p.as_str()))
        && q.site_country.as_ref().is_none_or(|c| sites.iter().any(|s| s.eq_ignore_ascii_case(c)))
}

const TERMS: [&str; 10] = ["stent", "pump", "valve", "model", "part", "Manufacturer 3", "Representative", "overseas", "lens", "1"];

/// A query with each facet present with small probability.
pub fn random_query(rng: &mut impl Rng) -> Query {
    let mut q = Query::default();
    let p = 0.18;
    let pick = |rng: &mut dyn rand::RngCore, items: &[&str]| items.choose(rng).unwrap().to_string();
    if rng.gen_bool(0.05) {
        q.number = Some(rng.gen_range(1..40).to_string());
    }
    if rng.gen_bool(p) {
        q.years = (2009..=2011).filter(|_| rng.gen_bool(0.5)).collect();
    }
    if rng.gen_bool(p) {
        q.states = CivState::ALL.into_iter().filter(|_| rng.gen_bool(0.3)).collect();
    }
    if rng.gen_bool(p) {
        q.applicant_roles = vec![*[Role::Manufacturer, Role::AuthorizedRepresentative].choose(rng).unwrap()];
    }
    if rng.gen_bool(p) {
        q.company = Some(pick(rng, &TERMS[5..8]));
    }
    if rng.gen_bool(p) {
        q.evaluators = vec![PartyId::from(pick(rng, &["te1", "te2", "me3", "sup"]).as_str())];
    }
    if rng.gen_bool(p) {
        q.product = Some(pick(rng, &TERMS));
    }
    if rng.gen_bool(p) {
        q.product_type = Some(*[ProductType::Device, ProductType::Kit].choose(rng).unwrap());
    }
    if rng.gen_bool(p) {
        q.risk_classes = ["I", "IIa", "IIb", "III", "active-implantable"]
            .into_iter()
            .filter(|_| rng.gen_bool(0.4))
            .map(str::to_owned)
            .collect();
    }
    if rng.gen_bool(p) {
        q.application_field = Some(pick(rng, &["cardio", "ortho", "dentistry", "onc"]));
    }
    if rng.gen_bool(p) {
        q.characteristics = vec![pick(rng, &["software", "single-use", "animal-tissue", "human-tissue", "plasma"])];
    }
    if rng.gen_bool(p) {
        q.releases_drug = Some(rng.gen_bool(0.5));
    }
    if rng.gen_bool(p) {
        q.classification_code = Some(pick(rng, &["C", "C01", "C0104", "J", "P09", "Z12"]));
    }
    if rng.gen_bool(p) {
        q.anatomical_location = Some(pick(rng, &["A01", "A01.598", "A07", "A07.231", "A07.541.510", "A01.456"]));
    }
    if rng.gen_bool(p) {
        q.title = Some(pick(rng, &["investigation", "stent", "graft", "1"]));
    }
    if rng.gen_bool(p) {
        q.designs = StudyDesign::ALL.into_iter().filter(|_| rng.gen_bool(0.4)).collect();
    }
    if rng.gen_bool(p) {
        q.population = vec![pick(rng, &["adults", "children", "elderly", "pregnant", "healthy", "patients"])];
    }
    if rng.gen_bool(p) {
        q.site_country = Some(pick(rng, &["IT", "fr", "DE", "ES", "AT"]));
    }
    q
}
