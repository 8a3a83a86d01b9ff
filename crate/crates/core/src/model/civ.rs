use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::device::{validate_comparator, validate_device, ComparatorProduct, InvestigationalDevice};
use super::{Catalogs, ModelError, ValidationReport, Violation};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StudyDesign {
    NonRandomized,
    RandomizedOpen,
    RandomizedSingleBlind,
    RandomizedDoubleBlind,
}

impl StudyDesign {
    pub const ALL: [StudyDesign; 4] = [
        StudyDesign::NonRandomized,
        StudyDesign::RandomizedOpen,
        StudyDesign::RandomizedSingleBlind,
        StudyDesign::RandomizedDoubleBlind,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StudyDesign::NonRandomized => "non-randomized",
            StudyDesign::RandomizedOpen => "randomized-open",
            StudyDesign::RandomizedSingleBlind => "randomized-single-blind",
            StudyDesign::RandomizedDoubleBlind => "randomized-double-blind",
        }
    }
}

impl fmt::Display for StudyDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StudyDesign {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StudyDesign::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| ModelError::UnknownValue { what: "study design", value: s.to_owned() })
    }
}

impl_serde_via_str!(StudyDesign);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvestigationalSite {
    pub name: String,
    pub code: String,
    pub country: String,
    pub investigator: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestones {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub early_termination: Option<NaiveDate>,
}

impl Milestones {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.end.is_some() && self.early_termination.is_some() {
            out.push(Violation::new(
                "milestones-exclusive",
                "early termination and end date are mutually exclusive",
            ));
        }
        if let Some(start) = self.start {
            for (label, date) in [("end", self.end), ("early termination", self.early_termination)] {
                if date.is_some_and(|d| d < start) {
                    out.push(Violation::new("milestones-order", format!("{label} date precedes start date")));
                }
            }
        } else if self.end.is_some() || self.early_termination.is_some() {
            out.push(Violation::new("milestones-order", "conclusion reported without a start date"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaeKind {
    Initial,
    Final,
}

impl SaeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SaeKind::Initial => "initial",
            SaeKind::Final => "final",
        }
    }
}

impl FromStr for SaeKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "initial" => Ok(SaeKind::Initial),
            "final" => Ok(SaeKind::Final),
            other => Err(ModelError::UnknownValue { what: "SAE kind", value: other.to_owned() }),
        }
    }
}

/// Serious adverse event report. Finals close the initial report with the same `seq`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaeReport {
    pub seq: u32,
    pub kind: SaeKind,
    pub reported_at: Timestamp,
    pub narrative: String,
    pub final_for: Option<u32>,
}

/// Finals must biject into a subset of the initials.
pub fn sae_pairing_violations(reports: &[SaeReport]) -> Vec<Violation> {
    let mut initials: BTreeMap<u32, usize> = BTreeMap::new();
    let mut finals: BTreeMap<u32, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for r in reports {
        match r.kind {
            SaeKind::Initial => {
                *initials.entry(r.seq).or_default() += 1;
                if r.final_for.is_some() {
                    out.push(Violation::new("sae-pairing", format!("initial report {} must not reference another report", r.seq)));
                }
            }
            SaeKind::Final => {
                *finals.entry(r.seq).or_default() += 1;
                if r.final_for != Some(r.seq) {
                    out.push(Violation::new("sae-pairing", format!("final report {} must reference initial report {}", r.seq, r.seq)));
                }
            }
        }
    }
    for (&seq, &n) in &initials {
        if n > 1 {
            out.push(Violation::new("sae-pairing", format!("initial report {seq} reported {n} times")));
        }
    }
    for (&seq, &n) in &finals {
        if !initials.contains_key(&seq) {
            out.push(Violation::new("sae-pairing", format!("final report {seq} has no initial report")));
        }
        if n > 1 {
            out.push(Violation::new("sae-pairing", format!("initial report {seq} has {n} final reports")));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalInvestigation {
    pub title: String,
    pub design: Option<StudyDesign>,
    pub multicentric: bool,
    pub population: BTreeSet<String>,
    pub sites: Vec<InvestigationalSite>,
    pub device: InvestigationalDevice,
    pub comparator: Option<ComparatorProduct>,
    /// Intended use under investigation; must differ from any CE-marked use.
    pub investigated_intended_use: Option<String>,
    pub application_field: Option<String>,
    pub milestones: Milestones,
    pub sae_reports: Vec<SaeReport>,
}

impl ClinicalInvestigation {
    /// Structural invariants of the value itself. Cross-field submission
    /// rules live with intake.
    pub fn violations(&self, catalogs: &Catalogs) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.title.trim().is_empty() {
            report.push("title", "investigation title must not be empty");
        }
        if self.sites.is_empty() {
            report.push("sites-non-empty", "sites non-empty: at least one investigational site is required");
        }
        for (i, site) in self.sites.iter().enumerate() {
            if site.name.trim().is_empty() {
                report.push("site-name", format!("site[{}]: name must not be empty", i + 1));
            }
        }
        report.violations.extend(self.milestones.violations());
        report.violations.extend(sae_pairing_violations(&self.sae_reports));
        let mut report = report.merge(validate_device(&self.device, catalogs));
        if let Some(c) = &self.comparator {
            report = report.merge(validate_comparator(c, catalogs));
        }
        report
    }

    pub fn add_sae(&mut self, report: SaeReport) -> Result<(), ModelError> {
        let mut candidate = self.sae_reports.clone();
        candidate.push(report);
        if let Some(v) = sae_pairing_violations(&candidate).into_iter().next() {
            return Err(ModelError::Invariant(v.message));
        }
        self.sae_reports = candidate;
        Ok(())
    }

    pub fn record_milestones(&mut self, milestones: Milestones) -> Result<(), ModelError> {
        if let Some(v) = milestones.violations().into_iter().next() {
            return Err(ModelError::Invariant(v.message));
        }
        self.milestones = milestones;
        Ok(())
    }
}

/// Validates and returns `civ`, or the list of violated invariants.
pub fn new_clinical_investigation(
    civ: ClinicalInvestigation,
    catalogs: &Catalogs,
) -> Result<ClinicalInvestigation, ValidationReport> {
    let report = civ.violations(catalogs);
    if report.ok() {
        Ok(civ)
    } else {
        Err(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::device::MedicalDevice;
    use crate::time::{parse_date, utc_day};

    fn site() -> InvestigationalSite {
        InvestigationalSite { name: "Ospedale Maggiore".into(), code: "S1".into(), country: "IT".into(), investigator: "Dr. Rossi".into() }
    }

    fn civ() -> ClinicalInvestigation {
        ClinicalInvestigation {
            title: "Stent efficacy".into(),
            design: Some(StudyDesign::NonRandomized),
            multicentric: false,
            population: BTreeSet::new(),
            sites: vec![site()],
            device: InvestigationalDevice::single(MedicalDevice::new("Stent", "IIb")),
            comparator: None,
            investigated_intended_use: None,
            application_field: None,
            milestones: Milestones::default(),
            sae_reports: vec![],
        }
    }

    #[test]
    fn minimal_investigation_is_valid() {
        assert!(new_clinical_investigation(civ(), &Catalogs::default()).is_ok());
    }

    #[test]
    fn no_sites_is_rejected() {
        let mut c = civ();
        c.sites.clear();
        let report = new_clinical_investigation(c, &Catalogs::default()).unwrap_err();
        assert!(report.has_rule("sites-non-empty"));
        assert!(report.violations[0].message.contains("sites non-empty"));
    }

    #[test]
    fn end_and_early_termination_are_exclusive() {
        let start = parse_date("2009-12-20");
        let stop = parse_date("2010-05-09");
        let mut c = civ();
        c.milestones = Milestones { start, end: stop, early_termination: stop };
        assert!(new_clinical_investigation(c.clone(), &Catalogs::default()).unwrap_err().has_rule("milestones-exclusive"));
        c.milestones = Milestones { start, end: None, early_termination: stop };
        assert!(new_clinical_investigation(c, &Catalogs::default()).is_ok());
    }

    #[test]
    fn end_before_start_is_rejected() {
        let mut c = civ();
        c.milestones = Milestones { start: parse_date("2010-01-02"), end: parse_date("2010-01-01"), early_termination: None };
        assert!(new_clinical_investigation(c, &Catalogs::default()).unwrap_err().has_rule("milestones-order"));
    }

    #[test]
    fn sae_final_needs_matching_initial() {
        let mut c = civ();
        let initial = SaeReport { seq: 2, kind: SaeKind::Initial, reported_at: utc_day(2010, 5, 5), narrative: "x".into(), final_for: None };
        let fin = SaeReport { seq: 2, kind: SaeKind::Final, reported_at: utc_day(2010, 5, 5), narrative: "y".into(), final_for: Some(2) };
        assert!(c.add_sae(fin.clone()).is_err());
        c.add_sae(initial).unwrap();
        c.add_sae(fin.clone()).unwrap();
        assert!(c.add_sae(fin).is_err(), "second final for the same initial");
    }
}
