//! Evaluation sub-process: team assignment, per-evaluator reports with
//! explicit sharing, and the supervisor's final decision.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lifecycle::{Actor, CivState, EvaluationStatus, EventKind, LifecycleEvent};
use crate::model::{Party, PartyId, Profile, Role, Violation};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvaluationError {
    #[error("operation not permitted in state {0}")]
    WrongState(CivState),
    #[error("an evaluation team is already assigned")]
    DuplicateAssignment,
    #[error("supervisor, technical and medical evaluator must be three distinct parties")]
    NotDistinct,
    #[error("{party} does not hold the {role} role")]
    RoleMismatch { party: PartyId, role: Role },
    #[error("{0} may not assign evaluation teams")]
    NotAuthorized(Role),
    #[error("only the author may modify the {0} report")]
    NotOwner(ReportKind),
    #[error("{0}")]
    AccessDenied(String),
    #[error("no {0} report has been saved")]
    NoSuchReport(ReportKind),
    #[error("stale revision {given}; current revision is {current}")]
    StaleRevision { given: u32, current: u32 },
    #[error("only the assigned supervisor may decide")]
    NotSupervisor,
    #[error("technical and medical reports must both be shared before deciding")]
    ReportsNotShared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportKind {
    Technical,
    Medical,
    Final,
}

impl ReportKind {
    pub const ALL: [ReportKind; 3] = [ReportKind::Technical, ReportKind::Medical, ReportKind::Final];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Technical => "technical",
            ReportKind::Medical => "medical",
            ReportKind::Final => "final",
        }
    }

    /// Role whose holder authors this kind of report.
    pub fn author_role(self) -> Role {
        match self {
            ReportKind::Technical => Role::TechnicalEvaluator,
            ReportKind::Medical => Role::MedicalEvaluator,
            ReportKind::Final => Role::Supervisor,
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = crate::model::ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| crate::model::ModelError::UnknownValue { what: "report kind", value: s.to_owned() })
    }
}

impl_serde_via_str!(ReportKind);

/// Report content, split along the three aspects every evaluation must cover.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBody {
    pub device_characteristics: String,
    pub risk_analysis: String,
    pub patient_safety: String,
}

impl ReportBody {
    pub fn is_complete(&self) -> bool {
        [&self.device_characteristics, &self.risk_analysis, &self.patient_safety]
            .iter()
            .all(|s| !s.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kind: ReportKind,
    pub author: PartyId,
    pub body: ReportBody,
    pub shared: bool,
    pub revision: u32,
    pub saved_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationAssignment {
    pub supervisor: Party,
    pub technical: Party,
    pub medical: Party,
    pub assigned_at: Timestamp,
}

impl EvaluationAssignment {
    pub fn author_of(&self, kind: ReportKind) -> &PartyId {
        match kind {
            ReportKind::Technical => &self.technical.id,
            ReportKind::Medical => &self.medical.id,
            ReportKind::Final => &self.supervisor.id,
        }
    }

    pub fn evaluators(&self) -> [&Party; 2] {
        [&self.technical, &self.medical]
    }

    pub fn is_member(&self, party: &PartyId) -> bool {
        [&self.supervisor.id, &self.technical.id, &self.medical.id].contains(&party)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Approve,
    Deny,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Approve => "approve",
            Outcome::Deny => "deny",
        }
    }

    pub fn event_kind(self) -> EventKind {
        match self {
            Outcome::Approve => EventKind::Approve,
            Outcome::Deny => EventKind::Deny,
        }
    }
}

impl FromStr for Outcome {
    type Err = crate::model::ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "approve" => Ok(Outcome::Approve),
            "deny" => Ok(Outcome::Deny),
            other => Err(crate::model::ModelError::UnknownValue { what: "outcome", value: other.to_owned() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalDecision {
    pub outcome: Outcome,
    pub rationale: String,
    pub decided_at: Timestamp,
    pub decided_by: PartyId,
}

/// Text of the official communication sent to the applicant with the decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeNotice {
    pub subject: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportOp {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessDecision {
    pub allowed: bool,
    pub reason: String,
}

impl AccessDecision {
    fn allow(reason: impl Into<String>) -> Self {
        AccessDecision { allowed: true, reason: reason.into() }
    }

    fn deny(reason: impl Into<String>) -> Self {
        AccessDecision { allowed: false, reason: reason.into() }
    }
}

/// Evaluation state carried by a dossier.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub assignment: Option<EvaluationAssignment>,
    pub reports: BTreeMap<ReportKind, EvaluationReport>,
    /// Superseded revisions, oldest first.
    pub history: Vec<EvaluationReport>,
    pub decision: Option<FinalDecision>,
}

fn in_open_evaluation(state: CivState) -> bool {
    matches!(
        state,
        CivState::Evaluation(
            EvaluationStatus::InProgress | EvaluationStatus::InfoRequested | EvaluationStatus::OrientedTowardDenial
        )
    )
}

impl EvaluationFile {
    pub fn assign_team(
        &mut self,
        state: CivState,
        supervisor: &Profile,
        technical: &Profile,
        medical: &Profile,
        actor: &Actor,
        at: Timestamp,
    ) -> Result<LifecycleEvent, EvaluationError> {
        if !matches!(actor.role, Role::AdministrativeSecretary | Role::Supervisor) {
            return Err(EvaluationError::NotAuthorized(actor.role));
        }
        if state != CivState::Submitted {
            return Err(EvaluationError::WrongState(state));
        }
        if self.assignment.is_some() {
            return Err(EvaluationError::DuplicateAssignment);
        }
        let (s, t, m) = (&supervisor.party.id, &technical.party.id, &medical.party.id);
        if s == t || s == m || t == m {
            return Err(EvaluationError::NotDistinct);
        }
        for (profile, role) in [
            (supervisor, Role::Supervisor),
            (technical, Role::TechnicalEvaluator),
            (medical, Role::MedicalEvaluator),
        ] {
            if !profile.holds(role) {
                return Err(EvaluationError::RoleMismatch { party: profile.party.id.clone(), role });
            }
        }
        self.assignment = Some(EvaluationAssignment {
            supervisor: supervisor.party.clone(),
            technical: technical.party.clone(),
            medical: medical.party.clone(),
            assigned_at: at,
        });
        Ok(LifecycleEvent::new(EventKind::AssignTeam, actor.clone(), at)
            .with("supervisor", s.as_str())
            .with("technical", t.as_str())
            .with("medical", m.as_str()))
    }

    /// Read/write access of `actor` to the report of the given kind.
    pub fn report_access(&self, kind: ReportKind, actor: &Actor, op: ReportOp) -> AccessDecision {
        if actor.role.is_external() {
            return AccessDecision::deny("applicants never access evaluation reports");
        }
        let Some(assignment) = &self.assignment else {
            return AccessDecision::deny("no evaluation team assigned");
        };
        let is_author = assignment.author_of(kind) == &actor.party && actor.role == kind.author_role();
        match op {
            ReportOp::Write if is_author => AccessDecision::allow("author"),
            ReportOp::Write => AccessDecision::deny(format!("only the author may modify the {kind} report")),
            ReportOp::Read if is_author => AccessDecision::allow("author"),
            ReportOp::Read if actor.role == Role::Supervisor && assignment.supervisor.id == actor.party => {
                match self.reports.get(&kind) {
                    Some(r) if r.shared => AccessDecision::allow("shared with supervisor"),
                    _ => AccessDecision::deny(format!("the {kind} report has not been shared")),
                }
            }
            ReportOp::Read => AccessDecision::deny(format!("the {kind} report is confidential to its author")),
        }
    }

    pub fn save_report(
        &mut self,
        state: CivState,
        kind: ReportKind,
        body: ReportBody,
        actor: &Actor,
        expected_revision: Option<u32>,
        at: Timestamp,
    ) -> Result<u32, EvaluationError> {
        if !in_open_evaluation(state) {
            return Err(EvaluationError::WrongState(state));
        }
        if !self.report_access(kind, actor, ReportOp::Write).allowed {
            return Err(EvaluationError::NotOwner(kind));
        }
        let current = self.reports.get(&kind).map_or(0, |r| r.revision);
        if let Some(given) = expected_revision {
            if given != current {
                return Err(EvaluationError::StaleRevision { given, current });
            }
        }
        let shared = self.reports.get(&kind).is_some_and(|r| r.shared);
        let report = EvaluationReport {
            kind,
            author: actor.party.clone(),
            body,
            shared,
            revision: current + 1,
            saved_at: at,
        };
        if let Some(previous) = self.reports.insert(kind, report) {
            self.history.push(previous);
        }
        Ok(current + 1)
    }

    /// One-way: once shared a report stays shared.
    pub fn share_report(&mut self, kind: ReportKind, actor: &Actor) -> Result<&EvaluationReport, EvaluationError> {
        if !self.report_access(kind, actor, ReportOp::Write).allowed {
            return Err(EvaluationError::NotOwner(kind));
        }
        let report = self.reports.get_mut(&kind).ok_or(EvaluationError::NoSuchReport(kind))?;
        report.shared = true;
        Ok(report)
    }

    pub fn read_report(&self, kind: ReportKind, actor: &Actor) -> Result<&EvaluationReport, EvaluationError> {
        let access = self.report_access(kind, actor, ReportOp::Read);
        if !access.allowed {
            return Err(EvaluationError::AccessDenied(access.reason));
        }
        self.reports.get(&kind).ok_or(EvaluationError::NoSuchReport(kind))
    }

    pub fn both_reports_shared(&self) -> bool {
        [ReportKind::Technical, ReportKind::Medical]
            .iter()
            .all(|k| self.reports.get(k).is_some_and(|r| r.shared))
    }

    pub fn decide(
        &mut self,
        state: CivState,
        outcome: Outcome,
        rationale: impl Into<String>,
        actor: &Actor,
        at: Timestamp,
    ) -> Result<(FinalDecision, LifecycleEvent, OutcomeNotice), EvaluationError> {
        if self.decision.is_some()
            || !matches!(
                state,
                CivState::Evaluation(EvaluationStatus::InProgress | EvaluationStatus::OrientedTowardDenial)
            )
        {
            return Err(EvaluationError::WrongState(state));
        }
        let is_supervisor = self
            .assignment
            .as_ref()
            .is_some_and(|a| a.supervisor.id == actor.party && actor.role == Role::Supervisor);
        if !is_supervisor {
            return Err(EvaluationError::NotSupervisor);
        }
        if !self.both_reports_shared() {
            return Err(EvaluationError::ReportsNotShared);
        }
        let decision = FinalDecision {
            outcome,
            rationale: rationale.into(),
            decided_at: at,
            decided_by: actor.party.clone(),
        };
        let event = LifecycleEvent::new(outcome.event_kind(), actor.clone(), at).with("rationale", decision.rationale.clone());
        let notice = OutcomeNotice {
            subject: match outcome {
                Outcome::Approve => "Notification approved".to_owned(),
                Outcome::Deny => "Notification denied".to_owned(),
            },
            body: decision.rationale.clone(),
        };
        self.decision = Some(decision.clone());
        Ok((decision, event, notice))
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        match &self.assignment {
            None => {
                if !self.reports.is_empty() || self.decision.is_some() {
                    out.push(Violation::new("evaluation", "reports or decision without an assigned team"));
                }
            }
            Some(a) => {
                if a.supervisor.id == a.technical.id || a.supervisor.id == a.medical.id || a.technical.id == a.medical.id {
                    out.push(Violation::new("evaluation-team", "team members must be distinct"));
                }
                for (kind, r) in &self.reports {
                    if r.kind != *kind || &r.author != a.author_of(*kind) {
                        out.push(Violation::new("report-author", format!("{kind} report has the wrong author")));
                    }
                }
                for old in &self.history {
                    let newer = self.reports.get(&old.kind).map_or(0, |r| r.revision);
                    if old.revision >= newer {
                        out.push(Violation::new("report-revision", format!("{} revision {} is not superseded", old.kind, old.revision)));
                    }
                    if old.shared && !self.reports.get(&old.kind).is_some_and(|r| r.shared) {
                        out.push(Violation::new("report-shared", format!("{} report was un-shared", old.kind)));
                    }
                }
                if let Some(d) = &self.decision {
                    if d.decided_by != a.supervisor.id {
                        out.push(Violation::new("decision", "decision not taken by the assigned supervisor"));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PartyKind;
    use crate::time::utc_day;

    fn staff(id: &str, role: Role) -> Profile {
        let party = Party::new(id, PartyKind::NcaUser, id.to_uppercase(), "", "IT").unwrap();
        Profile::new(party, [role].into_iter().collect()).unwrap()
    }

    fn team() -> (Profile, Profile, Profile) {
        (staff("sup", Role::Supervisor), staff("tech", Role::TechnicalEvaluator), staff("med", Role::MedicalEvaluator))
    }

    fn assigned() -> EvaluationFile {
        let (s, t, m) = team();
        let mut file = EvaluationFile::default();
        file.assign_team(CivState::Submitted, &s, &t, &m, &Actor::new("sec", Role::AdministrativeSecretary), utc_day(2009, 10, 12))
            .unwrap();
        file
    }

    const OPEN: CivState = CivState::Evaluation(EvaluationStatus::InProgress);

    #[test]
    fn assignment_requires_submitted_state() {
        let (s, t, m) = team();
        let err = EvaluationFile::default()
            .assign_team(CivState::Draft, &s, &t, &m, &Actor::new("sec", Role::AdministrativeSecretary), utc_day(2009, 1, 1))
            .unwrap_err();
        assert_eq!(err, EvaluationError::WrongState(CivState::Draft));
    }

    #[test]
    fn assignment_requires_distinct_members() {
        let (s, t, _) = team();
        let err = EvaluationFile::default()
            .assign_team(CivState::Submitted, &s, &t, &t, &Actor::new("sec", Role::AdministrativeSecretary), utc_day(2009, 1, 1))
            .unwrap_err();
        assert_eq!(err, EvaluationError::NotDistinct);
    }

    #[test]
    fn duplicate_assignment_is_rejected() {
        let (s, t, m) = team();
        let mut file = assigned();
        let err = file
            .assign_team(CivState::Submitted, &s, &t, &m, &Actor::new("sec", Role::AdministrativeSecretary), utc_day(2009, 1, 1))
            .unwrap_err();
        assert_eq!(err, EvaluationError::DuplicateAssignment);
    }

    #[test]
    fn evaluator_edits_own_report_only() {
        let mut file = assigned();
        let tech = Actor::new("tech", Role::TechnicalEvaluator);
        assert_eq!(file.save_report(OPEN, ReportKind::Technical, ReportBody::default(), &tech, None, utc_day(2009, 11, 1)), Ok(1));
        assert_eq!(file.save_report(OPEN, ReportKind::Technical, ReportBody::default(), &tech, Some(1), utc_day(2009, 11, 2)), Ok(2));
        assert_eq!(file.history.len(), 1);
        let sup = Actor::new("sup", Role::Supervisor);
        assert_eq!(
            file.save_report(OPEN, ReportKind::Technical, ReportBody::default(), &sup, None, utc_day(2009, 11, 3)),
            Err(EvaluationError::NotOwner(ReportKind::Technical))
        );
    }

    #[test]
    fn stale_revision_is_rejected() {
        let mut file = assigned();
        let tech = Actor::new("tech", Role::TechnicalEvaluator);
        file.save_report(OPEN, ReportKind::Technical, ReportBody::default(), &tech, None, utc_day(2009, 11, 1)).unwrap();
        assert_eq!(
            file.save_report(OPEN, ReportKind::Technical, ReportBody::default(), &tech, Some(0), utc_day(2009, 11, 1)),
            Err(EvaluationError::StaleRevision { given: 0, current: 1 })
        );
    }

    #[test]
    fn supervisor_reads_only_after_share() {
        let mut file = assigned();
        let tech = Actor::new("tech", Role::TechnicalEvaluator);
        let sup = Actor::new("sup", Role::Supervisor);
        file.save_report(OPEN, ReportKind::Technical, ReportBody::default(), &tech, None, utc_day(2009, 11, 1)).unwrap();
        assert!(matches!(file.read_report(ReportKind::Technical, &sup), Err(EvaluationError::AccessDenied(_))));
        file.share_report(ReportKind::Technical, &tech).unwrap();
        file.share_report(ReportKind::Technical, &tech).unwrap();
        assert!(file.read_report(ReportKind::Technical, &sup).unwrap().shared);
        assert!(file.read_report(ReportKind::Technical, &Actor::new("med", Role::MedicalEvaluator)).is_err());
    }

    #[test]
    fn decision_needs_both_shared_reports_and_happens_once() {
        let mut file = assigned();
        let tech = Actor::new("tech", Role::TechnicalEvaluator);
        let med = Actor::new("med", Role::MedicalEvaluator);
        let sup = Actor::new("sup", Role::Supervisor);
        file.save_report(OPEN, ReportKind::Technical, ReportBody::default(), &tech, None, utc_day(2009, 11, 1)).unwrap();
        file.save_report(OPEN, ReportKind::Medical, ReportBody::default(), &med, None, utc_day(2009, 11, 1)).unwrap();
        file.share_report(ReportKind::Technical, &tech).unwrap();
        assert_eq!(
            file.decide(OPEN, Outcome::Approve, "ok", &sup, utc_day(2009, 12, 1)).unwrap_err(),
            EvaluationError::ReportsNotShared
        );
        file.share_report(ReportKind::Medical, &med).unwrap();
        assert_eq!(
            file.decide(OPEN, Outcome::Approve, "ok", &tech, utc_day(2009, 12, 1)).unwrap_err(),
            EvaluationError::NotSupervisor
        );
        let (decision, event, notice) = file.decide(OPEN, Outcome::Approve, "ok", &sup, utc_day(2009, 12, 1)).unwrap();
        assert_eq!(decision.outcome, Outcome::Approve);
        assert_eq!(event.kind, EventKind::Approve);
        assert_eq!(notice.subject, "Notification approved");
        let approved = CivState::Evaluation(EvaluationStatus::Approved);
        assert_eq!(
            file.decide(approved, Outcome::Approve, "again", &sup, utc_day(2009, 12, 2)).unwrap_err(),
            EvaluationError::WrongState(approved)
        );
    }
}
