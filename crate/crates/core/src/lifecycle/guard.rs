//! The (state × role) → permitted event table.
//!
//! Every lifecycle transition is declared once in [`rule`]; the permission
//! queries, the exported table and the engine all derive from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::state::{CivState, ClosedStatus, EvaluationStatus as E, InvestigationStatus as I};
use super::EventKind;
use crate::model::Role;

const APPLICANTS: &[Role] = &[Role::Manufacturer, Role::AuthorizedRepresentative];
const SECRETARY_OR_SUPERVISOR: &[Role] = &[Role::AdministrativeSecretary, Role::Supervisor];
const EVALUATION_TEAM: &[Role] = &[Role::Supervisor, Role::TechnicalEvaluator, Role::MedicalEvaluator];
const SUPERVISOR: &[Role] = &[Role::Supervisor];
const SECRETARY: &[Role] = &[Role::AdministrativeSecretary];

/// A permitted transition: who may trigger it and where it leads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rule {
    pub roles: &'static [Role],
    pub to: CivState,
}

/// The transition for `kind` out of `state`, if the lifecycle defines one.
pub fn rule(state: CivState, kind: EventKind) -> Option<Rule> {
    use CivState::*;
    use EventKind::*;

    let r = |roles, to| Some(Rule { roles, to });
    match (state, kind) {
        (Registration, RegisterApplicant) => r(APPLICANTS, Registration),
        (Registration, GrantAccess) => r(SECRETARY, Draft),

        (Draft, InitializeNotification) => r(APPLICANTS, Draft),
        (Draft, SubmitNotification) => r(APPLICANTS, Submitted),

        (Submitted, AssignTeam) => r(SECRETARY_OR_SUPERVISOR, Evaluation(E::InProgress)),

        (Evaluation(E::InProgress), RequestInfo) => r(EVALUATION_TEAM, Evaluation(E::InfoRequested)),
        (Evaluation(E::InProgress), MarkOrientedDenial) => r(SUPERVISOR, Evaluation(E::OrientedTowardDenial)),
        (Evaluation(E::InProgress), Approve) => r(SUPERVISOR, Evaluation(E::Approved)),
        (Evaluation(E::InProgress), Deny) => r(SUPERVISOR, Evaluation(E::Denied)),

        (Evaluation(E::InfoRequested), RequestInfo) => r(EVALUATION_TEAM, Evaluation(E::InfoRequested)),
        (Evaluation(E::InfoRequested), ProvideInfo) => r(APPLICANTS, Evaluation(E::InProgress)),

        (Evaluation(E::OrientedTowardDenial), RequestInfo) => r(EVALUATION_TEAM, Evaluation(E::InfoRequested)),
        (Evaluation(E::OrientedTowardDenial), ProvideInfo) => r(APPLICANTS, Evaluation(E::InProgress)),
        (Evaluation(E::OrientedTowardDenial), Approve) => r(SUPERVISOR, Evaluation(E::Approved)),
        (Evaluation(E::OrientedTowardDenial), Deny) => r(SUPERVISOR, Evaluation(E::Denied)),

        (Evaluation(E::Approved), ReportStart) => r(APPLICANTS, Investigation(I::Started)),
        (Evaluation(E::Approved), SubmitAmendment) => r(APPLICANTS, Investigation(I::AwaitingStart)),

        (Investigation(I::AwaitingStart), ReportStart) => r(APPLICANTS, Investigation(I::Started)),
        (Investigation(I::AwaitingStart), SubmitAmendment) => r(APPLICANTS, Investigation(I::AwaitingStart)),

        (Investigation(I::Started), ReportEnd) => r(APPLICANTS, Investigation(I::Concluded)),
        (Investigation(I::Started), ReportEarlyTermination) => r(APPLICANTS, Investigation(I::ConcludedEarly)),
        (Investigation(I::Started), SubmitAmendment) => r(APPLICANTS, Investigation(I::Started)),
        (Investigation(I::Started), ReportSaeInitial) => r(APPLICANTS, Investigation(I::Started)),
        (Investigation(I::Started), ReportSaeFinal) => r(APPLICANTS, Investigation(I::Started)),

        (Investigation(s @ (I::Concluded | I::ConcludedEarly)), ReportSaeFinal) => r(APPLICANTS, Investigation(s)),
        (Investigation(I::Concluded | I::ConcludedEarly), AcceptFinalReport) => {
            r(SUPERVISOR, Closed(ClosedStatus::NotificationConcluded))
        }

        _ => None,
    }
}

/// Event kinds `role` may trigger in `state`, in declaration order.
pub fn allowed_actions(state: CivState, role: Role) -> BTreeSet<EventKind> {
    EventKind::ALL
        .into_iter()
        .filter(|&kind| rule(state, kind).is_some_and(|r| r.roles.contains(&role)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permission {
    pub permitted: bool,
    pub reason: String,
}

/// Decision plus the name of the rule that produced it.
pub fn is_action_permitted(state: CivState, role: Role, kind: EventKind) -> Permission {
    let deny = |reason: String| Permission { permitted: false, reason };
    if state.is_terminal() {
        return deny(format!("state {state} is terminal"));
    }
    match rule(state, kind) {
        Some(r) if r.roles.contains(&role) => Permission {
            permitted: true,
            reason: format!("{role} may {kind} in {state}"),
        },
        Some(_) => deny(format!("role {role} may not {kind} in {state}")),
        None if kind.mutates_notification() && state.is_submitted() => {
            deny(format!("notification already submitted; no change is allowed in {state}"))
        }
        None if kind.is_investigation_event()
            && matches!(state, CivState::Registration | CivState::Draft | CivState::Submitted | CivState::Evaluation(_)) =>
        {
            deny(format!("{kind} requires an approved investigation; state is {state}"))
        }
        None => deny(format!("{kind} is not permitted in {state}")),
    }
}

/// Materialized guard table, total over every legal state and role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardTable {
    rows: BTreeMap<(CivState, Role), BTreeSet<EventKind>>,
}

impl GuardTable {
    pub fn build() -> Self {
        let rows = CivState::ALL
            .into_iter()
            .flat_map(|s| Role::ALL.into_iter().map(move |r| ((s, r), allowed_actions(s, r))))
            .collect();
        GuardTable { rows }
    }

    pub fn get(&self, state: CivState, role: Role) -> &BTreeSet<EventKind> {
        &self.rows[&(state, role)]
    }

    pub fn rows(&self) -> impl Iterator<Item = (CivState, Role, &BTreeSet<EventKind>)> {
        self.rows.iter().map(|(&(s, r), k)| (s, r, k))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `phase:status<TAB>role<TAB>event-kinds` with one line per (state, role),
    /// states and roles in declaration order, kinds comma separated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for state in CivState::ALL {
            for role in Role::ALL {
                let kinds: Vec<&str> = self.get(state, role).iter().map(|k| k.as_str()).collect();
                let _ = writeln!(out, "{state}\t{role}\t{}", kinds.join(","));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approved_manufacturer_can_report_start() {
        let allowed = allowed_actions(CivState::Evaluation(E::Approved), Role::Manufacturer);
        assert!(allowed.contains(&EventKind::ReportStart));
        assert!(allowed.contains(&EventKind::SubmitAmendment));
    }

    #[test]
    fn terminal_rows_are_empty() {
        for role in Role::ALL {
            assert!(allowed_actions(CivState::Closed(ClosedStatus::NotificationConcluded), role).is_empty());
            assert!(allowed_actions(CivState::Evaluation(E::Denied), role).is_empty());
        }
    }

    #[test]
    fn resubmission_is_denied_with_reason() {
        let p = is_action_permitted(CivState::Submitted, Role::Manufacturer, EventKind::SubmitNotification);
        assert!(!p.permitted);
        assert!(p.reason.contains("already submitted"), "{}", p.reason);
    }

    #[test]
    fn applicant_may_answer_information_request() {
        let p = is_action_permitted(
            CivState::Evaluation(E::InfoRequested),
            Role::Manufacturer,
            EventKind::ProvideInfo,
        );
        assert!(p.permitted, "{}", p.reason);
    }

    #[test]
    fn permission_agrees_with_allowed_actions() {
        for state in CivState::ALL {
            for role in Role::ALL {
                let allowed = allowed_actions(state, role);
                for kind in EventKind::ALL {
                    assert_eq!(is_action_permitted(state, role, kind).permitted, allowed.contains(&kind));
                }
            }
        }
    }

    #[test]
    fn tsv_has_one_line_per_state_and_role() {
        let tsv = GuardTable::build().to_tsv();
        assert_eq!(tsv.lines().count(), CivState::ALL.len() * Role::ALL.len());
        assert!(tsv.contains("submitted\tadministrative-secretary\tassign-team\n"));
        assert!(tsv.contains("closed:notification-concluded\tsupervisor\t\n"));
    }
}
