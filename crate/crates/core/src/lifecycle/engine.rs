use serde::{Deserialize, Serialize};

use super::guard::{is_action_permitted, rule};
use super::{CivState, LifecycleError, LifecycleEvent};

/// One applied event with the states on either side of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub event: LifecycleEvent,
    pub from: CivState,
    pub to: CivState,
}

/// Computes the successor of `state` under `event`, checked against the guard table.
pub fn apply_event(state: CivState, event: &LifecycleEvent) -> Result<CivState, LifecycleError> {
    if state.is_terminal() {
        return Err(LifecycleError::TerminalState { state, kind: event.kind });
    }
    let permission = is_action_permitted(state, event.role(), event.kind);
    match rule(state, event.kind) {
        Some(r) if permission.permitted => Ok(r.to),
        _ => Err(LifecycleError::GuardViolation {
            state,
            role: event.role(),
            kind: event.kind,
            reason: permission.reason,
        }),
    }
}

/// Event-sourced lifecycle of one dossier: current state plus the audit of
/// every applied event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifecycle {
    state: CivState,
    audit: Vec<AuditRecord>,
}

impl Default for Lifecycle {
    fn default() -> Self {
        Self::new()
    }
}

impl Lifecycle {
    pub fn new() -> Self {
        Self::starting_at(CivState::INITIAL)
    }

    pub fn starting_at(state: CivState) -> Self {
        Lifecycle { state, audit: Vec::new() }
    }

    pub fn state(&self) -> CivState {
        self.state
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    pub fn last_event_at(&self) -> Option<crate::time::Timestamp> {
        self.audit.last().map(|r| r.event.at)
    }

    pub fn apply(&mut self, event: LifecycleEvent) -> Result<&AuditRecord, LifecycleError> {
        if let Some(last) = self.last_event_at() {
            if event.at < last {
                return Err(LifecycleError::OutOfOrder { at: event.at, last });
            }
        }
        let to = apply_event(self.state, &event)?;
        let record = AuditRecord { seq: self.audit.len() as u64 + 1, event, from: self.state, to };
        self.state = to;
        self.audit.push(record);
        Ok(self.audit.last().expect("just pushed"))
    }

    /// Folds `events` from the initial state. The first failing event aborts
    /// the replay and is reported by index.
    pub fn replay<'a, I>(events: I) -> Result<Self, ReplayError>
    where
        I: IntoIterator<Item = &'a LifecycleEvent>,
    {
        let mut lifecycle = Lifecycle::new();
        lifecycle.extend(events)?;
        Ok(lifecycle)
    }

    /// Continues the fold with further events; indices in errors count from
    /// the start of `events`.
    pub fn extend<'a, I>(&mut self, events: I) -> Result<(), ReplayError>
    where
        I: IntoIterator<Item = &'a LifecycleEvent>,
    {
        for (index, event) in events.into_iter().enumerate() {
            self.apply(event.clone()).map_err(|source| ReplayError { index, source })?;
        }
        Ok(())
    }

    pub fn events(&self) -> impl Iterator<Item = &LifecycleEvent> {
        self.audit.iter().map(|r| &r.event)
    }
}

/// Convenience wrapper around [`Lifecycle::replay`] returning only the state.
pub fn replay<'a, I>(events: I) -> Result<CivState, ReplayError>
where
    I: IntoIterator<Item = &'a LifecycleEvent>,
{
    Lifecycle::replay(events).map(|l| l.state())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event #{index} rejected: {source}")]
pub struct ReplayError {
    pub index: usize,
    #[source]
    pub source: LifecycleError,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifecycle::state::{EvaluationStatus, InvestigationStatus};
    use crate::lifecycle::{Actor, EventKind};
    use crate::model::Role;
    use crate::time::utc_day;

    fn ev(kind: EventKind, role: Role, day: u32) -> LifecycleEvent {
        LifecycleEvent::new(kind, Actor::new("p", role), utc_day(2009, 10, day))
    }

    #[test]
    fn assignment_starts_evaluation() {
        let next = apply_event(CivState::Submitted, &ev(EventKind::AssignTeam, Role::AdministrativeSecretary, 9));
        assert_eq!(next.unwrap(), CivState::Evaluation(EvaluationStatus::InProgress));
    }

    #[test]
    fn start_report_moves_to_investigation() {
        let next = apply_event(
            CivState::Evaluation(EvaluationStatus::Approved),
            &ev(EventKind::ReportStart, Role::Manufacturer, 9),
        );
        assert_eq!(next.unwrap(), CivState::Investigation(InvestigationStatus::Started));
    }

    #[test]
    fn adverse_event_in_draft_is_a_guard_violation() {
        let err = apply_event(CivState::Draft, &ev(EventKind::ReportSaeInitial, Role::Manufacturer, 9)).unwrap_err();
        assert!(matches!(err, LifecycleError::GuardViolation { .. }));
    }

    #[test]
    fn empty_replay_is_draft() {
        assert_eq!(replay(&[]).unwrap(), CivState::Draft);
    }

    #[test]
    fn replay_reports_offending_index() {
        let events = vec![
            ev(EventKind::SubmitNotification, Role::Manufacturer, 8),
            ev(EventKind::ReportStart, Role::Manufacturer, 9),
        ];
        let err = replay(&events).unwrap_err();
        assert_eq!(err.index, 1);
    }

    #[test]
    fn out_of_order_timestamps_are_rejected() {
        let events = vec![
            ev(EventKind::SubmitNotification, Role::Manufacturer, 8),
            ev(EventKind::AssignTeam, Role::Supervisor, 7),
        ];
        let err = replay(&events).unwrap_err();
        assert!(matches!(err.source, LifecycleError::OutOfOrder { .. }));
    }

    #[test]
    fn same_timestamp_events_keep_input_order() {
        let events = vec![
            ev(EventKind::SubmitNotification, Role::Manufacturer, 8),
            ev(EventKind::AssignTeam, Role::Supervisor, 8),
        ];
        let lc = Lifecycle::replay(&events).unwrap();
        assert_eq!(lc.audit().len(), 2);
        assert_eq!(lc.audit()[1].event.kind, EventKind::AssignTeam);
    }
}
