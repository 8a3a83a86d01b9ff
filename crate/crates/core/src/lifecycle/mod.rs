//! CIV lifecycle: states, events, the guard table and the event-sourced engine.

mod engine;
mod event;
mod guard;
mod state;

pub use engine::{apply_event, replay, AuditRecord, Lifecycle, ReplayError};
pub use event::{Actor, EventKind, LifecycleEvent, Payload};
pub use guard::{allowed_actions, is_action_permitted, rule, GuardTable, Permission, Rule};
pub use state::{CivState, ClosedStatus, EvaluationStatus, InvestigationStatus, Phase};

use crate::model::Role;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LifecycleError {
    #[error("illegal lifecycle state `{0}`")]
    IllegalState(String),
    #[error("unknown event kind `{0}`")]
    UnknownEvent(String),
    #[error("{kind} rejected: state {state} is terminal")]
    TerminalState { state: CivState, kind: EventKind },
    #[error("{kind} by {role} not permitted in {state}: {reason}")]
    GuardViolation { state: CivState, role: Role, kind: EventKind, reason: String },
    #[error("event at {at} precedes the last applied event at {last}")]
    OutOfOrder { at: Timestamp, last: Timestamp },
}
