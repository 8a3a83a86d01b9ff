use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LifecycleError;
use crate::model::{PartyId, Role};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    RegisterApplicant,
    GrantAccess,
    InitializeNotification,
    SubmitNotification,
    AssignTeam,
    RequestInfo,
    ProvideInfo,
    MarkOrientedDenial,
    Approve,
    Deny,
    ReportStart,
    ReportEnd,
    ReportEarlyTermination,
    SubmitAmendment,
    ReportSaeInitial,
    ReportSaeFinal,
    AcceptFinalReport,
}

impl EventKind {
    pub const ALL: [EventKind; 17] = [
        EventKind::RegisterApplicant,
        EventKind::GrantAccess,
        EventKind::InitializeNotification,
        EventKind::SubmitNotification,
        EventKind::AssignTeam,
        EventKind::RequestInfo,
        EventKind::ProvideInfo,
        EventKind::MarkOrientedDenial,
        EventKind::Approve,
        EventKind::Deny,
        EventKind::ReportStart,
        EventKind::ReportEnd,
        EventKind::ReportEarlyTermination,
        EventKind::SubmitAmendment,
        EventKind::ReportSaeInitial,
        EventKind::ReportSaeFinal,
        EventKind::AcceptFinalReport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::RegisterApplicant => "register-applicant",
            EventKind::GrantAccess => "grant-access",
            EventKind::InitializeNotification => "initialize-notification",
            EventKind::SubmitNotification => "submit-notification",
            EventKind::AssignTeam => "assign-team",
            EventKind::RequestInfo => "request-info",
            EventKind::ProvideInfo => "provide-info",
            EventKind::MarkOrientedDenial => "mark-oriented-denial",
            EventKind::Approve => "approve",
            EventKind::Deny => "deny",
            EventKind::ReportStart => "report-start",
            EventKind::ReportEnd => "report-end",
            EventKind::ReportEarlyTermination => "report-early-termination",
            EventKind::SubmitAmendment => "submit-amendment",
            EventKind::ReportSaeInitial => "report-sae-initial",
            EventKind::ReportSaeFinal => "report-sae-final",
            EventKind::AcceptFinalReport => "accept-final-report",
        }
    }

    /// Events that modify the notification itself rather than the CIV around it.
    pub fn mutates_notification(self) -> bool {
        matches!(self, EventKind::InitializeNotification | EventKind::SubmitNotification)
    }

    /// Events belonging to the investigation sub-process.
    pub fn is_investigation_event(self) -> bool {
        matches!(
            self,
            EventKind::ReportStart
                | EventKind::ReportEnd
                | EventKind::ReportEarlyTermination
                | EventKind::SubmitAmendment
                | EventKind::ReportSaeInitial
                | EventKind::ReportSaeFinal
                | EventKind::AcceptFinalReport
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = LifecycleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| LifecycleError::UnknownEvent(s.to_owned()))
    }
}

impl_serde_via_str!(EventKind);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Actor {
    pub party: PartyId,
    pub role: Role,
}

impl Actor {
    pub fn new(party: impl Into<PartyId>, role: Role) -> Self {
        Actor { party: party.into(), role }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.party, self.role)
    }
}

impl FromStr for Actor {
    type Err = crate::model::ModelError;

    /// `party-id:role`. The role is taken after the last colon so party ids may contain colons.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (party, role) = s
            .rsplit_once(':')
            .ok_or_else(|| crate::model::ModelError::UnknownValue { what: "actor", value: s.to_owned() })?;
        Ok(Actor { party: party.into(), role: role.parse()? })
    }
}

/// Event-specific key/value record (dates, SAE sequence numbers, rationale...).
pub type Payload = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleEvent {
    pub kind: EventKind,
    pub actor: Actor,
    pub at: Timestamp,
    #[serde(default)]
    pub payload: Payload,
}

impl LifecycleEvent {
    pub fn new(kind: EventKind, actor: Actor, at: Timestamp) -> Self {
        LifecycleEvent { kind, actor, at, payload: Payload::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.payload.insert(key.to_owned(), value.into());
        self
    }

    pub fn role(&self) -> Role {
        self.actor.role
    }
}
