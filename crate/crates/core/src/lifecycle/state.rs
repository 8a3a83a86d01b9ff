use std::fmt;
use std::str::FromStr;


use super::LifecycleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Registration,
    Draft,
    Submitted,
    Evaluation,
    Investigation,
    Closed,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Registration,
        Phase::Draft,
        Phase::Submitted,
        Phase::Evaluation,
        Phase::Investigation,
        Phase::Closed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Registration => "registration",
            Phase::Draft => "draft",
            Phase::Submitted => "submitted",
            Phase::Evaluation => "evaluation",
            Phase::Investigation => "investigation",
            Phase::Closed => "closed",
        }
    }
}

impl FromStr for Phase {
    type Err = LifecycleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| LifecycleError::IllegalState(s.to_owned()))
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvaluationStatus {
    InProgress,
    InfoRequested,
    OrientedTowardDenial,
    Approved,
    Denied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InvestigationStatus {
    AwaitingStart,
    Started,
    Concluded,
    ConcludedEarly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClosedStatus {
    NotificationConcluded,
}

/// Lifecycle position of a clinical investigation: a phase plus, for the
/// phases that have one, a status legal for that phase.
///
/// Rendered as `phase` or `phase:status`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CivState {
    Registration,
    Draft,
    Submitted,
    Evaluation(EvaluationStatus),
    Investigation(InvestigationStatus),
    Closed(ClosedStatus),
}

impl CivState {
    /// Starting point of every dossier and of `replay` on an empty log.
    pub const INITIAL: CivState = CivState::Draft;

    pub const ALL: [CivState; 13] = [
        CivState::Registration,
        CivState::Draft,
        CivState::Submitted,
        CivState::Evaluation(EvaluationStatus::InProgress),
        CivState::Evaluation(EvaluationStatus::InfoRequested),
        CivState::Evaluation(EvaluationStatus::OrientedTowardDenial),
        CivState::Evaluation(EvaluationStatus::Approved),
        CivState::Evaluation(EvaluationStatus::Denied),
        CivState::Investigation(InvestigationStatus::AwaitingStart),
        CivState::Investigation(InvestigationStatus::Started),
        CivState::Investigation(InvestigationStatus::Concluded),
        CivState::Investigation(InvestigationStatus::ConcludedEarly),
        CivState::Closed(ClosedStatus::NotificationConcluded),
    ];

    pub fn phase(self) -> Phase {
        match self {
            CivState::Registration => Phase::Registration,
            CivState::Draft => Phase::Draft,
            CivState::Submitted => Phase::Submitted,
            CivState::Evaluation(_) => Phase::Evaluation,
            CivState::Investigation(_) => Phase::Investigation,
            CivState::Closed(_) => Phase::Closed,
        }
    }

    pub fn status(self) -> Option<&'static str> {
        Some(match self {
            CivState::Registration | CivState::Draft | CivState::Submitted => return None,
            CivState::Evaluation(s) => match s {
                EvaluationStatus::InProgress => "in-progress",
                EvaluationStatus::InfoRequested => "info-requested",
                EvaluationStatus::OrientedTowardDenial => "oriented-toward-denial",
                EvaluationStatus::Approved => "approved",
                EvaluationStatus::Denied => "denied",
            },
            CivState::Investigation(s) => match s {
                InvestigationStatus::AwaitingStart => "awaiting-start",
                InvestigationStatus::Started => "started",
                InvestigationStatus::Concluded => "concluded",
                InvestigationStatus::ConcludedEarly => "concluded-early",
            },
            CivState::Closed(ClosedStatus::NotificationConcluded) => "notification-concluded",
        })
    }

    /// Builds a state from its two components, rejecting statuses that are
    /// not legal for the phase.
    pub fn from_parts(phase: Phase, status: Option<&str>) -> Result<Self, LifecycleError> {
        CivState::ALL
            .into_iter()
            .find(|s| s.phase() == phase && s.status() == status)
            .ok_or_else(|| match status {
                Some(st) => LifecycleError::IllegalState(format!("{phase}:{st}")),
                None => LifecycleError::IllegalState(phase.to_string()),
            })
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            CivState::Evaluation(EvaluationStatus::Denied) | CivState::Closed(ClosedStatus::NotificationConcluded)
        )
    }

    /// True once the notification has been sealed.
    pub fn is_submitted(self) -> bool {
        !matches!(self, CivState::Registration | CivState::Draft)
    }
}

impl fmt::Display for CivState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status() {
            Some(status) => write!(f, "{}:{}", self.phase(), status),
            None => f.write_str(self.phase().as_str()),
        }
    }
}

impl FromStr for CivState {
    type Err = LifecycleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (phase, status) = match s.split_once(':') {
            Some((p, st)) => (p, Some(st)),
            None => (s, None),
        };
        let phase = phase.parse::<Phase>().map_err(|_| LifecycleError::IllegalState(s.to_owned()))?;
        CivState::from_parts(phase, status)
    }
}

impl_serde_via_str!(CivState);
