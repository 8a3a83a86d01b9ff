use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::catalog::Side;
use super::ids::{CommunicationId, DocumentId};
use super::ModelError;
use crate::lifecycle::Actor;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    NcaToApplicant,
    ApplicantToNca,
}

impl Direction {
    pub fn from_side(side: Side) -> Self {
        match side {
            Side::Nca => Direction::NcaToApplicant,
            Side::Applicant => Direction::ApplicantToNca,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::NcaToApplicant => Direction::ApplicantToNca,
            Direction::ApplicantToNca => Direction::NcaToApplicant,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::NcaToApplicant => "nca-to-applicant",
            Direction::ApplicantToNca => "applicant-to-nca",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nca-to-applicant" => Ok(Direction::NcaToApplicant),
            "applicant-to-nca" => Ok(Direction::ApplicantToNca),
            other => Err(ModelError::UnknownValue { what: "direction", value: other.to_owned() }),
        }
    }
}

impl_serde_via_str!(Direction);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Communication {
    pub id: CommunicationId,
    pub direction: Direction,
    pub comm_type: String,
    pub subject: String,
    pub sent_at: Timestamp,
    pub body: String,
    pub attachments: Vec<DocumentId>,
    pub in_reply_to: Option<CommunicationId>,
    /// Opens a thread that expects exactly one reply.
    pub request: bool,
    pub author: Actor,
}
