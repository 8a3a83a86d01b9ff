use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ids::{CommunicationId, DocumentId};
use super::ModelError;
use crate::lifecycle::Actor;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssociationKind {
    Amends,
    RespondsTo,
    Attaches,
    ListsAmendments,
}

impl AssociationKind {
    pub const ALL: [AssociationKind; 4] =
        [AssociationKind::Amends, AssociationKind::RespondsTo, AssociationKind::Attaches, AssociationKind::ListsAmendments];

    pub fn as_str(self) -> &'static str {
        match self {
            AssociationKind::Amends => "amends",
            AssociationKind::RespondsTo => "responds-to",
            AssociationKind::Attaches => "attaches",
            AssociationKind::ListsAmendments => "lists-amendments",
        }
    }
}

impl fmt::Display for AssociationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssociationKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AssociationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::UnknownValue { what: "association kind", value: s.to_owned() })
    }
}

impl_serde_via_str!(AssociationKind);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    pub kind: AssociationKind,
    pub target: DocumentId,
}

/// Reference to a content-addressed blob.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    /// Lowercase SHA-256 hex of the stored bytes.
    pub digest: String,
    pub size: u64,
    pub media_type: String,
}

/// Where a document hangs when it is not a top-level dossier entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttachedTo {
    Notification,
    Communication(CommunicationId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocumentId,
    pub doc_type: String,
    /// Display title, usually the uploaded file name.
    pub label: String,
    /// 1-based, counted per document type within the dossier.
    pub version: u32,
    pub blob: BlobRef,
    pub received_at: Timestamp,
    pub associations: Vec<Association>,
    pub attached_to: Option<AttachedTo>,
    /// Authority-internal documents are hidden from applicants.
    pub internal: bool,
    pub uploaded_by: Actor,
}

impl Document {
    pub fn is_listed(&self) -> bool {
        self.attached_to.is_none()
    }

    pub fn targets(&self, kind: AssociationKind) -> impl Iterator<Item = &DocumentId> {
        self.associations.iter().filter(move |a| a.kind == kind).map(|a| &a.target)
    }
}
