use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::civ::ClinicalInvestigation;
use super::code::ProtocolCode;
use super::communication::Communication;
use super::document::{AssociationKind, AttachedTo, Document};
use super::ids::{CommunicationId, DocumentId, DossierId};
use super::notification::Notification;
use super::{Catalogs, Violation};
use crate::evaluation::EvaluationFile;
use crate::lifecycle::{CivState, Lifecycle};
use crate::time::Timestamp;

/// Everything collected for one clinical investigation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dossier {
    pub id: DossierId,
    pub notification: Notification,
    pub documents: Vec<Document>,
    pub communications: Vec<Communication>,
    pub lifecycle: Lifecycle,
    /// Parsed from the notification form when it is submitted.
    pub civ: Option<ClinicalInvestigation>,
    pub evaluation: EvaluationFile,
    /// Manually set monitoring deadline.
    pub expected_deadline: Option<NaiveDate>,
    pub created_at: Timestamp,
}

impl Dossier {
    pub fn code(&self) -> Option<&ProtocolCode> {
        self.notification.code()
    }

    pub fn state(&self) -> CivState {
        self.lifecycle.state()
    }

    /// Protocol code when submitted, storage id otherwise.
    pub fn display_code(&self) -> String {
        self.code().map_or_else(|| self.id.to_string(), ToString::to_string)
    }

    /// The applicant and the manufacturer it files for both own the dossier.
    pub fn is_owned_by(&self, party: &super::PartyId) -> bool {
        &self.notification.applicant.id == party || &self.notification.manufacturer.id == party
    }

    pub fn document(&self, id: &DocumentId) -> Option<&Document> {
        self.documents.iter().find(|d| &d.id == id)
    }

    pub fn communication(&self, id: &CommunicationId) -> Option<&Communication> {
        self.communications.iter().find(|c| &c.id == id)
    }

    pub fn reply_to(&self, request: &CommunicationId) -> Option<&Communication> {
        self.communications.iter().find(|c| c.in_reply_to.as_ref() == Some(request))
    }

    /// Latest version of a document type, if any.
    pub fn latest_of_type(&self, doc_type: &str) -> Option<&Document> {
        self.documents.iter().filter(|d| d.doc_type == doc_type).max_by_key(|d| d.version)
    }

    pub fn next_version(&self, doc_type: &str) -> u32 {
        self.latest_of_type(doc_type).map_or(1, |d| d.version + 1)
    }

    /// Label of the most recently received listed document.
    pub fn last_document_label(&self) -> Option<&str> {
        self.documents
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_listed() && !d.internal)
            .max_by_key(|(i, d)| (d.received_at, *i))
            .map(|(_, d)| d.label.as_str())
    }

    /// Checks every structural invariant of the aggregate. An empty result
    /// means the value is consistent.
    pub fn check_invariants(&self, catalogs: &Catalogs) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut v = |rule: &str, msg: String| out.push(Violation::new(rule, msg));

        let mut ids = BTreeSet::new();
        let mut versions = BTreeSet::new();
        for d in &self.documents {
            if !ids.insert(&d.id) {
                v("document-id", format!("document {} appears twice", d.id));
            }
            if d.version == 0 {
                v("document-version", format!("document {} has version 0", d.id));
            }
            if !versions.insert((&d.doc_type, d.version)) {
                v("document-version", format!("{} version {} appears twice", d.doc_type, d.version));
            }
            if d.blob.digest.len() != 64 || !d.blob.digest.bytes().all(|b| b.is_ascii_hexdigit()) {
                v("document-blob", format!("document {} has a malformed digest", d.id));
            }
        }

        let mut amended: BTreeMap<&DocumentId, usize> = BTreeMap::new();
        for d in &self.documents {
            for a in &d.associations {
                let Some(target) = self.document(&a.target) else {
                    v("association-target", format!("document {} references unknown {}", d.id, a.target));
                    continue;
                };
                if a.kind == AssociationKind::Amends {
                    *amended.entry(&target.id).or_default() += 1;
                    if target.doc_type != d.doc_type || target.version >= d.version {
                        v(
                            "amends-chain",
                            format!("{} must amend a lower version of {}, not {}", d.id, d.doc_type, target.id),
                        );
                    }
                }
            }
            match &d.attached_to {
                Some(AttachedTo::Notification) => {
                    if !self.notification.documents().iter().any(|a| a.id == d.id) {
                        v("attachment", format!("document {} is not listed on the notification", d.id));
                    }
                }
                Some(AttachedTo::Communication(cid)) => match self.communication(cid) {
                    Some(c) if c.attachments.contains(&d.id) => {}
                    _ => v("attachment", format!("document {} is not attached to communication {cid}", d.id)),
                },
                None => {}
            }
        }
        for (target, n) in amended {
            if n > 1 {
                v("amends-chain", format!("document {target} is amended {n} times"));
            }
        }
        for a in self.notification.documents() {
            match self.document(&a.id) {
                Some(d) if d.doc_type == a.doc_type => {}
                _ => v("attachment", format!("notification lists unknown document {}", a.id)),
            }
        }

        let mut comm_ids = BTreeSet::new();
        let mut replies: BTreeMap<&CommunicationId, usize> = BTreeMap::new();
        for c in &self.communications {
            if !comm_ids.insert(&c.id) {
                v("communication-id", format!("communication {} appears twice", c.id));
            }
            for att in &c.attachments {
                if self.document(att).is_none() {
                    v("attachment", format!("communication {} attaches unknown {att}", c.id));
                }
            }
            if let Some(req_id) = &c.in_reply_to {
                *replies.entry(req_id).or_default() += 1;
                match self.communication(req_id) {
                    None => v("reply-target", format!("{} replies to unknown {req_id}", c.id)),
                    Some(req) => {
                        if req.direction == c.direction {
                            v("reply-direction", format!("{} replies in the same direction as {req_id}", c.id));
                        }
                        if c.sent_at < req.sent_at {
                            v("reply-order", format!("reply {} predates its request {req_id}", c.id));
                        }
                        if !req.request {
                            v("reply-target", format!("{req_id} is not a request"));
                        }
                    }
                }
            }
        }
        for (req, n) in replies {
            if n > 1 {
                v("reply-count", format!("request {req} has {n} replies"));
            }
        }

        match Lifecycle::replay(self.lifecycle.events()) {
            Ok(replayed) if replayed == self.lifecycle => {}
            Ok(_) => v("lifecycle", "recorded transitions differ from their replay".into()),
            Err(e) => v("lifecycle", e.to_string()),
        }

        let submitted = self.state().is_submitted();
        if submitted != self.notification.is_sealed() || submitted != self.code().is_some() {
            v("notification-seal", format!("notification seal does not match state {}", self.state()));
        }
        if let Some(civ) = &self.civ {
            out.extend(civ.violations(catalogs).violations);
        } else if submitted {
            out.push(Violation::new("civ", "submitted dossier without investigation data"));
        }
        out.extend(self.evaluation.violations());
        out
    }
}

/// Every document id must belong to exactly one dossier.
pub fn document_ownership_violations<'a, I>(dossiers: I) -> Vec<Violation>
where
    I: IntoIterator<Item = &'a Dossier>,
{
    let mut owner: BTreeMap<&DocumentId, &DossierId> = BTreeMap::new();
    let mut out = Vec::new();
    for d in dossiers {
        for doc in &d.documents {
            if let Some(prev) = owner.insert(&doc.id, &d.id) {
                out.push(Violation::new(
                    "document-ownership",
                    format!("document {} belongs to both {prev} and {}", doc.id, d.id),
                ));
            }
        }
    }
    out
}
