use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::code::ProtocolCode;
use super::ids::DocumentId;
use super::party::{Party, Role};
use super::ModelError;
use crate::time::Timestamp;

/// Electronic form content, keyed by dotted field names (`site.1.country`).
pub type FormData = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachedDocument {
    pub id: DocumentId,
    pub doc_type: String,
}

/// The regulatory submission. Editable while a draft; sealed by `seal`, after
/// which every mutator fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    code: Option<ProtocolCode>,
    submitted_at: Option<Timestamp>,
    form: FormData,
    documents: Vec<AttachedDocument>,
    pub applicant: Party,
    pub applicant_role: Role,
    /// The manufacturer on whose behalf the notification is filed. Equals the
    /// applicant when the applicant acts as manufacturer.
    pub manufacturer: Party,
}

impl Notification {
    pub fn draft(applicant: Party, applicant_role: Role, manufacturer: Party) -> Self {
        Notification {
            code: None,
            submitted_at: None,
            form: FormData::new(),
            documents: Vec::new(),
            applicant,
            applicant_role,
            manufacturer,
        }
    }

    /// Rebuilds a notification from persisted parts without re-running the seal checks.
    pub fn from_parts(
        code: Option<ProtocolCode>,
        submitted_at: Option<Timestamp>,
        form: FormData,
        documents: Vec<AttachedDocument>,
        applicant: Party,
        applicant_role: Role,
        manufacturer: Party,
    ) -> Self {
        Notification { code, submitted_at, form, documents, applicant, applicant_role, manufacturer }
    }

    pub fn code(&self) -> Option<&ProtocolCode> {
        self.code.as_ref()
    }

    pub fn submitted_at(&self) -> Option<Timestamp> {
        self.submitted_at
    }

    pub fn is_sealed(&self) -> bool {
        self.submitted_at.is_some()
    }

    pub fn form(&self) -> &FormData {
        &self.form
    }

    pub fn documents(&self) -> &[AttachedDocument] {
        &self.documents
    }

    fn writable(&mut self) -> Result<&mut Self, ModelError> {
        if self.is_sealed() {
            Err(ModelError::Sealed)
        } else {
            Ok(self)
        }
    }

    pub fn set_field(&mut self, key: impl Into<String>, value: impl Into<String>) -> Result<(), ModelError> {
        self.writable()?.form.insert(key.into(), value.into());
        Ok(())
    }

    pub fn remove_field(&mut self, key: &str) -> Result<Option<String>, ModelError> {
        Ok(self.writable()?.form.remove(key))
    }

    pub fn replace_form(&mut self, form: FormData) -> Result<(), ModelError> {
        self.writable()?.form = form;
        Ok(())
    }

    pub fn attach(&mut self, document: AttachedDocument) -> Result<(), ModelError> {
        self.writable()?.documents.push(document);
        Ok(())
    }

    pub fn detach(&mut self, id: &DocumentId) -> Result<bool, ModelError> {
        let this = self.writable()?;
        let before = this.documents.len();
        this.documents.retain(|d| &d.id != id);
        Ok(this.documents.len() != before)
    }

    pub fn seal(&mut self, code: ProtocolCode, at: Timestamp) -> Result<(), ModelError> {
        let this = self.writable()?;
        this.code = Some(code);
        this.submitted_at = Some(at);
        Ok(())
    }
}
