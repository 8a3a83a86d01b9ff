//! Request bodies that differ from the core types, mostly because file
//! content travels base64-encoded inside JSON.

use base64::Engine;
use chrono::NaiveDate;
use medis_core::evaluation::ReportBody;
use medis_core::model::Association;
use medis_core::service::InvestigationReport;
use medis_core::store::{CommunicationDraft, DocumentUpload};
use medis_core::EventKind;
use serde::Deserialize;

use crate::error::ApiError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadBody {
    pub doc_type: String,
    pub label: String,
    #[serde(default)]
    pub media_type: Option<String>,
    /// Base64 (standard alphabet) file content.
    pub content: String,
    #[serde(default)]
    pub associations: Vec<Association>,
}

impl UploadBody {
    pub fn into_upload(self) -> Result<DocumentUpload, ApiError> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(self.content.trim())
            .map_err(|e| ApiError::invalid(format!("content of {}: {e}", self.label)))?;
        let mut up = DocumentUpload::new(self.doc_type, self.label, bytes);
        if let Some(m) = self.media_type {
            up = up.with_media_type(m);
        }
        for a in self.associations {
            up = up.associate(a.kind, a.target);
        }
        Ok(up)
    }
}

fn uploads(list: Vec<UploadBody>) -> Result<Vec<DocumentUpload>, ApiError> {
    list.into_iter().map(UploadBody::into_upload).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunicationBody {
    #[serde(rename = "type")]
    pub comm_type: String,
    pub subject: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub attachments: Vec<UploadBody>,
}

impl CommunicationBody {
    pub fn into_draft(self) -> Result<CommunicationDraft, ApiError> {
        Ok(CommunicationDraft {
            comm_type: self.comm_type,
            subject: self.subject,
            body: self.body,
            attachments: uploads(self.attachments)?,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventBody {
    pub kind: EventKind,
    #[serde(default)]
    pub date: Option<NaiveDate>,
    #[serde(default)]
    pub sae: Option<u32>,
    #[serde(default)]
    pub narrative: String,
    #[serde(default)]
    pub documents: Vec<UploadBody>,
}

impl EventBody {
    pub fn into_report(self) -> Result<(EventKind, InvestigationReport), ApiError> {
        let report = InvestigationReport {
            date: self.date,
            sae: self.sae,
            narrative: self.narrative,
            documents: uploads(self.documents)?,
        };
        Ok((self.kind, report))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSave {
    pub body: ReportBody,
    #[serde(default)]
    pub expected_revision: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadlineBody {
    pub deadline: Option<NaiveDate>,
}
