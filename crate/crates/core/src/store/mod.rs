//! Dossier persistence: content-addressed blobs, append-only dossier
//! operations, timelines and the copy-on-write repository.

mod blob;
mod ops;
mod repo;
mod timeline;

pub use blob::{is_digest, media_type_for_name, sha256_hex, BlobStore, FsBlobStore, MediaPolicy, MemoryBlobStore, StoredBlob};
pub use ops::{
    communication_permission, document_permission, open_communication, open_requests, put_document,
    put_system_document, reply, send_system_communication, CommunicationDraft, DocumentUpload, IdSource,
    SequentialIds, StoreContext,
};
pub(crate) use blob::write_atomic;
pub use repo::{LockFile, Repository, RepositoryConfig};
pub use timeline::{timeline, EntryKind, TimelineEntry, TimelineOptions};

use std::path::{Path, PathBuf};

use crate::evaluation::EvaluationFile;
use crate::lifecycle::{Actor, EventKind, Lifecycle, LifecycleError, LifecycleEvent};
use crate::model::{Dossier, DossierId, ModelError, Notification};
use crate::time::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("payload must not be empty")]
    EmptyPayload,
    #[error("unknown blob {0}")]
    UnknownBlob(String),
    #[error("blob {0} does not match its digest")]
    CorruptBlob(String),
    #[error("media type `{0}` is not allowed")]
    MediaTypeNotAllowed(String),
    #[error("unknown document type `{0}`")]
    UnknownDocumentType(String),
    #[error("unknown communication type `{0}`")]
    UnknownCommunicationType(String),
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("unknown dossier {0}")]
    UnknownDossier(String),
    #[error("dossier {0} already exists")]
    DuplicateDossier(String),
    #[error("invalid association: {0}")]
    InvalidAssociation(String),
    #[error("not permitted: {0}")]
    GuardViolation(String),
    #[error("unknown request {0}")]
    UnknownRequest(String),
    #[error("request {0} is already answered")]
    AlreadyAnswered(String),
    #[error("a reply to {0} must travel in the opposite direction")]
    SameDirection(String),
    #[error("{0}")]
    Invalid(String),
    #[error("store at {0} is locked by another process")]
    Locked(PathBuf),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io { path: path.to_owned(), source }
    }
}

/// A fresh dossier in draft, opened by `actor`'s initialize-notification event.
pub fn new_dossier(id: DossierId, notification: Notification, actor: &Actor, at: Timestamp) -> Dossier {
    try_new_dossier(id, notification, actor, at).expect("applicants may always initialize a draft")
}

pub fn try_new_dossier(
    id: DossierId,
    notification: Notification,
    actor: &Actor,
    at: Timestamp,
) -> Result<Dossier, StoreError> {
    let mut lifecycle = Lifecycle::new();
    lifecycle.apply(LifecycleEvent::new(EventKind::InitializeNotification, actor.clone(), at))?;
    Ok(Dossier {
        id,
        notification,
        documents: Vec::new(),
        communications: Vec::new(),
        lifecycle,
        civ: None,
        evaluation: EvaluationFile::default(),
        expected_deadline: None,
        created_at: at,
    })
}
