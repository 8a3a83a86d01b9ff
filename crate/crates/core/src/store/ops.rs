//! Append-only operations on a dossier: document upload and versioning,
//! communication threads.

use std::sync::atomic::{AtomicU64, Ordering};

use super::blob::{BlobStore, MediaPolicy};
use super::StoreError;
use crate::lifecycle::{is_action_permitted, Actor, CivState, Permission};
use crate::model::{
    AssociationKind, Association, AttachedDocument, AttachedTo, BlobRef, Catalogs, Communication, CommunicationId,
    CommunicationType, Direction, Document, DocumentId, DocumentType, Dossier, Role, Side,
};
use crate::time::Timestamp;

/// Source of repository-wide unique ids.
pub trait IdSource: Send + Sync {
    fn document_id(&self) -> DocumentId;
    fn communication_id(&self) -> CommunicationId;
}

#[derive(Debug, Default)]
pub struct SequentialIds {
    documents: AtomicU64,
    communications: AtomicU64,
}

impl SequentialIds {
    pub fn starting_after(documents: u64, communications: u64) -> Self {
        SequentialIds { documents: AtomicU64::new(documents), communications: AtomicU64::new(communications) }
    }
}

impl IdSource for SequentialIds {
    fn document_id(&self) -> DocumentId {
        DocumentId::from(format!("doc-{}", self.documents.fetch_add(1, Ordering::SeqCst) + 1))
    }

    fn communication_id(&self) -> CommunicationId {
        CommunicationId::from(format!("com-{}", self.communications.fetch_add(1, Ordering::SeqCst) + 1))
    }
}

/// Collaborators every dossier operation needs.
#[derive(Clone, Copy)]
pub struct StoreContext<'a> {
    pub catalogs: &'a Catalogs,
    pub blobs: &'a dyn BlobStore,
    pub ids: &'a dyn IdSource,
    pub media: &'a MediaPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentUpload {
    pub doc_type: String,
    pub label: String,
    pub media_type: String,
    pub bytes: Vec<u8>,
    pub associations: Vec<Association>,
}

impl DocumentUpload {
    pub fn new(doc_type: impl Into<String>, label: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        let label = label.into();
        let media_type = super::blob::media_type_for_name(&label).unwrap_or("application/pdf").to_owned();
        DocumentUpload { doc_type: doc_type.into(), label, media_type, bytes: bytes.into(), associations: Vec::new() }
    }

    pub fn with_media_type(mut self, media_type: impl Into<String>) -> Self {
        self.media_type = media_type.into();
        self
    }

    pub fn associate(mut self, kind: AssociationKind, target: impl Into<DocumentId>) -> Self {
        self.associations.push(Association { kind, target: target.into() });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommunicationDraft {
    pub comm_type: String,
    pub subject: String,
    pub body: String,
    pub attachments: Vec<DocumentUpload>,
}

impl CommunicationDraft {
    pub fn new(comm_type: impl Into<String>, subject: impl Into<String>) -> Self {
        CommunicationDraft { comm_type: comm_type.into(), subject: subject.into(), ..Default::default() }
    }

    pub fn body(mut self, body: impl Into<String>) -> Self {
        self.body = body.into();
        self
    }

    pub fn attach(mut self, upload: DocumentUpload) -> Self {
        self.attachments.push(upload);
        self
    }
}

fn allow() -> Permission {
    Permission { permitted: true, reason: String::new() }
}

fn deny(reason: String) -> Permission {
    Permission { permitted: false, reason }
}

/// Whether `role` may upload a document of type `dt` while the dossier is in `state`.
pub fn document_permission(dt: &DocumentType, state: CivState, role: Role) -> Permission {
    if dt.system {
        return deny(format!("{} documents are generated by the system", dt.code));
    }
    let side = if dt.internal { Side::Nca } else { dt.side.unwrap_or(Side::Applicant) };
    if Side::of(role) != side {
        return deny(format!("role {role} may not upload {} documents", dt.code));
    }
    if dt.required_for_submission && state == CivState::Draft {
        return allow();
    }
    if dt.events.iter().any(|e| is_action_permitted(state, role, *e).permitted) {
        return allow();
    }
    if dt.phases.iter().any(|p| p.matches(state)) && !state.is_terminal() {
        return allow();
    }
    deny(format!("{} documents cannot be uploaded in {state}", dt.code))
}

/// Whether `role` may open a communication of type `ct` while the dossier is in `state`.
pub fn communication_permission(ct: &CommunicationType, state: CivState, role: Role) -> Permission {
    if ct.system {
        return deny(format!("{} communications are generated by the system", ct.code));
    }
    if Side::of(role) != ct.side {
        return deny(format!("role {role} may not send {} communications", ct.code));
    }
    if state.is_terminal() {
        return deny(format!("state {state} is terminal"));
    }
    if ct.events.iter().any(|e| is_action_permitted(state, role, *e).permitted) || ct.phases.iter().any(|p| p.matches(state)) {
        return allow();
    }
    deny(format!("{} communications are not permitted in {state}", ct.code))
}

fn guard(p: Permission) -> Result<(), StoreError> {
    if p.permitted {
        Ok(())
    } else {
        Err(StoreError::GuardViolation(p.reason))
    }
}

fn store_document(
    ctx: StoreContext<'_>,
    dossier: &mut Dossier,
    upload: DocumentUpload,
    attached_to: Option<AttachedTo>,
    internal: bool,
    actor: &Actor,
    at: Timestamp,
) -> Result<Document, StoreError> {
    ctx.media.check(&upload.media_type)?;
    for a in &upload.associations {
        let target = dossier.document(&a.target).ok_or_else(|| StoreError::UnknownDocument(a.target.to_string()))?;
        if a.kind == AssociationKind::Amends {
            let already = dossier.documents.iter().any(|d| d.targets(AssociationKind::Amends).any(|t| t == &target.id));
            if target.doc_type != upload.doc_type || already {
                return Err(StoreError::InvalidAssociation(format!(
                    "{} cannot amend {} ({})",
                    upload.doc_type, target.id, target.doc_type
                )));
            }
        }
    }
    let stored = ctx.blobs.put(&upload.bytes, at)?;
    let doc = Document {
        id: ctx.ids.document_id(),
        version: dossier.next_version(&upload.doc_type),
        doc_type: upload.doc_type,
        label: upload.label,
        blob: BlobRef { digest: stored.digest, size: stored.size, media_type: upload.media_type },
        received_at: at,
        associations: upload.associations,
        attached_to,
        internal,
        uploaded_by: actor.clone(),
    };
    dossier.documents.push(doc.clone());
    Ok(doc)
}

/// Uploads a document. Notification attachments uploaded while drafting are
/// linked to the notification, replacing an earlier file of the same type;
/// later versions of a submission document automatically amend the previous one.
pub fn put_document(
    ctx: StoreContext<'_>,
    dossier: &mut Dossier,
    mut upload: DocumentUpload,
    actor: &Actor,
    at: Timestamp,
) -> Result<Document, StoreError> {
    let dt = ctx
        .catalogs
        .document_type(&upload.doc_type)
        .ok_or_else(|| StoreError::UnknownDocumentType(upload.doc_type.clone()))?;
    let state = dossier.state();
    guard(document_permission(dt, state, actor.role))?;
    let previous = dossier.latest_of_type(&dt.code).map(|d| d.id.clone());
    if dt.required_for_submission {
        if let Some(prev) = &previous {
            if !upload.associations.iter().any(|a| a.kind == AssociationKind::Amends) {
                upload.associations.push(Association { kind: AssociationKind::Amends, target: prev.clone() });
            }
        }
    }
    let drafting = dt.required_for_submission && state == CivState::Draft;
    let attached_to = drafting.then_some(AttachedTo::Notification);
    let (internal, code) = (dt.internal, dt.code.clone());
    let doc = store_document(ctx, dossier, upload, attached_to, internal, actor, at)?;
    if drafting {
        if let Some(prev) = previous {
            dossier.notification.detach(&prev)?;
            if let Some(old) = dossier.documents.iter_mut().find(|d| d.id == prev) {
                old.attached_to = None;
            }
        }
        dossier.notification.attach(AttachedDocument { id: doc.id.clone(), doc_type: code })?;
    }
    Ok(doc)
}

/// Stores a system-generated document, bypassing upload gating.
pub fn put_system_document(
    ctx: StoreContext<'_>,
    dossier: &mut Dossier,
    upload: DocumentUpload,
    actor: &Actor,
    at: Timestamp,
) -> Result<Document, StoreError> {
    if ctx.catalogs.document_type(&upload.doc_type).is_none() {
        return Err(StoreError::UnknownDocumentType(upload.doc_type));
    }
    store_document(ctx, dossier, upload, None, false, actor, at)
}

fn build_communication(
    ctx: StoreContext<'_>,
    dossier: &mut Dossier,
    ct: &CommunicationType,
    draft: CommunicationDraft,
    in_reply_to: Option<CommunicationId>,
    actor: &Actor,
    at: Timestamp,
) -> Result<Communication, StoreError> {
    if draft.subject.trim().is_empty() {
        return Err(StoreError::Invalid("communication subject must not be empty".into()));
    }
    for upload in &draft.attachments {
        let dt = ctx
            .catalogs
            .document_type(&upload.doc_type)
            .ok_or_else(|| StoreError::UnknownDocumentType(upload.doc_type.clone()))?;
        if dt.system || (dt.internal && actor.role.is_external()) {
            return Err(StoreError::GuardViolation(format!("{} cannot be attached by {}", dt.code, actor.role)));
        }
    }
    let id = ctx.ids.communication_id();
    let mut attachments = Vec::new();
    for upload in draft.attachments {
        let internal = ctx.catalogs.document_type(&upload.doc_type).is_some_and(|t| t.internal);
        let doc = store_document(ctx, dossier, upload, Some(AttachedTo::Communication(id.clone())), internal, actor, at)?;
        attachments.push(doc.id);
    }
    let comm = Communication {
        id,
        direction: Direction::from_side(Side::of(actor.role)),
        comm_type: ct.code.clone(),
        subject: draft.subject,
        sent_at: at,
        body: draft.body,
        attachments,
        in_reply_to,
        request: ct.request,
        author: actor.clone(),
    };
    dossier.communications.push(comm.clone());
    Ok(comm)
}

pub fn open_communication(
    ctx: StoreContext<'_>,
    dossier: &mut Dossier,
    draft: CommunicationDraft,
    actor: &Actor,
    at: Timestamp,
) -> Result<Communication, StoreError> {
    let ct = ctx
        .catalogs
        .communication_type(&draft.comm_type)
        .ok_or_else(|| StoreError::UnknownCommunicationType(draft.comm_type.clone()))?
        .clone();
    if ct.reply {
        return Err(StoreError::GuardViolation(format!("{} is only valid as a reply", ct.code)));
    }
    guard(communication_permission(&ct, dossier.state(), actor.role))?;
    build_communication(ctx, dossier, &ct, draft, None, actor, at)
}

/// Sends a system-generated communication such as an evaluation outcome.
pub fn send_system_communication(
    ctx: StoreContext<'_>,
    dossier: &mut Dossier,
    draft: CommunicationDraft,
    actor: &Actor,
    at: Timestamp,
) -> Result<Communication, StoreError> {
    let ct = ctx
        .catalogs
        .communication_type(&draft.comm_type)
        .ok_or_else(|| StoreError::UnknownCommunicationType(draft.comm_type.clone()))?
        .clone();
    build_communication(ctx, dossier, &ct, draft, None, actor, at)
}

/// Answers an open request. An empty `comm_type` selects the catalog's reply
/// type for the actor's side.
pub fn reply(
    ctx: StoreContext<'_>,
    dossier: &mut Dossier,
    request: &CommunicationId,
    mut draft: CommunicationDraft,
    actor: &Actor,
    at: Timestamp,
) -> Result<Communication, StoreError> {
    let req = dossier
        .communication(request)
        .filter(|c| c.request)
        .ok_or_else(|| StoreError::UnknownRequest(request.to_string()))?;
    if dossier.reply_to(request).is_some() {
        return Err(StoreError::AlreadyAnswered(request.to_string()));
    }
    let side = Side::of(actor.role);
    if Direction::from_side(side) == req.direction {
        return Err(StoreError::SameDirection(request.to_string()));
    }
    if at < req.sent_at {
        return Err(StoreError::Invalid(format!("reply predates request {request}")));
    }
    if draft.comm_type.is_empty() {
        draft.comm_type = ctx
            .catalogs
            .communication_types()
            .find(|t| t.reply && t.side == side)
            .map(|t| t.code.clone())
            .ok_or_else(|| StoreError::UnknownCommunicationType("<reply>".into()))?;
    }
    let ct = ctx
        .catalogs
        .communication_type(&draft.comm_type)
        .ok_or_else(|| StoreError::UnknownCommunicationType(draft.comm_type.clone()))?
        .clone();
    if !ct.reply {
        return Err(StoreError::GuardViolation(format!("{} cannot be used as a reply", ct.code)));
    }
    guard(communication_permission(&ct, dossier.state(), actor.role))?;
    build_communication(ctx, dossier, &ct, draft, Some(request.clone()), actor, at)
}

/// Requests without a reply, oldest first.
pub fn open_requests(dossier: &Dossier) -> Vec<&Communication> {
    let mut open: Vec<_> = dossier
        .communications
        .iter()
        .enumerate()
        .filter(|(_, c)| c.request && dossier.reply_to(&c.id).is_none())
        .collect();
    open.sort_by_key(|(i, c)| (c.sent_at, *i));
    open.into_iter().map(|(_, c)| c).collect()
}
