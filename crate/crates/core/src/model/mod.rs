//! Entities and relations of the CIV domain, independent of storage and transport.

pub mod catalog;
mod civ;
mod code;
mod communication;
mod device;
mod document;
mod dossier;
mod ids;
mod notification;
mod party;
mod validation;

pub use catalog::{Catalogs, CommunicationType, DocumentType, RiskClass, Side};
pub use civ::{
    new_clinical_investigation, sae_pairing_violations, ClinicalInvestigation, InvestigationalSite, Milestones,
    SaeKind, SaeReport, StudyDesign,
};
pub use code::{ProtocolCode, DEFAULT_CODE_PREFIX};
pub use communication::{Communication, Direction};
pub use device::{
    link_similarity, validate_comparator, validate_device, CeMark, ComparatorProduct, Component, DeviceVariant, Drug,
    InvestigationalDevice, KitItem, MedicalDevice, SimilarityLink,
};
pub use document::{Association, AssociationKind, AttachedTo, BlobRef, Document};
pub use dossier::{document_ownership_violations, Dossier};
pub use ids::{CommunicationId, DocumentId, DossierId, PartyId, RegistrationId};
pub use notification::{AttachedDocument, FormData, Notification};
pub use party::{Delegation, Party, PartyKind, Profile, Role};
pub use validation::{ValidationReport, Violation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("unknown {what} `{value}`")]
    UnknownValue { what: &'static str, value: String },
    #[error("a party cannot delegate to itself")]
    SelfDelegation,
    #[error("delegation interval is empty")]
    EmptyInterval,
    #[error("external and internal roles cannot be held by the same party")]
    MixedRoles,
    #[error("notification is submitted; no change is allowed")]
    Sealed,
    #[error("{0}")]
    Invariant(String),
}
