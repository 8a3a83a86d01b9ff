//! Organizations, staff accounts, granted profiles and delegations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::auth::PasswordHash;
use super::ServiceError;
use crate::model::{Delegation, Party, PartyId, PartyKind, Profile, Role};
use crate::store::{write_atomic, StoreError};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegistrationStatus {
    Pending,
    Granted,
    Denied,
}

/// What an applicant organization sends when asking for access.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationForm {
    pub organization: Party,
    pub requested_roles: BTreeSet<Role>,
    /// Required when the representative role is requested.
    #[serde(default)]
    pub delegating_manufacturer: Option<Party>,
    #[serde(default)]
    pub delegation_valid_to: Option<NaiveDate>,
}

impl RegistrationForm {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.organization.kind != PartyKind::ApplicantOrganization {
            return Err(ServiceError::Invalid("only applicant organizations register".into()));
        }
        if self.requested_roles.is_empty() {
            return Err(ServiceError::Invalid("at least one role must be requested".into()));
        }
        if let Some(r) = self.requested_roles.iter().find(|r| !r.is_external()) {
            return Err(ServiceError::Invalid(format!("role {r} cannot be requested by an applicant")));
        }
        if self.requested_roles.contains(&Role::AuthorizedRepresentative) {
            let Some(m) = &self.delegating_manufacturer else {
                return Err(ServiceError::Invalid(
                    "an authorized representative must name its delegating manufacturer".into(),
                ));
            };
            if m.id == self.organization.id || m.kind != PartyKind::ApplicantOrganization {
                return Err(ServiceError::Invalid("the delegating manufacturer must be another organization".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationRequest {
    pub id: String,
    #[serde(flatten)]
    pub form: RegistrationForm,
    pub status: RegistrationStatus,
    pub submitted_at: Timestamp,
    pub decided_at: Option<Timestamp>,
    pub decided_by: Option<PartyId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub party: PartyId,
    pub password: PasswordHash,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnterpriseData {
    pub profiles: BTreeMap<PartyId, Profile>,
    /// Staff logins.
    pub accounts: BTreeMap<String, Account>,
    pub registrations: Vec<RegistrationRequest>,
    pub delegations: Vec<Delegation>,
    /// Organizations known only as delegating manufacturers.
    pub parties: BTreeMap<PartyId, Party>,
}

impl EnterpriseData {
    pub fn party(&self, id: &PartyId) -> Option<&Party> {
        self.profiles.get(id).map(|p| &p.party).or_else(|| self.parties.get(id))
    }

    pub fn registration(&self, id: &str) -> Option<&RegistrationRequest> {
        self.registrations.iter().find(|r| r.id == id)
    }
}

/// The enterprise store: one JSON document, replaced atomically on change.
pub struct EnterpriseStore {
    path: Option<PathBuf>,
    current: RwLock<Arc<EnterpriseData>>,
    writer: Mutex<()>,
}

impl EnterpriseStore {
    pub const FILE: &'static str = "enterprise.json";

    pub fn in_memory() -> Self {
        EnterpriseStore { path: None, current: RwLock::new(Arc::default()), writer: Mutex::new(()) }
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = root.into().join(Self::FILE);
        let data = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| StoreError::Format { path: path.clone(), message: e.to_string() })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => EnterpriseData::default(),
            Err(e) => return Err(StoreError::Io { path, source: e }.into()),
        };
        Ok(EnterpriseStore { path: Some(path), current: RwLock::new(Arc::new(data)), writer: Mutex::new(()) })
    }

    pub fn snapshot(&self) -> Arc<EnterpriseData> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn update<T>(&self, f: impl FnOnce(&mut EnterpriseData) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut draft = (*self.snapshot()).clone();
        let value = f(&mut draft)?;
        if let Some(path) = &self.path {
            write_atomic(path, &serde_json::to_vec_pretty(&draft).expect("enterprise data serializes"))?;
        }
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(draft);
        Ok(value)
    }
}
