//! Application layer shared by both portals: authentication, authorization,
//! enterprise data and the dossier operations behind every endpoint.

mod auth;
mod config;
mod enterprise;

pub use auth::{Credential, HmacSso, Origin, PasswordHash, Session, SsoVerifier, TokenError};
pub use config::Config;
pub use enterprise::{
    Account, EnterpriseData, EnterpriseStore, RegistrationForm, RegistrationRequest, RegistrationStatus,
};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use chrono::{Duration, NaiveDate};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::evaluation::{EvaluationError, EvaluationReport, Outcome, ReportBody, ReportKind, ReportOp};
use crate::export::{
    export_dossier_view, registry_extract, render_archival, ExportView, HmacSigner, Signer, Vocabularies, Vocabulary,
    VocabularyEntry, VocabularyError,
};
use crate::intake::{self, render_form_text, IntakeError};
use crate::lifecycle::{
    allowed_actions, is_action_permitted, Actor, CivState, EvaluationStatus, EventKind, LifecycleError, LifecycleEvent,
};
use crate::model::{
    AssociationKind, Catalogs, Communication, CommunicationId, Delegation, Document, DocumentId, Dossier, FormData,
    ModelError, Notification, Party, PartyId, PartyKind, Profile, Role, SaeKind, SaeReport, ValidationReport,
};
use crate::search::{self, OverdueRequest, Query, ResultRow, SearchContext, SearchError, SummaryStats};
use crate::store::{
    self, open_requests, timeline, CommunicationDraft, DocumentUpload, Repository, RepositoryConfig, StoreError,
    TimelineEntry, TimelineOptions,
};
use crate::time::{Clock, SystemClock, Timestamp};

/// Coarse error category, mapped to transport status codes by hosts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Unauthenticated,
    Forbidden,
    NotFound,
    Conflict,
    Invalid,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("authentication failed: {0}")]
    Unauthenticated(String),
    #[error("session expired")]
    Expired,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("submission is incomplete or inconsistent")]
    Incomplete(ValidationReport),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

impl ServiceError {
    pub fn kind(&self) -> ErrorKind {
        use ServiceError as S;
        match self {
            S::Unauthenticated(_) | S::Expired => ErrorKind::Unauthenticated,
            S::Forbidden(_) => ErrorKind::Forbidden,
            S::NotFound(_) => ErrorKind::NotFound,
            S::Conflict(_) => ErrorKind::Conflict,
            S::Invalid(_) | S::Incomplete(_) | S::Search(_) => ErrorKind::Invalid,
            S::Config(_) => ErrorKind::Internal,
            S::Model(ModelError::Sealed) => ErrorKind::Conflict,
            S::Model(_) => ErrorKind::Invalid,
            S::Lifecycle(LifecycleError::GuardViolation { .. } | LifecycleError::TerminalState { .. }) => {
                ErrorKind::Forbidden
            }
            S::Lifecycle(LifecycleError::OutOfOrder { .. }) => ErrorKind::Conflict,
            S::Lifecycle(_) => ErrorKind::Invalid,
            S::Store(e) => match e {
                StoreError::Io { .. } | StoreError::Format { .. } | StoreError::CorruptBlob(_) => ErrorKind::Internal,
                StoreError::UnknownBlob(_)
                | StoreError::UnknownDocument(_)
                | StoreError::UnknownDossier(_)
                | StoreError::UnknownRequest(_) => ErrorKind::NotFound,
                StoreError::GuardViolation(_) => ErrorKind::Forbidden,
                StoreError::DuplicateDossier(_) | StoreError::AlreadyAnswered(_) | StoreError::Locked(_) => {
                    ErrorKind::Conflict
                }
                StoreError::Lifecycle(l) => S::Lifecycle(l.clone()).kind(),
                StoreError::Model(ModelError::Sealed) => ErrorKind::Conflict,
                _ => ErrorKind::Invalid,
            },
        }
    }
}

impl From<IntakeError> for ServiceError {
    fn from(e: IntakeError) -> Self {
        match e {
            IntakeError::IncompleteSubmission(report) => ServiceError::Incomplete(report),
            IntakeError::NotAuthorized(m) => ServiceError::Forbidden(m),
            IntakeError::AlreadySubmitted => ServiceError::Conflict(e.to_string()),
            IntakeError::UnknownDocumentType(_) => ServiceError::Invalid(e.to_string()),
        }
    }
}

impl From<EvaluationError> for ServiceError {
    fn from(e: EvaluationError) -> Self {
        use EvaluationError as E;
        let text = e.to_string();
        match e {
            E::WrongState(_) | E::DuplicateAssignment | E::StaleRevision { .. } | E::ReportsNotShared => {
                ServiceError::Conflict(text)
            }
            E::NotDistinct | E::RoleMismatch { .. } => ServiceError::Invalid(text),
            E::NotAuthorized(_) | E::NotOwner(_) | E::AccessDenied(_) | E::NotSupervisor => {
                ServiceError::Forbidden(text)
            }
            E::NoSuchReport(_) => ServiceError::NotFound(text),
        }
    }
}

impl From<VocabularyError> for ServiceError {
    fn from(e: VocabularyError) -> Self {
        match e {
            VocabularyError::UnknownScheme(_) => ServiceError::NotFound(e.to_string()),
            VocabularyError::Parse { .. } => ServiceError::Config(e.to_string()),
        }
    }
}

/// What a caller wants to touch, for [`Medis::authorize`].
#[derive(Debug, Clone, Copy)]
pub enum Resource<'a> {
    Registrations,
    Dossier(&'a Dossier),
    Report(&'a Dossier, ReportKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Read,
    Write,
    Trigger(EventKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub allowed: bool,
    pub reason: String,
}

impl Decision {
    fn allow(reason: impl Into<String>) -> Self {
        Decision { allowed: true, reason: reason.into() }
    }

    fn deny(reason: impl Into<String>) -> Self {
        Decision { allowed: false, reason: reason.into() }
    }

    fn require(self) -> Result<(), ServiceError> {
        if self.allowed {
            Ok(())
        } else {
            Err(ServiceError::Forbidden(self.reason))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftRequest {
    pub role: Role,
    /// Delegating manufacturer when filing as a representative.
    #[serde(default)]
    pub manufacturer: Option<PartyId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamRequest {
    pub supervisor: PartyId,
    pub technical: PartyId,
    pub medical: PartyId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub outcome: Outcome,
    #[serde(default)]
    pub rationale: String,
    /// Subject of the outcome document; a standard subject otherwise.
    #[serde(default)]
    pub notice_subject: Option<String>,
}

/// A milestone, amendment, serious adverse event or final-report acceptance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvestigationReport {
    /// Milestone date; the current day when absent.
    pub date: Option<NaiveDate>,
    /// Adverse event number. Initial reports default to the next free one.
    pub sae: Option<u32>,
    pub narrative: String,
    pub documents: Vec<DocumentUpload>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Xml,
    Extract,
}

impl FromStr for ExportFormat {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xml" => Ok(ExportFormat::Xml),
            "extract" => Ok(ExportFormat::Extract),
            other => Err(ServiceError::Invalid(format!("unknown export format `{other}`"))),
        }
    }
}

/// A dossier as shown to one caller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DossierView {
    pub id: String,
    pub code: Option<String>,
    pub state: CivState,
    pub applicant: Party,
    pub applicant_role: Role,
    pub manufacturer: Party,
    pub form: FormData,
    pub attachments: Vec<DocumentId>,
    pub documents: Vec<Document>,
    pub communications: Vec<Communication>,
    pub expected_deadline: Option<NaiveDate>,
    pub allowed_actions: BTreeSet<EventKind>,
}

const STAFF: [Role; 4] = [Role::Supervisor, Role::TechnicalEvaluator, Role::MedicalEvaluator, Role::AdministrativeSecretary];

type IdempotencySlot = Arc<Mutex<Option<serde_json::Value>>>;

/// The application service. Cheap to share behind an `Arc`.
pub struct Medis {
    config: Config,
    repo: Repository,
    enterprise: EnterpriseStore,
    vocabularies: Vocabularies,
    signer: Box<dyn Signer>,
    sso: Box<dyn SsoVerifier>,
    issuer: HmacSso,
    clock: Arc<dyn Clock>,
    idempotency: Mutex<BTreeMap<(PartyId, String), IdempotencySlot>>,
}

impl Medis {
    pub fn open(config: Config) -> Result<Self, ServiceError> {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    pub fn with_clock(config: Config, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let catalogs = match &config.catalogs_dir {
            None => Catalogs::default(),
            Some(dir) => Catalogs::load(
                Some(&dir.join("document-types.tsv")),
                Some(&dir.join("communication-types.tsv")),
                Some(&dir.join("risk-classes.tsv")),
            )
            .map_err(|e| ServiceError::Config(e.to_string()))?,
        };
        let vocabularies = Vocabularies::bundled();
        if let Some(dir) = &config.vocabularies_dir {
            load_vocabularies(&vocabularies, dir)?;
        }
        let repo_config = RepositoryConfig {
            code_prefix: config.code_prefix.clone(),
            catalogs: Arc::new(catalogs),
            ..RepositoryConfig::default()
        };
        let (repo, enterprise) = match &config.data_dir {
            None => (Repository::in_memory(repo_config), EnterpriseStore::in_memory()),
            Some(dir) => (Repository::open(dir, repo_config)?, EnterpriseStore::open(dir)?),
        };
        Ok(Medis {
            signer: Box::new(HmacSigner::new(config.signer_key_id.clone(), config.signer_key.as_bytes())),
            sso: Box::new(HmacSso::new(config.sso_key.as_bytes())),
            issuer: HmacSso::new(config.sso_key.as_bytes()),
            config,
            repo,
            enterprise,
            vocabularies,
            clock,
            idempotency: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn repository(&self) -> &Repository {
        &self.repo
    }

    pub fn enterprise(&self) -> Arc<EnterpriseData> {
        self.enterprise.snapshot()
    }

    pub fn catalogs(&self) -> &Catalogs {
        self.repo.catalogs()
    }

    pub fn signer(&self) -> &dyn Signer {
        self.signer.as_ref()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    // ---- authentication -------------------------------------------------

    pub fn authenticate(&self, credential: &Credential) -> Result<Session, ServiceError> {
        let now = self.now();
        let ttl = Duration::hours(self.config.session_hours.max(1));
        let data = self.enterprise.snapshot();
        match credential {
            Credential::Basic { login, password } => {
                let account = data
                    .accounts
                    .get(login)
                    .filter(|a| a.password.matches(password))
                    .ok_or_else(|| ServiceError::Unauthenticated("invalid credential".into()))?;
                let roles = data.profiles.get(&account.party).map(|p| p.roles.clone()).unwrap_or_default();
                Ok(Session { party: account.party.clone(), roles, origin: Origin::Internal, expires_at: now + ttl })
            }
            Credential::Bearer(token) => {
                let (party, token_expiry) = self.sso.verify(token, now).map_err(|e| match e {
                    TokenError::Expired(_) => ServiceError::Expired,
                    other => ServiceError::Unauthenticated(other.to_string()),
                })?;
                let roles = data
                    .profiles
                    .get(&party)
                    .map(|p| p.roles.iter().copied().filter(|r| r.is_external()).collect())
                    .unwrap_or_default();
                Ok(Session { party, roles, origin: Origin::ExternalSso, expires_at: token_expiry.min(now + ttl) })
            }
        }
    }

    /// Token the stand-in portal would hand to `party`.
    pub fn issue_sso_token(&self, party: &PartyId, expires_at: Timestamp) -> String {
        self.issuer.issue(party, expires_at)
    }

    /// A session built straight from the enterprise store, for operator
    /// tooling that runs with local trust.
    pub fn session_for(&self, party: &PartyId) -> Result<Session, ServiceError> {
        let data = self.enterprise.snapshot();
        let profile = data.profiles.get(party).ok_or_else(|| ServiceError::NotFound(format!("party {party}")))?;
        let external = profile.party.kind == PartyKind::ApplicantOrganization;
        Ok(Session {
            party: party.clone(),
            roles: profile.roles.clone(),
            origin: if external { Origin::ExternalSso } else { Origin::Internal },
            expires_at: self.now() + Duration::hours(self.config.session_hours.max(1)),
        })
    }

    fn check_session(&self, session: &Session) -> Result<(), ServiceError> {
        if session.is_expired(self.now()) {
            return Err(ServiceError::Expired);
        }
        if session.is_external() && session.roles.iter().any(|r| !r.is_external()) {
            return Err(ServiceError::Forbidden("external sessions carry only applicant roles".into()));
        }
        Ok(())
    }

    // ---- enterprise data ------------------------------------------------

    /// Creates an authority staff account.
    pub fn add_staff(&self, party: Party, roles: BTreeSet<Role>, login: &str, password: &str) -> Result<Profile, ServiceError> {
        if party.kind != PartyKind::NcaUser || roles.iter().any(|r| r.is_external()) || roles.is_empty() {
            return Err(ServiceError::Invalid("staff accounts hold authority roles only".into()));
        }
        let profile = Profile::new(party, roles)?;
        self.enterprise.update(|data| {
            if data.accounts.contains_key(login) || data.profiles.contains_key(&profile.party.id) {
                return Err(ServiceError::Conflict(format!("account {login} already exists")));
            }
            let salt = crate::store::sha256_hex(format!("{login}|{}", profile.party.id).as_bytes());
            data.accounts.insert(
                login.to_owned(),
                Account { party: profile.party.id.clone(), password: PasswordHash::new(password, &salt[..16]) },
            );
            data.profiles.insert(profile.party.id.clone(), profile.clone());
            Ok(profile)
        })
    }

    pub fn register_applicant(&self, session: &Session, form: RegistrationForm) -> Result<RegistrationRequest, ServiceError> {
        self.check_session(session)?;
        if !session.is_external() || form.organization.id != session.party {
            return Err(ServiceError::Forbidden("organizations register themselves through the portal".into()));
        }
        form.validate()?;
        let now = self.now();
        self.enterprise.update(|data| {
            let open = data.registrations.iter().any(|r| {
                r.form.organization.id == form.organization.id && r.status != RegistrationStatus::Denied
            });
            if open {
                return Err(ServiceError::Conflict(format!("{} is already registered", form.organization.id)));
            }
            let request = RegistrationRequest {
                id: format!("reg-{}", data.registrations.len() + 1),
                form,
                status: RegistrationStatus::Pending,
                submitted_at: now,
                decided_at: None,
                decided_by: None,
            };
            data.registrations.push(request.clone());
            Ok(request)
        })
    }

    pub fn registrations(&self, session: &Session) -> Result<Vec<RegistrationRequest>, ServiceError> {
        self.authorize(session, Resource::Registrations, Action::Read).require()?;
        Ok(self.enterprise.snapshot().registrations.clone())
    }

    pub fn approve_registration(&self, session: &Session, id: &str) -> Result<Profile, ServiceError> {
        self.decide_registration(session, id, true)?.ok_or_else(|| ServiceError::Conflict("not granted".into()))
    }

    pub fn deny_registration(&self, session: &Session, id: &str) -> Result<(), ServiceError> {
        self.decide_registration(session, id, false).map(|_| ())
    }

    fn decide_registration(&self, session: &Session, id: &str, grant: bool) -> Result<Option<Profile>, ServiceError> {
        self.authorize(session, Resource::Registrations, Action::Write).require()?;
        let now = self.now();
        self.enterprise.update(|data| {
            let idx = data
                .registrations
                .iter()
                .position(|r| r.id == id)
                .ok_or_else(|| ServiceError::NotFound(format!("registration {id}")))?;
            let req = &mut data.registrations[idx];
            if req.status != RegistrationStatus::Pending {
                return Err(ServiceError::Conflict(format!("registration {id} is already decided")));
            }
            req.status = if grant { RegistrationStatus::Granted } else { RegistrationStatus::Denied };
            req.decided_at = Some(now);
            req.decided_by = Some(session.party.clone());
            if !grant {
                return Ok(None);
            }
            let form = req.form.clone();
            let mut roles = data.profiles.get(&form.organization.id).map(|p| p.roles.clone()).unwrap_or_default();
            roles.extend(form.requested_roles.iter().copied());
            let profile = Profile::new(form.organization.clone(), roles)?;
            data.profiles.insert(profile.party.id.clone(), profile.clone());
            if let Some(m) = form.delegating_manufacturer.filter(|_| form.requested_roles.contains(&Role::AuthorizedRepresentative)) {
                let to = form.delegation_valid_to.unwrap_or(NaiveDate::MAX);
                data.delegations.push(Delegation::new(m.id.clone(), form.organization.id.clone(), now.date_naive(), to)?);
                data.parties.entry(m.id.clone()).or_insert(m);
            }
            Ok(Some(profile))
        })
    }

    // ---- authorization --------------------------------------------------

    /// Combines session validity, ownership, the evaluation access matrix and
    /// lifecycle gating into one decision.
    pub fn authorize(&self, session: &Session, resource: Resource<'_>, action: Action) -> Decision {
        if let Err(e) = self.check_session(session) {
            return Decision::deny(e.to_string());
        }
        match resource {
            Resource::Registrations => {
                if session.holds(Role::AdministrativeSecretary) && !session.is_external() {
                    Decision::allow("administrative secretary")
                } else {
                    Decision::deny("registrations are handled by the administrative secretary")
                }
            }
            Resource::Dossier(d) => {
                if session.is_external() {
                    if !d.is_owned_by(&session.party) {
                        return Decision::deny("not owner");
                    }
                } else if !d.state().is_submitted() {
                    return Decision::deny("drafts are private to the applicant");
                }
                match action {
                    Action::Read | Action::Write => Decision::allow(if session.is_external() { "owner" } else { "staff" }),
                    Action::Trigger(kind) => {
                        let mut reason = format!("session holds no role for {kind}");
                        for &role in &session.roles {
                            let p = is_action_permitted(d.state(), role, kind);
                            if p.permitted {
                                return Decision::allow(format!("{role} may {kind}"));
                            }
                            reason = p.reason;
                        }
                        Decision::deny(reason)
                    }
                }
            }
            Resource::Report(d, kind) => {
                if session.is_external() {
                    return Decision::deny("applicants never access evaluation reports");
                }
                let op = if action == Action::Read { ReportOp::Read } else { ReportOp::Write };
                let mut reason = "session holds no evaluation role".to_owned();
                for &role in &session.roles {
                    let a = d.evaluation.report_access(kind, &Actor::new(session.party.clone(), role), op);
                    if a.allowed {
                        return Decision::allow(a.reason);
                    }
                    reason = a.reason;
                }
                Decision::deny(reason)
            }
        }
    }

    /// Runs `f` once per `(party, key)`; retries return the first result.
    pub fn idempotent<T, F>(&self, session: &Session, key: Option<&str>, f: F) -> Result<T, ServiceError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, ServiceError>,
    {
        let Some(key) = key.filter(|k| !k.is_empty()) else { return f() };
        let slot = Arc::clone(
            self.idempotency
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .entry((session.party.clone(), key.to_owned()))
                .or_default(),
        );
        let mut cached = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(v) = cached.as_ref() {
            return serde_json::from_value(v.clone())
                .map_err(|_| ServiceError::Conflict(format!("idempotency key {key} was used for another request")));
        }
        let value = f()?;
        *cached = Some(serde_json::to_value(&value).expect("results serialize"));
        Ok(value)
    }

    // ---- dossier access -------------------------------------------------

    fn find(&self, key: &str) -> Result<Arc<Dossier>, ServiceError> {
        self.repo.resolve(key).ok_or_else(|| ServiceError::NotFound(format!("dossier {key}")))
    }

    /// Looks a dossier up by protocol code or id and checks read access.
    /// Drafts are reported missing to staff.
    pub fn dossier(&self, session: &Session, key: &str) -> Result<Arc<Dossier>, ServiceError> {
        self.check_session(session)?;
        let d = self.find(key)?;
        if !session.is_external() && !d.state().is_submitted() {
            return Err(ServiceError::NotFound(format!("dossier {key}")));
        }
        self.authorize(session, Resource::Dossier(&d), Action::Read).require()?;
        Ok(d)
    }

    fn applicant_actor(&self, session: &Session, d: &Dossier) -> Result<Actor, ServiceError> {
        let n = &d.notification;
        let role = if session.party == n.applicant.id {
            n.applicant_role
        } else if session.party == n.manufacturer.id {
            Role::Manufacturer
        } else {
            return Err(ServiceError::Forbidden("not owner".into()));
        };
        session.actor(role).ok_or_else(|| ServiceError::Forbidden(format!("session does not hold role {role}")))
    }

    fn staff_actor(&self, session: &Session, preferred: &[Role]) -> Result<Actor, ServiceError> {
        if session.is_external() {
            return Err(ServiceError::Forbidden("authority staff only".into()));
        }
        session.actor_among(preferred).ok_or_else(|| {
            let names: Vec<&str> = preferred.iter().map(|r| r.as_str()).collect();
            ServiceError::Forbidden(format!("requires one of: {}", names.join(", ")))
        })
    }

    fn actor_for(&self, session: &Session, d: &Dossier) -> Result<Actor, ServiceError> {
        if session.is_external() {
            self.applicant_actor(session, d)
        } else {
            self.staff_actor(session, &STAFF)
        }
    }

    fn mutate<T>(
        &self,
        session: &Session,
        key: &str,
        f: impl FnOnce(&mut Dossier, store::StoreContext<'_>, Timestamp) -> Result<T, ServiceError>,
    ) -> Result<(T, Arc<Dossier>), ServiceError> {
        let d = self.dossier(session, key)?;
        self.authorize(session, Resource::Dossier(&d), Action::Write).require()?;
        let now = self.now();
        self.repo.update(&d.id, |d, ctx| f(d, ctx, now))
    }

    pub fn view(&self, session: &Session, key: &str) -> Result<DossierView, ServiceError> {
        let d = self.dossier(session, key)?;
        let staff = !session.is_external();
        let mut actions = BTreeSet::new();
        for &r in &session.roles {
            actions.extend(allowed_actions(d.state(), r));
        }
        Ok(DossierView {
            id: d.id.to_string(),
            code: d.code().map(ToString::to_string),
            state: d.state(),
            applicant: d.notification.applicant.clone(),
            applicant_role: d.notification.applicant_role,
            manufacturer: d.notification.manufacturer.clone(),
            form: d.notification.form().clone(),
            attachments: d.notification.documents().iter().map(|a| a.id.clone()).collect(),
            documents: d.documents.iter().filter(|x| staff || !x.internal).cloned().collect(),
            communications: d
                .communications
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    c.attachments.retain(|a| staff || !d.document(a).is_some_and(|x| x.internal));
                    c
                })
                .collect(),
            expected_deadline: d.expected_deadline,
            allowed_actions: actions,
        })
    }

    /// Drafts and submitted dossiers owned by an applicant session.
    pub fn own_dossiers(&self, session: &Session) -> Result<Vec<Arc<Dossier>>, ServiceError> {
        self.check_session(session)?;
        if !session.is_external() {
            return Err(ServiceError::Forbidden("applicants only".into()));
        }
        Ok(self.repo.all().into_iter().filter(|d| d.is_owned_by(&session.party)).collect())
    }

    pub fn document_content(&self, session: &Session, key: &str, doc: &DocumentId) -> Result<(Document, Vec<u8>), ServiceError> {
        let d = self.dossier(session, key)?;
        let document = d
            .document(doc)
            .filter(|x| !session.is_external() || !x.internal)
            .ok_or_else(|| ServiceError::NotFound(format!("document {doc}")))?
            .clone();
        let bytes = self.repo.blobs().get(&document.blob.digest)?;
        Ok((document, bytes))
    }

    // ---- intake ---------------------------------------------------------

    pub fn create_draft(&self, session: &Session, request: &DraftRequest) -> Result<Arc<Dossier>, ServiceError> {
        self.check_session(session)?;
        let actor = session
            .actor(request.role)
            .filter(|a| a.role.is_external() && session.is_external())
            .ok_or_else(|| {
                ServiceError::Forbidden(format!("{} has not been granted the {} role", session.party, request.role))
            })?;
        let data = self.enterprise.snapshot();
        let me = data
            .profiles
            .get(&session.party)
            .ok_or_else(|| ServiceError::Forbidden("organization is not registered".into()))?
            .party
            .clone();
        let manufacturer = match request.role {
            Role::Manufacturer => {
                if request.manufacturer.as_ref().is_some_and(|m| m != &me.id) {
                    return Err(ServiceError::Invalid("a manufacturer files for itself".into()));
                }
                me.clone()
            }
            _ => {
                let m = request
                    .manufacturer
                    .as_ref()
                    .ok_or_else(|| ServiceError::Invalid("representatives must name the manufacturer".into()))?;
                let today = self.now().date_naive();
                if !data.delegations.iter().any(|d| &d.delegator == m && d.delegate == me.id && d.covers(today)) {
                    return Err(ServiceError::Forbidden(format!("no delegation from {m}")));
                }
                data.party(m).cloned().ok_or_else(|| ServiceError::NotFound(format!("party {m}")))?
            }
        };
        let n = Notification::draft(me, request.role, manufacturer);
        Ok(self.repo.create(n, &actor, self.now())?)
    }

    pub fn set_form(&self, session: &Session, key: &str, form: FormData) -> Result<Arc<Dossier>, ServiceError> {
        let (_, d) = self.mutate(session, key, |d, _, _| {
            self.applicant_actor(session, d)?;
            Ok(d.notification.replace_form(form)?)
        })?;
        Ok(d)
    }

    /// Completeness and consistency of a draft, as submission would check them.
    pub fn check_draft(&self, session: &Session, key: &str) -> Result<ValidationReport, ServiceError> {
        let d = self.dossier(session, key)?;
        let catalogs = self.catalogs();
        Ok(intake::check_completeness(&d.notification, catalogs)?.merge(intake::check_consistency(&d.notification, catalogs)))
    }

    pub fn upload(&self, session: &Session, key: &str, upload: DocumentUpload) -> Result<Document, ServiceError> {
        let (doc, _) = self.mutate(session, key, |d, ctx, now| {
            let actor = self.actor_for(session, d)?;
            Ok(store::put_document(ctx, d, upload, &actor, now)?)
        })?;
        Ok(doc)
    }

    /// Seals the draft, issues its protocol code and files the notification
    /// document linking every attachment.
    pub fn submit(&self, session: &Session, key: &str) -> Result<Arc<Dossier>, ServiceError> {
        let delegations = self.enterprise.snapshot().delegations.clone();
        let codes = self.repo.codes();
        let (_, d) = self.mutate(session, key, |d, ctx, now| {
            let actor = self.applicant_actor(session, d)?;
            let sub = intake::submit(&mut d.notification, &actor, &delegations, ctx.catalogs, codes, now)?;
            let code = sub.code.clone();
            let filed = (|| {
                d.lifecycle.apply(sub.event)?;
                d.civ = Some(sub.civ);
                let mut up = DocumentUpload::new("notification-form", code.to_string(), render_form_text(d.notification.form()))
                    .with_media_type("text/plain");
                for a in d.notification.documents() {
                    up = up.associate(AssociationKind::Attaches, a.id.clone());
                }
                store::put_system_document(ctx, d, up, &actor, now)?;
                Ok::<_, ServiceError>(())
            })();
            if filed.is_err() {
                codes.release(&code);
            }
            filed
        })?;
        Ok(d)
    }

    // ---- evaluation -----------------------------------------------------

    pub fn assign_team(&self, session: &Session, key: &str, team: &TeamRequest) -> Result<Arc<Dossier>, ServiceError> {
        let data = self.enterprise.snapshot();
        let profile = |id: &PartyId| data.profiles.get(id).ok_or_else(|| ServiceError::NotFound(format!("party {id}")));
        let (s, t, m) = (profile(&team.supervisor)?, profile(&team.technical)?, profile(&team.medical)?);
        let (_, d) = self.mutate(session, key, |d, _, now| {
            let actor = self.staff_actor(session, &[Role::AdministrativeSecretary, Role::Supervisor])?;
            let event = d.evaluation.assign_team(d.state(), s, t, m, &actor, now)?;
            d.lifecycle.apply(event)?;
            Ok(())
        })?;
        Ok(d)
    }

    pub fn save_report(
        &self,
        session: &Session,
        key: &str,
        kind: ReportKind,
        body: ReportBody,
        expected_revision: Option<u32>,
    ) -> Result<u32, ServiceError> {
        let (rev, _) = self.mutate(session, key, |d, _, now| {
            self.authorize(session, Resource::Report(d, kind), Action::Write).require()?;
            let actor = self.staff_actor(session, &[kind.author_role()])?;
            Ok(d.evaluation.save_report(d.state(), kind, body, &actor, expected_revision, now)?)
        })?;
        Ok(rev)
    }

    pub fn share_report(&self, session: &Session, key: &str, kind: ReportKind) -> Result<EvaluationReport, ServiceError> {
        let (report, _) = self.mutate(session, key, |d, _, _| {
            let actor = self.staff_actor(session, &[kind.author_role()])?;
            Ok(d.evaluation.share_report(kind, &actor)?.clone())
        })?;
        Ok(report)
    }

    pub fn read_report(&self, session: &Session, key: &str, kind: ReportKind) -> Result<EvaluationReport, ServiceError> {
        let d = self.dossier(session, key)?;
        self.authorize(session, Resource::Report(&d, kind), Action::Read).require()?;
        d.evaluation
            .reports
            .get(&kind)
            .cloned()
            .ok_or_else(|| EvaluationError::NoSuchReport(kind).into())
    }

    /// Final decision: applies approve or deny, files the signed outcome
    /// document and sends the official notice.
    pub fn decide(&self, session: &Session, key: &str, request: &DecisionRequest) -> Result<Arc<Dossier>, ServiceError> {
        let (_, d) = self.mutate(session, key, |d, ctx, now| {
            let actor = self.staff_actor(session, &[Role::Supervisor])?;
            let (decision, event, notice) =
                d.evaluation.decide(d.state(), request.outcome, request.rationale.clone(), &actor, now)?;
            let subject = request.notice_subject.clone().unwrap_or(notice.subject);
            let form: FormData = [
                ("code", d.display_code()),
                ("decision", decision.outcome.as_str().to_owned()),
                ("date", now.date_naive().to_string()),
                ("decided-by", decision.decided_by.to_string()),
                ("rationale", decision.rationale.clone()),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect();
            let archival = render_archival(&subject, &form, self.signer.as_ref())
                .map_err(|e| ServiceError::Config(e.to_string()))?;
            d.lifecycle.apply(
                event
                    .with("signature", archival.signature.value.clone())
                    .with("signature-key", archival.signature.key_id.clone()),
            )?;
            store::put_system_document(
                ctx,
                d,
                DocumentUpload::new("evaluation-outcome", subject.clone(), archival.bytes).with_media_type("text/plain"),
                &actor,
                now,
            )?;
            store::send_system_communication(
                ctx,
                d,
                CommunicationDraft::new("evaluation-outcome", subject).body(notice.body),
                &actor,
                now,
            )?;
            Ok(())
        })?;
        Ok(d)
    }

    /// Moves the evaluation toward denial and asks the applicant to respond.
    pub fn mark_oriented_denial(&self, session: &Session, key: &str, request: CommunicationDraft) -> Result<Communication, ServiceError> {
        let (c, _) = self.mutate(session, key, |d, ctx, now| {
            let actor = self.staff_actor(session, &[Role::Supervisor])?;
            d.lifecycle.apply(LifecycleEvent::new(EventKind::MarkOrientedDenial, actor.clone(), now))?;
            let draft = CommunicationDraft { comm_type: "info-request".into(), ..request };
            Ok(store::open_communication(ctx, d, draft, &actor, now)?)
        })?;
        Ok(c)
    }

    // ---- communications -------------------------------------------------

    /// Opens a communication. A request sent during evaluation also moves
    /// the dossier to `evaluation:info-requested`.
    pub fn open_communication(&self, session: &Session, key: &str, draft: CommunicationDraft) -> Result<Communication, ServiceError> {
        let (c, _) = self.mutate(session, key, |d, ctx, now| {
            let actor = self.actor_for(session, d)?;
            let is_request = ctx.catalogs.communication_type(&draft.comm_type).is_some_and(|t| t.request);
            let in_evaluation = matches!(d.state(), CivState::Evaluation(_));
            let c = store::open_communication(ctx, d, draft, &actor, now)?;
            if is_request && in_evaluation {
                d.lifecycle.apply(LifecycleEvent::new(EventKind::RequestInfo, actor, now).with("request", c.id.as_str()))?;
            }
            Ok(c)
        })?;
        Ok(c)
    }

    fn dossier_of_communication(&self, id: &CommunicationId) -> Result<Arc<Dossier>, ServiceError> {
        self.repo
            .all()
            .into_iter()
            .find(|d| d.communication(id).is_some())
            .ok_or_else(|| ServiceError::NotFound(format!("communication {id}")))
    }

    /// Answers a request. Once no evaluation request is left open the
    /// dossier returns to `evaluation:in-progress`.
    pub fn reply(&self, session: &Session, request: &CommunicationId, draft: CommunicationDraft) -> Result<Communication, ServiceError> {
        let owner = self.dossier_of_communication(request)?;
        let (c, _) = self.mutate(session, owner.id.as_str(), |d, ctx, now| {
            let actor = self.actor_for(session, d)?;
            let c = store::reply(ctx, d, request, draft, &actor, now)?;
            let waiting = matches!(
                d.state(),
                CivState::Evaluation(EvaluationStatus::InfoRequested | EvaluationStatus::OrientedTowardDenial)
            );
            if waiting && actor.role.is_external() && open_requests(d).is_empty() {
                d.lifecycle.apply(LifecycleEvent::new(EventKind::ProvideInfo, actor, now).with("reply", c.id.as_str()))?;
            }
            Ok(c)
        })?;
        Ok(c)
    }

    // ---- investigation --------------------------------------------------

    /// Milestones, amendments, adverse events and final-report acceptance.
    /// Documents are filed under the state the event leaves.
    pub fn report_event(&self, session: &Session, key: &str, kind: EventKind, report: InvestigationReport) -> Result<Arc<Dossier>, ServiceError> {
        use EventKind as K;
        if !matches!(
            kind,
            K::ReportStart
                | K::ReportEnd
                | K::ReportEarlyTermination
                | K::SubmitAmendment
                | K::ReportSaeInitial
                | K::ReportSaeFinal
                | K::AcceptFinalReport
        ) {
            return Err(ServiceError::Invalid(format!("{kind} is not an investigation event")));
        }
        let (_, d) = self.mutate(session, key, |d, ctx, now| {
            let actor = if kind == K::AcceptFinalReport {
                self.staff_actor(session, &[Role::Supervisor])?
            } else {
                self.applicant_actor(session, d)?
            };
            let p = is_action_permitted(d.state(), actor.role, kind);
            if !p.permitted {
                return Err(LifecycleError::GuardViolation { state: d.state(), role: actor.role, kind, reason: p.reason }.into());
            }
            let date = report.date.unwrap_or_else(|| now.date_naive());
            let mut event = LifecycleEvent::new(kind, actor.clone(), now);
            let civ = d.civ.as_mut().ok_or_else(|| ServiceError::Conflict("dossier has no investigation data".into()))?;
            let mut milestones = civ.milestones.clone();
            match kind {
                K::ReportStart => milestones.start = Some(date),
                K::ReportEnd => milestones.end = Some(date),
                K::ReportEarlyTermination => milestones.early_termination = Some(date),
                K::ReportSaeInitial | K::ReportSaeFinal => {
                    let (sae_kind, seq) = if kind == K::ReportSaeInitial {
                        let next = civ.sae_reports.iter().map(|r| r.seq).max().unwrap_or(0) + 1;
                        (SaeKind::Initial, report.sae.unwrap_or(next))
                    } else {
                        let seq = report.sae.ok_or_else(|| ServiceError::Invalid("final report must name its event".into()))?;
                        (SaeKind::Final, seq)
                    };
                    civ.add_sae(SaeReport {
                        seq,
                        kind: sae_kind,
                        reported_at: now,
                        narrative: report.narrative.clone(),
                        final_for: (sae_kind == SaeKind::Final).then_some(seq),
                    })?;
                    event = event.with("sae", seq.to_string());
                }
                _ => {}
            }
            if matches!(kind, K::ReportStart | K::ReportEnd | K::ReportEarlyTermination) {
                civ.record_milestones(milestones)?;
                event = event.with("date", date.to_string());
            }
            let mut uploads = report.documents;
            if kind == K::SubmitAmendment {
                uploads.sort_by_key(|u| u.doc_type != "amendment-list");
            }
            let mut list: Option<DocumentId> = None;
            for mut up in uploads {
                if up.doc_type == "clinical-protocol" {
                    if let Some(l) = &list {
                        up = up.associate(AssociationKind::ListsAmendments, l.clone());
                    }
                }
                let doc = store::put_document(ctx, d, up, &actor, now)?;
                if doc.doc_type == "amendment-list" {
                    list = Some(doc.id.clone());
                }
                event = event.with("document", doc.id.as_str());
            }
            d.lifecycle.apply(event)?;
            Ok(())
        })?;
        Ok(d)
    }

    pub fn set_deadline(&self, session: &Session, key: &str, deadline: Option<NaiveDate>) -> Result<Arc<Dossier>, ServiceError> {
        let (_, d) = self.mutate(session, key, |d, _, _| {
            self.staff_actor(session, &[Role::AdministrativeSecretary, Role::Supervisor])?;
            d.expected_deadline = deadline;
            Ok(())
        })?;
        Ok(d)
    }

    // ---- monitoring -----------------------------------------------------

    pub fn timeline(&self, session: &Session, key: &str, mut opts: TimelineOptions) -> Result<Vec<TimelineEntry>, ServiceError> {
        let d = self.dossier(session, key)?;
        if session.is_external() {
            opts.include_internal = false;
        }
        Ok(timeline(&d, &opts))
    }

    pub fn open_requests(&self, session: &Session, key: &str) -> Result<Vec<Communication>, ServiceError> {
        let d = self.dossier(session, key)?;
        Ok(open_requests(&d).into_iter().cloned().collect())
    }

    fn viewer(&self, session: &Session) -> Result<Actor, ServiceError> {
        self.check_session(session)?;
        let role = session.roles.iter().next().copied().ok_or_else(|| ServiceError::Forbidden("no granted role".into()))?;
        Ok(Actor::new(session.party.clone(), role))
    }

    fn search_context<'a>(&'a self, anatomy: &'a Option<Arc<Vocabulary>>) -> SearchContext<'a> {
        SearchContext { catalogs: self.catalogs(), anatomy: anatomy.as_deref() }
    }

    pub fn search(&self, session: &Session, query: &Query) -> Result<Vec<ResultRow>, ServiceError> {
        let viewer = self.viewer(session)?;
        let anatomy = self.vocabularies.get("anatomy");
        let all = self.repo.all();
        Ok(search::search(&self.search_context(&anatomy), all.iter().map(|d| d.as_ref()), &viewer, query)?)
    }

    pub fn stats(&self, session: &Session, query: &Query) -> Result<SummaryStats, ServiceError> {
        let viewer = self.viewer(session)?;
        let anatomy = self.vocabularies.get("anatomy");
        let all = self.repo.all();
        Ok(search::summary_stats(&self.search_context(&anatomy), all.iter().map(|d| d.as_ref()), &viewer, query)?)
    }

    pub fn overdue(&self, session: &Session, max_age: Duration) -> Result<Vec<OverdueRequest>, ServiceError> {
        let viewer = self.viewer(session)?;
        if session.is_external() {
            return Err(ServiceError::Forbidden("monitoring is reserved to authority staff".into()));
        }
        let all = self.repo.all();
        Ok(search::overdue_requests(all.iter().map(|d| d.as_ref()), &viewer, max_age, self.now()))
    }

    pub fn lookup_vocabulary(&self, session: &Session, scheme: &str, needle: &str, limit: usize) -> Result<Vec<VocabularyEntry>, ServiceError> {
        self.check_session(session)?;
        Ok(self.vocabularies.lookup(scheme, needle, limit)?)
    }

    // ---- export ---------------------------------------------------------

    /// Canonical export. Applicants receive the redacted view.
    pub fn export(&self, session: &Session, key: &str, format: ExportFormat) -> Result<String, ServiceError> {
        let d = self.dossier(session, key)?;
        let view = if session.is_external() { ExportView::Applicant } else { ExportView::Full };
        export_bytes(&d, format, view)
    }
}

/// Export rendering shared by the service and operator tooling.
pub fn export_bytes(d: &Dossier, format: ExportFormat, view: ExportView) -> Result<String, ServiceError> {
    match format {
        ExportFormat::Xml => Ok(export_dossier_view(d, view)),
        ExportFormat::Extract => registry_extract(d)
            .map(|x| x.to_tsv())
            .map_err(|e| ServiceError::Conflict(e.to_string())),
    }
}

fn load_vocabularies(into: &Vocabularies, dir: &Path) -> Result<(), ServiceError> {
    let entries = std::fs::read_dir(dir).map_err(|e| ServiceError::Config(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries.flatten().map(|e| e.path()).filter(|p| p.extension().is_some_and(|x| x == "tsv")).collect();
    paths.sort();
    for path in paths {
        let scheme = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        let text = std::fs::read_to_string(&path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        into.install(Vocabulary::parse(&scheme, &text)?);
    }
    Ok(())
}
