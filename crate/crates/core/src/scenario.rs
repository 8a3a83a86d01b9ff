//! Line-oriented lifecycle scripts, replayed against the service.
//!
//! One step per line: `actor<TAB>kind<TAB>payload<TAB>timestamp`, where the
//! payload is URL-encoded `key=value` pairs. Blank lines and lines starting
//! with `#` are ignored. Timestamps must not decrease.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::Duration;

use crate::evaluation::{Outcome, ReportBody, ReportKind};
use crate::lifecycle::EventKind;
use crate::model::{CommunicationId, Dossier, DossierId, FormData, Party, PartyId, PartyKind, Role};
use crate::service::{
    DecisionRequest, DraftRequest, InvestigationReport, Medis, Origin, RegistrationForm, RegistrationStatus,
    ServiceError, Session, TeamRequest,
};
use crate::store::{CommunicationDraft, DocumentUpload};
use crate::time::{format_timestamp, parse_date, parse_timestamp, ManualClock, Timestamp};

/// Actor name for steps that need no session.
pub const OPERATOR: &str = "operator";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ScriptError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    pub actor: String,
    pub kind: String,
    pub payload: Vec<(String, String)>,
    pub at: Timestamp,
}

impl Step {
    fn get(&self, key: &str) -> Option<&str> {
        self.payload.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn req(&self, key: &str) -> Result<&str, String> {
        self.get(key).ok_or_else(|| format!("{} needs `{key}`", self.kind))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    pub steps: Vec<Step>,
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut steps: Vec<Step> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScriptError { line, message };
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 tab-separated fields, found {}", cols.len())));
            }
            let at = parse_timestamp(cols[3]).ok_or_else(|| err(format!("bad timestamp `{}`", cols[3])))?;
            if let Some(prev) = steps.last() {
                if at < prev.at {
                    return Err(err(format!("timestamp {} precedes line {}", cols[3], prev.line)));
                }
            }
            let (actor, kind) = (cols[0].trim(), cols[1].trim());
            if actor.is_empty() || kind.is_empty() {
                return Err(err("actor and kind must not be empty".into()));
            }
            let payload = form_urlencoded::parse(cols[2].trim().as_bytes()).into_owned().collect();
            steps.push(Step { line, actor: actor.to_owned(), kind: kind.to_owned(), payload, at });
        }
        Ok(Script { steps })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let payload = form_urlencoded::Serializer::new(String::new()).extend_pairs(&s.payload).finish();
            let _ = writeln!(out, "{}\t{}\t{}\t{}", s.actor, s.kind, payload, format_timestamp(&s.at));
        }
        out
    }

    pub fn push(&mut self, actor: &str, kind: &str, payload: &[(&str, &str)], at: Timestamp) {
        self.steps.push(Step {
            line: self.steps.len() + 1,
            actor: actor.to_owned(),
            kind: kind.to_owned(),
            payload: payload.iter().map(|(k, v)| ((*k).to_owned(), (*v).to_owned())).collect(),
            at,
        });
    }

    /// Stable merge by timestamp; renumbers lines.
    pub fn sort(&mut self) {
        self.steps.sort_by_key(|s| s.at);
        for (i, s) in self.steps.iter_mut().enumerate() {
            s.line = i + 1;
        }
    }
}

/// Dossiers created by a run, by script alias.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunReport {
    pub aliases: BTreeMap<String, DossierId>,
    pub last: Option<DossierId>,
    pub steps: usize,
}

struct Runner<'a> {
    medis: &'a Medis,
    report: RunReport,
}

fn uploads(step: &Step, prefix: &str) -> Vec<DocumentUpload> {
    let mut by_index: BTreeMap<u32, BTreeMap<&str, &str>> = BTreeMap::new();
    for (k, v) in &step.payload {
        let Some(rest) = k.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) else { continue };
        let Some((n, field)) = rest.split_once('.') else { continue };
        if let Ok(n) = n.parse() {
            by_index.entry(n).or_default().insert(field, v);
        }
    }
    by_index
        .into_values()
        .map(|f| {
            let label = f.get("label").copied().unwrap_or("document.pdf");
            let up = DocumentUpload::new(f.get("type").copied().unwrap_or_default(), label, f.get("content").copied().unwrap_or(label));
            match f.get("media-type") {
                Some(m) => up.with_media_type(*m),
                None => up,
            }
        })
        .collect()
}

fn parse<T: FromStr>(what: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid {what} `{v}`"))
}

fn party_from(step: &Step, prefix: &str, id: &str) -> Result<Party, String> {
    let key = |k: &str| if prefix.is_empty() { k.to_owned() } else { format!("{prefix}.{k}") };
    Party::new(
        id,
        PartyKind::ApplicantOrganization,
        step.get(&key("name")).unwrap_or(id),
        step.get(&key("contact")).unwrap_or_default(),
        step.get(&key("country")).unwrap_or("IT"),
    )
    .map_err(|e| e.to_string())
}

impl Runner<'_> {
    fn session(&self, step: &Step) -> Result<Session, String> {
        self.medis.session_for(&PartyId::from(step.actor.as_str())).map_err(|e| e.to_string())
    }

    fn dossier(&self, step: &Step) -> Result<String, String> {
        match step.get("dossier") {
            Some(key) => Ok(self.report.aliases.get(key).map_or_else(|| key.to_owned(), |id| id.to_string())),
            None => self.report.last.as_ref().map(ToString::to_string).ok_or_else(|| "no dossier in scope".to_owned()),
        }
    }

    fn touch(&mut self, d: &Dossier) {
        self.report.last = Some(d.id.clone());
    }

    fn communication(step: &Step, default_type: &str) -> CommunicationDraft {
        let mut draft = CommunicationDraft::new(step.get("type").unwrap_or(default_type), step.get("subject").unwrap_or_default())
            .body(step.get("body").unwrap_or_default());
        draft.attachments = uploads(step, "attach");
        draft
    }

    fn run(&mut self, step: &Step) -> Result<(), String> {
        let m = self.medis;
        let e = |e: ServiceError| match e {
            ServiceError::Incomplete(r) => {
                let mut text = String::from("submission rejected");
                for t in &r.missing {
                    let _ = write!(text, "; missing {t}");
                }
                for v in &r.violations {
                    let _ = write!(text, "; {}: {}", v.rule, v.message);
                }
                text
            }
            other => other.to_string(),
        };
        match step.kind.as_str() {
            "add-staff" => {
                let id = step.req("id")?;
                let roles = step
                    .req("roles")?
                    .split(',')
                    .map(|r| parse::<Role>("role", r.trim()))
                    .collect::<Result<_, _>>()?;
                let party = Party::new(id, PartyKind::NcaUser, step.get("name").unwrap_or(id), step.get("contact").unwrap_or_default(), step.get("country").unwrap_or("IT"))
                    .map_err(|e| e.to_string())?;
                m.add_staff(party, roles, step.get("login").unwrap_or(id), step.get("password").unwrap_or(id)).map_err(e)?;
            }
            "register-applicant" => {
                let session = Session {
                    party: PartyId::from(step.actor.as_str()),
                    roles: Default::default(),
                    origin: Origin::ExternalSso,
                    expires_at: step.at + Duration::hours(1),
                };
                let roles = step
                    .get("roles")
                    .unwrap_or("manufacturer")
                    .split(',')
                    .map(|r| parse::<Role>("role", r.trim()))
                    .collect::<Result<_, _>>()?;
                let delegating = match step.get("manufacturer.id") {
                    Some(id) => Some(party_from(step, "manufacturer", id)?),
                    None => None,
                };
                let form = RegistrationForm {
                    organization: party_from(step, "", &step.actor)?,
                    requested_roles: roles,
                    delegating_manufacturer: delegating,
                    delegation_valid_to: step.get("valid-to").map(|d| parse_date(d).ok_or(format!("bad date `{d}`"))).transpose()?,
                };
                m.register_applicant(&session, form).map_err(e)?;
            }
            "grant-access" | "deny-registration" => {
                let session = self.session(step)?;
                let id = match (step.get("registration"), step.get("organization")) {
                    (Some(id), _) => id.to_owned(),
                    (None, Some(org)) => m
                        .registrations(&session)
                        .map_err(e)?
                        .into_iter()
                        .find(|r| r.form.organization.id.as_str() == org && r.status == RegistrationStatus::Pending)
                        .map(|r| r.id)
                        .ok_or_else(|| format!("no pending registration for {org}"))?,
                    _ => return Err("grant-access needs `registration` or `organization`".into()),
                };
                if step.kind == "grant-access" {
                    m.approve_registration(&session, &id).map_err(e)?;
                } else {
                    m.deny_registration(&session, &id).map_err(e)?;
                }
            }
            "initialize-notification" => {
                let session = self.session(step)?;
                let request = DraftRequest {
                    role: parse("role", step.get("role").unwrap_or("manufacturer"))?,
                    manufacturer: step.get("manufacturer").map(PartyId::from),
                };
                let d = m.create_draft(&session, &request).map_err(e)?;
                if let Some(alias) = step.get("as") {
                    self.report.aliases.insert(alias.to_owned(), d.id.clone());
                }
                self.touch(&d);
            }
            "set-form" => {
                let key = self.dossier(step)?;
                let form: FormData = step.payload.iter().filter(|(k, _)| k != "dossier").cloned().collect();
                let d = m.set_form(&self.session(step)?, &key, form).map_err(e)?;
                self.touch(&d);
            }
            "upload" => {
                let key = self.dossier(step)?;
                let session = self.session(step)?;
                for up in uploads(step, "doc") {
                    m.upload(&session, &key, up).map_err(e)?;
                }
            }
            "submit-notification" => {
                let key = self.dossier(step)?;
                let d = m.submit(&self.session(step)?, &key).map_err(e)?;
                self.touch(&d);
            }
            "assign-team" => {
                let key = self.dossier(step)?;
                let team = TeamRequest {
                    supervisor: step.req("supervisor")?.into(),
                    technical: step.req("technical")?.into(),
                    medical: step.req("medical")?.into(),
                };
                m.assign_team(&self.session(step)?, &key, &team).map_err(e)?;
            }
            "save-report" => {
                let key = self.dossier(step)?;
                let kind: ReportKind = parse("report kind", step.req("kind")?)?;
                let body = ReportBody {
                    device_characteristics: step.get("device-characteristics").unwrap_or_default().to_owned(),
                    risk_analysis: step.get("risk-analysis").unwrap_or_default().to_owned(),
                    patient_safety: step.get("patient-safety").unwrap_or_default().to_owned(),
                };
                let revision = step.get("revision").map(|r| parse("revision", r)).transpose()?;
                m.save_report(&self.session(step)?, &key, kind, body, revision).map_err(e)?;
            }
            "share-report" => {
                let key = self.dossier(step)?;
                m.share_report(&self.session(step)?, &key, parse("report kind", step.req("kind")?)?).map_err(e)?;
            }
            "approve" | "deny" => {
                let key = self.dossier(step)?;
                let request = DecisionRequest {
                    outcome: if step.kind == "approve" { Outcome::Approve } else { Outcome::Deny },
                    rationale: step.get("rationale").unwrap_or_default().to_owned(),
                    notice_subject: step.get("subject").map(str::to_owned),
                };
                m.decide(&self.session(step)?, &key, &request).map_err(e)?;
            }
            "mark-oriented-denial" => {
                let key = self.dossier(step)?;
                m.mark_oriented_denial(&self.session(step)?, &key, Self::communication(step, "info-request")).map_err(e)?;
            }
            "request-info" | "communicate" => {
                let key = self.dossier(step)?;
                let default = if step.kind == "request-info" { "info-request" } else { "" };
                m.open_communication(&self.session(step)?, &key, Self::communication(step, default)).map_err(e)?;
            }
            "provide-info" | "reply" => {
                let key = self.dossier(step)?;
                let session = self.session(step)?;
                let wanted = step.req("request")?;
                let request = if wanted.starts_with("com-") {
                    CommunicationId::from(wanted)
                } else {
                    m.open_requests(&session, &key)
                        .map_err(e)?
                        .into_iter()
                        .find(|c| c.subject == wanted)
                        .map(|c| c.id)
                        .ok_or_else(|| format!("no open request `{wanted}`"))?
                };
                m.reply(&session, &request, Self::communication(step, "")).map_err(e)?;
            }
            "set-deadline" => {
                let key = self.dossier(step)?;
                let date = step.get("date").filter(|d| !d.is_empty()).map(|d| parse_date(d).ok_or(format!("bad date `{d}`"))).transpose()?;
                m.set_deadline(&self.session(step)?, &key, date).map_err(e)?;
            }
            other => {
                let kind: EventKind = parse("step kind", other)?;
                let key = self.dossier(step)?;
                let report = InvestigationReport {
                    date: step.get("date").map(|d| parse_date(d).ok_or(format!("bad date `{d}`"))).transpose()?,
                    sae: step.get("sae").map(|s| parse("adverse event number", s)).transpose()?,
                    narrative: step.get("narrative").unwrap_or_default().to_owned(),
                    documents: uploads(step, "doc"),
                };
                let d = m.report_event(&self.session(step)?, &key, kind, report).map_err(e)?;
                self.touch(&d);
            }
        }
        Ok(())
    }
}

/// Replays `script` step by step, moving `clock` to each step's timestamp.
/// Stops at the first failing step.
pub fn run(medis: &Medis, clock: &ManualClock, script: &Script) -> Result<RunReport, ScriptError> {
    let mut runner = Runner { medis, report: RunReport::default() };
    for step in &script.steps {
        clock.set(step.at);
        runner.run(step).map_err(|message| ScriptError { line: step.line, message })?;
        runner.report.steps += 1;
    }
    Ok(runner.report)
}

/// Human-readable audit trail: one line per applied event.
pub fn event_log(d: &Dossier) -> String {
    let mut out = String::new();
    for r in d.lifecycle.audit() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{} -> {}",
            r.seq,
            format_timestamp(&r.event.at),
            r.event.actor,
            r.event.kind,
            r.from,
            r.to
        );
    }
    out
}
