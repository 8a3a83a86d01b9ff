//! Line-oriented catalogs: document types, communication types and risk classes.
//!
//! Each non-empty, non-`#` line is `code<TAB>label<TAB>flags`, flags being a
//! comma-separated token list (possibly empty).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lifecycle::{CivState, EventKind, Phase};
use crate::model::Role;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("cannot read catalog {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogLine {
    pub line: usize,
    pub code: String,
    pub label: String,
    pub flags: Vec<String>,
}

pub fn parse_lines(file: &str, text: &str) -> Result<Vec<CatalogLine>, CatalogError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let code = cols.next().unwrap_or_default().trim();
        let label = cols.next().map(str::trim).unwrap_or_default();
        let flags = cols.next().unwrap_or_default();
        let err = |message: &str| CatalogError::Parse { file: file.to_owned(), line: idx + 1, message: message.to_owned() };
        if cols.next().is_some() {
            return Err(err("expected at most three tab-separated columns"));
        }
        if code.is_empty() {
            return Err(err("empty code"));
        }
        if out.iter().any(|l: &CatalogLine| l.code == code) {
            return Err(err("duplicate code"));
        }
        out.push(CatalogLine {
            line: idx + 1,
            code: code.to_owned(),
            label: if label.is_empty() { code.to_owned() } else { label.to_owned() },
            flags: flags.split(',').map(str::trim).filter(|f| !f.is_empty()).map(str::to_owned).collect(),
        });
    }
    Ok(out)
}

/// Which side of the exchange produces a document or communication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Applicant,
    Nca,
}

impl Side {
    pub fn of(role: Role) -> Side {
        if role.is_external() {
            Side::Applicant
        } else {
            Side::Nca
        }
    }
}

/// A phase, or a single phase:status, that a flag is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatePattern {
    Phase(Phase),
    Exact(CivState),
}

impl StatePattern {
    pub fn matches(self, state: CivState) -> bool {
        match self {
            StatePattern::Phase(p) => state.phase() == p,
            StatePattern::Exact(s) => state == s,
        }
    }

    fn parse(text: &str) -> Option<Self> {
        if text.contains(':') {
            text.parse().ok().map(StatePattern::Exact)
        } else {
            text.parse().ok().map(StatePattern::Phase)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentType {
    pub code: String,
    pub label: String,
    pub required_for_submission: bool,
    /// Uploads are permitted whenever one of these events is.
    pub events: Vec<EventKind>,
    pub phases: Vec<StatePattern>,
    pub side: Option<Side>,
    /// Generated by the system only (sealed notification, evaluation outcome).
    pub system: bool,
    /// Hidden from applicants.
    pub internal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunicationType {
    pub code: String,
    pub label: String,
    pub side: Side,
    pub phases: Vec<StatePattern>,
    pub events: Vec<EventKind>,
    /// Opens a thread that expects a reply.
    pub request: bool,
    /// Only valid as an answer to a request.
    pub reply: bool,
    pub system: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskClass {
    pub code: String,
    pub label: String,
}

struct FlagParser<'a> {
    file: &'a str,
    line: usize,
    code: &'a str,
}

impl FlagParser<'_> {
    fn err(&self, message: String) -> CatalogError {
        CatalogError::Parse { file: self.file.to_owned(), line: self.line, message: format!("{}: {message}", self.code) }
    }

    fn event(&self, value: &str) -> Result<EventKind, CatalogError> {
        value.parse().map_err(|_| self.err(format!("unknown event `{value}`")))
    }

    fn phase(&self, value: &str) -> Result<StatePattern, CatalogError> {
        StatePattern::parse(value).ok_or_else(|| self.err(format!("unknown phase `{value}`")))
    }
}

pub fn parse_document_types(file: &str, text: &str) -> Result<Vec<DocumentType>, CatalogError> {
    parse_lines(file, text)?
        .into_iter()
        .map(|line| {
            let p = FlagParser { file, line: line.line, code: &line.code };
            let mut dt = DocumentType {
                code: line.code.clone(),
                label: line.label.clone(),
                required_for_submission: false,
                events: vec![],
                phases: vec![],
                side: None,
                system: false,
                internal: false,
            };
            for flag in &line.flags {
                match flag.split_once('=') {
                    None if flag == "required" => dt.required_for_submission = true,
                    None if flag == "system" => dt.system = true,
                    None if flag == "internal" => dt.internal = true,
                    None if flag == "applicant" => dt.side = Some(Side::Applicant),
                    None if flag == "nca" => dt.side = Some(Side::Nca),
                    Some(("event", v)) => dt.events.push(p.event(v)?),
                    Some(("phase", v)) => dt.phases.push(p.phase(v)?),
                    _ => return Err(p.err(format!("unknown flag `{flag}`"))),
                }
            }
            Ok(dt)
        })
        .collect()
}

pub fn parse_communication_types(file: &str, text: &str) -> Result<Vec<CommunicationType>, CatalogError> {
    parse_lines(file, text)?
        .into_iter()
        .map(|line| {
            let p = FlagParser { file, line: line.line, code: &line.code };
            let mut side = None;
            let mut ct = CommunicationType {
                code: line.code.clone(),
                label: line.label.clone(),
                side: Side::Nca,
                phases: vec![],
                events: vec![],
                request: false,
                reply: false,
                system: false,
            };
            for flag in &line.flags {
                match flag.split_once('=') {
                    None if flag == "applicant" => side = Some(Side::Applicant),
                    None if flag == "nca" => side = Some(Side::Nca),
                    None if flag == "request" => ct.request = true,
                    None if flag == "reply" => ct.reply = true,
                    None if flag == "system" => ct.system = true,
                    Some(("event", v)) => ct.events.push(p.event(v)?),
                    Some(("phase", v)) => ct.phases.push(p.phase(v)?),
                    _ => return Err(p.err(format!("unknown flag `{flag}`"))),
                }
            }
            ct.side = side.ok_or_else(|| p.err("missing `applicant` or `nca` flag".to_owned()))?;
            Ok(ct)
        })
        .collect()
}

pub fn parse_risk_classes(file: &str, text: &str) -> Result<Vec<RiskClass>, CatalogError> {
    Ok(parse_lines(file, text)?
        .into_iter()
        .map(|l| RiskClass { code: l.code, label: l.label })
        .collect())
}

const DEFAULT_DOCUMENT_TYPES: &str = include_str!("../../catalogs/document-types.tsv");
const DEFAULT_COMMUNICATION_TYPES: &str = include_str!("../../catalogs/communication-types.tsv");
const DEFAULT_RISK_CLASSES: &str = include_str!("../../catalogs/risk-classes.tsv");

/// The three catalogs loaded at startup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalogs {
    document_types: BTreeMap<String, DocumentType>,
    document_order: Vec<String>,
    communication_types: BTreeMap<String, CommunicationType>,
    risk_classes: Vec<RiskClass>,
}

impl Default for Catalogs {
    fn default() -> Self {
        Self::from_texts(DEFAULT_DOCUMENT_TYPES, DEFAULT_COMMUNICATION_TYPES, DEFAULT_RISK_CLASSES)
            .expect("bundled catalogs parse")
    }
}

impl Catalogs {
    pub fn from_texts(documents: &str, communications: &str, risk_classes: &str) -> Result<Self, CatalogError> {
        let docs = parse_document_types("document-types", documents)?;
        Ok(Catalogs {
            document_order: docs.iter().map(|d| d.code.clone()).collect(),
            document_types: docs.into_iter().map(|d| (d.code.clone(), d)).collect(),
            communication_types: parse_communication_types("communication-types", communications)?
                .into_iter()
                .map(|c| (c.code.clone(), c))
                .collect(),
            risk_classes: parse_risk_classes("risk-classes", risk_classes)?,
        })
    }

    /// Loads whichever of the three files are given, falling back to the bundled defaults.
    pub fn load(
        documents: Option<&Path>,
        communications: Option<&Path>,
        risk_classes: Option<&Path>,
    ) -> Result<Self, CatalogError> {
        fn read(path: Option<&Path>, default: &str) -> Result<String, CatalogError> {
            match path {
                None => Ok(default.to_owned()),
                Some(p) => fs::read_to_string(p)
                    .map_err(|e| CatalogError::Io { path: p.display().to_string(), message: e.to_string() }),
            }
        }
        Self::from_texts(
            &read(documents, DEFAULT_DOCUMENT_TYPES)?,
            &read(communications, DEFAULT_COMMUNICATION_TYPES)?,
            &read(risk_classes, DEFAULT_RISK_CLASSES)?,
        )
    }

    pub fn document_type(&self, code: &str) -> Option<&DocumentType> {
        self.document_types.get(code)
    }

    /// Document types in file order.
    pub fn document_types(&self) -> impl Iterator<Item = &DocumentType> {
        self.document_order.iter().map(|c| &self.document_types[c])
    }

    pub fn required_document_types(&self) -> impl Iterator<Item = &DocumentType> {
        self.document_types().filter(|d| d.required_for_submission)
    }

    pub fn communication_type(&self, code: &str) -> Option<&CommunicationType> {
        self.communication_types.get(code)
    }

    pub fn communication_types(&self) -> impl Iterator<Item = &CommunicationType> {
        self.communication_types.values()
    }

    pub fn risk_classes(&self) -> &[RiskClass] {
        &self.risk_classes
    }

    pub fn has_risk_class(&self, code: &str) -> bool {
        self.risk_classes.iter().any(|r| r.code == code)
    }
}
