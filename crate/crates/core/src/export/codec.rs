//! Canonical XML encoding of a dossier and its validating decoder.

use std::str::FromStr;

use super::xml::{parse_tree, Element, SchemaError, XmlWriter};
use crate::evaluation::{
    EvaluationAssignment, EvaluationFile, EvaluationReport, FinalDecision, Outcome, ReportBody, ReportKind,
};
use crate::intake::{civ_from_form, civ_to_form};
use crate::lifecycle::{Actor, CivState, EventKind, Lifecycle, LifecycleEvent};
use crate::model::{
    Association, AttachedDocument, AttachedTo, BlobRef, Catalogs, ClinicalInvestigation, Communication, Direction,
    Document, Dossier, FormData, Milestones, Notification, Party, PartyKind, Role, SaeKind, SaeReport, Violation,
};
use crate::time::{format_timestamp, parse_date, parse_timestamp, Timestamp};

pub const SCHEMA_VERSION: &str = "1";

fn ts(t: &Timestamp) -> String {
    format_timestamp(t)
}

fn write_party(w: &mut XmlWriter, element: &str, p: &Party, extra: &[(&str, &str)]) {
    let mut attrs: Vec<(&str, &str)> = extra.to_vec();
    attrs.extend([
        ("id", p.id.as_str()),
        ("kind", p.kind.as_str()),
        ("name", p.name.as_str()),
        ("contact", p.contact.as_str()),
        ("country", p.country.as_str()),
    ]);
    w.empty(element, &attrs);
}

fn write_form(w: &mut XmlWriter, form: &FormData) {
    w.start("form", &[]);
    for (k, v) in form {
        w.leaf("field", &[("key", k)], v);
    }
    w.end();
}

fn write_actor(w: &mut XmlWriter, element: &str, a: &Actor) {
    w.empty(element, &[("party", a.party.as_str()), ("role", a.role.as_str())]);
}

fn write_report(w: &mut XmlWriter, r: &EvaluationReport) {
    let revision = r.revision.to_string();
    let saved = ts(&r.saved_at);
    w.start(
        "report",
        &[
            ("kind", r.kind.as_str()),
            ("author", r.author.as_str()),
            ("revision", &revision),
            ("shared", if r.shared { "true" } else { "false" }),
            ("saved-at", &saved),
        ],
    );
    w.leaf("device-characteristics", &[], &r.body.device_characteristics);
    w.leaf("risk-analysis", &[], &r.body.risk_analysis);
    w.leaf("patient-safety", &[], &r.body.patient_safety);
    w.end();
}

fn write_civ(w: &mut XmlWriter, civ: &ClinicalInvestigation) {
    w.start("investigation", &[]);
    write_form(w, &civ_to_form(civ));
    let m = &civ.milestones;
    let dates: Vec<(&str, String)> = [("start", m.start), ("end", m.end), ("early-termination", m.early_termination)]
        .into_iter()
        .filter_map(|(k, d)| d.map(|d| (k, d.to_string())))
        .collect();
    let attrs: Vec<(&str, &str)> = dates.iter().map(|(k, v)| (*k, v.as_str())).collect();
    w.empty("milestones", &attrs);
    for s in &civ.sae_reports {
        let seq = s.seq.to_string();
        let at = ts(&s.reported_at);
        let final_for = s.final_for.map(|f| f.to_string());
        let mut attrs = vec![("seq", seq.as_str()), ("kind", s.kind.as_str()), ("reported-at", at.as_str())];
        if let Some(f) = &final_for {
            attrs.push(("final-for", f));
        }
        w.leaf("sae", &attrs, &s.narrative);
    }
    w.end();
}

/// Which parts of a dossier an export carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportView {
    /// Everything, for the authority and for archival.
    Full,
    /// Without evaluation data and internal documents, for applicants.
    Applicant,
}

pub fn export_dossier(d: &Dossier) -> String {
    export_dossier_view(d, ExportView::Full)
}

pub fn export_dossier_view(d: &Dossier, view: ExportView) -> String {
    let full = view == ExportView::Full;
    let mut w = XmlWriter::new();
    let created = ts(&d.created_at);
    let deadline = d.expected_deadline.map(|x| x.to_string());
    let mut attrs = vec![("schema-version", SCHEMA_VERSION), ("id", d.id.as_str()), ("created-at", created.as_str())];
    if let Some(x) = &deadline {
        attrs.push(("expected-deadline", x));
    }
    w.start("dossier", &attrs);

    let n = &d.notification;
    let code = n.code().map(|c| c.to_string());
    let submitted = n.submitted_at().map(|t| ts(&t));
    let mut attrs = Vec::new();
    if let Some(c) = &code {
        attrs.push(("code", c.as_str()));
    }
    if let Some(s) = &submitted {
        attrs.push(("submitted-at", s.as_str()));
    }
    w.start("notification", &attrs);
    write_party(&mut w, "applicant", &n.applicant, &[("role", n.applicant_role.as_str())]);
    write_party(&mut w, "manufacturer", &n.manufacturer, &[]);
    write_form(&mut w, n.form());
    for a in n.documents() {
        w.empty("attachment", &[("ref", a.id.as_str()), ("doc-type", &a.doc_type)]);
    }
    w.end();

    if let Some(civ) = &d.civ {
        write_civ(&mut w, civ);
    }

    w.start("documents", &[]);
    for doc in d.documents.iter().filter(|x| full || !x.internal) {
        let version = doc.version.to_string();
        let received = ts(&doc.received_at);
        let attached = match &doc.attached_to {
            None => None,
            Some(AttachedTo::Notification) => Some("notification".to_owned()),
            Some(AttachedTo::Communication(c)) => Some(c.to_string()),
        };
        let mut attrs = vec![
            ("id", doc.id.as_str()),
            ("doc-type", doc.doc_type.as_str()),
            ("label", doc.label.as_str()),
            ("version", version.as_str()),
            ("received-at", received.as_str()),
            ("internal", if doc.internal { "true" } else { "false" }),
        ];
        if let Some(a) = &attached {
            attrs.push(("attached-to", a));
        }
        w.start("document", &attrs);
        let size = doc.blob.size.to_string();
        w.empty("blob", &[("digest", &doc.blob.digest), ("size", &size), ("media-type", &doc.blob.media_type)]);
        write_actor(&mut w, "uploaded-by", &doc.uploaded_by);
        for a in &doc.associations {
            w.empty("association", &[("kind", a.kind.as_str()), ("target", a.target.as_str())]);
        }
        w.end();
    }
    w.end();

    w.start("communications", &[]);
    for c in &d.communications {
        let sent = ts(&c.sent_at);
        let mut attrs = vec![
            ("id", c.id.as_str()),
            ("comm-type", c.comm_type.as_str()),
            ("direction", c.direction.as_str()),
            ("request", if c.request { "true" } else { "false" }),
            ("sent-at", sent.as_str()),
        ];
        if let Some(r) = &c.in_reply_to {
            attrs.push(("in-reply-to", r.as_str()));
        }
        w.start("communication", &attrs);
        write_actor(&mut w, "author", &c.author);
        w.leaf("subject", &[], &c.subject);
        w.leaf("body", &[], &c.body);
        for a in &c.attachments {
            if full || !d.document(a).is_some_and(|x| x.internal) {
                w.empty("attachment", &[("ref", a.as_str())]);
            }
        }
        w.end();
    }
    w.end();

    w.start("lifecycle", &[]);
    for r in d.lifecycle.audit() {
        let seq = r.seq.to_string();
        let at = ts(&r.event.at);
        let (from, to) = (r.from.to_string(), r.to.to_string());
        let attrs = [
            ("seq", seq.as_str()),
            ("kind", r.event.kind.as_str()),
            ("at", at.as_str()),
            ("party", r.event.actor.party.as_str()),
            ("role", r.event.actor.role.as_str()),
            ("from", from.as_str()),
            ("to", to.as_str()),
        ];
        if r.event.payload.is_empty() {
            w.empty("event", &attrs);
        } else {
            w.start("event", &attrs);
            for (k, v) in &r.event.payload {
                w.leaf("param", &[("key", k)], v);
            }
            w.end();
        }
    }
    w.end();

    let e = &d.evaluation;
    if full && (e.assignment.is_some() || !e.reports.is_empty() || e.decision.is_some()) {
        w.start("evaluation", &[]);
        if let Some(a) = &e.assignment {
            let at = ts(&a.assigned_at);
            w.start("assignment", &[("assigned-at", &at)]);
            write_party(&mut w, "supervisor", &a.supervisor, &[]);
            write_party(&mut w, "technical", &a.technical, &[]);
            write_party(&mut w, "medical", &a.medical, &[]);
            w.end();
        }
        for r in e.reports.values() {
            write_report(&mut w, r);
        }
        if !e.history.is_empty() {
            w.start("history", &[]);
            for r in &e.history {
                write_report(&mut w, r);
            }
            w.end();
        }
        if let Some(dec) = &e.decision {
            let at = ts(&dec.decided_at);
            w.leaf(
                "decision",
                &[("outcome", dec.outcome.as_str()), ("decided-at", &at), ("decided-by", dec.decided_by.as_str())],
                &dec.rationale,
            );
        }
        w.end();
    }

    w.end();
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImportError {
    #[error("schema violation at {0}")]
    Schema(#[from] SchemaError),
    #[error("dossier violates {} invariant(s): {}", .0.len(), .0.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invariants(Vec<Violation>),
}

fn time_attr(e: &Element, name: &str) -> Result<Timestamp, SchemaError> {
    let v = e.req(name)?;
    parse_timestamp(v).ok_or_else(|| e.err(format!("invalid timestamp `{v}` for `{name}`")))
}

fn bool_attr(e: &Element, name: &str) -> Result<bool, SchemaError> {
    match e.req(name)? {
        "true" => Ok(true),
        "false" => Ok(false),
        v => Err(e.err(format!("invalid boolean `{v}` for `{name}`"))),
    }
}

fn date_attr(e: &Element, name: &str) -> Result<Option<chrono::NaiveDate>, SchemaError> {
    match e.attr(name) {
        None => Ok(None),
        Some(v) => parse_date(v).map(Some).ok_or_else(|| e.err(format!("invalid date `{v}` for `{name}`"))),
    }
}

fn parsed<T: FromStr>(e: &Element, name: &str) -> Result<T, SchemaError> {
    e.parse_attr(name)
}

fn read_party(e: &Element, extra: &[&str]) -> Result<Party, SchemaError> {
    let mut allowed = vec!["id", "kind", "name", "contact", "country"];
    allowed.extend_from_slice(extra);
    e.expect_attrs(&allowed)?;
    e.expect_children(&[])?;
    Party::new(e.req("id")?, parsed::<PartyKind>(e, "kind")?, e.req("name")?, e.req("contact")?, e.req("country")?)
        .map_err(|err| e.err(err.to_string()))
}

fn read_actor(e: &Element) -> Result<Actor, SchemaError> {
    e.expect_attrs(&["party", "role"])?;
    Ok(Actor::new(e.req("party")?, parsed::<Role>(e, "role")?))
}

fn read_form(e: &Element) -> Result<FormData, SchemaError> {
    e.expect_children(&["field"])?;
    let mut form = FormData::new();
    for f in e.all("field") {
        f.expect_attrs(&["key"])?;
        if form.insert(f.req("key")?.to_owned(), f.text.clone()).is_some() {
            return Err(f.err("duplicate field key"));
        }
    }
    Ok(form)
}

fn read_report(e: &Element) -> Result<EvaluationReport, SchemaError> {
    e.expect_attrs(&["kind", "author", "revision", "shared", "saved-at"])?;
    e.expect_children(&["device-characteristics", "risk-analysis", "patient-safety"])?;
    let text = |name: &str| -> Result<String, SchemaError> { Ok(e.req_child(name)?.text.clone()) };
    Ok(EvaluationReport {
        kind: parsed::<ReportKind>(e, "kind")?,
        author: e.req("author")?.into(),
        body: ReportBody {
            device_characteristics: text("device-characteristics")?,
            risk_analysis: text("risk-analysis")?,
            patient_safety: text("patient-safety")?,
        },
        shared: bool_attr(e, "shared")?,
        revision: parsed(e, "revision")?,
        saved_at: time_attr(e, "saved-at")?,
    })
}

fn read_civ(e: &Element) -> Result<ClinicalInvestigation, SchemaError> {
    e.expect_children(&["form", "milestones", "sae"])?;
    let form_el = e.req_child("form")?;
    let mut civ = civ_from_form(&read_form(form_el)?).map_err(|err| form_el.err(err.to_string()))?;
    let m = e.req_child("milestones")?;
    m.expect_attrs(&["start", "end", "early-termination"])?;
    civ.milestones = Milestones {
        start: date_attr(m, "start")?,
        end: date_attr(m, "end")?,
        early_termination: date_attr(m, "early-termination")?,
    };
    for s in e.all("sae") {
        s.expect_attrs(&["seq", "kind", "reported-at", "final-for"])?;
        civ.sae_reports.push(SaeReport {
            seq: parsed(s, "seq")?,
            kind: parsed::<SaeKind>(s, "kind")?,
            reported_at: time_attr(s, "reported-at")?,
            narrative: s.text.clone(),
            final_for: s.opt_attr("final-for")?,
        });
    }
    Ok(civ)
}

fn read_lifecycle(e: &Element) -> Result<Lifecycle, SchemaError> {
    e.expect_children(&["event"])?;
    let mut lifecycle = Lifecycle::new();
    for (i, ev) in e.all("event").enumerate() {
        ev.expect_attrs(&["seq", "kind", "at", "party", "role", "from", "to"])?;
        ev.expect_children(&["param"])?;
        let mut event = LifecycleEvent::new(
            parsed::<EventKind>(ev, "kind")?,
            Actor::new(ev.req("party")?, parsed::<Role>(ev, "role")?),
            time_attr(ev, "at")?,
        );
        for p in ev.all("param") {
            event = event.with(p.req("key")?, p.text.clone());
        }
        let (seq, from, to): (u64, CivState, CivState) = (parsed(ev, "seq")?, parsed(ev, "from")?, parsed(ev, "to")?);
        let record = lifecycle.apply(event).map_err(|err| ev.err(err.to_string()))?;
        if record.seq != seq || record.seq != i as u64 + 1 || record.from != from || record.to != to {
            return Err(ev.err(format!("recorded transition {from} -> {to} does not match replay")));
        }
    }
    Ok(lifecycle)
}

fn read_evaluation(e: &Element) -> Result<EvaluationFile, SchemaError> {
    e.expect_children(&["assignment", "report", "history", "decision"])?;
    let mut file = EvaluationFile::default();
    if let Some(a) = e.child("assignment") {
        a.expect_attrs(&["assigned-at"])?;
        a.expect_children(&["supervisor", "technical", "medical"])?;
        file.assignment = Some(EvaluationAssignment {
            supervisor: read_party(a.req_child("supervisor")?, &[])?,
            technical: read_party(a.req_child("technical")?, &[])?,
            medical: read_party(a.req_child("medical")?, &[])?,
            assigned_at: time_attr(a, "assigned-at")?,
        });
    }
    for r in e.all("report") {
        let report = read_report(r)?;
        if file.reports.insert(report.kind, report).is_some() {
            return Err(r.err("duplicate report kind"));
        }
    }
    if let Some(h) = e.child("history") {
        h.expect_children(&["report"])?;
        for r in h.all("report") {
            file.history.push(read_report(r)?);
        }
    }
    if let Some(dec) = e.child("decision") {
        dec.expect_attrs(&["outcome", "decided-at", "decided-by"])?;
        file.decision = Some(FinalDecision {
            outcome: parsed::<Outcome>(dec, "outcome")?,
            rationale: dec.text.clone(),
            decided_at: time_attr(dec, "decided-at")?,
            decided_by: dec.req("decided-by")?.into(),
        });
    }
    Ok(file)
}

/// Reconstructs a dossier from its structure alone, without invariant checks.
pub fn decode_dossier(bytes: &[u8]) -> Result<Dossier, SchemaError> {
    let root = parse_tree(bytes)?;
    if root.name != "dossier" {
        return Err(root.err(format!("expected root element `dossier`, found `{}`", root.name)));
    }
    root.expect_attrs(&["schema-version", "id", "created-at", "expected-deadline"])?;
    if root.req("schema-version")? != SCHEMA_VERSION {
        return Err(root.err("unsupported schema version"));
    }
    root.expect_children(&["notification", "investigation", "documents", "communications", "lifecycle", "evaluation"])?;

    let n = root.req_child("notification")?;
    n.expect_attrs(&["code", "submitted-at"])?;
    n.expect_children(&["applicant", "manufacturer", "form", "attachment"])?;
    let applicant_el = n.req_child("applicant")?;
    let attachments = n
        .all("attachment")
        .map(|a| {
            a.expect_attrs(&["ref", "doc-type"])?;
            Ok(AttachedDocument { id: a.req("ref")?.into(), doc_type: a.req("doc-type")?.to_owned() })
        })
        .collect::<Result<Vec<_>, SchemaError>>()?;
    let submitted_at = match n.attr("submitted-at") {
        None => None,
        Some(_) => Some(time_attr(n, "submitted-at")?),
    };
    let notification = Notification::from_parts(
        n.opt_attr("code")?,
        submitted_at,
        read_form(n.req_child("form")?)?,
        attachments,
        read_party(applicant_el, &["role"])?,
        parsed::<Role>(applicant_el, "role")?,
        read_party(n.req_child("manufacturer")?, &[])?,
    );

    let civ = root.child("investigation").map(read_civ).transpose()?;

    let docs_el = root.req_child("documents")?;
    docs_el.expect_children(&["document"])?;
    let mut documents = Vec::new();
    for doc in docs_el.all("document") {
        doc.expect_attrs(&["id", "doc-type", "label", "version", "received-at", "internal", "attached-to"])?;
        doc.expect_children(&["blob", "uploaded-by", "association"])?;
        let blob = doc.req_child("blob")?;
        blob.expect_attrs(&["digest", "size", "media-type"])?;
        let attached_to = match doc.attr("attached-to") {
            None => None,
            Some("notification") => Some(AttachedTo::Notification),
            Some(c) => Some(AttachedTo::Communication(c.into())),
        };
        let associations = doc
            .all("association")
            .map(|a| {
                a.expect_attrs(&["kind", "target"])?;
                Ok(Association { kind: parsed(a, "kind")?, target: a.req("target")?.into() })
            })
            .collect::<Result<Vec<_>, SchemaError>>()?;
        documents.push(Document {
            id: doc.req("id")?.into(),
            doc_type: doc.req("doc-type")?.to_owned(),
            label: doc.req("label")?.to_owned(),
            version: parsed(doc, "version")?,
            blob: BlobRef {
                digest: blob.req("digest")?.to_owned(),
                size: parsed(blob, "size")?,
                media_type: blob.req("media-type")?.to_owned(),
            },
            received_at: time_attr(doc, "received-at")?,
            associations,
            attached_to,
            internal: bool_attr(doc, "internal")?,
            uploaded_by: read_actor(doc.req_child("uploaded-by")?)?,
        });
    }

    let comms_el = root.req_child("communications")?;
    comms_el.expect_children(&["communication"])?;
    let mut communications = Vec::new();
    for c in comms_el.all("communication") {
        c.expect_attrs(&["id", "comm-type", "direction", "request", "sent-at", "in-reply-to"])?;
        c.expect_children(&["author", "subject", "body", "attachment"])?;
        communications.push(Communication {
            id: c.req("id")?.into(),
            direction: parsed::<Direction>(c, "direction")?,
            comm_type: c.req("comm-type")?.to_owned(),
            subject: c.req_child("subject")?.text.clone(),
            sent_at: time_attr(c, "sent-at")?,
            body: c.req_child("body")?.text.clone(),
            attachments: c.all("attachment").map(|a| Ok(a.req("ref")?.into())).collect::<Result<_, SchemaError>>()?,
            in_reply_to: c.attr("in-reply-to").map(Into::into),
            request: bool_attr(c, "request")?,
            author: read_actor(c.req_child("author")?)?,
        });
    }

    Ok(Dossier {
        id: root.req("id")?.into(),
        notification,
        documents,
        communications,
        lifecycle: read_lifecycle(root.req_child("lifecycle")?)?,
        civ,
        evaluation: root.child("evaluation").map(read_evaluation).transpose()?.unwrap_or_default(),
        expected_deadline: date_attr(&root, "expected-deadline")?,
        created_at: time_attr(&root, "created-at")?,
    })
}

/// Decodes and checks every dossier invariant.
pub fn import_dossier(bytes: &[u8], catalogs: &Catalogs) -> Result<Dossier, ImportError> {
    let dossier = decode_dossier(bytes)?;
    let violations = dossier.check_invariants(catalogs);
    if violations.is_empty() {
        Ok(dossier)
    } else {
        Err(ImportError::Invariants(violations))
    }
}
