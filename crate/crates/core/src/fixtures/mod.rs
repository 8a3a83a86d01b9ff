//! Seed scripts: the two reference dossier sets and a seeded random corpus.

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lifecycle::{CivState, ClosedStatus, EvaluationStatus as E, InvestigationStatus as I};
use crate::model::{Role, StudyDesign};
use crate::scenario::{Script, OPERATOR};
use crate::search::Query;
use crate::time::Timestamp;

pub const FIG4_ALIAS: &str = "fig4";
pub const FIG4_SUPERVISOR: &str = "giannotti";
pub const FIG5_SUPERVISOR: &str = "responsabile";
pub const SECRETARY: &str = "segreteria";

/// Fixture names understood by [`by_name`].
pub const NAMES: [&str; 3] = ["fig4", "fig5", "random"];

pub fn by_name(name: &str, n: usize, seed: u64) -> Option<Script> {
    match name {
        "fig4" => Some(fig4()),
        "fig5" => Some(fig5()),
        "random" => Some(random(n, seed)),
        _ => None,
    }
}

/// The query behind the reference search: manufacturers, 2009, concluded.
pub fn fig5_query() -> Query {
    Query {
        applicant_roles: vec![Role::Manufacturer],
        years: vec![2009],
        states: vec![CivState::Investigation(I::Concluded)],
        ..Query::default()
    }
}

fn at(y: i32, m: u32, d: u32, h: u32, min: u32) -> Timestamp {
    Utc.with_ymd_and_hms(y, m, d, h, min, 0).single().expect("fixture timestamp is valid")
}

fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("fixture date is valid")
}

const REQUIRED: [&str; 8] = [
    "ethics-committee-opinion",
    "declaration",
    "clinical-protocol",
    "investigator-brochure",
    "risk-analysis",
    "literature-analysis",
    "instructions-for-use",
    "payment-proof",
];

const ITALIAN_LABELS: [&str; 8] = [
    "Parere comitato etico.pdf",
    "Dichiarazione.pdf",
    "Protocollo clinico ver.1.pdf",
    "Brochure.pdf",
    "Analisi rischi.pdf",
    "Analisi letteratura.pdf",
    "Istruzioni uso.pdf",
    "Versamento.pdf",
];

const ENGLISH_LABELS: [&str; 8] = [
    "Ethics committee opinion.pdf",
    "Declaration.pdf",
    "Clinical protocol v1.pdf",
    "Investigator brochure.pdf",
    "Risk analysis.pdf",
    "Literature analysis.pdf",
    "Instructions for use.pdf",
    "Payment proof.pdf",
];

type Pairs = Vec<(String, String)>;

fn pairs(items: &[(&str, &str)]) -> Pairs {
    items.iter().map(|(k, v)| ((*k).to_owned(), (*v).to_owned())).collect()
}

#[derive(Debug, Clone)]
struct Org {
    id: String,
    name: String,
    country: String,
}

impl Org {
    fn new(id: &str, name: &str, country: &str) -> Self {
        Org { id: id.to_owned(), name: name.to_owned(), country: country.to_owned() }
    }
}

/// One dossier and the state it should reach.
#[derive(Debug, Clone)]
struct Plan {
    alias: String,
    applicant: String,
    role: Role,
    manufacturer: Option<String>,
    form: Pairs,
    labels: [&'static str; 8],
    submitted: Timestamp,
    deadline: Option<NaiveDate>,
    target: CivState,
    supervisor: String,
    technical: String,
    medical: String,
    /// Answered information requests during evaluation.
    info_cycles: u32,
    adverse_events: u32,
    amendment: bool,
    end_label: String,
}

struct Builder {
    script: Script,
}

impl Builder {
    fn new() -> Self {
        Builder { script: Script::default() }
    }

    fn step(&mut self, actor: &str, kind: &str, payload: &[(&str, &str)], when: Timestamp) {
        self.script.push(actor, kind, payload, when);
    }

    fn staff(&mut self, id: &str, roles: &[Role], name: &str, when: Timestamp) {
        let roles = roles.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(",");
        let contact = format!("{id}@nca.example");
        self.step(OPERATOR, "add-staff", &[("id", id), ("roles", &roles), ("name", name), ("contact", &contact)], when);
    }

    fn manufacturer(&mut self, org: &Org, when: Timestamp) {
        let contact = format!("info@{}.example", org.id);
        self.step(
            &org.id,
            "register-applicant",
            &[("name", &org.name), ("country", &org.country), ("contact", &contact), ("roles", "manufacturer")],
            when,
        );
        self.step(SECRETARY, "grant-access", &[("organization", &org.id)], when + Duration::hours(1));
    }

    fn representative(&mut self, org: &Org, principal: &Org, when: Timestamp) {
        let contact = format!("info@{}.example", org.id);
        self.step(
            &org.id,
            "register-applicant",
            &[
                ("name", &org.name),
                ("country", &org.country),
                ("contact", &contact),
                ("roles", "authorized-representative"),
                ("manufacturer.id", &principal.id),
                ("manufacturer.name", &principal.name),
                ("manufacturer.country", &principal.country),
            ],
            when,
        );
        self.step(SECRETARY, "grant-access", &[("organization", &org.id)], when + Duration::hours(1));
    }

    /// Steps taking `plan` from a new draft to its target state.
    fn drive(&mut self, p: &Plan) {
        let a = p.alias.as_str();
        let t0 = p.submitted;
        let mut init = vec![("role", p.role.as_str()), ("as", a)];
        if let Some(m) = &p.manufacturer {
            init.push(("manufacturer", m));
        }
        self.step(&p.applicant, "initialize-notification", &init, t0 - Duration::days(3));
        let mut form: Vec<(&str, &str)> = vec![("dossier", a)];
        form.extend(p.form.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        self.step(&p.applicant, "set-form", &form, t0 - Duration::days(3) + Duration::minutes(5));
        let docs: Vec<(String, String)> = REQUIRED
            .iter()
            .zip(p.labels)
            .enumerate()
            .flat_map(|(i, (t, l))| {
                [(format!("doc.{}.type", i + 1), (*t).to_owned()), (format!("doc.{}.label", i + 1), l.to_owned())]
            })
            .collect();
        let mut upload: Vec<(&str, &str)> = vec![("dossier", a)];
        upload.extend(docs.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        self.step(&p.applicant, "upload", &upload, t0 - Duration::days(2));
        if p.target == CivState::Draft {
            return;
        }
        self.step(&p.applicant, "submit-notification", &[("dossier", a)], t0);
        if let Some(deadline) = p.deadline {
            self.step(SECRETARY, "set-deadline", &[("dossier", a), ("date", &deadline.to_string())], t0 + Duration::hours(2));
        }
        if p.target == CivState::Submitted {
            return;
        }
        let mut t = t0 + Duration::days(1);
        self.step(
            &p.supervisor,
            "assign-team",
            &[("dossier", a), ("supervisor", &p.supervisor), ("technical", &p.technical), ("medical", &p.medical)],
            t,
        );
        for n in 1..=p.info_cycles {
            t += Duration::days(4);
            let subject = format!("Clarifications {n}");
            self.step(&p.technical, "request-info", &[("dossier", a), ("subject", &subject), ("body", "Please clarify.")], t);
            t += Duration::days(3);
            self.step(
                &p.applicant,
                "reply",
                &[
                    ("dossier", a),
                    ("request", &subject),
                    ("type", "info-response"),
                    ("subject", &subject),
                    ("attach.1.type", "clarification"),
                    ("attach.1.label", "Clarification.pdf"),
                ],
                t,
            );
        }
        match p.target {
            CivState::Evaluation(E::InProgress) => return,
            CivState::Evaluation(E::InfoRequested) => {
                t += Duration::days(4);
                self.step(&p.technical, "request-info", &[("dossier", a), ("subject", "Missing data"), ("body", "Please send.")], t);
                return;
            }
            CivState::Evaluation(E::OrientedTowardDenial) => {
                t += Duration::days(4);
                self.step(&p.supervisor, "mark-oriented-denial", &[("dossier", a), ("subject", "Grounds for denial")], t);
                return;
            }
            _ => {}
        }
        t += Duration::days(10);
        for (who, kind) in [(&p.technical, "technical"), (&p.medical, "medical")] {
            self.step(
                who,
                "save-report",
                &[
                    ("dossier", a),
                    ("kind", kind),
                    ("device-characteristics", "Adequate."),
                    ("risk-analysis", "Acceptable."),
                    ("patient-safety", "No concerns."),
                ],
                t,
            );
        }
        t += Duration::days(1);
        for (who, kind) in [(&p.technical, "technical"), (&p.medical, "medical")] {
            self.step(who, "share-report", &[("dossier", a), ("kind", kind)], t);
        }
        t += Duration::days(5);
        if p.target == CivState::Evaluation(E::Denied) {
            self.step(&p.supervisor, "deny", &[("dossier", a), ("rationale", "Insufficient evidence.")], t);
            return;
        }
        self.step(&p.supervisor, "approve", &[("dossier", a), ("rationale", "Requirements met.")], t);
        if p.target == CivState::Evaluation(E::Approved) {
            return;
        }
        if p.amendment || p.target == CivState::Investigation(I::AwaitingStart) {
            t += Duration::days(5);
            self.step(
                &p.applicant,
                "submit-amendment",
                &[
                    ("dossier", a),
                    ("doc.1.type", "amendment-list"),
                    ("doc.1.label", "Amendments.pdf"),
                    ("doc.2.type", "clinical-protocol"),
                    ("doc.2.label", "Clinical protocol v2.pdf"),
                ],
                t,
            );
        }
        if p.target == CivState::Investigation(I::AwaitingStart) {
            return;
        }
        t += Duration::days(10);
        self.step(
            &p.applicant,
            "report-start",
            &[("dossier", a), ("doc.1.type", "civ-start"), ("doc.1.label", "Investigation start.pdf")],
            t,
        );
        for n in 1..=p.adverse_events {
            t += Duration::days(7);
            let label = format!("Adverse event {n}.pdf");
            self.step(
                &p.applicant,
                "report-sae-initial",
                &[("dossier", a), ("narrative", "Hospitalisation."), ("doc.1.type", "sae-initial"), ("doc.1.label", &label)],
                t,
            );
        }
        if p.target == CivState::Investigation(I::Started) {
            return;
        }
        t += Duration::days(30);
        if p.target == CivState::Investigation(I::ConcludedEarly) {
            self.step(
                &p.applicant,
                "report-early-termination",
                &[("dossier", a), ("doc.1.type", "civ-early-termination"), ("doc.1.label", "Early termination.pdf")],
                t,
            );
            return;
        }
        self.step(
            &p.applicant,
            "report-end",
            &[("dossier", a), ("doc.1.type", "civ-end"), ("doc.1.label", &p.end_label)],
            t,
        );
        if p.target == CivState::Closed(ClosedStatus::NotificationConcluded) {
            t += Duration::days(20);
            self.step(
                &p.applicant,
                "upload",
                &[("dossier", a), ("doc.1.type", "final-report"), ("doc.1.label", "Final report.pdf")],
                t,
            );
            t += Duration::days(5);
            self.step(&p.supervisor, "accept-final-report", &[("dossier", a)], t);
        }
    }

    fn finish(mut self) -> Script {
        self.script.sort();
        self.script
    }
}

fn simple_form(title: &str, device: &str, risk: &str, cnd: &str) -> Pairs {
    pairs(&[
        ("title", title),
        ("design", "non-randomized"),
        ("multicentric", "false"),
        ("population", "adults"),
        ("site.1.name", "Ospedale San Giovanni"),
        ("site.1.code", "RM-01"),
        ("site.1.country", "IT"),
        ("site.1.investigator", "Dr. Rossi"),
        ("device.type", "device"),
        ("device.name", device),
        ("device.risk-class", risk),
        ("device.cnd", cnd),
        ("application-field", "cardiology"),
    ])
}

fn plan(alias: &str, applicant: &str, form: Pairs, submitted: Timestamp, target: CivState) -> Plan {
    Plan {
        alias: alias.to_owned(),
        applicant: applicant.to_owned(),
        role: Role::Manufacturer,
        manufacturer: None,
        form,
        labels: ENGLISH_LABELS,
        submitted,
        deadline: None,
        target,
        supervisor: FIG5_SUPERVISOR.to_owned(),
        technical: "ab".to_owned(),
        medical: "il".to_owned(),
        info_cycles: 0,
        adverse_events: 0,
        amendment: false,
        end_label: "Investigation end.pdf".to_owned(),
    }
}

/// The reference dossier: sixth 2009 notification, approved, started, two
/// adverse events, terminated early with the motivation still outstanding.
pub fn fig4() -> Script {
    let mut b = Builder::new();
    let t = at(2009, 1, 5, 8, 0);
    b.staff(FIG4_SUPERVISOR, &[Role::Supervisor], "Giannotti", t);
    b.staff(SECRETARY, &[Role::AdministrativeSecretary], "Segreteria", t);
    b.staff("ab", &[Role::TechnicalEvaluator], "A. B.", t);
    b.staff("il", &[Role::MedicalEvaluator], "I. L.", t);

    let other = Org::new("cardio-devices", "Cardio Devices S.p.A.", "IT");
    let org = Org::new("medtech-italia", "Medtech Italia S.r.l.", "IT");
    b.manufacturer(&other, at(2009, 1, 10, 9, 0));
    b.manufacturer(&org, at(2009, 1, 12, 9, 0));

    for (i, (m, d)) in [(2, 3), (3, 17), (5, 4), (7, 1), (9, 14)].into_iter().enumerate() {
        let n = i + 1;
        let mut p = plan(
            &format!("prior-{n}"),
            &other.id,
            simple_form(&format!("Prior investigation {n}"), &format!("Catheter {n}"), "IIb", "C0104"),
            at(2009, m, d, 10, 0),
            CivState::Submitted,
        );
        p.supervisor = FIG4_SUPERVISOR.to_owned();
        b.drive(&p);
    }

    let a = FIG4_ALIAS;
    let mut p = plan(
        a,
        &org.id,
        simple_form("Coronary stent safety investigation", "Coronary stent CS-2", "III", "P0908"),
        at(2009, 10, 8, 10, 0),
        CivState::Submitted,
    );
    p.labels = ITALIAN_LABELS;
    b.drive(&p);

    let m = org.id.as_str();
    b.step(
        FIG4_SUPERVISOR,
        "assign-team",
        &[("dossier", a), ("supervisor", FIG4_SUPERVISOR), ("technical", "ab"), ("medical", "il")],
        at(2009, 10, 9, 9, 0),
    );
    let subject = "Delucidazioni su Analisi dei rischi";
    b.step(
        "ab",
        "request-info",
        &[("dossier", a), ("subject", subject), ("body", "Si richiedono chiarimenti sull'analisi dei rischi.")],
        at(2009, 10, 20, 9, 0),
    );
    b.step(
        m,
        "reply",
        &[
            ("dossier", a),
            ("request", subject),
            ("type", "info-response"),
            ("subject", subject),
            ("body", "In allegato i chiarimenti richiesti."),
            ("attach.1.type", "clarification"),
            ("attach.1.label", "Documento di delucidazioni"),
        ],
        at(2009, 10, 23, 9, 0),
    );
    for (who, kind) in [("ab", "technical"), ("il", "medical")] {
        b.step(
            who,
            "save-report",
            &[
                ("dossier", a),
                ("kind", kind),
                ("device-characteristics", "Conforme."),
                ("risk-analysis", "Rischi accettabili."),
                ("patient-safety", "Nessun rilievo."),
            ],
            at(2009, 11, 16, 9, 0),
        );
        b.step(who, "share-report", &[("dossier", a), ("kind", kind)], at(2009, 11, 20, 9, 0));
    }
    b.step(
        FIG4_SUPERVISOR,
        "approve",
        &[("dossier", a), ("rationale", "Requisiti soddisfatti."), ("subject", "Notifica approvata")],
        at(2009, 12, 1, 9, 0),
    );
    b.step(
        m,
        "report-start",
        &[("dossier", a), ("doc.1.type", "civ-start"), ("doc.1.label", "Inizio sperimentazione")],
        at(2009, 12, 20, 9, 0),
    );
    b.step(
        m,
        "report-sae-initial",
        &[("dossier", a), ("sae", "1"), ("doc.1.type", "sae-initial"), ("doc.1.label", "Evento avverso iniziale 1")],
        at(2010, 5, 2, 9, 0),
    );
    b.step(
        m,
        "report-sae-initial",
        &[("dossier", a), ("sae", "2"), ("doc.1.type", "sae-initial"), ("doc.1.label", "Evento avverso iniziale 2")],
        at(2010, 5, 5, 9, 0),
    );
    b.step(
        m,
        "report-sae-final",
        &[("dossier", a), ("sae", "2"), ("doc.1.type", "sae-final"), ("doc.1.label", "Evento avverso finale 2")],
        at(2010, 5, 5, 15, 0),
    );
    b.step(
        m,
        "report-early-termination",
        &[("dossier", a), ("doc.1.type", "civ-early-termination"), ("doc.1.label", "Conclusione anticipata")],
        at(2010, 5, 9, 9, 0),
    );
    b.step(
        FIG4_SUPERVISOR,
        "request-info",
        &[
            ("dossier", a),
            ("subject", "Motivazioni conclusione anticipata"),
            ("body", "Si richiedono le motivazioni della conclusione anticipata."),
        ],
        at(2010, 5, 9, 11, 0),
    );
    b.finish()
}

/// Twenty 2009 notifications plus distractors; the reference query matches
/// sequence numbers 1, 3, 8 and 20.
pub fn fig5() -> Script {
    let mut b = Builder::new();
    let t = at(2009, 1, 2, 8, 0);
    b.staff(FIG5_SUPERVISOR, &[Role::Supervisor], "Responsabile", t);
    b.staff(SECRETARY, &[Role::AdministrativeSecretary], "Segreteria", t);
    for (id, name) in [("ab", "A. B."), ("cd", "C. D."), ("ef", "E. F.")] {
        b.staff(id, &[Role::TechnicalEvaluator], name, t);
    }
    for (id, name) in [("il", "I. L."), ("mn", "M. N."), ("gh", "G. H.")] {
        b.staff(id, &[Role::MedicalEvaluator], name, t);
    }

    let devices_co = Org::new("devices-co", "Devices & Co.", "IT");
    let drug_devices = Org::new("drug-devices", "Drug & Devices S.r.l.", "IT");
    let devices_inc = Org::new("devices-inc", "Devices Inc.", "US");
    let stent = Org::new("stent-srl", "Stent S.r.l.", "IT");
    let ortho = Org::new("ortho-med", "Ortho Med GmbH", "DE");
    let rep = Org::new("eu-rep", "EU Representative Ltd.", "IE");
    let principal = Org::new("pacific-devices", "Pacific Devices Corp.", "US");
    let t = at(2009, 1, 10, 9, 0);
    for org in [&devices_co, &drug_devices, &devices_inc, &stent, &ortho] {
        b.manufacturer(org, t);
    }
    b.representative(&rep, &principal, t);

    let matching = |alias: &str, org: &Org, title: &str, submitted: Timestamp, deadline: NaiveDate, tech: &str, med: &str| {
        let mut p = plan(alias, &org.id, simple_form(title, title, "III", "P0908"), submitted, CivState::Investigation(I::Concluded));
        p.deadline = Some(deadline);
        p.technical = tech.to_owned();
        p.medical = med.to_owned();
        p.end_label = "Fine sperimentazione.pdf".to_owned();
        p
    };
    let mut plans = vec![
        matching(
            "seq-1",
            &devices_co,
            "Stent efficacy: a controlled clinical trial",
            at(2009, 2, 7, 10, 0),
            day(2009, 4, 1),
            "ab",
            "il",
        ),
        matching(
            "seq-3",
            &drug_devices,
            "Stent investigation in over eighty patients",
            at(2009, 2, 20, 10, 0),
            day(2009, 4, 10),
            "cd",
            "mn",
        ),
        matching(
            "seq-8",
            &devices_inc,
            "Comparison study for palliative treatments",
            at(2009, 3, 12, 10, 0),
            day(2009, 5, 1),
            "ef",
            "gh",
        ),
        matching("seq-20", &stent, "Dental device XXX", at(2009, 10, 1, 10, 0), day(2009, 11, 10), "ab", "mn"),
    ];

    // Distractors in submission order; representative filings carry the
    // concluded state that the role facet must exclude.
    let distractors: [(u32, (u32, u32), CivState, bool); 16] = [
        (2, (2, 12), CivState::Investigation(I::Concluded), true),
        (4, (2, 24), CivState::Investigation(I::Started), false),
        (5, (2, 27), CivState::Investigation(I::ConcludedEarly), false),
        (6, (3, 3), CivState::Evaluation(E::OrientedTowardDenial), false),
        (7, (3, 9), CivState::Closed(ClosedStatus::NotificationConcluded), false),
        (9, (3, 20), CivState::Evaluation(E::InProgress), false),
        (10, (4, 2), CivState::Evaluation(E::Denied), false),
        (11, (4, 20), CivState::Investigation(I::Concluded), true),
        (12, (5, 6), CivState::Evaluation(E::Approved), false),
        (13, (5, 25), CivState::Evaluation(E::InfoRequested), false),
        (14, (6, 11), CivState::Investigation(I::AwaitingStart), false),
        (15, (6, 30), CivState::Submitted, false),
        (16, (7, 15), CivState::Investigation(I::Started), true),
        (17, (8, 3), CivState::Investigation(I::ConcludedEarly), false),
        (18, (9, 1), CivState::Investigation(I::Concluded), true),
        (19, (9, 21), CivState::Evaluation(E::InProgress), false),
    ];
    let evaluators = [("ab", "il"), ("cd", "mn"), ("ef", "gh")];
    for (i, (seq, (m, d), target, by_rep)) in distractors.into_iter().enumerate() {
        let mut p = plan(
            &format!("seq-{seq}"),
            if by_rep { &rep.id } else { &ortho.id },
            simple_form(&format!("Orthopaedic investigation {seq}"), &format!("Implant {seq}"), "IIb", "P0909"),
            at(2009, m, d, 10, 0),
            target,
        );
        if by_rep {
            p.role = Role::AuthorizedRepresentative;
            p.manufacturer = Some(principal.id.clone());
        }
        (p.technical, p.medical) = (evaluators[i % 3].0.to_owned(), evaluators[i % 3].1.to_owned());
        p.info_cycles = u32::from(seq % 3 == 0);
        p.adverse_events = u32::from(seq % 4 == 0);
        p.end_label = "Fine sperimentazione.pdf".to_owned();
        plans.push(p);
    }
    // Other years, same role and state.
    for (n, org) in [&devices_co, &stent].into_iter().enumerate() {
        let mut p = plan(
            &format!("y2010-{}", n + 1),
            &org.id,
            simple_form(&format!("Follow-up study {}", n + 1), "Stent follow-up", "III", "P0908"),
            at(2010, 1, 20 + n as u32, 10, 0),
            CivState::Investigation(I::Concluded),
        );
        p.end_label = "Fine sperimentazione.pdf".to_owned();
        plans.push(p);
    }
    plans.push(plan(
        "draft-2009",
        &devices_co.id,
        simple_form("Unsubmitted stent study", "Stent draft", "III", "P0908"),
        at(2009, 11, 20, 10, 0),
        CivState::Draft,
    ));
    plans.sort_by_key(|p| p.submitted);
    for p in &plans {
        b.drive(p);
    }
    b.finish()
}

const CHARACTERISTICS: [&str; 5] = ["software", "single-use", "animal-tissue", "human-tissue", "plasma"];
const POPULATION: [&str; 6] = ["adults", "children", "elderly", "pregnant", "healthy", "patients"];
const COUNTRIES: [&str; 5] = ["IT", "FR", "DE", "ES", "AT"];
const RISK_CLASSES: [&str; 5] = ["I", "IIa", "IIb", "III", "active-implantable"];
const CND: [&str; 8] = ["C0104", "C0105", "C0202", "J0105", "P0908", "P0909", "Z12", "C01"];
const ANATOMY: [&str; 7] = ["A01.456", "A01.598.450", "A01.598.500", "A01.911", "A07.231.114.228", "A07.231.908", "A07.541.510"];
const FIELDS: [&str; 5] = ["cardiology", "orthopaedics", "dentistry", "oncology", "neurology"];
const NOUNS: [&str; 8] = ["stent", "catheter", "pump", "implant", "valve", "sensor", "graft", "lens"];

fn device_fields(rng: &mut ChaCha8Rng, prefix: &str, name: &str, out: &mut Pairs) {
    let put = |out: &mut Pairs, k: &str, v: String| out.push((format!("{prefix}{k}"), v));
    put(out, "name", name.to_owned());
    put(out, "risk-class", RISK_CLASSES.choose(rng).copied().unwrap_or("I").to_owned());
    let chars: Vec<&str> = CHARACTERISTICS.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
    if !chars.is_empty() {
        put(out, "characteristics", chars.join(","));
    }
    if rng.gen_bool(0.8) {
        put(out, "cnd", CND.choose(rng).copied().unwrap_or("C01").to_owned());
    }
    if rng.gen_bool(0.7) {
        put(out, "anatomical-location", ANATOMY.choose(rng).copied().unwrap_or("A01.456").to_owned());
    }
    if rng.gen_bool(0.2) {
        put(out, "drug.name", "Heparin".to_owned());
        put(out, "drug.code", "B01AB01".to_owned());
    }
}

fn random_form(rng: &mut ChaCha8Rng, n: usize) -> Pairs {
    let noun = NOUNS.choose(rng).copied().unwrap_or("device");
    let mut out = pairs(&[("title", &format!("Investigation {n} of a {noun}"))]);
    let designed = rng.gen_bool(0.8);
    if designed {
        let design = [
            StudyDesign::NonRandomized,
            StudyDesign::RandomizedOpen,
            StudyDesign::RandomizedSingleBlind,
            StudyDesign::RandomizedDoubleBlind,
        ]
        .choose(rng)
        .copied()
        .unwrap_or(StudyDesign::NonRandomized);
        out.push(("design".into(), design.as_str().into()));
    }
    let sites = rng.gen_range(1..=4);
    out.push(("multicentric".into(), (sites > 1).to_string()));
    let population: Vec<&str> = POPULATION.iter().copied().filter(|_| rng.gen_bool(0.35)).collect();
    if !population.is_empty() {
        out.push(("population".into(), population.join(",")));
    }
    for s in 1..=sites {
        out.push((format!("site.{s}.name"), format!("Hospital {n}-{s}")));
        out.push((format!("site.{s}.code"), format!("H{n}-{s}")));
        out.push((format!("site.{s}.country"), COUNTRIES.choose(rng).copied().unwrap_or("IT").to_owned()));
        out.push((format!("site.{s}.investigator"), format!("Dr. Investigator {s}")));
    }
    let mut ce = false;
    if rng.gen_bool(0.75) {
        out.push(("device.type".into(), "device".into()));
        device_fields(rng, "device.", &format!("{noun} model {n}"), &mut out);
        if rng.gen_bool(0.25) {
            ce = true;
            out.push(("device.ce.certificate".into(), format!("CE-{n}")));
            out.push(("device.ce.intended-use".into(), "Marketed indication".into()));
            out.push(("device.ce.issued".into(), "2007-06-01".into()));
        }
    } else {
        out.push(("device.type".into(), "kit".into()));
        let items = rng.gen_range(1..=3);
        for k in 1..=items {
            let p = format!("kit.{k}.");
            if k > 1 && rng.gen_bool(0.4) {
                out.push((format!("{p}kind"), "component".into()));
                out.push((format!("{p}name"), format!("Component {k}")));
                out.push((format!("{p}code"), format!("K{n}-{k}")));
            } else {
                out.push((format!("{p}kind"), "device".into()));
                device_fields(rng, &p, &format!("{noun} part {n}-{k}"), &mut out);
            }
        }
    }
    if ce || rng.gen_bool(0.5) {
        out.push(("investigated-intended-use".into(), format!("New indication {n}")));
    }
    if designed && rng.gen_bool(0.3) {
        if rng.gen_bool(0.5) {
            out.push(("comparator.drug.name".into(), "Aspirin".into()));
            out.push(("comparator.drug.code".into(), "B01AC06".into()));
        } else {
            out.push(("comparator.device.name".into(), format!("Reference {noun}")));
            out.push(("comparator.device.risk-class".into(), "IIa".into()));
        }
    }
    if rng.gen_bool(0.1) {
        out.push(("similar.name".into(), format!("Marketed {noun}")));
        out.push(("similar.rationale".into(), "Same materials".into()));
    }
    if rng.gen_bool(0.8) {
        out.push(("application-field".into(), FIELDS.choose(rng).copied().unwrap_or("cardiology").to_owned()));
    }
    out
}

const TARGETS: [CivState; 13] = [
    CivState::Draft,
    CivState::Submitted,
    CivState::Evaluation(E::InProgress),
    CivState::Evaluation(E::InfoRequested),
    CivState::Evaluation(E::OrientedTowardDenial),
    CivState::Evaluation(E::Approved),
    CivState::Evaluation(E::Denied),
    CivState::Investigation(I::AwaitingStart),
    CivState::Investigation(I::Started),
    CivState::Investigation(I::Concluded),
    CivState::Investigation(I::Concluded),
    CivState::Investigation(I::ConcludedEarly),
    CivState::Closed(ClosedStatus::NotificationConcluded),
];

/// `n` dossiers with random forms, applicants, years and states.
pub fn random(n: usize, seed: u64) -> Script {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new();
    let t = at(2008, 11, 3, 8, 0);
    b.staff("sup", &[Role::Supervisor], "S. Upervisor", t);
    b.staff(SECRETARY, &[Role::AdministrativeSecretary], "Segreteria", t);
    let technical = [("te1", "T. One"), ("te2", "T. Two"), ("te3", "T. Three")];
    let medical = [("me1", "M. One"), ("me2", "M. Two"), ("me3", "M. Three")];
    for (id, name) in technical {
        b.staff(id, &[Role::TechnicalEvaluator], name, t);
    }
    for (id, name) in medical {
        b.staff(id, &[Role::MedicalEvaluator], name, t);
    }
    let manufacturers: Vec<Org> = (1..=8)
        .map(|i| Org::new(&format!("mfr-{i}"), &format!("Manufacturer {i} S.r.l."), COUNTRIES[i % COUNTRIES.len()]))
        .collect();
    let principals: Vec<Org> =
        (1..=3).map(|i| Org::new(&format!("overseas-{i}"), &format!("Overseas Devices {i} Inc."), "US")).collect();
    let reps: Vec<Org> = (1..=3).map(|i| Org::new(&format!("rep-{i}"), &format!("Representative {i} Ltd."), "IE")).collect();
    let t = at(2008, 12, 1, 9, 0);
    for m in &manufacturers {
        b.manufacturer(m, t);
    }
    for (r, p) in reps.iter().zip(&principals) {
        b.representative(r, p, t);
    }

    let mut plans = Vec::with_capacity(n);
    for i in 1..=n {
        let year = rng.gen_range(2009..=2011);
        let doy = rng.gen_range(0..360);
        let date = day(year, 1, 1) + Duration::days(doy);
        let submitted = at(date.year(), date.month(), date.day(), rng.gen_range(8..18), rng.gen_range(0..60));
        let target = *TARGETS.choose(&mut rng).expect("targets are non-empty");
        let (applicant, role, manufacturer) = if rng.gen_bool(0.3) {
            let k = rng.gen_range(0..reps.len());
            (reps[k].id.clone(), Role::AuthorizedRepresentative, Some(principals[k].id.clone()))
        } else {
            (manufacturers.choose(&mut rng).expect("pool is non-empty").id.clone(), Role::Manufacturer, None)
        };
        let mut p = plan(&format!("d{i}"), &applicant, random_form(&mut rng, i), submitted, target);
        p.role = role;
        p.manufacturer = manufacturer;
        p.supervisor = "sup".to_owned();
        p.technical = technical.choose(&mut rng).expect("pool is non-empty").0.to_owned();
        p.medical = medical.choose(&mut rng).expect("pool is non-empty").0.to_owned();
        if rng.gen_bool(0.5) {
            p.deadline = Some(date + Duration::days(rng.gen_range(30..90)));
        }
        p.info_cycles = rng.gen_range(0..=2);
        p.adverse_events = rng.gen_range(0..=2);
        p.amendment = rng.gen_bool(0.2);
        plans.push(p);
    }
    plans.sort_by_key(|p| p.submitted);
    for p in &plans {
        b.drive(p);
    }
    b.finish()
}
