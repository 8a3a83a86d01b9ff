//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use medis_core::evaluation::{Outcome, ReportBody, ReportKind};
use medis_core::export::{export_dossier, import_dossier};
use medis_core::fixtures::{self, FIG4_ALIAS, FIG4_SUPERVISOR, FIG5_SUPERVISOR};
use medis_core::lifecycle::{allowed_actions, EvaluationStatus, is_action_permitted, Actor, Lifecycle, LifecycleEvent};
use medis_core::model::{Party, PartyKind};
use medis_core::scenario::{self, Script, OPERATOR};
use medis_core::service::{DecisionRequest, Session};
use medis_core::store::{sha256_hex, BlobStore, FsBlobStore, MemoryBlobStore, TimelineOptions};
use medis_core::time::{utc_day, ManualClock};
use medis_core::{CivState, Config, EventKind, Medis, PartyId, Role};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{oracle, random_query, replay, staff, Flat};

const FIG_BUDGET: Duration = Duration::from_secs(1);
const GUARD_BUDGET: Duration = Duration::from_secs(5);
const EXPORT_DOSSIERS: usize = 200;
const EXPORT_SEED: u64 = 0x5eed_0005;
const BLOB_CASES: usize = 1000;
const BLOB_SEED: u64 = 0x5eed_0006;
const SEARCH_DOSSIERS: usize = 500;
const SEARCH_QUERIES: usize = 100;
const SEARCH_SEED: u64 = 0x5eed_0007;
const CODES: u32 = 100;

type Verdict = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fig4() -> Verdict {
    let started = Instant::now();
    let (medis, _, report) = replay(&fixtures::fig4());
    let id = report.aliases[FIG4_ALIAS].to_string();
    let s = staff(&medis, FIG4_SUPERVISOR);
    let rows: Vec<(String, String)> = medis
        .timeline(&s, &id, TimelineOptions::documents())
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|e| (e.at.format("%Y-%m-%d").to_string(), e.label))
        .collect();
    let open = medis.open_requests(&s, &id).map_err(|e| e.to_string())?;
    let state = medis.dossier(&s, &id).map_err(|e| e.to_string())?.state();
    let elapsed = started.elapsed();
    let expected = [
        ("2010-05-09", "Conclusione anticipata"),
        ("2010-05-05", "Evento avverso finale 2"),
        ("2010-05-05", "Evento avverso iniziale 2"),
        ("2010-05-02", "Evento avverso iniziale 1"),
        ("2009-12-20", "Inizio sperimentazione"),
        ("2009-12-01", "Notifica approvata"),
        ("2009-10-08", "i.5.i.m.2/6/2009"),
    ];
    let expected: Vec<(String, String)> = expected.iter().map(|(a, b)| ((*a).to_owned(), (*b).to_owned())).collect();
    check(rows == expected, format!("timeline {rows:?}"))?;
    check(
        open.len() == 1 && open[0].subject == "Motivazioni conclusione anticipata",
        format!("open requests {:?}", open.iter().map(|c| &c.subject).collect::<Vec<_>>()),
    )?;
    check(state.to_string() == "investigation:concluded-early", format!("state {state}"))?;
    check(elapsed < FIG_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("7 entries, 1 open request, {state}, {elapsed:.2?}"))
}

fn fig5() -> Verdict {
    let started = Instant::now();
    let (medis, _, _) = replay(&fixtures::fig5());
    let s = staff(&medis, FIG5_SUPERVISOR);
    let rows = medis.search(&s, &fixtures::fig5_query()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let seqs: BTreeSet<u32> = rows.iter().filter_map(|r| r.code.rsplit('/').nth(1)?.parse().ok()).collect();
    check(rows.len() == 4 && seqs == BTreeSet::from([1, 3, 8, 20]), format!("rows {seqs:?}"))?;
    let total = medis.repository().all().len();
    check(elapsed < FIG_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("4 rows {{1,3,8,20}} out of {total} dossiers, {elapsed:.2?}"))
}

/// Reference transition relation, written out independently of the guard.
const RELATION: &str = "
registration        register-applicant        M,R    registration
registration        grant-access              S      draft
draft               initialize-notification   M,R    draft
draft               submit-notification       M,R    submitted
submitted           assign-team               S,P    evaluation:in-progress
evaluation:in-progress           request-info          P,T,D  evaluation:info-requested
evaluation:in-progress           mark-oriented-denial  P      evaluation:oriented-toward-denial
evaluation:in-progress           approve               P      evaluation:approved
evaluation:in-progress           deny                  P      evaluation:denied
evaluation:info-requested        request-info          P,T,D  evaluation:info-requested
evaluation:info-requested        provide-info          M,R    evaluation:in-progress
evaluation:oriented-toward-denial request-info         P,T,D  evaluation:info-requested
evaluation:oriented-toward-denial provide-info         M,R    evaluation:in-progress
evaluation:oriented-toward-denial approve              P      evaluation:approved
evaluation:oriented-toward-denial deny                 P      evaluation:denied
evaluation:approved              report-start          M,R    investigation:started
evaluation:approved              submit-amendment      M,R    investigation:awaiting-start
investigation:awaiting-start     report-start          M,R    investigation:started
investigation:awaiting-start     submit-amendment      M,R    investigation:awaiting-start
investigation:started            report-end            M,R    investigation:concluded
investigation:started            report-early-termination M,R investigation:concluded-early
investigation:started            submit-amendment      M,R    investigation:started
investigation:started            report-sae-initial    M,R    investigation:started
investigation:started            report-sae-final      M,R    investigation:started
investigation:concluded          report-sae-final      M,R    investigation:concluded
investigation:concluded-early    report-sae-final      M,R    investigation:concluded-early
investigation:concluded          accept-final-report   P      closed:notification-concluded
investigation:concluded-early    accept-final-report   P      closed:notification-concluded
";

fn role_of(c: &str) -> Role {
    match c {
        "M" => Role::Manufacturer,
        "R" => Role::AuthorizedRepresentative,
        "S" => Role::AdministrativeSecretary,
        "P" => Role::Supervisor,
        "T" => Role::TechnicalEvaluator,
        "D" => Role::MedicalEvaluator,
        other => panic!("role letter {other}"),
    }
}

type Relation = Vec<(CivState, EventKind, Vec<Role>, CivState)>;

fn relation() -> Relation {
    RELATION
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].split(',').map(role_of).collect(), f[3].parse().unwrap())
        })
        .collect()
}

fn guard_table() -> Verdict {
    let started = Instant::now();
    let rel = relation();
    let at = utc_day(2009, 1, 1);
    let mut triples = 0usize;
    let mut violations = Vec::new();
    let before_approval = |s: CivState| matches!(s, CivState::Registration | CivState::Draft | CivState::Submitted)
        || matches!(s, CivState::Evaluation(e) if e != EvaluationStatus::Approved);
    for s in CivState::ALL {
        for r in Role::ALL {
            for k in EventKind::ALL {
                triples += 1;
                let ok = is_action_permitted(s, r, k).permitted;
                if ok && s.is_terminal() {
                    violations.push(format!("(a) {s} {r} {k}"));
                }
                if ok && k.is_investigation_event() && before_approval(s) {
                    violations.push(format!("(b) {s} {r} {k}"));
                }
                if ok && k.mutates_notification() && s.is_submitted() {
                    violations.push(format!("(c) {s} {r} {k}"));
                }
                if ok != allowed_actions(s, r).contains(&k) {
                    violations.push(format!("permitted/allowed disagree at {s} {r} {k}"));
                }
            }
        }
    }
    // Brute-force reachability over the reference relation, replaying each
    // path through the engine.
    let mut paths: BTreeMap<CivState, Lifecycle> = BTreeMap::new();
    let mut queue = VecDeque::from([Lifecycle::starting_at(CivState::Registration)]);
    while let Some(lc) = queue.pop_front() {
        let s = lc.state();
        if paths.contains_key(&s) {
            continue;
        }
        paths.insert(s, lc.clone());
        for (from, kind, roles, to) in &rel {
            if *from == s {
                let mut next = lc.clone();
                match next.apply(LifecycleEvent::new(*kind, Actor::new("x", roles[0]), at)) {
                    Ok(rec) if rec.to == *to => queue.push_back(next),
                    other => violations.push(format!("engine rejects {s} --{kind}--> {to}: {other:?}")),
                }
            }
        }
    }
    for s in CivState::ALL {
        let Some(lc) = paths.get(&s) else {
            violations.push(format!("{s} unreachable"));
            continue;
        };
        for r in Role::ALL {
            let oracle: BTreeSet<EventKind> =
                rel.iter().filter(|(f, _, roles, _)| *f == s && roles.contains(&r)).map(|(_, k, _, _)| *k).collect();
            let engine: BTreeSet<EventKind> = EventKind::ALL
                .into_iter()
                .filter(|k| lc.clone().apply(LifecycleEvent::new(*k, Actor::new("x", r), at)).is_ok())
                .collect();
            if allowed_actions(s, r) != oracle || engine != oracle {
                violations.push(format!("({s}, {r}): table {:?} oracle {oracle:?}", allowed_actions(s, r)));
            }
        }
    }
    let elapsed = started.elapsed();
    check(violations.is_empty(), violations.join("; "))?;
    check(elapsed < GUARD_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("{triples} triples, {} reachable states, 0 violations, {elapsed:.2?}", paths.len()))
}

fn access_matrix() -> Verdict {
    let mut script = fixtures::fig4();
    let cut = script.steps.iter().position(|s| s.kind == "save-report").expect("fixture saves reports");
    script.steps.truncate(cut);
    let (medis, clock, report) = replay(&script);
    let id = report.aliases[FIG4_ALIAS].to_string();
    for (pid, role, name) in [
        ("sup2", Role::Supervisor, "Other supervisor"),
        ("te2", Role::TechnicalEvaluator, "Other technical"),
        ("me2", Role::MedicalEvaluator, "Other medical"),
    ] {
        let party = Party::new(pid, PartyKind::NcaUser, name, "", "IT").unwrap();
        medis.add_staff(party, [role].into(), pid, pid).map_err(|e| e.to_string())?;
    }
    clock.set(Utc.with_ymd_and_hms(2009, 11, 10, 9, 0, 0).unwrap());
    let actors: Vec<(&str, Session)> = ["giannotti", "sup2", "segreteria", "ab", "te2", "il", "me2", "medtech-italia", "cardio-devices"]
        .into_iter()
        .map(|p| (p, staff(&medis, p)))
        .collect();
    let author = |kind: ReportKind| if kind == ReportKind::Technical { "ab" } else { "il" };
    let body = || ReportBody {
        device_characteristics: "x".into(),
        risk_analysis: "y".into(),
        patient_safety: "z".into(),
    };
    let mut cells = 0usize;
    let mut violations = Vec::new();
    let mut expect = |what: String, expected: bool, actual: bool| {
        cells += 1;
        if expected != actual {
            violations.push(format!("{what}: expected {expected}, got {actual}"));
        }
    };

    for (name, s) in &actors {
        let own = ["medtech-italia"].contains(name) || !s.is_external();
        expect(format!("{name} reads dossier"), own, medis.dossier(s, &id).is_ok());
    }
    for kind in [ReportKind::Technical, ReportKind::Medical] {
        for (name, s) in &actors {
            let may = *name == author(kind);
            expect(format!("{name} writes {kind}"), may, medis.save_report(s, &id, kind, body(), None).is_ok());
        }
    }
    let decide = |s: &Session| {
        medis
            .decide(s, &id, &DecisionRequest { outcome: Outcome::Approve, rationale: "ok".into(), notice_subject: None })
            .is_ok()
    };
    for (name, s) in &actors {
        expect(format!("{name} decides with no shared report"), false, decide(s));
    }
    for probe in [ReportKind::Technical, ReportKind::Medical] {
        for (name, s) in &actors {
            let may = *name == author(probe);
            expect(format!("{name} reads {probe} before sharing"), may, medis.read_report(s, &id, probe).is_ok());
        }
    }
    for (step, kind) in [(1, ReportKind::Technical), (2, ReportKind::Medical)] {
        let author_session = &actors.iter().find(|(n, _)| *n == author(kind)).unwrap().1;
        medis.share_report(author_session, &id, kind).map_err(|e| e.to_string())?;
        for probe in [ReportKind::Technical, ReportKind::Medical] {
            let shared = probe == ReportKind::Technical || step == 2;
            for (name, s) in &actors {
                let may = *name == author(probe) || (*name == FIG4_SUPERVISOR && shared);
                expect(format!("{name} reads {probe} after share step {step}"), may, medis.read_report(s, &id, probe).is_ok());
            }
        }
        if step == 1 {
            for (name, s) in &actors {
                expect(format!("{name} decides with one shared report"), false, decide(s));
            }
        }
    }
    for (name, s) in actors.iter().filter(|(n, _)| *n != FIG4_SUPERVISOR) {
        expect(format!("{name} decides with both shared"), false, decide(s));
    }
    let sup = &actors[0].1;
    expect("assigned supervisor decides with both shared".into(), true, decide(sup));
    check(violations.is_empty(), violations.join("; "))?;
    Ok(format!("{cells} cells, 0 violations"))
}

fn export_round_trip() -> Verdict {
    let script = fixtures::random(EXPORT_DOSSIERS, EXPORT_SEED);
    let (a, _, _) = replay(&script);
    let (b, _, _) = replay(&script);
    let first: Vec<String> = a.repository().all().iter().map(|d| export_dossier(d)).collect();
    let second: Vec<String> = b.repository().all().iter().map(|d| export_dossier(d)).collect();
    check(first.len() == EXPORT_DOSSIERS, format!("{} dossiers", first.len()))?;
    check(first == second, "export differs between runs")?;
    let mut failures = Vec::new();
    for (d, xml) in a.repository().all().iter().zip(&first) {
        match import_dossier(xml.as_bytes(), a.catalogs()) {
            Ok(back) if back == **d && export_dossier(&back) == *xml => {}
            Ok(_) => failures.push(format!("{} differs after import", d.id)),
            Err(e) => failures.push(format!("{}: {e}", d.id)),
        }
    }
    check(failures.is_empty(), failures.join("; "))?;
    let bytes: usize = first.iter().map(String::len).sum();
    Ok(format!("{EXPORT_DOSSIERS} dossiers, {bytes} bytes, identical across runs"))
}

fn blob_store() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(BLOB_SEED);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fs = FsBlobStore::open(dir.path()).map_err(|e| e.to_string())?;
    let mem = MemoryBlobStore::new();
    let stores: [&dyn BlobStore; 2] = [&mem, &fs];
    let at = utc_day(2009, 1, 1);
    let mut distinct = BTreeSet::new();
    for i in 0..BLOB_CASES {
        let len = if i % 10 == 0 { 1 } else { rng.gen_range(1..4096) };
        let mut bytes = vec![0u8; len];
        rng.fill_bytes(&mut bytes);
        for store in stores {
            let rec = store.put(&bytes, at).map_err(|e| e.to_string())?;
            let back = store.get(&rec.digest).map_err(|e| e.to_string())?;
            check(sha256_hex(&back) == rec.digest && back == bytes, format!("case {i}: digest mismatch"))?;
            check(rec.size == bytes.len() as u64, format!("case {i}: size"))?;
            let before = store.len();
            let again = store.put(&bytes, at).map_err(|e| e.to_string())?;
            check(again.digest == rec.digest && store.len() == before, format!("case {i}: duplicate stored twice"))?;
        }
        distinct.insert(sha256_hex(&bytes));
    }
    check(mem.put(&[], at).is_err() && fs.put(&[], at).is_err(), "empty payload accepted")?;
    check(mem.len() == distinct.len() && fs.len() == distinct.len(), "blob count differs from distinct contents")?;
    Ok(format!("{BLOB_CASES} blobs x 2 stores, {} distinct, dedup confirmed", distinct.len()))
}

fn search_oracle() -> Verdict {
    let (medis, _, _) = replay(&fixtures::random(SEARCH_DOSSIERS, SEARCH_SEED));
    let s = staff(&medis, "sup");
    let all = medis.repository().all();
    check(all.len() == SEARCH_DOSSIERS, format!("{} dossiers", all.len()))?;
    let flats: Vec<(String, Flat)> = all.iter().filter_map(|d| Some((d.id.to_string(), Flat::of(d)?))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEARCH_SEED);
    let mut non_empty = 0;
    for i in 0..SEARCH_QUERIES {
        let q = random_query(&mut rng);
        let got: Vec<String> = medis.search(&s, &q).map_err(|e| e.to_string())?.into_iter().map(|r| r.dossier.to_string()).collect();
        let want: BTreeSet<String> = flats.iter().filter(|(_, f)| oracle(f, &q)).map(|(id, _)| id.clone()).collect();
        let got_set: BTreeSet<String> = got.iter().cloned().collect();
        check(got.len() == got_set.len() && got_set == want, format!("query {i} `{}`: {} vs {}", q.to_query_string(), got.len(), want.len()))?;
        non_empty += usize::from(!want.is_empty());
    }
    check(non_empty >= SEARCH_QUERIES / 4, format!("only {non_empty} queries matched anything"))?;
    Ok(format!("{SEARCH_QUERIES} queries over {SEARCH_DOSSIERS} dossiers, {non_empty} non-empty, all equal"))
}

fn code_density() -> Verdict {
    let at = |d: u32| Utc.with_ymd_and_hms(2009, 6, d, 9, 0, 0).unwrap();
    let mut script = Script::default();
    script.push(OPERATOR, "add-staff", &[("id", "segreteria"), ("roles", "administrative-secretary")], at(1));
    script.push("acme", "register-applicant", &[("name", "Acme Medical"), ("roles", "manufacturer")], at(1));
    script.push("segreteria", "grant-access", &[("organization", "acme")], at(1));
    let docs = [
        "ethics-committee-opinion",
        "declaration",
        "clinical-protocol",
        "investigator-brochure",
        "risk-analysis",
        "literature-analysis",
        "instructions-for-use",
        "payment-proof",
    ];
    for n in 0..CODES {
        let alias = format!("n{n}");
        let title = format!("Study {n}");
        script.push("acme", "initialize-notification", &[("as", &alias)], at(2));
        script.push(
            "acme",
            "set-form",
            &[
                ("dossier", &alias),
                ("title", &title),
                ("site.1.name", "Ospedale"),
                ("device.name", "Probe"),
                ("device.risk-class", "IIa"),
            ],
            at(2),
        );
        let mut upload = vec![("dossier".to_owned(), alias.clone())];
        for (i, t) in docs.iter().enumerate() {
            upload.push((format!("doc.{}.type", i + 1), (*t).to_owned()));
            upload.push((format!("doc.{}.label", i + 1), format!("{t}-{n}.pdf")));
        }
        let upload: Vec<(&str, &str)> = upload.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        script.push("acme", "upload", &upload, at(2));
    }
    let clock = std::sync::Arc::new(ManualClock::new(at(1)));
    let medis = Medis::with_clock(Config::default(), clock.clone()).unwrap();
    let report = scenario::run(&medis, &clock, &script).map_err(|e| e.to_string())?;
    clock.set(at(3));
    let session = medis.session_for(&PartyId::from("acme")).unwrap();
    let ids: Vec<String> = report.aliases.values().map(ToString::to_string).collect();
    let codes: Vec<(u32, i32)> = std::thread::scope(|scope| {
        let handles: Vec<_> = ids
            .iter()
            .map(|id| {
                let (medis, session) = (&medis, &session);
                scope.spawn(move || {
                    let d = medis.submit(session, id).expect("submission succeeds");
                    let c = d.code().expect("sealed dossier has a code");
                    (c.seq, c.year)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("thread completes")).collect()
    });
    let seqs: BTreeSet<u32> = codes.iter().map(|c| c.0).collect();
    check(codes.iter().all(|c| c.1 == 2009), "codes span several years")?;
    check(codes.len() == CODES as usize && seqs == (1..=CODES).collect(), format!("sequence numbers {seqs:?}"))?;
    Ok(format!("{CODES} concurrent submissions, codes exactly 1..={CODES}"))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("fig4 golden replay", fig4),
        ("fig5 golden search", fig5),
        ("guard-table exhaustiveness", guard_table),
        ("access-control matrix", access_matrix),
        ("export round trip", export_round_trip),
        ("content store property", blob_store),
        ("search oracle equivalence", search_oracle),
        ("protocol-code density", code_density),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
