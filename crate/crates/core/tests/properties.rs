mod common;

use std::sync::OnceLock;

use chrono::Duration;
use medis_core::export::{decode_dossier, export_dossier};
use medis_core::fixtures;
use medis_core::intake::{civ_from_form, civ_to_form, parse_form_text, render_form_text};
use medis_core::lifecycle::{allowed_actions, is_action_permitted, replay, Actor, Lifecycle, LifecycleEvent};
use medis_core::search::Query;
use medis_core::store::{sha256_hex, BlobStore, MemoryBlobStore};
use medis_core::time::utc_day;
use medis_core::{CivState, EventKind, Medis, Role};
use proptest::prelude::*;
use proptest::sample::select;

use common::{oracle, replay as run, staff, Flat};

fn event(kind: EventKind, role: Role, minute: i64) -> LifecycleEvent {
    LifecycleEvent::new(kind, Actor::new("p", role), utc_day(2009, 1, 1) + Duration::minutes(minute))
}

/// Walks the lifecycle: each pick indexes the (role, kind) pairs permitted
/// in the current state, or injects an arbitrary pair when `wild`.
fn valid_events(picks: &[(bool, usize, EventKind, Role)]) -> Vec<LifecycleEvent> {
    let mut lc = Lifecycle::new();
    let mut out = Vec::new();
    for (i, (wild, n, k, r)) in picks.iter().enumerate() {
        let options: Vec<(Role, EventKind)> = Role::ALL
            .into_iter()
            .flat_map(|r| allowed_actions(lc.state(), r).into_iter().map(move |k| (r, k)))
            .collect();
        let (r, k) = if *wild || options.is_empty() { (*r, *k) } else { options[n % options.len()] };
        let e = event(k, r, i as i64);
        if lc.apply(e.clone()).is_ok() {
            out.push(e);
        }
    }
    out
}

fn picks() -> impl Strategy<Value = Vec<(bool, usize, EventKind, Role)>> {
    prop::collection::vec(
        (prop::bool::weighted(0.2), any::<usize>(), select(EventKind::ALL.to_vec()), select(Role::ALL.to_vec())),
        0..60,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn blob_get_after_put(bytes in prop::collection::vec(any::<u8>(), 1..2048), copies in 1usize..4) {
        let store = MemoryBlobStore::new();
        let mut digests = Vec::new();
        for _ in 0..copies {
            digests.push(store.put(&bytes, utc_day(2009, 1, 1)).unwrap().digest);
        }
        prop_assert!(digests.iter().all(|d| *d == digests[0]));
        prop_assert_eq!(store.len(), 1);
        let back = store.get(&digests[0]).unwrap();
        prop_assert_eq!(sha256_hex(&back), digests[0].clone());
        prop_assert_eq!(back, bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn replay_is_a_fold(p in picks(), cut in any::<prop::sample::Index>()) {
        let events = valid_events(&p);
        let whole = Lifecycle::replay(&events).unwrap();
        let k = if events.is_empty() { 0 } else { cut.index(events.len() + 1) };
        let mut split = Lifecycle::replay(&events[..k]).unwrap();
        split.extend(&events[k..]).unwrap();
        prop_assert_eq!(&split, &whole);
        prop_assert_eq!(whole.audit().len(), events.len());
        prop_assert_eq!(replay(&events).unwrap(), whole.state());
    }

    #[test]
    fn terminal_states_absorb(p in picks()) {
        let events = valid_events(&p);
        let lc = Lifecycle::replay(&events).unwrap();
        if lc.state().is_terminal() {
            for k in EventKind::ALL {
                for r in Role::ALL {
                    prop_assert!(lc.clone().apply(event(k, r, 10_000)).is_err());
                }
            }
        }
    }

    #[test]
    fn submission_is_final(p in picks()) {
        let events = valid_events(&p);
        let mut seen_submit = false;
        for e in &events {
            prop_assert!(!(seen_submit && e.kind.mutates_notification()), "{} after submit", e.kind);
            seen_submit |= e.kind == EventKind::SubmitNotification;
        }
    }

    #[test]
    fn investigation_only_after_approval(p in picks()) {
        let events = valid_events(&p);
        let lc = Lifecycle::replay(&events).unwrap();
        let mut approved = false;
        for rec in lc.audit() {
            if rec.event.kind.is_investigation_event() {
                prop_assert!(approved);
            }
            approved |= rec.to == CivState::Evaluation(medis_core::lifecycle::EvaluationStatus::Approved);
        }
    }

    #[test]
    fn apply_is_deterministic(s in select(CivState::ALL.to_vec()), r in select(Role::ALL.to_vec()), k in select(EventKind::ALL.to_vec())) {
        let a = Lifecycle::starting_at(s).apply(event(k, r, 0)).map(|rec| rec.to);
        let b = Lifecycle::starting_at(s).apply(event(k, r, 0)).map(|rec| rec.to);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.is_ok(), allowed_actions(s, r).contains(&k));
        prop_assert_eq!(a.is_ok(), is_action_permitted(s, r, k).permitted);
    }
}

fn corpus() -> &'static (Medis, Vec<Flat>) {
    static CORPUS: OnceLock<(Medis, Vec<Flat>)> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let (medis, _, _) = run(&fixtures::random(150, 99));
        let flats = medis.repository().all().iter().filter_map(|d| Flat::of(d)).collect();
        (medis, flats)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn search_matches_oracle(seed in any::<u64>()) {
        use rand::SeedableRng;
        let (medis, flats) = corpus();
        let q = common::random_query(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let s = staff(medis, "sup");
        let mut got: Vec<String> = medis.search(&s, &q).unwrap().into_iter().map(|r| r.code).collect();
        let mut want: Vec<String> = flats.iter().filter(|f| oracle(f, &q)).map(|f| f.code.clone()).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
        prop_assert_eq!(Query::from_query_string(&q.to_query_string()).unwrap(), q);
    }

    #[test]
    fn export_round_trips(i in 0usize..150) {
        let (medis, _) = corpus();
        let all = medis.repository().all();
        let d = &all[i % all.len()];
        let xml = export_dossier(d);
        let back = decode_dossier(xml.as_bytes()).unwrap();
        prop_assert_eq!(&back, d.as_ref());
        prop_assert_eq!(export_dossier(&back), xml);
    }

    #[test]
    fn forms_round_trip(i in 0usize..150) {
        let (medis, _) = corpus();
        let all = medis.repository().all();
        let d = &all[i % all.len()];
        let form = d.notification.form();
        let civ = civ_from_form(form).unwrap();
        prop_assert_eq!(&civ_from_form(&civ_to_form(&civ)).unwrap().device, &civ.device);
        prop_assert_eq!(&parse_form_text(&render_form_text(form)).unwrap(), form);
    }
}
