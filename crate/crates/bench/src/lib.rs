//! Shared setup for the benchmarks.

use std::sync::Arc;

use medis_core::scenario::{self, Script};
use medis_core::time::{utc_day, ManualClock};
use medis_core::{fixtures, Config, Medis, Session};

/// A service replayed from `script`.
pub fn replayed(script: &Script) -> Medis {
    let clock = Arc::new(ManualClock::new(utc_day(2008, 1, 1)));
    let medis = Medis::with_clock(Config::default(), clock.clone()).expect("in-memory service");
    scenario::run(&medis, &clock, script).expect("fixture replays");
    medis
}

/// The random corpus with `n` dossiers and its supervisor session.
pub fn corpus(n: usize) -> (Medis, Session) {
    let medis = replayed(&fixtures::random(n, 42));
    let sup = medis.session_for(&"sup".into()).expect("fixture supervisor");
    (medis, sup)
}
