use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::model::ProtocolCode;

/// Next code after the already issued ones for `(prefix, year)`.
pub fn next_protocol_code<'a, I>(prefix: &str, year: i32, issued: I) -> ProtocolCode
where
    I: IntoIterator<Item = &'a ProtocolCode>,
{
    let max = issued
        .into_iter()
        .filter(|c| c.prefix == prefix && c.year == year)
        .map(|c| c.seq)
        .max()
        .unwrap_or(0);
    ProtocolCode { prefix: prefix.to_owned(), seq: max + 1, year }
}

/// Serialized per-year counters. Each call to [`CodeAllocator::issue`] takes
/// the lock, so concurrent callers always receive distinct, dense sequence numbers.
#[derive(Debug, Default)]
pub struct CodeAllocator {
    prefix: String,
    counters: Mutex<BTreeMap<i32, u32>>,
}

impl CodeAllocator {
    pub fn new(prefix: impl Into<String>) -> Self {
        CodeAllocator { prefix: prefix.into(), counters: Mutex::default() }
    }

    pub fn with_counters(prefix: impl Into<String>, counters: BTreeMap<i32, u32>) -> Self {
        CodeAllocator { prefix: prefix.into(), counters: Mutex::new(counters) }
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn issue(&self, year: i32) -> ProtocolCode {
        let mut counters = self.counters.lock().unwrap_or_else(|e| e.into_inner());
        let seq = counters.entry(year).or_default();
        *seq += 1;
        ProtocolCode { prefix: self.prefix.clone(), seq: *seq, year }
    }

    /// Returns a reserved code to the pool if it is still the latest one.
    pub fn release(&self, code: &ProtocolCode) -> bool {
        let mut counters = self.counters.lock().unwrap_or_else(|e| e.into_inner());
        match counters.get_mut(&code.year) {
            Some(seq) if *seq == code.seq && code.prefix == self.prefix => {
                *seq -= 1;
                true
            }
            _ => false,
        }
    }

    /// Raises the counter so that `code` is never issued again.
    pub fn observe(&self, code: &ProtocolCode) {
        if code.prefix != self.prefix {
            return;
        }
        let mut counters = self.counters.lock().unwrap_or_else(|e| e.into_inner());
        let seq = counters.entry(code.year).or_default();
        *seq = (*seq).max(code.seq);
    }

    pub fn counters(&self) -> BTreeMap<i32, u32> {
        self.counters.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}
