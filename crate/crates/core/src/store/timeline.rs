use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::Dossier;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Document,
    Communication,
    StateChange,
}

impl EntryKind {
    pub const ALL: [EntryKind; 3] = [EntryKind::Document, EntryKind::Communication, EntryKind::StateChange];

    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Document => "document",
            EntryKind::Communication => "communication",
            EntryKind::StateChange => "state-change",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        EntryKind::ALL.into_iter().find(|k| k.as_str() == text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub at: Timestamp,
    pub kind: EntryKind,
    pub label: String,
    /// The entry's own id first, then the ids it links to.
    pub refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelineOptions {
    /// Empty means every kind.
    pub kinds: BTreeSet<EntryKind>,
    pub ascending: bool,
    pub include_internal: bool,
}

impl Default for TimelineOptions {
    fn default() -> Self {
        TimelineOptions { kinds: BTreeSet::new(), ascending: false, include_internal: true }
    }
}

impl TimelineOptions {
    pub fn documents() -> Self {
        TimelineOptions { kinds: [EntryKind::Document].into(), ..Self::default() }
    }

    fn wants(&self, kind: EntryKind) -> bool {
        self.kinds.is_empty() || self.kinds.contains(&kind)
    }
}

/// Listed documents, communications and state changes, newest first unless
/// `ascending` is set. Ties on the timestamp keep insertion order.
pub fn timeline(dossier: &Dossier, opts: &TimelineOptions) -> Vec<TimelineEntry> {
    let mut keyed: Vec<((Timestamp, EntryKind, usize), TimelineEntry)> = Vec::new();
    if opts.wants(EntryKind::Document) {
        for (i, d) in dossier.documents.iter().enumerate() {
            if !d.is_listed() || (d.internal && !opts.include_internal) {
                continue;
            }
            let refs = std::iter::once(d.id.to_string()).chain(d.associations.iter().map(|a| a.target.to_string()));
            keyed.push((
                (d.received_at, EntryKind::Document, i),
                TimelineEntry { at: d.received_at, kind: EntryKind::Document, label: d.label.clone(), refs: refs.collect() },
            ));
        }
    }
    if opts.wants(EntryKind::Communication) {
        for (i, c) in dossier.communications.iter().enumerate() {
            let refs = std::iter::once(c.id.to_string())
                .chain(c.attachments.iter().filter(|a| {
                    opts.include_internal || !dossier.document(a).is_some_and(|d| d.internal)
                }).map(ToString::to_string));
            keyed.push((
                (c.sent_at, EntryKind::Communication, i),
                TimelineEntry { at: c.sent_at, kind: EntryKind::Communication, label: c.subject.clone(), refs: refs.collect() },
            ));
        }
    }
    if opts.wants(EntryKind::StateChange) {
        for (i, r) in dossier.lifecycle.audit().iter().enumerate() {
            keyed.push((
                (r.event.at, EntryKind::StateChange, i),
                TimelineEntry {
                    at: r.event.at,
                    kind: EntryKind::StateChange,
                    label: format!("{}: {} -> {}", r.event.kind, r.from, r.to),
                    refs: Vec::new(),
                },
            ));
        }
    }
    keyed.sort_by_key(|k| k.0);
    if !opts.ascending {
        keyed.reverse();
    }
    keyed.into_iter().map(|(_, e)| e).collect()
}
