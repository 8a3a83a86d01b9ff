//! Controlled vocabularies loaded from `code<TAB>label<TAB>parent?` files.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabularyError {
    #[error("{scheme}:{line}: {message}")]
    Parse { scheme: String, line: usize, message: String },
    #[error("unknown vocabulary scheme `{0}`")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VocabularyEntry {
    pub scheme: String,
    pub code: String,
    pub label: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    scheme: String,
    entries: Vec<VocabularyEntry>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn parse(scheme: &str, text: &str) -> Result<Self, VocabularyError> {
        let mut entries = Vec::new();
        let mut index = BTreeMap::new();
        let err = |line, message: String| VocabularyError::Parse { scheme: scheme.to_owned(), line, message };
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let mut cols = raw.split('\t');
            let code = cols.next().unwrap_or_default().trim();
            let label = cols.next().map(str::trim).ok_or_else(|| err(i + 1, "expected code<TAB>label".into()))?;
            let parent = cols.next().map(str::trim).filter(|p| !p.is_empty()).map(str::to_owned);
            if code.is_empty() || label.is_empty() {
                return Err(err(i + 1, "code and label must not be empty".into()));
            }
            if index.insert(code.to_owned(), entries.len()).is_some() {
                return Err(err(i + 1, format!("duplicate code `{code}`")));
            }
            entries.push(VocabularyEntry { scheme: scheme.to_owned(), code: code.to_owned(), label: label.to_owned(), parent });
        }
        for e in &entries {
            if let Some(p) = &e.parent {
                if !index.contains_key(p) {
                    return Err(err(0, format!("`{}` has unknown parent `{p}`", e.code)));
                }
            }
        }
        Ok(Vocabulary { scheme: scheme.to_owned(), entries, index })
    }

    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn entries(&self) -> &[VocabularyEntry] {
        &self.entries
    }

    pub fn get(&self, code: &str) -> Option<&VocabularyEntry> {
        self.index.get(code).map(|&i| &self.entries[i])
    }

    pub fn has_hierarchy(&self) -> bool {
        self.entries.iter().any(|e| e.parent.is_some())
    }

    /// Entry whose code or label equals `term`, ignoring case.
    pub fn resolve(&self, term: &str) -> Option<&VocabularyEntry> {
        let t = term.trim().to_lowercase();
        self.get(term.trim())
            .or_else(|| self.entries.iter().find(|e| e.code.to_lowercase() == t || e.label.to_lowercase() == t))
    }

    /// `code` and every code below it.
    pub fn descendants(&self, code: &str) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = BTreeSet::new();
        if let Some(e) = self.get(code) {
            out.insert(&e.code);
        }
        loop {
            let before = out.len();
            for e in &self.entries {
                if e.parent.as_deref().is_some_and(|p| out.contains(p)) {
                    out.insert(&e.code);
                }
            }
            if out.len() == before {
                return out;
            }
        }
    }

    /// Exact code first, then code-prefix matches, then label substrings;
    /// at most `limit` entries. An empty needle yields nothing.
    pub fn lookup(&self, needle: &str, limit: usize) -> Vec<&VocabularyEntry> {
        let needle = needle.trim();
        if needle.is_empty() {
            return Vec::new();
        }
        let lower = needle.to_lowercase();
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let exact = self.get(needle).into_iter();
        let prefix = self.entries.iter().filter(|e| e.code.to_lowercase().starts_with(&lower));
        let label = self.entries.iter().filter(|e| e.label.to_lowercase().contains(&lower));
        for e in exact.chain(prefix).chain(label) {
            if out.len() == limit {
                break;
            }
            if seen.insert(&e.code) {
                out.push(e);
            }
        }
        out
    }
}

/// Named vocabularies; a reload swaps in a new immutable snapshot.
#[derive(Debug, Default)]
pub struct Vocabularies {
    current: RwLock<Arc<BTreeMap<String, Arc<Vocabulary>>>>,
}

pub const BUNDLED_VOCABULARIES: [(&str, &str); 2] = [
    ("cnd", include_str!("../../vocabularies/cnd.tsv")),
    ("anatomy", include_str!("../../vocabularies/anatomy.tsv")),
];

impl Vocabularies {
    pub fn bundled() -> Self {
        let v = Vocabularies::default();
        for (scheme, text) in BUNDLED_VOCABULARIES {
            v.install(Vocabulary::parse(scheme, text).expect("bundled vocabulary parses"));
        }
        v
    }

    pub fn install(&self, vocabulary: Vocabulary) {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        let mut next = (**guard).clone();
        next.insert(vocabulary.scheme.clone(), Arc::new(vocabulary));
        *guard = Arc::new(next);
    }

    pub fn get(&self, scheme: &str) -> Option<Arc<Vocabulary>> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).get(scheme).cloned()
    }

    pub fn schemes(&self) -> Vec<String> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    pub fn lookup(&self, scheme: &str, needle: &str, limit: usize) -> Result<Vec<VocabularyEntry>, VocabularyError> {
        let v = self.get(scheme).ok_or_else(|| VocabularyError::UnknownScheme(scheme.to_owned()))?;
        Ok(v.lookup(needle, limit).into_iter().cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "C\tCardiocirculatory devices\nC01\tVascular devices\tC\nC0104\tCoronary stents\tC01\nP\tProsthetic devices\n";

    #[test]
    fn exact_code_comes_first() {
        let v = Vocabulary::parse("cnd", TEXT).unwrap();
        let codes: Vec<_> = v.lookup("C01", 10).iter().map(|e| e.code.as_str()).collect();
        assert_eq!(codes, ["C01", "C0104"]);
        let codes: Vec<_> = v.lookup("devices", 2).iter().map(|e| e.code.as_str()).collect();
        assert_eq!(codes, ["C", "C01"]);
        assert!(v.lookup("  ", 10).is_empty());
    }

    #[test]
    fn hierarchy() {
        let v = Vocabulary::parse("cnd", TEXT).unwrap();
        assert_eq!(v.descendants("C").len(), 3);
        assert_eq!(v.resolve("vascular DEVICES").unwrap().code, "C01");
        assert!(Vocabulary::parse("x", "A\ta\tZ\n").is_err());
        assert!(Vocabulary::parse("x", "A\n").is_err());
    }

    #[test]
    fn bundled_schemes_load() {
        let v = Vocabularies::bundled();
        assert_eq!(v.schemes(), ["anatomy", "cnd"]);
        assert!(matches!(v.lookup("mesh", "x", 5), Err(VocabularyError::UnknownScheme(_))));
    }
}
