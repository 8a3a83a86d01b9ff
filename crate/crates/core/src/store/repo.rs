use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use super::blob::{write_atomic, BlobStore, FsBlobStore, MediaPolicy, MemoryBlobStore};
use super::ops::{IdSource, SequentialIds, StoreContext};
use super::{try_new_dossier, StoreError};
use crate::intake::CodeAllocator;
use crate::lifecycle::Actor;
use crate::model::{Catalogs, CommunicationId, DocumentId, Dossier, DossierId, Notification, ProtocolCode, DEFAULT_CODE_PREFIX};
use crate::time::Timestamp;

#[derive(Debug, Clone)]
pub struct RepositoryConfig {
    pub code_prefix: String,
    pub catalogs: Arc<Catalogs>,
    pub media: MediaPolicy,
}

impl Default for RepositoryConfig {
    fn default() -> Self {
        RepositoryConfig {
            code_prefix: DEFAULT_CODE_PREFIX.to_owned(),
            catalogs: Arc::new(Catalogs::default()),
            media: MediaPolicy::default(),
        }
    }
}

struct Slot {
    current: RwLock<Arc<Dossier>>,
    writer: Mutex<()>,
}

impl Slot {
    fn new(dossier: Dossier) -> Arc<Self> {
        Arc::new(Slot { current: RwLock::new(Arc::new(dossier)), writer: Mutex::new(()) })
    }

    fn snapshot(&self) -> Arc<Dossier> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }
}

/// All dossiers, with copy-on-write snapshots for readers and one writer at a
/// time per dossier. With a root directory every committed change is written
/// to `<root>/dossiers/<id>.json` before it becomes visible.
pub struct Repository {
    root: Option<PathBuf>,
    config: RepositoryConfig,
    slots: RwLock<BTreeMap<DossierId, Arc<Slot>>>,
    next_dossier: AtomicU64,
    ids: SequentialIds,
    blobs: Arc<dyn BlobStore>,
    codes: CodeAllocator,
}

fn numeric_suffix(id: &str, prefix: &str) -> u64 {
    id.strip_prefix(prefix).and_then(|n| n.parse().ok()).unwrap_or(0)
}

impl Repository {
    pub fn in_memory(config: RepositoryConfig) -> Self {
        Self::with_blobs(None, config, Arc::new(MemoryBlobStore::new()), Vec::new())
    }

    /// Opens (creating if needed) a store directory and loads every dossier.
    pub fn open(root: impl Into<PathBuf>, config: RepositoryConfig) -> Result<Self, StoreError> {
        let root = root.into();
        let blobs = Arc::new(FsBlobStore::open(&root)?);
        let dir = root.join("dossiers");
        fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        let mut dossiers = Vec::new();
        let mut entries: Vec<_> = fs::read_dir(&dir)
            .map_err(|e| StoreError::io(&dir, e))?
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        entries.sort();
        for path in entries {
            let text = fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))?;
            let dossier: Dossier = serde_json::from_str(&text)
                .map_err(|e| StoreError::Format { path: path.clone(), message: e.to_string() })?;
            dossiers.push(dossier);
        }
        Ok(Self::with_blobs(Some(root), config, blobs, dossiers))
    }

    fn with_blobs(
        root: Option<PathBuf>,
        config: RepositoryConfig,
        blobs: Arc<dyn BlobStore>,
        dossiers: Vec<Dossier>,
    ) -> Self {
        let codes = CodeAllocator::new(config.code_prefix.clone());
        let (mut max_dsr, mut max_doc, mut max_com) = (0, 0, 0);
        let mut slots = BTreeMap::new();
        for d in dossiers {
            max_dsr = max_dsr.max(numeric_suffix(d.id.as_str(), "dsr-"));
            for doc in &d.documents {
                max_doc = max_doc.max(numeric_suffix(doc.id.as_str(), "doc-"));
            }
            for c in &d.communications {
                max_com = max_com.max(numeric_suffix(c.id.as_str(), "com-"));
            }
            if let Some(code) = d.code() {
                codes.observe(code);
            }
            slots.insert(d.id.clone(), Slot::new(d));
        }
        Repository {
            root,
            config,
            slots: RwLock::new(slots),
            next_dossier: AtomicU64::new(max_dsr),
            ids: SequentialIds::starting_after(max_doc, max_com),
            blobs,
            codes,
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn config(&self) -> &RepositoryConfig {
        &self.config
    }

    pub fn catalogs(&self) -> &Catalogs {
        &self.config.catalogs
    }

    pub fn blobs(&self) -> &dyn BlobStore {
        self.blobs.as_ref()
    }

    pub fn codes(&self) -> &CodeAllocator {
        &self.codes
    }

    pub fn context(&self) -> StoreContext<'_> {
        StoreContext { catalogs: &self.config.catalogs, blobs: self.blobs.as_ref(), ids: &self.ids, media: &self.config.media }
    }

    fn persist(&self, dossier: &Dossier) -> Result<(), StoreError> {
        let Some(root) = &self.root else { return Ok(()) };
        let path = root.join("dossiers").join(format!("{}.json", dossier.id));
        let json = serde_json::to_vec_pretty(dossier).expect("dossiers serialize");
        write_atomic(&path, &json)
    }

    /// Opens a new draft dossier on behalf of `actor`.
    pub fn create(&self, notification: Notification, actor: &Actor, at: Timestamp) -> Result<Arc<Dossier>, StoreError> {
        let id = DossierId::from(format!("dsr-{}", self.next_dossier.fetch_add(1, Ordering::SeqCst) + 1));
        let dossier = try_new_dossier(id, notification, actor, at)?;
        self.insert(dossier)
    }

    /// Adds a complete dossier, as produced by an import.
    pub fn insert(&self, dossier: Dossier) -> Result<Arc<Dossier>, StoreError> {
        let mut slots = self.slots.write().unwrap_or_else(|e| e.into_inner());
        if slots.contains_key(&dossier.id) {
            return Err(StoreError::DuplicateDossier(dossier.id.to_string()));
        }
        self.persist(&dossier)?;
        self.next_dossier.fetch_max(numeric_suffix(dossier.id.as_str(), "dsr-"), Ordering::SeqCst);
        if let Some(code) = dossier.code() {
            self.codes.observe(code);
        }
        let slot = Slot::new(dossier);
        let snapshot = slot.snapshot();
        slots.insert(snapshot.id.clone(), slot);
        Ok(snapshot)
    }

    pub fn get(&self, id: &DossierId) -> Option<Arc<Dossier>> {
        self.slots.read().unwrap_or_else(|e| e.into_inner()).get(id).map(|s| s.snapshot())
    }

    pub fn find_by_code(&self, code: &ProtocolCode) -> Option<Arc<Dossier>> {
        self.all().into_iter().find(|d| d.code() == Some(code))
    }

    /// Resolves a protocol code or a storage id.
    pub fn resolve(&self, key: &str) -> Option<Arc<Dossier>> {
        if let Ok(code) = key.parse::<ProtocolCode>() {
            if let Some(d) = self.find_by_code(&code) {
                return Some(d);
            }
        }
        self.get(&DossierId::from(key))
    }

    /// Snapshot of every dossier.
    pub fn all(&self) -> Vec<Arc<Dossier>> {
        self.slots.read().unwrap_or_else(|e| e.into_inner()).values().map(|s| s.snapshot()).collect()
    }

    pub fn len(&self) -> usize {
        self.slots.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies `f` to a private copy of the dossier and publishes the result
    /// only if `f` succeeds and the copy is persisted. Concurrent updates of
    /// the same dossier are serialized; readers keep their snapshots.
    pub fn update<T, E, F>(&self, id: &DossierId, f: F) -> Result<(T, Arc<Dossier>), E>
    where
        E: From<StoreError>,
        F: FnOnce(&mut Dossier, StoreContext<'_>) -> Result<T, E>,
    {
        let slot = self
            .slots
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownDossier(id.to_string()))?;
        let _writer = slot.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut draft = (*slot.snapshot()).clone();
        let value = f(&mut draft, self.context())?;
        self.persist(&draft)?;
        let published = Arc::new(draft);
        *slot.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::clone(&published);
        Ok((value, published))
    }

    pub fn fresh_document_id(&self) -> DocumentId {
        self.ids.document_id()
    }

    pub fn fresh_communication_id(&self) -> CommunicationId {
        self.ids.communication_id()
    }
}

/// Exclusive marker held while a process serves a store directory.
#[derive(Debug)]
pub struct LockFile {
    path: PathBuf,
}

impl LockFile {
    pub const NAME: &'static str = "medis.lock";

    pub fn acquire(root: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(root).map_err(|e| StoreError::io(root, e))?;
        let path = root.join(Self::NAME);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(LockFile { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(StoreError::Locked(root.to_owned())),
            Err(e) => Err(StoreError::io(&path, e)),
        }
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
