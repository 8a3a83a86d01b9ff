//! Content-addressed blob storage keyed by SHA-256.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::StoreError;
use crate::time::Timestamp;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn is_digest(text: &str) -> bool {
    text.len() == 64 && text.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredBlob {
    pub digest: String,
    pub size: u64,
    pub stored_at: Timestamp,
}

/// Blob stores are append-only: `put` of existing content is a no-op that
/// reports the original record.
pub trait BlobStore: Send + Sync {
    fn put(&self, bytes: &[u8], at: Timestamp) -> Result<StoredBlob, StoreError>;
    fn get(&self, digest: &str) -> Result<Vec<u8>, StoreError>;
    fn contains(&self, digest: &str) -> bool;
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Default)]
pub struct MemoryBlobStore {
    blobs: RwLock<HashMap<String, (Vec<u8>, Timestamp)>>,
}

impl MemoryBlobStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BlobStore for MemoryBlobStore {
    fn put(&self, bytes: &[u8], at: Timestamp) -> Result<StoredBlob, StoreError> {
        if bytes.is_empty() {
            return Err(StoreError::EmptyPayload);
        }
        let digest = sha256_hex(bytes);
        let mut blobs = self.blobs.write().unwrap_or_else(|e| e.into_inner());
        let (_, stored_at) = blobs.entry(digest.clone()).or_insert_with(|| (bytes.to_vec(), at));
        Ok(StoredBlob { digest, size: bytes.len() as u64, stored_at: *stored_at })
    }

    fn get(&self, digest: &str) -> Result<Vec<u8>, StoreError> {
        self.blobs
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(digest)
            .map(|(b, _)| b.clone())
            .ok_or_else(|| StoreError::UnknownBlob(digest.to_owned()))
    }

    fn contains(&self, digest: &str) -> bool {
        self.blobs.read().unwrap_or_else(|e| e.into_inner()).contains_key(digest)
    }

    fn len(&self) -> usize {
        self.blobs.read().unwrap_or_else(|e| e.into_inner()).len()
    }
}

/// Blobs under `<root>/objects/<first two hex>/<digest>`.
#[derive(Debug, Clone)]
pub struct FsBlobStore {
    root: PathBuf,
}

impl FsBlobStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("objects")).map_err(|e| StoreError::io(&root, e))?;
        Ok(FsBlobStore { root })
    }

    pub fn path_of(&self, digest: &str) -> PathBuf {
        self.root.join("objects").join(&digest[..2]).join(digest)
    }
}

fn mtime(path: &Path) -> Option<Timestamp> {
    fs::metadata(path).and_then(|m| m.modified()).ok().map(DateTime::<Utc>::from)
}

impl BlobStore for FsBlobStore {
    fn put(&self, bytes: &[u8], at: Timestamp) -> Result<StoredBlob, StoreError> {
        if bytes.is_empty() {
            return Err(StoreError::EmptyPayload);
        }
        let digest = sha256_hex(bytes);
        let path = self.path_of(&digest);
        let size = bytes.len() as u64;
        if path.exists() {
            return Ok(StoredBlob { stored_at: mtime(&path).unwrap_or(at), digest, size });
        }
        let dir = path.parent().expect("object path has a parent");
        fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        let mut tmp = tempfile_in(dir)?;
        tmp.1.write_all(bytes).and_then(|_| tmp.1.sync_all()).map_err(|e| StoreError::io(&tmp.0, e))?;
        // A concurrent writer may have won the race; either copy has identical content.
        fs::rename(&tmp.0, &path).map_err(|e| StoreError::io(&path, e))?;
        Ok(StoredBlob { digest, size, stored_at: at })
    }

    fn get(&self, digest: &str) -> Result<Vec<u8>, StoreError> {
        if !is_digest(digest) {
            return Err(StoreError::UnknownBlob(digest.to_owned()));
        }
        let path = self.path_of(digest);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::UnknownBlob(digest.to_owned())),
            Err(e) => return Err(StoreError::io(&path, e)),
        };
        if sha256_hex(&bytes) != digest {
            return Err(StoreError::CorruptBlob(digest.to_owned()));
        }
        Ok(bytes)
    }

    fn contains(&self, digest: &str) -> bool {
        is_digest(digest) && self.path_of(digest).is_file()
    }

    fn len(&self) -> usize {
        let Ok(dirs) = fs::read_dir(self.root.join("objects")) else { return 0 };
        dirs.flatten()
            .filter_map(|d| fs::read_dir(d.path()).ok())
            .flat_map(|files| files.flatten())
            .filter(|f| is_digest(&f.file_name().to_string_lossy()))
            .count()
    }
}

fn tempfile_in(dir: &Path) -> Result<(PathBuf, fs::File), StoreError> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    loop {
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = dir.join(format!(".tmp-{}-{n}", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => return Ok((path, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(StoreError::io(&path, e)),
        }
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    let (tmp, mut file) = tempfile_in(dir)?;
    file.write_all(bytes).and_then(|_| file.sync_all()).map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

const EXTENSIONS: [(&str, &str); 9] = [
    ("pdf", "application/pdf"),
    ("txt", "text/plain"),
    ("form", "text/plain"),
    ("xml", "application/xml"),
    ("png", "image/png"),
    ("jpg", "image/jpeg"),
    ("jpeg", "image/jpeg"),
    ("doc", "application/msword"),
    ("docx", "application/vnd.openxmlformats-officedocument.wordprocessingml.document"),
];

/// Media type implied by a file name's extension, if it is one we know.
pub fn media_type_for_name(name: &str) -> Option<&'static str> {
    let (_, ext) = name.rsplit_once('.')?;
    let ext = ext.to_ascii_lowercase();
    EXTENSIONS.iter().find(|(e, _)| *e == ext).map(|(_, m)| *m)
}

/// Media types accepted for upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaPolicy {
    pub allowed: BTreeSet<String>,
}

impl Default for MediaPolicy {
    fn default() -> Self {
        MediaPolicy {
            allowed: ["application/pdf", "text/plain", "application/xml", "image/png", "image/jpeg"]
                .into_iter()
                .map(str::to_owned)
                .collect(),
        }
    }
}

impl MediaPolicy {
    pub fn check(&self, media_type: &str) -> Result<(), StoreError> {
        if self.allowed.contains(media_type) {
            Ok(())
        } else {
            Err(StoreError::MediaTypeNotAllowed(media_type.to_owned()))
        }
    }
}
