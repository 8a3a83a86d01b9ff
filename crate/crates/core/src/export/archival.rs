//! Deterministic archival rendering of form data, with a detached signature.

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::intake::render_form_text;
use crate::model::FormData;
use crate::store::sha256_hex;

pub const LINE_WIDTH: usize = 72;
pub const LINES_PER_PAGE: usize = 48;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignerError {
    #[error("signer unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub scheme: String,
    pub key_id: String,
    /// Lowercase hex.
    pub value: String,
}

pub trait Signer: Send + Sync {
    fn scheme(&self) -> &str;
    fn key_id(&self) -> &str;
    fn sign(&self, bytes: &[u8]) -> Result<Signature, SignerError>;
    fn verify(&self, bytes: &[u8], signature: &Signature) -> bool;
}

/// Keyed-hash signer for tests and single-site deployments.
#[derive(Clone)]
pub struct HmacSigner {
    key_id: String,
    key: Vec<u8>,
}

impl std::fmt::Debug for HmacSigner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HmacSigner").field("key_id", &self.key_id).finish_non_exhaustive()
    }
}

impl HmacSigner {
    pub const SCHEME: &'static str = "hmac-sha256";

    pub fn new(key_id: impl Into<String>, key: impl Into<Vec<u8>>) -> Self {
        HmacSigner { key_id: key_id.into(), key: key.into() }
    }

    fn mac(&self) -> Result<Hmac<Sha256>, SignerError> {
        if self.key.is_empty() {
            return Err(SignerError::Unavailable("empty signing key".into()));
        }
        Hmac::<Sha256>::new_from_slice(&self.key).map_err(|e| SignerError::Unavailable(e.to_string()))
    }
}

impl Signer for HmacSigner {
    fn scheme(&self) -> &str {
        Self::SCHEME
    }

    fn key_id(&self) -> &str {
        &self.key_id
    }

    fn sign(&self, bytes: &[u8]) -> Result<Signature, SignerError> {
        let mut mac = self.mac()?;
        mac.update(bytes);
        Ok(Signature {
            scheme: Self::SCHEME.to_owned(),
            key_id: self.key_id.clone(),
            value: hex::encode(mac.finalize().into_bytes()),
        })
    }

    fn verify(&self, bytes: &[u8], signature: &Signature) -> bool {
        if signature.scheme != Self::SCHEME || signature.key_id != self.key_id {
            return false;
        }
        let (Ok(mut mac), Ok(expected)) = (self.mac(), hex::decode(&signature.value)) else { return false };
        mac.update(bytes);
        mac.verify_slice(&expected).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivalDocument {
    #[serde(with = "text_bytes")]
    pub bytes: Vec<u8>,
    /// Digest of the canonical `key=value` rendering of the source form.
    pub source_digest: String,
    pub signature: Signature,
}

mod text_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&String::from_utf8_lossy(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        Ok(String::deserialize(d)?.into_bytes())
    }
}

fn wrap(line: &str, width: usize) -> Vec<String> {
    let chars: Vec<char> = line.chars().collect();
    if chars.is_empty() {
        return vec![String::new()];
    }
    chars.chunks(width).map(|c| c.iter().collect()).collect()
}

/// Plain-text pages: a title block, one `key: value` entry per field, lines
/// wrapped at [`LINE_WIDTH`] and pages of [`LINES_PER_PAGE`] body lines
/// separated by form feeds.
pub fn render_pages(title: &str, form: &FormData) -> String {
    let mut body = Vec::new();
    for (k, v) in form {
        let text = v.replace(['\r', '\n'], " ");
        body.extend(wrap(&format!("{k}: {text}"), LINE_WIDTH));
    }
    if body.is_empty() {
        body.push(String::new());
    }
    let pages: Vec<&[String]> = body.chunks(LINES_PER_PAGE).collect();
    let total = pages.len();
    let rule = "=".repeat(LINE_WIDTH);
    let mut out = String::new();
    for (i, page) in pages.iter().enumerate() {
        if i > 0 {
            out.push('\u{c}');
        }
        out.push_str(&rule);
        out.push('\n');
        for l in wrap(title, LINE_WIDTH) {
            out.push_str(&l);
            out.push('\n');
        }
        out.push_str(&rule);
        out.push('\n');
        for l in page.iter() {
            out.push_str(l);
            out.push('\n');
        }
        out.push_str(&format!("{:>width$}\n", format!("page {} of {total}", i + 1), width = LINE_WIDTH));
    }
    out
}

pub fn render_archival(title: &str, form: &FormData, signer: &dyn Signer) -> Result<ArchivalDocument, SignerError> {
    let bytes = render_pages(title, form).into_bytes();
    let signature = signer.sign(&bytes)?;
    Ok(ArchivalDocument { source_digest: sha256_hex(render_form_text(form).as_bytes()), bytes, signature })
}

pub fn verify_archival(doc: &ArchivalDocument, signer: &dyn Signer) -> bool {
    signer.verify(&doc.bytes, &doc.signature)
}
