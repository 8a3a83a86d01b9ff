use std::collections::BTreeSet;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use chrono::{TimeZone, Utc};
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::lifecycle::Actor;
use crate::model::{PartyId, Role};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Internal,
    ExternalSso,
}

/// An authenticated caller. Immutable once issued.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub party: PartyId,
    pub roles: BTreeSet<Role>,
    pub origin: Origin,
    pub expires_at: Timestamp,
}

impl Session {
    pub fn is_expired(&self, now: Timestamp) -> bool {
        now >= self.expires_at
    }

    pub fn holds(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }

    pub fn is_external(&self) -> bool {
        self.origin == Origin::ExternalSso
    }

    /// The first held role among `candidates`, as an actor.
    pub fn actor_among(&self, candidates: &[Role]) -> Option<Actor> {
        candidates.iter().find(|r| self.holds(**r)).map(|r| Actor::new(self.party.clone(), *r))
    }

    pub fn actor(&self, role: Role) -> Option<Actor> {
        self.actor_among(&[role])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Credential {
    Basic { login: String, password: String },
    Bearer(String),
}

impl Credential {
    /// Parses an HTTP `Authorization` header value.
    pub fn from_header(value: &str) -> Option<Self> {
        let (scheme, rest) = value.trim().split_once(' ')?;
        match scheme.to_ascii_lowercase().as_str() {
            "bearer" => Some(Credential::Bearer(rest.trim().to_owned())),
            "basic" => {
                let raw = base64::engine::general_purpose::STANDARD.decode(rest.trim()).ok()?;
                let text = String::from_utf8(raw).ok()?;
                let (login, password) = text.split_once(':')?;
                Some(Credential::Basic { login: login.to_owned(), password: password.to_owned() })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("malformed token")]
    Malformed,
    #[error("token signature does not verify")]
    BadSignature,
    #[error("token expired at {0}")]
    Expired(Timestamp),
}

/// Verifies identity tokens issued by the external single sign-on portal.
pub trait SsoVerifier: Send + Sync {
    fn verify(&self, token: &str, now: Timestamp) -> Result<(PartyId, Timestamp), TokenError>;
}

/// Stand-in for the portal: `base64url(party|expiry).base64url(hmac)`.
#[derive(Clone)]
pub struct HmacSso {
    key: Vec<u8>,
}

impl std::fmt::Debug for HmacSso {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HmacSso").finish_non_exhaustive()
    }
}

impl HmacSso {
    pub fn new(key: impl Into<Vec<u8>>) -> Self {
        HmacSso { key: key.into() }
    }

    fn mac(&self, payload: &[u8]) -> Vec<u8> {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.key).expect("hmac accepts any key length");
        mac.update(payload);
        mac.finalize().into_bytes().to_vec()
    }

    pub fn issue(&self, party: &PartyId, expires_at: Timestamp) -> String {
        let payload = format!("{party}|{}", expires_at.timestamp());
        format!("{}.{}", URL_SAFE_NO_PAD.encode(&payload), URL_SAFE_NO_PAD.encode(self.mac(payload.as_bytes())))
    }
}

impl SsoVerifier for HmacSso {
    fn verify(&self, token: &str, now: Timestamp) -> Result<(PartyId, Timestamp), TokenError> {
        let (payload, sig) = token.split_once('.').ok_or(TokenError::Malformed)?;
        let payload = URL_SAFE_NO_PAD.decode(payload).map_err(|_| TokenError::Malformed)?;
        let sig = URL_SAFE_NO_PAD.decode(sig).map_err(|_| TokenError::Malformed)?;
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.key).expect("hmac accepts any key length");
        mac.update(&payload);
        mac.verify_slice(&sig).map_err(|_| TokenError::BadSignature)?;
        let text = String::from_utf8(payload).map_err(|_| TokenError::Malformed)?;
        let (party, expiry) = text.rsplit_once('|').ok_or(TokenError::Malformed)?;
        let expiry: i64 = expiry.parse().map_err(|_| TokenError::Malformed)?;
        let expires_at = Utc.timestamp_opt(expiry, 0).single().ok_or(TokenError::Malformed)?;
        if party.is_empty() {
            return Err(TokenError::Malformed);
        }
        if now >= expires_at {
            return Err(TokenError::Expired(expires_at));
        }
        Ok((PartyId::from(party), expires_at))
    }
}

/// Salted password digest for internal accounts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasswordHash {
    pub salt: String,
    pub digest: String,
}

impl PasswordHash {
    pub fn new(password: &str, salt: &str) -> Self {
        PasswordHash { salt: salt.to_owned(), digest: Self::digest(password, salt) }
    }

    fn digest(password: &str, salt: &str) -> String {
        let mut mac = Hmac::<Sha256>::new_from_slice(salt.as_bytes()).expect("hmac accepts any key length");
        mac.update(password.as_bytes());
        hex::encode(mac.finalize().into_bytes())
    }

    pub fn matches(&self, password: &str) -> bool {
        let mut mac = Hmac::<Sha256>::new_from_slice(self.salt.as_bytes()).expect("hmac accepts any key length");
        mac.update(password.as_bytes());
        hex::decode(&self.digest).is_ok_and(|d| mac.verify_slice(&d).is_ok())
    }
}
