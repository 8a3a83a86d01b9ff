//! Clinical investigation (CIV) monitoring for medical-device trials.
//!
//! The crate covers the full lifecycle of a notification: intake and sealing,
//! role-gated evaluation, investigation milestones, a digest-addressed dossier
//! with communication threads, faceted search and canonical export. The HTTP
//! host and operator CLI live in sibling crates and only wire these pieces
//! together.

/// Implements `Serialize`/`Deserialize` through `Display`/`FromStr`.
macro_rules! impl_serde_via_str {
    ($ty:ty) => {
        impl serde::Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> serde::Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let text = <std::borrow::Cow<'de, str> as serde::Deserialize>::deserialize(deserializer)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

pub mod evaluation;
pub mod export;
pub mod fixtures;
pub mod intake;
pub mod lifecycle;
pub mod model;
pub mod scenario;
pub mod search;
pub mod service;
pub mod store;
pub mod time;

pub use lifecycle::{CivState, EventKind, GuardTable, Lifecycle, LifecycleEvent};
pub use model::{Dossier, Document, Notification, Party, PartyId, Role};
pub use service::{Config, Medis, ServiceError, Session};
