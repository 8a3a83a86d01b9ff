//! Canonical XML export and import, archival rendering, controlled
//! vocabularies and registry extracts.

mod archival;
mod codec;
mod extract;
mod vocabulary;
pub mod xml;

pub use archival::{
    render_archival, render_pages, verify_archival, ArchivalDocument, HmacSigner, Signature, Signer, SignerError,
};
pub use codec::{decode_dossier, export_dossier, export_dossier_view, import_dossier, ExportView, ImportError, SCHEMA_VERSION};
pub use extract::{registry_extract, ExtractError, RegistryExtract};
pub use vocabulary::{Vocabularies, Vocabulary, VocabularyEntry, VocabularyError, BUNDLED_VOCABULARIES};
pub use xml::SchemaError;

/// XML Schema describing [`export_dossier`] output.
pub const DOSSIER_XSD: &str = include_str!("../../schema/dossier.xsd");
