//! On-disk submission bundles: `notification.form` plus one file per
//! document named `<doctype-code>.<ext>`.

use std::fs;
use std::path::{Path, PathBuf};

use super::form::{parse_form_text, FormError};
use super::consistency_of;
use crate::model::{Catalogs, FormData, ValidationReport};
use crate::store::media_type_for_name;

pub const FORM_FILE: &str = "notification.form";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{FORM_FILE}: {0}")]
    Form(#[from] FormError),
    #[error("{0}: file name has no extension")]
    NoExtension(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleFile {
    pub file_name: String,
    pub doc_type: String,
    pub media_type: Option<&'static str>,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub form: FormData,
    pub files: Vec<BundleFile>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io { path: path.to_owned(), source }
}

pub fn read_bundle(dir: &Path) -> Result<Bundle, BundleError> {
    let form_path = dir.join(FORM_FILE);
    let form = parse_form_text(&fs::read_to_string(&form_path).map_err(io(&form_path))?)?;
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let entry = entry.map_err(io(dir))?;
        let path = entry.path();
        let file_name = entry.file_name().to_string_lossy().into_owned();
        if file_name == FORM_FILE || !path.is_file() {
            continue;
        }
        let (doc_type, _) = file_name.split_once('.').ok_or_else(|| BundleError::NoExtension(file_name.clone()))?;
        files.push(BundleFile {
            doc_type: doc_type.to_owned(),
            media_type: media_type_for_name(&file_name),
            bytes: fs::read(&path).map_err(io(&path))?,
            file_name,
        });
    }
    files.sort_by(|a, b| a.file_name.cmp(&b.file_name));
    Ok(Bundle { form, files })
}

/// Completeness and consistency of a bundle, with unknown document types and
/// unsupported media types reported as violations.
pub fn validate_bundle(bundle: &Bundle, catalogs: &Catalogs) -> ValidationReport {
    let mut report = match super::civ_from_form(&bundle.form) {
        Ok(civ) => consistency_of(&civ, catalogs),
        Err(e) => {
            let mut r = ValidationReport::default();
            r.push("form", e.to_string());
            r
        }
    };
    for f in &bundle.files {
        match catalogs.document_type(&f.doc_type) {
            None => report.push("document-type", format!("{}: unknown document type `{}`", f.file_name, f.doc_type)),
            Some(t) if t.system || t.internal => {
                report.push("document-type", format!("{}: `{}` cannot be uploaded by applicants", f.file_name, f.doc_type))
            }
            Some(_) => {}
        }
        if f.media_type.is_none() {
            report.push("media-type", format!("{}: unsupported file type", f.file_name));
        }
    }
    report.missing = catalogs
        .required_document_types()
        .filter(|t| !bundle.files.iter().any(|f| f.doc_type == t.code))
        .map(|t| t.code.clone())
        .collect();
    report
}
