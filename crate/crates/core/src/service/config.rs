use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::ServiceError;
use crate::model::DEFAULT_CODE_PREFIX;

/// Service configuration. Loaded from a TOML file, then overridden by
/// `MEDIS_*` environment variables.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root of the three stores. `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub code_prefix: String,
    /// Directory holding `document-types.tsv`, `communication-types.tsv`
    /// and `risk-classes.tsv`. Bundled catalogs are used when absent.
    pub catalogs_dir: Option<PathBuf>,
    /// Extra vocabulary files, `<scheme>.tsv`.
    pub vocabularies_dir: Option<PathBuf>,
    pub sso_key: String,
    pub signer_key_id: String,
    pub signer_key: String,
    pub require_tls: bool,
    pub session_hours: i64,
    pub listen: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: None,
            code_prefix: DEFAULT_CODE_PREFIX.to_owned(),
            catalogs_dir: None,
            vocabularies_dir: None,
            sso_key: "development-sso-key".to_owned(),
            signer_key_id: "nca-1".to_owned(),
            signer_key: "development-signing-key".to_owned(),
            require_tls: false,
            session_hours: 8,
            listen: "127.0.0.1:8080".to_owned(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies `MEDIS_<FIELD>` overrides from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ServiceError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        for (key, value) in vars {
            let Some(field) = key.as_ref().strip_prefix("MEDIS_") else { continue };
            let value: String = value.into();
            let bad = |what: &str| ServiceError::Config(format!("MEDIS_{field}: expected {what}, got `{value}`"));
            match field {
                "DATA_DIR" => self.data_dir = Some(value.clone().into()),
                "CODE_PREFIX" => self.code_prefix = value.clone(),
                "CATALOGS_DIR" => self.catalogs_dir = Some(value.clone().into()),
                "VOCABULARIES_DIR" => self.vocabularies_dir = Some(value.clone().into()),
                "SSO_KEY" => self.sso_key = value.clone(),
                "SIGNER_KEY_ID" => self.signer_key_id = value.clone(),
                "SIGNER_KEY" => self.signer_key = value.clone(),
                "REQUIRE_TLS" => {
                    self.require_tls = match value.as_str() {
                        "1" | "true" | "yes" => true,
                        "0" | "false" | "no" => false,
                        _ => return Err(bad("a boolean")),
                    }
                }
                "SESSION_HOURS" => self.session_hours = value.parse().map_err(|_| bad("an integer"))?,
                "LISTEN" => self.listen = value.clone(),
                _ => {}
            }
        }
        Ok(())
    }

    /// File (if any) plus the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Config::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }
}
