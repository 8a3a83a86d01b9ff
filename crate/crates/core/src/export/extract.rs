use serde::Serialize;

use crate::model::{DeviceVariant, Dossier};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("dossier {0} has not been submitted")]
    Draft(String),
}

/// Interchange summary of a submitted investigation. The field set and its
/// order are fixed; absent values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegistryExtract {
    pub trial_id: String,
    pub submitted_on: String,
    pub sponsor: String,
    pub applicant_role: String,
    pub title: Option<String>,
    pub design: Option<String>,
    pub multicentric: Option<bool>,
    pub population: Vec<String>,
    pub site_names: Vec<String>,
    pub site_countries: Vec<String>,
    pub product_type: Option<String>,
    pub device_names: Vec<String>,
    pub risk_classes: Vec<String>,
    pub comparator: Option<String>,
    pub application_field: Option<String>,
    pub investigated_intended_use: Option<String>,
    pub state: String,
    pub start: Option<String>,
    pub end: Option<String>,
    pub early_termination: Option<String>,
}

impl RegistryExtract {
    pub const FIELDS: [&'static str; 20] = [
        "trial_id",
        "submitted_on",
        "sponsor",
        "applicant_role",
        "title",
        "design",
        "multicentric",
        "population",
        "site_names",
        "site_countries",
        "product_type",
        "device_names",
        "risk_classes",
        "comparator",
        "application_field",
        "investigated_intended_use",
        "state",
        "start",
        "end",
        "early_termination",
    ];

    /// `field<TAB>value` lines in field order; lists joined with `; `.
    pub fn to_tsv(&self) -> String {
        let json = serde_json::to_value(self).expect("extract serializes");
        let mut out = String::new();
        for f in Self::FIELDS {
            let v = match &json[f] {
                serde_json::Value::Null => String::new(),
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(items) => {
                    items.iter().map(|i| i.as_str().unwrap_or_default().to_owned()).collect::<Vec<_>>().join("; ")
                }
                other => other.to_string(),
            };
            out.push_str(&format!("{f}\t{v}\n"));
        }
        out
    }
}

pub fn registry_extract(d: &Dossier) -> Result<RegistryExtract, ExtractError> {
    let (Some(code), Some(submitted)) = (d.code(), d.notification.submitted_at()) else {
        return Err(ExtractError::Draft(d.id.to_string()));
    };
    let civ = d.civ.as_ref();
    let devices = civ.map(|c| c.device.devices()).unwrap_or_default();
    let mut classes: Vec<String> = devices.iter().map(|x| x.risk_class.clone()).collect();
    classes.sort();
    classes.dedup();
    let date = |x: Option<chrono::NaiveDate>| x.map(|d| d.to_string());
    Ok(RegistryExtract {
        trial_id: code.to_string(),
        submitted_on: submitted.date_naive().to_string(),
        sponsor: d.notification.manufacturer.name.clone(),
        applicant_role: d.notification.applicant_role.to_string(),
        title: civ.map(|c| c.title.clone()),
        design: civ.and_then(|c| c.design).map(|x| x.to_string()),
        multicentric: civ.map(|c| c.multicentric),
        population: civ.map(|c| c.population.iter().cloned().collect()).unwrap_or_default(),
        site_names: civ.map(|c| c.sites.iter().map(|s| s.name.clone()).collect()).unwrap_or_default(),
        site_countries: civ.map(|c| c.sites.iter().map(|s| s.country.clone()).collect()).unwrap_or_default(),
        product_type: civ.map(|c| match c.device.variant {
            DeviceVariant::Single(_) => "device".to_owned(),
            DeviceVariant::Kit(_) => "kit".to_owned(),
        }),
        device_names: civ.map(|c| c.device.product_names().into_iter().map(str::to_owned).collect()).unwrap_or_default(),
        risk_classes: classes,
        comparator: civ.and_then(|c| c.comparator.as_ref()).and_then(|c| {
            c.device.as_ref().map(|x| x.name.clone()).or_else(|| c.drug.as_ref().map(|x| x.name.clone()))
        }),
        application_field: civ.and_then(|c| c.application_field.clone()),
        investigated_intended_use: civ.and_then(|c| c.investigated_intended_use.clone()),
        state: d.state().to_string(),
        start: date(civ.and_then(|c| c.milestones.start)),
        end: date(civ.and_then(|c| c.milestones.end)),
        early_termination: date(civ.and_then(|c| c.milestones.early_termination)),
    })
}
