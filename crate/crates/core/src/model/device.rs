//! Investigational products: devices, kits, comparators and their relations.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::catalog::Catalogs;
use super::{ModelError, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Drug {
    pub name: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CeMark {
    pub certificate_id: String,
    /// Intended use covered by the certificate. The investigated use is recorded on the CIV.
    pub intended_use: String,
    pub issued: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalDevice {
    pub name: String,
    pub risk_class: String,
    pub characteristics: BTreeSet<String>,
    /// National classification (CND) code.
    pub classification_code: Option<String>,
    pub anatomical_location: Option<String>,
    pub ce_mark: Option<CeMark>,
    pub releases_drug: Option<Drug>,
}

impl MedicalDevice {
    pub fn new(name: impl Into<String>, risk_class: impl Into<String>) -> Self {
        MedicalDevice {
            name: name.into(),
            risk_class: risk_class.into(),
            characteristics: BTreeSet::new(),
            classification_code: None,
            anatomical_location: None,
            ce_mark: None,
            releases_drug: None,
        }
    }

    fn validate_into(&self, path: &str, catalogs: &Catalogs, report: &mut ValidationReport) {
        if self.name.trim().is_empty() {
            report.push("device-name", format!("{path}: device name must not be empty"));
        }
        if !catalogs.has_risk_class(&self.risk_class) {
            report.push("risk-class", format!("{path}: unknown risk class `{}`", self.risk_class));
        }
        if let Some(ce) = &self.ce_mark {
            if ce.intended_use.trim().is_empty() {
                report.push("ce-mark-intended-use", format!("{path}: CE mark requires an intended use"));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum KitItem {
    Device(MedicalDevice),
    Component(Component),
}

impl KitItem {
    fn identity(&self) -> (u8, &str) {
        match self {
            KitItem::Device(d) => (0, d.name.as_str()),
            KitItem::Component(c) => (1, c.name.as_str()),
        }
    }

    pub fn name(&self) -> &str {
        self.identity().1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceVariant {
    Single(MedicalDevice),
    Kit(Vec<KitItem>),
}

/// Link to an already marketed device the investigational one resembles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityLink {
    pub marketed_device: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvestigationalDevice {
    pub variant: DeviceVariant,
    pub similar_to: Option<SimilarityLink>,
}

impl InvestigationalDevice {
    pub fn single(device: MedicalDevice) -> Self {
        InvestigationalDevice { variant: DeviceVariant::Single(device), similar_to: None }
    }

    pub fn kit(items: Vec<KitItem>) -> Self {
        InvestigationalDevice { variant: DeviceVariant::Kit(items), similar_to: None }
    }

    pub fn is_kit(&self) -> bool {
        matches!(self.variant, DeviceVariant::Kit(_))
    }

    /// Every medical device in the product, kit members included.
    pub fn devices(&self) -> Vec<&MedicalDevice> {
        match &self.variant {
            DeviceVariant::Single(d) => vec![d],
            DeviceVariant::Kit(items) => items
                .iter()
                .filter_map(|i| match i {
                    KitItem::Device(d) => Some(d),
                    KitItem::Component(_) => None,
                })
                .collect(),
        }
    }

    /// Device and component names, in kit order.
    pub fn product_names(&self) -> Vec<&str> {
        match &self.variant {
            DeviceVariant::Single(d) => vec![d.name.as_str()],
            DeviceVariant::Kit(items) => items.iter().map(KitItem::name).collect(),
        }
    }
}

/// Replaces any existing similarity link.
pub fn link_similarity(
    mut device: InvestigationalDevice,
    marketed_device: impl Into<String>,
    rationale: impl Into<String>,
) -> Result<InvestigationalDevice, ModelError> {
    let rationale = rationale.into();
    if rationale.trim().is_empty() {
        return Err(ModelError::Empty("similarity rationale"));
    }
    device.similar_to = Some(SimilarityLink { marketed_device: marketed_device.into(), rationale });
    Ok(device)
}

pub fn validate_device(device: &InvestigationalDevice, catalogs: &Catalogs) -> ValidationReport {
    let mut report = ValidationReport::default();
    match &device.variant {
        DeviceVariant::Single(d) => d.validate_into("device", catalogs, &mut report),
        DeviceVariant::Kit(items) => {
            if items.is_empty() {
                report.push("kit-non-empty", "kit must contain ≥1 element");
            }
            let mut seen = BTreeSet::new();
            for (i, item) in items.iter().enumerate() {
                let path = format!("kit[{}]", i + 1);
                if !seen.insert(item.identity()) {
                    report.push("kit-duplicate", format!("{path}: `{}` appears twice in the kit", item.name()));
                }
                match item {
                    KitItem::Device(d) => d.validate_into(&path, catalogs, &mut report),
                    KitItem::Component(c) if c.name.trim().is_empty() => {
                        report.push("component-name", format!("{path}: component name must not be empty"));
                    }
                    KitItem::Component(_) => {}
                }
            }
        }
    }
    if let Some(link) = &device.similar_to {
        if link.rationale.trim().is_empty() {
            report.push("similarity-rationale", "similarity link requires a rationale");
        }
    }
    report
}

/// Product the investigational device is compared against. Exactly one of
/// the two slots must be filled; the struct keeps both so that malformed
/// input can be represented and reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparatorProduct {
    pub device: Option<MedicalDevice>,
    pub drug: Option<Drug>,
}

impl ComparatorProduct {
    pub fn device(device: MedicalDevice) -> Self {
        ComparatorProduct { device: Some(device), drug: None }
    }

    pub fn drug(drug: Drug) -> Self {
        ComparatorProduct { device: None, drug: Some(drug) }
    }

    pub fn is_exclusive(&self) -> bool {
        self.device.is_some() != self.drug.is_some()
    }
}

pub fn validate_comparator(comparator: &ComparatorProduct, catalogs: &Catalogs) -> ValidationReport {
    let mut report = ValidationReport::default();
    match (&comparator.device, &comparator.drug) {
        (Some(_), Some(_)) => report.push("comparator-exclusive", "comparator is exclusive: device or drug, not both"),
        (None, None) => report.push("comparator-exclusive", "comparator is exclusive: exactly one of device or drug"),
        (Some(d), None) => d.validate_into("comparator", catalogs, &mut report),
        (None, Some(drug)) if drug.name.trim().is_empty() => {
            report.push("comparator-drug", "comparator drug name must not be empty")
        }
        (None, Some(_)) => {}
    }
    report
}
