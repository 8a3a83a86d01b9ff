//! The electronic notification form: a flat `key=value` document with dotted
//! keys, and its mapping onto [`ClinicalInvestigation`].

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    CeMark, ClinicalInvestigation, ComparatorProduct, Component, DeviceVariant, Drug, FormData, InvestigationalDevice,
    InvestigationalSite, KitItem, MedicalDevice, Milestones, SimilarityLink, StudyDesign,
};
use crate::time::parse_date;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormError {
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate field `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{key}`: invalid value `{value}`")]
    InvalidValue { key: String, value: String },
}

pub fn parse_form_text(text: &str) -> Result<FormData, FormError> {
    let mut form = FormData::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(FormError::Syntax { line: i + 1 })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(FormError::Syntax { line: i + 1 });
        }
        if form.insert(key.to_owned(), v.trim().to_owned()).is_some() {
            return Err(FormError::Duplicate { line: i + 1, key: key.to_owned() });
        }
    }
    Ok(form)
}

pub fn render_form_text(form: &FormData) -> String {
    form.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

const DEVICE_FIELDS: [&str; 10] = [
    "name",
    "risk-class",
    "characteristics",
    "cnd",
    "anatomical-location",
    "ce.certificate",
    "ce.intended-use",
    "ce.issued",
    "drug.name",
    "drug.code",
];

fn list(value: &str) -> BTreeSet<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect()
}

fn join(values: &BTreeSet<String>) -> String {
    values.iter().cloned().collect::<Vec<_>>().join(",")
}

struct Reader<'a> {
    form: &'a FormData,
    used: BTreeSet<&'a str>,
}

impl<'a> Reader<'a> {
    fn get(&mut self, key: &str) -> Option<&'a str> {
        let (k, v) = self.form.get_key_value(key)?;
        self.used.insert(k.as_str());
        Some(v.as_str()).filter(|v| !v.is_empty())
    }

    fn text(&mut self, key: &str) -> String {
        self.get(key).unwrap_or_default().to_owned()
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.form.keys().any(|k| k.starts_with(prefix))
    }

    /// Sorted indices `N` of keys shaped `<prefix>N.<rest>`.
    fn indices(&self, prefix: &str) -> Result<Vec<u32>, FormError> {
        let mut out = BTreeSet::new();
        for key in self.form.keys().filter(|k| k.starts_with(prefix)) {
            let rest = &key[prefix.len()..];
            let n = rest
                .split_once('.')
                .and_then(|(n, _)| n.parse::<u32>().ok())
                .filter(|n| *n > 0)
                .ok_or_else(|| FormError::UnknownField(key.clone()))?;
            out.insert(n);
        }
        Ok(out.into_iter().collect())
    }

    fn invalid(key: &str, value: &str) -> FormError {
        FormError::InvalidValue { key: key.to_owned(), value: value.to_owned() }
    }

    fn device(&mut self, prefix: &str) -> Result<MedicalDevice, FormError> {
        let mut d = MedicalDevice::new(self.text(&format!("{prefix}name")), self.text(&format!("{prefix}risk-class")));
        d.characteristics = self.get(&format!("{prefix}characteristics")).map(list).unwrap_or_default();
        d.classification_code = self.get(&format!("{prefix}cnd")).map(str::to_owned);
        d.anatomical_location = self.get(&format!("{prefix}anatomical-location")).map(str::to_owned);
        let cert = self.get(&format!("{prefix}ce.certificate"));
        let use_ = self.get(&format!("{prefix}ce.intended-use"));
        let issued_key = format!("{prefix}ce.issued");
        let issued = self.get(&issued_key);
        if cert.is_some() || use_.is_some() || issued.is_some() {
            let issued = issued.ok_or_else(|| Self::invalid(&issued_key, ""))?;
            d.ce_mark = Some(CeMark {
                certificate_id: cert.unwrap_or_default().to_owned(),
                intended_use: use_.unwrap_or_default().to_owned(),
                issued: parse_date(issued).ok_or_else(|| Self::invalid(&issued_key, issued))?,
            });
        }
        let drug_name = self.get(&format!("{prefix}drug.name"));
        let drug_code = self.get(&format!("{prefix}drug.code"));
        if drug_name.is_some() || drug_code.is_some() {
            d.releases_drug = Some(Drug {
                name: drug_name.unwrap_or_default().to_owned(),
                code: drug_code.unwrap_or_default().to_owned(),
            });
        }
        Ok(d)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, FormError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Reader::invalid(key, value)),
    }
}

/// Builds the investigation described by a form. Structural problems (bad
/// syntax, unknown keys, unparsable values) are errors; missing or
/// inconsistent content is left for validation to report.
pub fn civ_from_form(form: &FormData) -> Result<ClinicalInvestigation, FormError> {
    let mut r = Reader { form, used: BTreeSet::new() };
    let title = r.text("title");
    let design = match r.get("design") {
        Some(v) => Some(v.parse::<StudyDesign>().map_err(|_| Reader::invalid("design", v))?),
        None => None,
    };
    let multicentric = match r.get("multicentric") {
        Some(v) => parse_bool("multicentric", v)?,
        None => false,
    };
    let population = r.get("population").map(list).unwrap_or_default();
    let investigated_intended_use = r.get("investigated-intended-use").map(str::to_owned);
    let application_field = r.get("application-field").map(str::to_owned);

    let mut sites = Vec::new();
    for n in r.indices("site.")? {
        let p = format!("site.{n}.");
        sites.push(InvestigationalSite {
            name: r.text(&format!("{p}name")),
            code: r.text(&format!("{p}code")),
            country: r.text(&format!("{p}country")),
            investigator: r.text(&format!("{p}investigator")),
        });
    }

    let variant = match r.get("device.type").unwrap_or("device") {
        "device" => DeviceVariant::Single(r.device("device.")?),
        "kit" => {
            let mut items = Vec::new();
            for n in r.indices("kit.")? {
                let p = format!("kit.{n}.");
                let kind_key = format!("{p}kind");
                items.push(match r.get(&kind_key).unwrap_or("device") {
                    "device" => KitItem::Device(r.device(&p)?),
                    "component" => KitItem::Component(Component {
                        name: r.text(&format!("{p}name")),
                        code: r.text(&format!("{p}code")),
                    }),
                    other => return Err(Reader::invalid(&kind_key, other)),
                });
            }
            DeviceVariant::Kit(items)
        }
        other => return Err(Reader::invalid("device.type", other)),
    };
    let similar_to = match (r.get("similar.name"), r.get("similar.rationale")) {
        (None, None) => None,
        (name, rationale) => Some(SimilarityLink {
            marketed_device: name.unwrap_or_default().to_owned(),
            rationale: rationale.unwrap_or_default().to_owned(),
        }),
    };

    let comparator_device =
        if r.has_prefix("comparator.device.") { Some(r.device("comparator.device.")?) } else { None };
    let comparator_drug = if r.has_prefix("comparator.drug.") {
        Some(Drug { name: r.text("comparator.drug.name"), code: r.text("comparator.drug.code") })
    } else {
        None
    };
    let comparator = match (comparator_device, comparator_drug) {
        (None, None) => None,
        (device, drug) => Some(ComparatorProduct { device, drug }),
    };

    if let Some(key) = form.keys().find(|k| !r.used.contains(k.as_str())) {
        return Err(FormError::UnknownField(key.clone()));
    }
    Ok(ClinicalInvestigation {
        title,
        design,
        multicentric,
        population,
        sites,
        device: InvestigationalDevice { variant, similar_to },
        comparator,
        investigated_intended_use,
        application_field,
        milestones: Milestones::default(),
        sae_reports: Vec::new(),
    })
}

fn put(form: &mut FormData, key: String, value: &str) {
    if !value.is_empty() {
        form.insert(key, value.to_owned());
    }
}

fn write_device(form: &mut FormData, prefix: &str, d: &MedicalDevice) {
    let mut fields: BTreeMap<&str, String> = BTreeMap::new();
    fields.insert("name", d.name.clone());
    fields.insert("risk-class", d.risk_class.clone());
    fields.insert("characteristics", join(&d.characteristics));
    fields.insert("cnd", d.classification_code.clone().unwrap_or_default());
    fields.insert("anatomical-location", d.anatomical_location.clone().unwrap_or_default());
    if let Some(ce) = &d.ce_mark {
        fields.insert("ce.certificate", ce.certificate_id.clone());
        fields.insert("ce.intended-use", ce.intended_use.clone());
        fields.insert("ce.issued", ce.issued.to_string());
    }
    if let Some(drug) = &d.releases_drug {
        fields.insert("drug.name", drug.name.clone());
        fields.insert("drug.code", drug.code.clone());
    }
    for f in DEVICE_FIELDS {
        if let Some(v) = fields.get(f) {
            put(form, format!("{prefix}{f}"), v);
        }
    }
}

/// Inverse of [`civ_from_form`] for the fields the form carries.
pub fn civ_to_form(civ: &ClinicalInvestigation) -> FormData {
    let mut form = FormData::new();
    put(&mut form, "title".into(), &civ.title);
    if let Some(d) = civ.design {
        put(&mut form, "design".into(), d.as_str());
    }
    form.insert("multicentric".into(), civ.multicentric.to_string());
    put(&mut form, "population".into(), &join(&civ.population));
    put(&mut form, "investigated-intended-use".into(), civ.investigated_intended_use.as_deref().unwrap_or_default());
    put(&mut form, "application-field".into(), civ.application_field.as_deref().unwrap_or_default());
    for (i, s) in civ.sites.iter().enumerate() {
        let p = format!("site.{}.", i + 1);
        put(&mut form, format!("{p}name"), &s.name);
        put(&mut form, format!("{p}code"), &s.code);
        put(&mut form, format!("{p}country"), &s.country);
        put(&mut form, format!("{p}investigator"), &s.investigator);
    }
    match &civ.device.variant {
        DeviceVariant::Single(d) => {
            form.insert("device.type".into(), "device".into());
            write_device(&mut form, "device.", d);
        }
        DeviceVariant::Kit(items) => {
            form.insert("device.type".into(), "kit".into());
            for (i, item) in items.iter().enumerate() {
                let p = format!("kit.{}.", i + 1);
                match item {
                    KitItem::Device(d) => {
                        form.insert(format!("{p}kind"), "device".into());
                        write_device(&mut form, &p, d);
                    }
                    KitItem::Component(c) => {
                        form.insert(format!("{p}kind"), "component".into());
                        put(&mut form, format!("{p}name"), &c.name);
                        put(&mut form, format!("{p}code"), &c.code);
                    }
                }
            }
        }
    }
    if let Some(link) = &civ.device.similar_to {
        put(&mut form, "similar.name".into(), &link.marketed_device);
        put(&mut form, "similar.rationale".into(), &link.rationale);
    }
    if let Some(c) = &civ.comparator {
        if let Some(d) = &c.device {
            write_device(&mut form, "comparator.device.", d);
            form.entry("comparator.device.name".into()).or_default();
        }
        if let Some(drug) = &c.drug {
            form.insert("comparator.drug.name".into(), drug.name.clone());
            put(&mut form, "comparator.drug.code".into(), &drug.code);
        }
    }
    form
}
