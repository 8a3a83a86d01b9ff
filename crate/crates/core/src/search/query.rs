use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lifecycle::CivState;
use crate::model::{PartyId, Role, StudyDesign};

use super::SearchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductType {
    Device,
    Kit,
}

impl ProductType {
    pub fn as_str(self) -> &'static str {
        match self {
            ProductType::Device => "device",
            ProductType::Kit => "kit",
        }
    }
}

impl FromStr for ProductType {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "device" => Ok(ProductType::Device),
            "kit" => Ok(ProductType::Kit),
            other => Err(SearchError::BadParameter { key: "product-type".into(), value: other.into() }),
        }
    }
}

/// Faceted query. Distinct facets combine with AND; the values of one
/// multi-valued facet combine with OR. Empty facets do not filter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Query {
    /// Full protocol code, or just its sequence number.
    pub number: Option<String>,
    pub years: Vec<i32>,
    pub states: Vec<CivState>,
    pub applicant_roles: Vec<Role>,
    pub company: Option<String>,
    pub evaluators: Vec<PartyId>,
    pub product: Option<String>,
    pub product_type: Option<ProductType>,
    pub risk_classes: Vec<String>,
    pub application_field: Option<String>,
    pub characteristics: Vec<String>,
    pub releases_drug: Option<bool>,
    pub classification_code: Option<String>,
    pub anatomical_location: Option<String>,
    pub title: Option<String>,
    pub designs: Vec<StudyDesign>,
    pub population: Vec<String>,
    pub site_country: Option<String>,
}

fn bad(key: &str, value: &str) -> SearchError {
    SearchError::BadParameter { key: key.to_owned(), value: value.to_owned() }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, SearchError> {
    value.parse().map_err(|_| bad(key, value))
}

impl Query {
    pub fn is_empty(&self) -> bool {
        *self == Query::default()
    }

    /// URL query string with one `key=value` pair per value, in a fixed key order.
    pub fn to_query_string(&self) -> String {
        let mut out = form_urlencoded::Serializer::new(String::new());
        let mut one = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.append_pair(k, v);
            }
        };
        one("number", &self.number);
        one("company", &self.company);
        one("product", &self.product);
        one("field", &self.application_field);
        one("cnd", &self.classification_code);
        one("anatomy", &self.anatomical_location);
        one("title", &self.title);
        one("country", &self.site_country);
        for y in &self.years {
            out.append_pair("year", &y.to_string());
        }
        for s in &self.states {
            out.append_pair("state", &s.to_string());
        }
        for r in &self.applicant_roles {
            out.append_pair("role", r.as_str());
        }
        for e in &self.evaluators {
            out.append_pair("evaluator", e.as_str());
        }
        if let Some(t) = self.product_type {
            out.append_pair("product-type", t.as_str());
        }
        for c in &self.risk_classes {
            out.append_pair("risk-class", c);
        }
        for c in &self.characteristics {
            out.append_pair("characteristic", c);
        }
        if let Some(b) = self.releases_drug {
            out.append_pair("releases-drug", if b { "true" } else { "false" });
        }
        for d in &self.designs {
            out.append_pair("design", d.as_str());
        }
        for p in &self.population {
            out.append_pair("population", p);
        }
        out.finish()
    }

    pub fn from_query_string(text: &str) -> Result<Self, SearchError> {
        let mut q = Query::default();
        for (k, v) in form_urlencoded::parse(text.trim_start_matches('?').as_bytes()) {
            let (k, v) = (k.as_ref(), v.into_owned());
            if v.is_empty() {
                continue;
            }
            match k {
                "number" => q.number = Some(v),
                "company" => q.company = Some(v),
                "product" => q.product = Some(v),
                "field" => q.application_field = Some(v),
                "cnd" => q.classification_code = Some(v),
                "anatomy" => q.anatomical_location = Some(v),
                "title" => q.title = Some(v),
                "country" => q.site_country = Some(v),
                "year" => q.years.push(parse(k, &v)?),
                "state" => q.states.push(parse(k, &v)?),
                "role" => q.applicant_roles.push(parse(k, &v)?),
                "evaluator" => q.evaluators.push(PartyId::from(v)),
                "product-type" => q.product_type = Some(v.parse()?),
                "risk-class" => q.risk_classes.push(v),
                "characteristic" => q.characteristics.push(v),
                "releases-drug" => {
                    q.releases_drug = Some(match v.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => return Err(bad(k, &v)),
                    })
                }
                "design" => q.designs.push(parse(k, &v)?),
                "population" => q.population.push(v),
                _ => return Err(SearchError::UnknownParameter(k.to_owned())),
            }
        }
        Ok(q)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_query_string())
    }
}

impl FromStr for Query {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Query::from_query_string(s)
    }
}
