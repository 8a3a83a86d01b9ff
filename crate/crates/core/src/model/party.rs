use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ids::PartyId;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartyKind {
    ApplicantOrganization,
    NcaUser,
}

impl PartyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PartyKind::ApplicantOrganization => "applicant-organization",
            PartyKind::NcaUser => "nca-user",
        }
    }
}

impl FromStr for PartyKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "applicant-organization" => Ok(PartyKind::ApplicantOrganization),
            "nca-user" => Ok(PartyKind::NcaUser),
            other => Err(ModelError::UnknownValue { what: "party kind", value: other.to_owned() }),
        }
    }
}

/// An organization submitting notifications, or a member of the authority staff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Party {
    pub id: PartyId,
    pub kind: PartyKind,
    pub name: String,
    pub contact: String,
    /// ISO 3166 alpha-2 code.
    pub country: String,
}

impl Party {
    pub fn new(
        id: impl Into<PartyId>,
        kind: PartyKind,
        name: impl Into<String>,
        contact: impl Into<String>,
        country: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let party = Party {
            id: id.into(),
            kind,
            name: name.into(),
            contact: contact.into(),
            country: country.into(),
        };
        if party.name.trim().is_empty() {
            return Err(ModelError::Empty("party name"));
        }
        if party.id.as_str().is_empty() {
            return Err(ModelError::Empty("party id"));
        }
        Ok(party)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Manufacturer,
    AuthorizedRepresentative,
    Supervisor,
    TechnicalEvaluator,
    MedicalEvaluator,
    AdministrativeSecretary,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Manufacturer,
        Role::AuthorizedRepresentative,
        Role::Supervisor,
        Role::TechnicalEvaluator,
        Role::MedicalEvaluator,
        Role::AdministrativeSecretary,
    ];

    pub const APPLICANT: [Role; 2] = [Role::Manufacturer, Role::AuthorizedRepresentative];

    /// Applicant roles belong to external organizations; everything else is authority staff.
    pub fn is_external(self) -> bool {
        matches!(self, Role::Manufacturer | Role::AuthorizedRepresentative)
    }

    pub fn is_evaluator(self) -> bool {
        matches!(self, Role::TechnicalEvaluator | Role::MedicalEvaluator)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Manufacturer => "manufacturer",
            Role::AuthorizedRepresentative => "authorized-representative",
            Role::Supervisor => "supervisor",
            Role::TechnicalEvaluator => "technical-evaluator",
            Role::MedicalEvaluator => "medical-evaluator",
            Role::AdministrativeSecretary => "administrative-secretary",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| ModelError::UnknownValue { what: "role", value: s.to_owned() })
    }
}

/// A manufacturer's mandate allowing an authorized representative to submit on its behalf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delegation {
    pub delegator: PartyId,
    pub delegate: PartyId,
    pub valid_from: NaiveDate,
    pub valid_to: NaiveDate,
}

impl Delegation {
    pub fn new(
        delegator: PartyId,
        delegate: PartyId,
        valid_from: NaiveDate,
        valid_to: NaiveDate,
    ) -> Result<Self, ModelError> {
        if delegator == delegate {
            return Err(ModelError::SelfDelegation);
        }
        if valid_to < valid_from {
            return Err(ModelError::EmptyInterval);
        }
        Ok(Delegation { delegator, delegate, valid_from, valid_to })
    }

    pub fn covers(&self, day: NaiveDate) -> bool {
        self.valid_from <= day && day <= self.valid_to
    }
}

/// A party together with the roles the authority has granted it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub party: Party,
    pub roles: BTreeSet<Role>,
}

impl Profile {
    /// External and internal roles never mix in one party.
    pub fn new(party: Party, roles: BTreeSet<Role>) -> Result<Self, ModelError> {
        let external = roles.iter().filter(|r| r.is_external()).count();
        if external != 0 && external != roles.len() {
            return Err(ModelError::MixedRoles);
        }
        let expected_kind = if external > 0 { PartyKind::ApplicantOrganization } else { PartyKind::NcaUser };
        if !roles.is_empty() && party.kind != expected_kind {
            return Err(ModelError::MixedRoles);
        }
        Ok(Profile { party, roles })
    }

    pub fn holds(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }
}
