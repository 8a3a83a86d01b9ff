use std::fmt;
use std::str::FromStr;

use super::ModelError;

pub const DEFAULT_CODE_PREFIX: &str = "i.5.i.m.2";

/// Protocol code `<prefix>/<seq>/<year>` identifying a submitted notification.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProtocolCode {
    pub prefix: String,
    pub seq: u32,
    pub year: i32,
}

impl ProtocolCode {
    pub fn new(prefix: impl Into<String>, seq: u32, year: i32) -> Result<Self, ModelError> {
        let prefix = prefix.into();
        if prefix.is_empty() || prefix.contains('/') || prefix.chars().any(char::is_whitespace) {
            return Err(ModelError::UnknownValue { what: "protocol code prefix", value: prefix });
        }
        if seq == 0 {
            return Err(ModelError::UnknownValue { what: "protocol code sequence", value: "0".into() });
        }
        if !(1000..=9999).contains(&year) {
            return Err(ModelError::UnknownValue { what: "protocol code year", value: year.to_string() });
        }
        Ok(ProtocolCode { prefix, seq, year })
    }
}

impl fmt::Display for ProtocolCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.prefix, self.seq, self.year)
    }
}

impl FromStr for ProtocolCode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::UnknownValue { what: "protocol code", value: s.to_owned() };
        let mut parts = s.rsplitn(3, '/');
        let year = parts.next().ok_or_else(bad)?;
        let seq = parts.next().ok_or_else(bad)?;
        let prefix = parts.next().ok_or_else(bad)?;
        if year.len() != 4 || seq.starts_with('0') || seq.starts_with('+') || year.starts_with('+') {
            return Err(bad());
        }
        let code = ProtocolCode::new(prefix, seq.parse().map_err(|_| bad())?, year.parse().map_err(|_| bad())?)
            .map_err(|_| bad())?;
        Ok(code)
    }
}

impl_serde_via_str!(ProtocolCode);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_parses() {
        let code: ProtocolCode = "i.5.i.m.2/6/2009".parse().unwrap();
        assert_eq!(code, ProtocolCode::new(DEFAULT_CODE_PREFIX, 6, 2009).unwrap());
        assert_eq!(code.to_string(), "i.5.i.m.2/6/2009");
    }

    #[test]
    fn rejects_malformed_codes() {
        for bad in ["i.5.i.m.2/0/2009", "i.5.i.m.2/06/2009", "i.5.i.m.2/6/09", "6/2009", "/6/2009", "a b/1/2009"] {
            assert!(bad.parse::<ProtocolCode>().is_err(), "{bad}");
        }
    }
}
