use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub message: String,
}

impl Violation {
    pub fn new(rule: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { rule: rule.into(), message: message.into() }
    }
}

/// Outcome of a completeness and/or consistency sweep. Violations are data:
/// producing a report never fails.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Required document-type codes absent from the submission.
    pub missing: Vec<String>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.missing.is_empty() && self.violations.is_empty()
    }

    pub fn push(&mut self, rule: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation::new(rule, message));
    }

    pub fn merge(mut self, other: ValidationReport) -> Self {
        self.missing.extend(other.missing);
        self.violations.extend(other.violations);
        self
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok() {
            return f.write_str("ok");
        }
        if !self.missing.is_empty() {
            writeln!(f, "missing documents: {}", self.missing.join(", "))?;
        }
        for v in &self.violations {
            writeln!(f, "[{}] {}", v.rule, v.message)?;
        }
        Ok(())
    }
}
