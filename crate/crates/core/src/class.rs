//! The five evidence classes a document can be triaged into.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of evidence classes.
pub const N_CLASSES: usize = 5;

/// Evidence class of a research article.
///
/// The declaration order is the canonical order used everywhere a per-class
/// array appears (probabilities, weights, confusion rows and columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DocClass {
    BroadSynthesis,
    SystematicReview,
    PrimaryRct,
    PrimaryNonRct,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown document class label {0:?}")]
pub struct UnknownLabel(pub String);

impl DocClass {
    pub const ALL: [DocClass; N_CLASSES] = [
        DocClass::BroadSynthesis,
        DocClass::SystematicReview,
        DocClass::PrimaryRct,
        DocClass::PrimaryNonRct,
        DocClass::Excluded,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<DocClass> {
        Self::ALL.get(index).copied()
    }

    /// Canonical machine name, as used in corpus files and the HTTP API.
    pub fn as_str(self) -> &'static str {
        match self {
            DocClass::BroadSynthesis => "broad_synthesis",
            DocClass::SystematicReview => "systematic_review",
            DocClass::PrimaryRct => "primary_rct",
            DocClass::PrimaryNonRct => "primary_non_rct",
            DocClass::Excluded => "excluded",
        }
    }

    /// Human-readable row label for reports.
    pub fn display_name(self) -> &'static str {
        match self {
            DocClass::BroadSynthesis => "Broad synthesis",
            DocClass::SystematicReview => "Systematic review",
            DocClass::PrimaryRct => "Primary rct",
            DocClass::PrimaryNonRct => "Primary non-rct",
            DocClass::Excluded => "Excluded",
        }
    }
}

/// Lowercase, trim, and collapse every run of whitespace, `_` or `-` into a
/// single `_`.
pub fn normalize_label(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for ch in raw.trim().chars().flat_map(char::to_lowercase) {
        if ch.is_whitespace() || ch == '_' || ch == '-' {
            pending_sep = !out.is_empty();
        } else {
            if pending_sep {
                out.push('_');
                pending_sep = false;
            }
            out.push(ch);
        }
    }
    out
}

impl FromStr for DocClass {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = normalize_label(s);
        DocClass::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for DocClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for DocClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DocClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_stable() {
        for (i, class) in DocClass::ALL.iter().enumerate() {
            assert_eq!(class.index(), i);
            assert_eq!(DocClass::from_index(i), Some(*class));
        }
        assert_eq!(DocClass::from_index(5), None);
    }

    #[test]
    fn labels_normalize_before_matching() {
        assert_eq!("systematic review".parse(), Ok(DocClass::SystematicReview));
        assert_eq!("  Systematic   Review ".parse(), Ok(DocClass::SystematicReview));
        assert_eq!("Primary non-RCT".parse(), Ok(DocClass::PrimaryNonRct));
        assert_eq!("primary--rct".parse(), Ok(DocClass::PrimaryRct));
        assert_eq!("EXCLUDED".parse(), Ok(DocClass::Excluded));
        assert!("review".parse::<DocClass>().is_err());
        assert!("".parse::<DocClass>().is_err());
    }

    #[test]
    fn serde_uses_canonical_names() {
        let json = serde_json::to_string(&DocClass::PrimaryNonRct).unwrap();
        assert_eq!(json, "\"primary_non_rct\"");
        let back: DocClass = serde_json::from_str("\"broad synthesis\"").unwrap();
        assert_eq!(back, DocClass::BroadSynthesis);
    }
}
