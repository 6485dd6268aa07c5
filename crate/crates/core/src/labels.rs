//! Label vocabulary shared by the corpus, the classifier and the service.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalityLabel {
    Aesthetic,
    FunctionalExternal,
    FunctionalInternal,
}

impl FunctionalityLabel {
    pub const ALL: [Self; 3] = [Self::Aesthetic, Self::FunctionalExternal, Self::FunctionalInternal];

    pub fn is_functional(self) -> bool {
        self != Self::Aesthetic
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Aesthetic => "aesthetic",
            Self::FunctionalExternal => "functional_external",
            Self::FunctionalInternal => "functional_internal",
        }
    }

    /// Precedence when several sources label one segment.
    pub fn precedence(self) -> u8 {
        match self {
            Self::FunctionalExternal => 2,
            Self::FunctionalInternal => 1,
            Self::Aesthetic => 0,
        }
    }
}

impl fmt::Display for FunctionalityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label token {:?}", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for FunctionalityLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Design category from the formative taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Artifact,
    TaskRelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    Single,
    Multi,
}
