//! Privacy and utility evaluation: cosine trial scoring, EER, minDCF,
//! WER/CER and the OO/OA/AA/OR attack scenarios.

mod errors;
pub mod io;
mod metrics;
mod scenario;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use errors::{edit_distance, error_rate, tokenize, ErrorUnit};
pub use metrics::{compute_eer, compute_min_dcf, sweep, Eer, MetricParams, SweepPoint};
pub use scenario::{
    anonymize_side, run_scenario, run_scenario_scored, score_trials, AnonymizationPolicy,
    Anonymizer, IdentityAnonymizer, PoolAnonymizer, ScenarioConfig, ScenarioReport, Transcripts,
    TrialCounts,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialLabel {
    Target,
    Nontarget,
}

impl FromStr for TrialLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(Self::Target),
            "nontarget" => Ok(Self::Nontarget),
            other => Err(Error::Format(format!("unknown trial label `{other}`"))),
        }
    }
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Target => "target",
            Self::Nontarget => "nontarget",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub enroll_id: String,
    pub test_id: String,
    pub label: TrialLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub enroll_id: String,
    pub test_id: String,
    pub score: f64,
    pub label: TrialLabel,
}

impl TrialScore {
    /// Anonymous score record, handy for metric-only use.
    pub fn bare(score: f64, label: TrialLabel) -> Self {
        Self {
            enroll_id: String::new(),
            test_id: String::new(),
            score,
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Original enrollment, original test.
    OO,
    /// Original enrollment, anonymized test (ignorant attacker).
    OA,
    /// Both sides anonymized with independent pseudo-speakers.
    AA,
    /// Original enrollment, resynthesized test.
    OR,
}

impl Scenario {
    pub fn anonymizes_enroll(self) -> bool {
        matches!(self, Self::AA)
    }

    pub fn anonymizes_test(self) -> bool {
        !matches!(self, Self::OO)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OO" => Ok(Self::OO),
            "OA" => Ok(Self::OA),
            "AA" => Ok(Self::AA),
            "OR" => Ok(Self::OR),
            other => Err(Error::Format(format!("unknown scenario `{other}`"))),
        }
    }
}
