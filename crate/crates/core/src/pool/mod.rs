//! Speaker-embedding pools and pseudo-speaker generation.
//!
//! A pseudo-speaker for a source embedding is built by ranking the
//! same-gender pool entries by cosine distance to the source, keeping the
//! `n_far` furthest, drawing `n_avg` of them uniformly without replacement,
//! averaging, and renormalizing to unit length.

mod anonymize;
pub mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use anonymize::{
    cosine_distance, cosine_similarity, draw_pseudo, generate_pseudo_embedding,
    select_far_candidates, AnonymizationParams, Distance, PseudoDraw,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn code(self) -> u8 {
        match self {
            Gender::Female => 0,
            Gender::Male => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Gender::Female),
            1 => Ok(Gender::Male),
            _ => Err(Error::Format(format!("invalid gender code {code}"))),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "female",
            Gender::Male => "male",
        })
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" | "0" => Ok(Gender::Female),
            "m" | "male" | "1" => Ok(Gender::Male),
            other => Err(Error::Format(format!("unknown gender `{other}`"))),
        }
    }
}

/// A speaker identity vector with its speaker id and gender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerEmbedding {
    pub vector: Vec<f64>,
    pub speaker_id: String,
    pub gender: Gender,
}

impl SpeakerEmbedding {
    pub fn new(vector: Vec<f64>, speaker_id: impl Into<String>, gender: Gender) -> Result<Self> {
        let e = Self {
            vector,
            speaker_id: speaker_id.into(),
            gender,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vector.is_empty() {
            return Err(Error::EmptyInput("embedding vector"));
        }
        if self.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector"));
        }
        if self.vector.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn norm(&self) -> f64 {
        self.vector.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Immutable collection of embeddings sharing one dimension. Speaker ids
/// may repeat (several utterances per speaker).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPool {
    entries: Vec<SpeakerEmbedding>,
    dim: usize,
}

impl EmbeddingPool {
    pub fn new(entries: Vec<SpeakerEmbedding>) -> Result<Self> {
        let dim = entries.first().map(SpeakerEmbedding::dim).unwrap_or(0);
        for e in &entries {
            e.validate()?;
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: e.dim(),
                });
            }
        }
        Ok(Self { entries, dim })
    }

    pub fn entries(&self) -> &[SpeakerEmbedding] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&SpeakerEmbedding> {
        self.entries.get(index)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pool indices of all entries with the given gender, ascending.
    pub fn indices_of(&self, gender: Gender) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.gender == gender)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn into_entries(self) -> Vec<SpeakerEmbedding> {
        self.entries
    }
}
