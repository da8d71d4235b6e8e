//! Discrete and soft speech units.
//!
//! Backbone features (one row per 320-sample frame) are clustered with
//! k-means into discrete units. A linear projection plus a unit codebook then
//! turns each frame into a distribution over units,
//! `p_i ∝ exp(cos(z, w_i) / τ)`, trained with cross-entropy against the
//! discrete targets. The distributions are the content stream.

mod head;
mod kmeans;

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use head::{
    ce_loss, extract_content, soft_distribution, train_soft_head, CeLoss, SoftTrainConfig,
    TrainedHead,
};
pub use kmeans::{kmeans_fit, quantize, KMeansFit};

/// Samples per backbone frame.
pub const CONTENT_HOP: usize = 320;

/// Unit index per frame.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiscreteUnits(pub Vec<usize>);

impl DiscreteUnits {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.0.len() * 4);
        for u in &self.0 {
            let _ = writeln!(s, "{u}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("unit line {}: `{}`", i + 1, l.trim())))
            })
            .collect::<Result<_>>()
            .map(DiscreteUnits)
    }
}

/// Projection, unit embeddings and temperature of the soft content head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftUnitCodebook {
    /// `K × E` unit embeddings.
    pub embeddings: Array2<f64>,
    /// `F × E` map from backbone features to the embedding space.
    pub projection: Array2<f64>,
    pub tau: f64,
}

impl SoftUnitCodebook {
    pub fn new(embeddings: Array2<f64>, projection: Array2<f64>, tau: f64) -> Result<Self> {
        let cb = Self {
            embeddings,
            projection,
            tau,
        };
        cb.validate()?;
        Ok(cb)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_units() < 2 {
            return Err(invalid("K", "codebook needs at least two units"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid("tau", "must be positive"));
        }
        if self.projection.ncols() != self.embeddings.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.embeddings.ncols(),
                actual: self.projection.ncols(),
            });
        }
        if self
            .embeddings
            .rows()
            .into_iter()
            .any(|r| r.iter().all(|&v| v == 0.0))
        {
            return Err(Error::ZeroVector);
        }
        if self
            .embeddings
            .iter()
            .chain(self.projection.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("codebook"));
        }
        Ok(())
    }

    pub fn num_units(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn feature_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let cb: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        cb.validate()?;
        Ok(cb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentMode {
    /// `K`-dimensional unit distributions.
    #[default]
    Soft,
    /// `E`-dimensional projected vectors before the similarity/softmax.
    Raw,
}

impl std::str::FromStr for ContentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(Self::Soft),
            "raw" => Ok(Self::Raw),
            other => Err(Error::Format(format!("unknown content mode `{other}`"))),
        }
    }
}

/// Content stream `z_c`: one row per backbone frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentFrames {
    pub frames: Array2<f64>,
    pub mode: ContentMode,
}

impl ContentFrames {
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.frames.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn units_text_round_trip() {
        let u = DiscreteUnits(vec![3, 0, 199, 7]);
        assert_eq!(u.to_text(), "3\n0\n199\n7\n");
        assert_eq!(DiscreteUnits::from_text(&u.to_text()).unwrap(), u);
        assert!(DiscreteUnits::from_text("1\n-2\n").is_err());
    }

    #[test]
    fn codebook_validation() {
        let p = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(SoftUnitCodebook::new(array![[1.0, 0.0]], p.clone(), 0.1).is_err());
        assert!(SoftUnitCodebook::new(array![[1.0, 0.0], [0.0, 0.0]], p.clone(), 0.1).is_err());
        assert!(SoftUnitCodebook::new(array![[1.0, 0.0], [0.0, 1.0]], p.clone(), 0.0).is_err());
        assert!(SoftUnitCodebook::new(array![[1.0, 0.0], [0.0, 1.0]], p, 0.1).is_ok());
    }

    #[test]
    fn codebook_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.json");
        let cb = SoftUnitCodebook::new(
            array![[1.0, 0.1], [0.3, 1.0 / 3.0]],
            array![[0.7, -0.2], [1e-7, 2.5], [0.0, 1.0]],
            0.1,
        )
        .unwrap();
        cb.save_json(&path).unwrap();
        assert_eq!(SoftUnitCodebook::load_json(&path).unwrap(), cb);
    }
}
