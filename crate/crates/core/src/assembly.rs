//! Frame-level assembly of the vocoder input `z = (z_c, z_f, z_spk)`.
//!
//! Content frames arrive at one per 320 samples, F0 at one per 160, so the
//! content is up-sampled by two and both streams are cut to the shorter
//! length. Each row is `[content (K) | log1p(f0), voiced | speaker (D)]`.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::f0::F0Track;
use crate::pool::SpeakerEmbedding;
use crate::softunits::ContentFrames;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpsampleMode {
    #[default]
    Repeat,
    Linear,
}

impl std::str::FromStr for UpsampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "repeat" => Ok(Self::Repeat),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Format(format!("unknown upsample mode `{other}`"))),
        }
    }
}

/// Repeat each row `factor` times, or interpolate linearly between
/// consecutive rows (the last row is held).
pub fn upsample_frames(
    seq: &Array2<f64>,
    factor: usize,
    mode: UpsampleMode,
) -> Result<Array2<f64>> {
    if factor == 0 {
        return Err(invalid("factor", "must be at least 1"));
    }
    let (n, m) = seq.dim();
    if n == 0 {
        return Err(Error::EmptyInput("frame sequence"));
    }
    let mut out = Array2::zeros((n * factor, m));
    for i in 0..n * factor {
        let src = i / factor;
        match mode {
            UpsampleMode::Repeat => out.row_mut(i).assign(&seq.row(src)),
            UpsampleMode::Linear => {
                let frac = (i % factor) as f64 / factor as f64;
                let next = (src + 1).min(n - 1);
                let row = &seq.row(src) * (1.0 - frac) + &seq.row(next) * frac;
                out.row_mut(i).assign(&row);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub upsample: UpsampleMode,
    /// Largest accepted `|2 T′ - T″|`.
    pub max_length_mismatch: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            upsample: UpsampleMode::Repeat,
            max_length_mismatch: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledFrames {
    pub frames: Array2<f64>,
    pub content_dim: usize,
    pub speaker_dim: usize,
    /// Frames per second.
    pub frame_rate: f64,
}

impl AssembledFrames {
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.frames.ncols()
    }

    /// Column range of the speaker block.
    pub fn speaker_columns(&self) -> std::ops::Range<usize> {
        self.content_dim + 2..self.width()
    }
}

/// Ratio between content and F0 frame rates.
pub const CONTENT_UPSAMPLE: usize = 2;

pub fn assemble(
    content: &ContentFrames,
    f0: &F0Track,
    spk: &SpeakerEmbedding,
    cfg: &AssemblyConfig,
) -> Result<AssembledFrames> {
    f0.validate()?;
    spk.validate()?;
    let up_len = content.len() * CONTENT_UPSAMPLE;
    if up_len.abs_diff(f0.len()) > cfg.max_length_mismatch {
        return Err(Error::LengthMismatch(format!(
            "{} content frames (x{CONTENT_UPSAMPLE} = {up_len}) vs {} F0 frames",
            content.len(),
            f0.len()
        )));
    }
    let k = content.width();
    let d = spk.dim();
    let rows = up_len.min(f0.len());
    let mut frames = Array2::zeros((rows, k + 2 + d));
    if rows > 0 {
        let up = upsample_frames(&content.frames, CONTENT_UPSAMPLE, cfg.upsample)?;
        frames
            .slice_mut(s![.., ..k])
            .assign(&up.slice(s![..rows, ..]));
        for t in 0..rows {
            frames[[t, k]] = f0.f0_hz[t].ln_1p();
            frames[[t, k + 1]] = f64::from(u8::from(f0.voiced[t]));
            frames
                .slice_mut(s![t, k + 2..])
                .iter_mut()
                .zip(&spk.vector)
                .for_each(|(dst, &v)| *dst = v);
        }
    }
    Ok(AssembledFrames {
        frames,
        content_dim: k,
        speaker_dim: d,
        frame_rate: 16_000.0 / f0.hop as f64,
    })
}
