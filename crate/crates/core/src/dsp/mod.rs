//! Signal-processing primitives shared by the rest of the crate: framing,
//! STFT/mel analysis, LPC, and the McAdams formant-shifting anonymizer.

mod lpc;
mod mcadams;
mod mel;
pub mod roots;
pub mod wav;

use ndarray::Array2;

use crate::error::{invalid, Error, Result};

pub use lpc::{levinson_durbin, lpc_coeffs, LpcFrame};
pub use mcadams::{mcadams_anonymize, mcadams_pole_map, McAdamsConfig};
pub use mel::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, stft_magnitude, MelConfig};

/// Sample rate every model-facing component expects.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(invalid("sample_rate", "must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform samples"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Multiply every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Number of frames `frame_signal` produces.
pub fn frame_count(len: usize, frame_len: usize, hop: usize) -> usize {
    if len < frame_len {
        0
    } else {
        (len - frame_len) / hop + 1
    }
}

/// Slice `w` into overlapping frames, one per row. Trailing samples that do
/// not fill a whole frame are dropped.
pub fn frame_signal(w: &Waveform, frame_len: usize, hop: usize) -> Result<Array2<f64>> {
    if frame_len == 0 {
        return Err(invalid("frame_len", "must be at least 1"));
    }
    if hop == 0 {
        return Err(invalid("hop", "must be at least 1"));
    }
    let x = w.samples();
    let n = frame_count(x.len(), frame_len, hop);
    let mut out = Array2::zeros((n, frame_len));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let start = i * hop;
        row.iter_mut()
            .zip(&x[start..start + frame_len])
            .for_each(|(d, &s)| *d = s);
    }
    Ok(out)
}

/// Periodic Hann window of length `n`.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}
