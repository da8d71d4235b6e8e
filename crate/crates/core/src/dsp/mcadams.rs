//! McAdams-coefficient anonymization: per-frame LPC, raise each complex pole
//! angle to the power `alpha`, refilter the LPC residual through the shifted
//! all-pole filter and overlap-add.

use serde::{Deserialize, Serialize};

use super::lpc::lpc_coeffs;
use super::roots::{polynomial_roots, ConjugateRoots, C64};
use super::{hann_periodic, Waveform};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McAdamsConfig {
    pub alpha: f64,
    /// Analysis frame length in samples (25 ms at 16 kHz).
    pub frame_len: usize,
    pub hop: usize,
    pub order: usize,
    /// Pole magnitudes are clamped to this after the angle transform.
    pub max_pole_radius: f64,
}

impl Default for McAdamsConfig {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            frame_len: 400,
            hop: 160,
            order: 20,
            max_pole_radius: 0.998,
        }
    }
}

impl McAdamsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid("alpha", "must be a positive finite number"));
        }
        if self.order == 0 || self.frame_len <= self.order {
            return Err(invalid("order", "need 1 <= order < frame_len"));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(invalid("hop", "need 1 <= hop <= frame_len"));
        }
        if !(self.max_pole_radius > 0.0 && self.max_pole_radius < 1.0) {
            return Err(invalid("max_pole_radius", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Map every complex pole angle `θ ∈ (0, π)` to `θ^alpha` (capped at π),
/// keep magnitudes, and clamp all magnitudes to `max_radius`. Conjugates
/// follow their upper-half-plane partner exactly.
pub fn mcadams_pole_map(poles: &ConjugateRoots, alpha: f64, max_radius: f64) -> ConjugateRoots {
    let upper = poles
        .upper
        .iter()
        .map(|p| {
            let theta = p.arg().powf(alpha).min(std::f64::consts::PI);
            C64::from_polar(p.norm().min(max_radius), theta)
        })
        .collect();
    let real = poles
        .real
        .iter()
        .map(|&r| r.clamp(-max_radius, max_radius))
        .collect();
    ConjugateRoots { real, upper }
}

fn fir(b: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            b.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, bk)| bk * x[n - k])
                .sum()
        })
        .collect()
}

/// `y[n] = x[n] - Σ_{k>=1} a[k] y[n-k]` for monic `a`.
fn all_pole(a: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let feedback: f64 = a
            .iter()
            .enumerate()
            .skip(1)
            .take(n)
            .map(|(k, ak)| ak * y[n - k])
            .sum();
        y[n] = x[n] - feedback;
    }
    y
}

fn process_frame(seg: &[f64], cfg: &McAdamsConfig) -> Result<Vec<f64>> {
    let lpc = lpc_coeffs(seg, cfg.order)?;
    if lpc.degenerate {
        return Ok(vec![0.0; seg.len()]);
    }
    let a = lpc.inverse_filter();
    let residual = fir(&a, seg);
    // Keep the analysis filter if its poles cannot be located reliably.
    let shifted = match polynomial_roots(&a) {
        Ok(roots) => {
            let poles = ConjugateRoots::from_roots(&roots);
            mcadams_pole_map(&poles, cfg.alpha, cfg.max_pole_radius).to_polynomial()
        }
        Err(_) => a,
    };
    Ok(all_pole(&shifted, &residual))
}

pub fn mcadams_anonymize(w: &Waveform, cfg: &McAdamsConfig) -> Result<Waveform> {
    cfg.validate()?;
    let n = w.len();
    if n == 0 {
        return Waveform::new(Vec::new(), w.sample_rate());
    }
    let pad = cfg.frame_len;
    let n_frames = (n + pad).div_ceil(cfg.hop) + 1;
    let total = (n_frames - 1) * cfg.hop + cfg.frame_len;
    let mut padded = vec![0.0; total.max(n + 2 * pad)];
    padded[pad..pad + n].copy_from_slice(w.samples());

    let window = hann_periodic(cfg.frame_len);
    let mut out = vec![0.0; padded.len()];
    let mut norm = vec![0.0; padded.len()];
    let mut seg = vec![0.0; cfg.frame_len];
    for f in 0..n_frames {
        let start = f * cfg.hop;
        for (j, s) in seg.iter_mut().enumerate() {
            *s = padded[start + j] * window[j];
        }
        let y = process_frame(&seg, cfg)?;
        for j in 0..cfg.frame_len {
            out[start + j] += y[j] * window[j];
            norm[start + j] += window[j] * window[j];
        }
    }
    let samples = (pad..pad + n)
        .map(|i| {
            if norm[i] > 1e-8 {
                out[i] / norm[i]
            } else {
                0.0
            }
        })
        .collect();
    Waveform::new(samples, w.sample_rate())
}
