//! STFT magnitude and HTK-scale mel spectrogram.
//!
//! Frames are centered: the signal is reflect-padded by `n_fft / 2` on both
//! sides, so frame `t` is centered on sample `t * hop`. A periodic Hann window
//! of length `win` sits in the middle of each `n_fft` frame. The filterbank is
//! applied to the magnitude spectrum and no log compression is done here.

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{frame_count, hann_periodic, Waveform};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub win: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            hop: 256,
            win: 1024,
            n_mels: 80,
            f_min: 0.0,
            f_max: 8000.0,
        }
    }
}

impl MelConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.hop == 0 || self.hop > self.win || self.win > self.n_fft {
            return Err(invalid("mel", "need 0 < hop <= win <= n_fft"));
        }
        if self.n_mels == 0 {
            return Err(invalid("n_mels", "must be positive"));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(invalid(
                "mel",
                format!("need 0 <= f_min < f_max <= {nyquist} Hz"),
            ));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        frame_count(len + 2 * (self.n_fft / 2), self.n_fft, self.hop)
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK filterbank, `n_mels × (n_fft/2 + 1)`, unnormalized.
/// Also returns the center frequency of each band in Hz.
pub fn mel_filterbank(cfg: &MelConfig, sample_rate: u32) -> (Array2<f64>, Vec<f64>) {
    let n_bins = cfg.n_fft / 2 + 1;
    let lo = hz_to_mel(cfg.f_min);
    let hi = hz_to_mel(cfg.f_max);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|j| mel_to_hz(lo + (hi - lo) * j as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = f64::from(sample_rate) / cfg.n_fft as f64;
    let mut fb = Array2::zeros((cfg.n_mels, n_bins));
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let up = (f - left) / (center - left);
            let down = (right - f) / (right - center);
            fb[[m, k]] = up.min(down).max(0.0);
        }
    }
    (fb, edges[1..=cfg.n_mels].to_vec())
}

fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Magnitude STFT, `(n_fft/2 + 1) × frames`.
pub fn stft_magnitude(w: &Waveform, cfg: &MelConfig) -> Result<Array2<f64>> {
    if w.is_empty() {
        return Err(Error::EmptyInput("waveform"));
    }
    cfg.validate(w.sample_rate())?;
    let x = w.samples();
    let pad = (cfg.n_fft / 2) as isize;
    let n_frames = cfg.num_frames(x.len());
    let n_bins = cfg.n_fft / 2 + 1;

    // window of length `win`, centered inside the n_fft frame
    let mut window = vec![0.0; cfg.n_fft];
    let offset = (cfg.n_fft - cfg.win) / 2;
    window[offset..offset + cfg.win].copy_from_slice(&hann_periodic(cfg.win));

    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut out = Array2::zeros((n_bins, n_frames));
    for t in 0..n_frames {
        let start = (t * cfg.hop) as isize - pad;
        for (j, slot) in buf.iter_mut().enumerate() {
            let s = x[reflect_index(start + j as isize, x.len())];
            *slot = Complex::new(s * window[j], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            out[[k, t]] = buf[k].norm();
        }
    }
    Ok(out)
}

/// Mel spectrogram, `n_mels × frames`, entries non-negative.
pub fn mel_spectrogram(w: &Waveform, cfg: &MelConfig) -> Result<Array2<f64>> {
    let mag = stft_magnitude(w, cfg)?;
    let (fb, _) = mel_filterbank(cfg, w.sample_rate());
    Ok(fb.dot(&mag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::frame_signal;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, n: usize) -> Waveform {
        Waveform::new(
            (0..n)
                .map(|i| amp * (2.0 * PI * freq * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    /// Direct O(N^2) DFT magnitude on explicitly padded frames.
    fn reference_stft(x: &[f64], cfg: &MelConfig) -> Array2<f64> {
        let pad = cfg.n_fft / 2;
        let mut padded = Vec::with_capacity(x.len() + 2 * pad);
        for i in (1..=pad).rev() {
            padded.push(x[i]);
        }
        padded.extend_from_slice(x);
        for i in 0..pad {
            padded.push(x[x.len() - 2 - i]);
        }
        let frames =
            frame_signal(&Waveform::new(padded, 16_000).unwrap(), cfg.n_fft, cfg.hop).unwrap();
        let win: Vec<f64> = (0..cfg.win)
            .map(|i| (PI * i as f64 / cfg.win as f64).sin().powi(2))
            .collect();
        let offset = (cfg.n_fft - cfg.win) / 2;
        let n_bins = cfg.n_fft / 2 + 1;
        let mut out = Array2::zeros((n_bins, frames.nrows()));
        for (t, frame) in frames.rows().into_iter().enumerate() {
            for k in 0..n_bins {
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..cfg.win {
                    let s = frame[offset + j] * win[j];
                    let ang = -2.0 * PI * (k * (offset + j)) as f64 / cfg.n_fft as f64;
                    re += s * ang.cos();
                    im += s * ang.sin();
                }
                out[[k, t]] = (re * re + im * im).sqrt();
            }
        }
        out
    }

    fn small_cfg() -> MelConfig {
        MelConfig {
            n_fft: 64,
            hop: 16,
            win: 48,
            n_mels: 10,
            f_min: 0.0,
            f_max: 8000.0,
        }
    }

    #[test]
    fn stft_matches_direct_dft() {
        let w = sine(1000.0, 0.7, 300);
        let cfg = small_cfg();
        let fast = stft_magnitude(&w, &cfg).unwrap();
        let slow = reference_stft(w.samples(), &cfg);
        assert_eq!(fast.dim(), slow.dim());
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn frame_count_matches_padded_framing() {
        let cfg = MelConfig::default();
        for len in [1usize, 100, 1000, 16_000, 16_001] {
            let padded = Waveform::new(vec![0.0; len + cfg.n_fft], 16_000).unwrap();
            let expected = frame_signal(&padded, cfg.n_fft, cfg.hop).unwrap().nrows();
            let w = Waveform::new(vec![0.1; len], 16_000).unwrap();
            assert_eq!(mel_spectrogram(&w, &cfg).unwrap().ncols(), expected);
        }
    }

    #[test]
    fn zero_input_gives_exact_zero() {
        let w = Waveform::new(vec![0.0; 4000], 16_000).unwrap();
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_peaks_in_nearest_band() {
        let w = sine(440.0, 1.0, 16_000);
        let cfg = MelConfig::default();
        let m = mel_spectrogram(&w, &cfg).unwrap();
        let (_, centers) = mel_filterbank(&cfg, 16_000);
        let nearest = centers
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 440.0).abs().total_cmp(&(b.1 - 440.0).abs()))
            .unwrap()
            .0;
        for col in m.columns() {
            let argmax = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, nearest);
        }
    }

    #[test]
    fn dc_lands_in_lowest_band() {
        let w = Waveform::new(vec![0.5; 8000], 16_000).unwrap();
        let m = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let totals: Vec<f64> = m.rows().into_iter().map(|r| r.sum()).collect();
        let argmax = totals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
    }

    #[test]
    fn energy_scales_quadratically() {
        let w = sine(300.0, 0.4, 5000);
        let cfg = MelConfig::default();
        let energy = |w: &Waveform| mel_spectrogram(w, &cfg).unwrap().mapv(|v| v * v).sum();
        let base = energy(&w);
        for c in [0.5, 2.0] {
            let scaled = energy(&w.scaled(c));
            assert!((scaled - c * c * base).abs() <= 1e-9 * scaled.max(1.0));
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let w = sine(300.0, 0.4, 1000);
        let bad = [
            MelConfig {
                hop: 0,
                ..MelConfig::default()
            },
            MelConfig {
                win: 2048,
                ..MelConfig::default()
            },
            MelConfig {
                f_max: 9000.0,
                ..MelConfig::default()
            },
            MelConfig {
                f_min: 8000.0,
                ..MelConfig::default()
            },
        ];
        for cfg in bad {
            assert!(mel_spectrogram(&w, &cfg).is_err());
        }
        let empty = Waveform::new(vec![], 16_000).unwrap();
        assert!(matches!(
            mel_spectrogram(&empty, &MelConfig::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn reflect_indexing() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }
}
