//! F0 extraction: normalized cross-correlation pitch candidates smoothed by a
//! Viterbi search over each voiced run.
//!
//! Frames sit on a 160-sample hop at 16 kHz, so a signal of `T` samples gives
//! `floor(T / 160)` frames; frame `t` is centered on sample `160 t + 80`.
//! A frame is voiced iff at least one NCCF peak inside the lag range clears
//! `nccf_threshold`. Among voiced frames the tracker picks the candidate path
//! minimizing `Σ local + dp_transition_cost · |ln(f_t / f_{t-1})|`, where the
//! local cost `1 - nccf · (1 - lag_weight · lag / max_lag)` biases the search
//! toward the shortest period and so away from sub-octave errors.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Config {
    pub f_min: f64,
    pub f_max: f64,
    pub frame_len: usize,
    pub hop: usize,
    pub nccf_threshold: f64,
    pub dp_transition_cost: f64,
    pub lag_weight: f64,
    pub max_candidates: usize,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            f_min: 60.0,
            f_max: 400.0,
            frame_len: 400,
            hop: 160,
            nccf_threshold: 0.3,
            dp_transition_cost: 1.0,
            lag_weight: 0.3,
            max_candidates: 5,
        }
    }
}

impl F0Config {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(invalid(
                "f0 range",
                format!("need 0 < f_min < f_max <= {nyquist}"),
            ));
        }
        if self.hop * 100 != sample_rate as usize {
            return Err(invalid("hop", "must be sample_rate / 100 (160 at 16 kHz)"));
        }
        if self.frame_len == 0 {
            return Err(invalid("frame_len", "must be positive"));
        }
        if !(self.nccf_threshold > 0.0 && self.nccf_threshold < 1.0) {
            return Err(invalid("nccf_threshold", "must lie in (0, 1)"));
        }
        if !(self.dp_transition_cost >= 0.0) {
            return Err(invalid("dp_transition_cost", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.lag_weight) {
            return Err(invalid("lag_weight", "must lie in [0, 1)"));
        }
        if self.max_candidates == 0 {
            return Err(invalid("max_candidates", "must be positive"));
        }
        Ok(())
    }

    fn lag_range(&self, sample_rate: u32) -> (usize, usize) {
        let sr = f64::from(sample_rate);
        (
            (sr / self.f_max).floor() as usize,
            (sr / self.f_min).ceil() as usize,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub hop: usize,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.f0_hz.len() != self.voiced.len() {
            return Err(Error::LengthMismatch(
                "f0 and voicing lengths differ".into(),
            ));
        }
        for (t, (&f, &v)) in self.f0_hz.iter().zip(&self.voiced).enumerate() {
            if !f.is_finite() || f < 0.0 || (f == 0.0) == v {
                return Err(Error::Format(format!(
                    "frame {t}: f0 {f} inconsistent with voiced={v}"
                )));
            }
        }
        Ok(())
    }

    /// One line per frame: `frame_index f0_hz voiced_flag`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (t, (f, v)) in self.f0_hz.iter().zip(&self.voiced).enumerate() {
            let _ = writeln!(s, "{t} {f} {}", u8::from(*v));
        }
        s
    }

    pub fn from_text(text: &str, hop: usize) -> Result<Self> {
        let mut f0_hz = Vec::new();
        let mut voiced = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("f0 line {}: {what}", lineno + 1));
            let mut parts = line.split_whitespace();
            let idx: usize = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| bad("bad frame index"))?;
            if idx != f0_hz.len() {
                return Err(bad("frame indices must be consecutive from 0"));
            }
            let f: f64 = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| bad("bad f0 value"))?;
            let v = match parts.next() {
                Some("0") => false,
                Some("1") => true,
                _ => return Err(bad("voiced flag must be 0 or 1")),
            };
            if parts.next().is_some() {
                return Err(bad("trailing fields"));
            }
            f0_hz.push(f);
            voiced.push(v);
        }
        let track = Self { f0_hz, voiced, hop };
        track.validate()?;
        Ok(track)
    }
}

/// Normalized cross-correlation of `frame` against itself at each lag in
/// `lags`. The correlation window is the first `frame.len() - max_lag`
/// samples. Values are in `[-1, 1]`; lags with a zero-energy window give 0.
pub fn nccf(frame: &[f64], lags: RangeInclusive<usize>) -> Result<Vec<f64>> {
    let max_lag = *lags.end();
    if frame.len() <= max_lag {
        return Err(invalid("frame", "must be longer than the maximum lag"));
    }
    let n = frame.len() - max_lag;
    let head = &frame[..n];
    let e0: f64 = head.iter().map(|x| x * x).sum();
    Ok(lags
        .map(|k| {
            let shifted = &frame[k..k + n];
            let ek: f64 = shifted.iter().map(|x| x * x).sum();
            let denom = (e0 * ek).sqrt();
            if denom > 0.0 {
                let num: f64 = head.iter().zip(shifted).map(|(a, b)| a * b).sum();
                (num / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    f0: f64,
    cost: f64,
}

fn frame_candidates(values: &[f64], first_lag: usize, cfg: &F0Config, sr: f64) -> Vec<Candidate> {
    let (min_lag, max_lag) = cfg.lag_range(sr as u32);
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..values.len() - 1 {
        let lag = first_lag + i;
        if lag < min_lag || lag > max_lag {
            continue;
        }
        let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
        if !(c >= l && c > r && c >= cfg.nccf_threshold) {
            continue;
        }
        let denom = l - 2.0 * c + r;
        let delta = if denom < 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let peak = (c - 0.25 * (l - r) * delta).min(1.0);
        peaks.push((lag as f64 + delta, peak));
    }
    let mut out: Vec<Candidate> = peaks
        .into_iter()
        .map(|(lag, value)| Candidate {
            f0: (sr / lag).clamp(cfg.f_min, cfg.f_max),
            cost: 1.0 - value * (1.0 - cfg.lag_weight * lag / max_lag as f64),
        })
        .collect();
    // rank by lag-weighted cost so a periodic signal keeps its shortest period
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    out.truncate(cfg.max_candidates);
    out
}

fn viterbi(frames: &[Vec<Candidate>], transition: f64) -> Vec<f64> {
    let mut costs: Vec<f64> = frames[0].iter().map(|c| c.cost).collect();
    let mut back: Vec<Vec<usize>> = vec![vec![0; frames[0].len()]];
    for t in 1..frames.len() {
        let (prev, cur) = (&frames[t - 1], &frames[t]);
        let mut next = Vec::with_capacity(cur.len());
        let mut ptr = Vec::with_capacity(cur.len());
        for c in cur {
            let (best, arg) = prev
                .iter()
                .enumerate()
                .map(|(j, p)| (costs[j] + transition * (c.f0 / p.f0).ln().abs(), j))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap();
            next.push(best + c.cost);
            ptr.push(arg);
        }
        costs = next;
        back.push(ptr);
    }
    let mut idx = costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    let mut path = vec![0.0; frames.len()];
    for t in (0..frames.len()).rev() {
        path[t] = frames[t][idx].f0;
        idx = back[t][idx];
    }
    path
}

pub fn extract_f0(w: &Waveform, cfg: &F0Config) -> Result<F0Track> {
    if w.sample_rate() != SAMPLE_RATE {
        return Err(Error::SampleRate {
            expected: SAMPLE_RATE,
            actual: w.sample_rate(),
        });
    }
    if w.is_empty() {
        return Err(Error::EmptyInput("waveform"));
    }
    cfg.validate(w.sample_rate())?;
    let sr = f64::from(w.sample_rate());
    let x = w.samples();
    let (min_lag, max_lag) = cfg.lag_range(w.sample_rate());
    let first_lag = min_lag.saturating_sub(1).max(1);
    let last_lag = max_lag + 1;
    let span = cfg.frame_len + last_lag;
    let n_frames = x.len() / cfg.hop;

    let mut buf = vec![0.0; span];
    let candidates: Vec<Vec<Candidate>> = (0..n_frames)
        .map(|t| {
            let start = (t * cfg.hop + cfg.hop / 2) as isize - (cfg.frame_len / 2) as isize;
            for (j, b) in buf.iter_mut().enumerate() {
                let i = start + j as isize;
                *b = if i >= 0 && (i as usize) < x.len() {
                    x[i as usize]
                } else {
                    0.0
                };
            }
            let values = nccf(&buf, first_lag..=last_lag)?;
            Ok(frame_candidates(&values, first_lag, cfg, sr))
        })
        .collect::<Result<_>>()?;

    let mut f0_hz = vec![0.0; n_frames];
    let mut t = 0;
    while t < n_frames {
        if candidates[t].is_empty() {
            t += 1;
            continue;
        }
        let end = (t..n_frames)
            .find(|&u| candidates[u].is_empty())
            .unwrap_or(n_frames);
        let path = viterbi(&candidates[t..end], cfg.dp_transition_cost);
        f0_hz[t..end].copy_from_slice(&path);
        t = end;
    }
    let voiced = f0_hz.iter().map(|&f| f > 0.0).collect();
    Ok(F0Track {
        f0_hz,
        voiced,
        hop: cfg.hop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn sine(freq: f64, secs: f64) -> Vec<f64> {
        (0..(secs * 16_000.0) as usize)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / 16_000.0).sin())
            .collect()
    }

    #[test]
    fn nccf_periodic_peak() {
        // period of exactly 80 samples
        let x = sine(200.0, 0.05);
        let v = nccf(&x, 40..=300).unwrap();
        assert!((v[80 - 40] - 1.0).abs() < 1e-9);
        assert!(v.iter().all(|&c| (-1.0..=1.0).contains(&c)));
    }

    #[test]
    fn nccf_zero_frame() {
        let v = nccf(&[0.0; 500], 10..=200).unwrap();
        assert!(v.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn nccf_white_noise_is_low() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..700).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = nccf(&x, 1..=267).unwrap();
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max < 0.6, "max nccf {max}");
    }

    #[test]
    fn nccf_requires_long_frame() {
        assert!(nccf(&[1.0; 100], 1..=100).is_err());
    }

    #[test]
    fn sine_220_tracked() {
        let w = Waveform::new(sine(220.0, 1.0), 16_000).unwrap();
        let tr = extract_f0(&w, &F0Config::default()).unwrap();
        assert_eq!(tr.len(), 100);
        for t in 2..98 {
            assert!(tr.voiced[t], "frame {t} unvoiced");
            assert!(
                (tr.f0_hz[t] - 220.0).abs() <= 3.0,
                "frame {t}: {}",
                tr.f0_hz[t]
            );
        }
        tr.validate().unwrap();
    }

    #[test]
    fn many_periods_in_range_keep_fundamental() {
        // six near-equal peaks fit in the lag range at this frequency
        let w = Waveform::new(sine(367.5, 1.0), 16_000).unwrap();
        let tr = extract_f0(&w, &F0Config::default()).unwrap();
        for t in 2..98 {
            assert!(
                (tr.f0_hz[t] - 367.5).abs() < 0.05 * 367.5,
                "frame {t}: {}",
                tr.f0_hz[t]
            );
        }
    }

    #[test]
    fn silence_is_unvoiced() {
        let w = Waveform::new(vec![0.0; 16_000], 16_000).unwrap();
        let tr = extract_f0(&w, &F0Config::default()).unwrap();
        assert!(tr.voiced.iter().all(|v| !v));
        assert!(tr.f0_hz.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn voicing_boundary() {
        let mut x = sine(220.0, 0.5);
        x.extend(std::iter::repeat_n(0.0, 8000));
        let tr = extract_f0(&Waveform::new(x, 16_000).unwrap(), &F0Config::default()).unwrap();
        let last_voiced = tr.voiced.iter().rposition(|&v| v).unwrap();
        let boundary = last_voiced + 1;
        assert!(
            (boundary as i64 - 50).abs() <= 3,
            "boundary at frame {boundary}"
        );
    }

    #[test]
    fn wrong_rate_rejected() {
        let w = Waveform::new(vec![0.0; 100], 8000).unwrap();
        assert!(matches!(
            extract_f0(&w, &F0Config::default()),
            Err(Error::SampleRate { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let tr = F0Track {
            f0_hz: vec![0.0, 219.75, 221.125],
            voiced: vec![false, true, true],
            hop: 160,
        };
        assert_eq!(tr.to_text(), "0 0 0\n1 219.75 1\n2 221.125 1\n");
        assert_eq!(F0Track::from_text(&tr.to_text(), 160).unwrap(), tr);
        assert!(F0Track::from_text("0 100 0\n", 160).is_err());
        assert!(F0Track::from_text("1 0 0\n", 160).is_err());
    }
}
