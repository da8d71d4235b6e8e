use serde::{Deserialize, Serialize};

use super::{TrialLabel, TrialScore};
use crate::error::{invalid, Error, Result};

/// Detection cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub c_fa: f64,
    pub c_miss: f64,
    pub p_target: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            c_fa: 1.0,
            c_miss: 1.0,
            p_target: 0.01,
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_fa > 0.0 && self.c_miss > 0.0) {
            return Err(invalid("costs", "must be positive"));
        }
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(invalid("p_target", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Error rates when accepting every score `>= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub p_miss: f64,
    pub p_fa: f64,
}

/// Operating points at every distinct score, ascending, followed by the
/// reject-all point at `+∞`. `p_miss` never decreases and `p_fa` never
/// increases along the sweep.
pub fn sweep(scores: &[TrialScore]) -> Result<Vec<SweepPoint>> {
    if scores.iter().any(|s| !s.score.is_finite()) {
        return Err(Error::NonFinite("trial scores"));
    }
    let n_tar = scores
        .iter()
        .filter(|s| s.label == TrialLabel::Target)
        .count();
    let n_non = scores.len() - n_tar;
    if n_tar == 0 || n_non == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<(f64, bool)> = scores
        .iter()
        .map(|s| (s.score, s.label == TrialLabel::Target))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = Vec::new();
    let (mut tar_below, mut non_below) = (0usize, 0usize);
    let mut i = 0;
    while i <= sorted.len() {
        let threshold = sorted.get(i).map_or(f64::INFINITY, |s| s.0);
        let point = SweepPoint {
            threshold,
            p_miss: tar_below as f64 / n_tar as f64,
            p_fa: (n_non - non_below) as f64 / n_non as f64,
        };
        if let Some(prev) = points.last() {
            let prev: &SweepPoint = prev;
            debug_assert!(point.p_miss >= prev.p_miss && point.p_fa <= prev.p_fa);
        }
        points.push(point);
        if i == sorted.len() {
            break;
        }
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tar_below += 1;
            } else {
                non_below += 1;
            }
            i += 1;
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eer {
    /// Percent.
    pub eer: f64,
    pub threshold: f64,
}

/// Equal error rate: mean of miss and false-alarm rates at the sweep point
/// where they are closest; the lower threshold wins ties.
pub fn compute_eer(scores: &[TrialScore]) -> Result<Eer> {
    let points = sweep(scores)?;
    let mut best = points[0];
    for p in &points[1..] {
        if (p.p_miss - p.p_fa).abs() < (best.p_miss - best.p_fa).abs() {
            best = *p;
        }
    }
    Ok(Eer {
        eer: 100.0 * (best.p_miss + best.p_fa) / 2.0,
        threshold: best.threshold,
    })
}

/// Minimum normalized detection cost over the sweep.
pub fn compute_min_dcf(scores: &[TrialScore], params: &MetricParams) -> Result<f64> {
    params.validate()?;
    let points = sweep(scores)?;
    let miss_w = params.c_miss * params.p_target;
    let fa_w = params.c_fa * (1.0 - params.p_target);
    let min = points
        .iter()
        .map(|p| miss_w * p.p_miss + fa_w * p.p_fa)
        .fold(f64::INFINITY, f64::min);
    Ok(min / miss_w.min(fa_w))
}
