use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{EmbeddingPool, SpeakerEmbedding};
use crate::error::{invalid, Error, Result};
use crate::seed::Rng;

/// Distance used to rank pool candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationParams {
    pub n_far: usize,
    pub n_avg: usize,
    pub distance: Distance,
    pub seed: u64,
}

impl Default for AnonymizationParams {
    fn default() -> Self {
        Self {
            n_far: 200,
            n_avg: 100,
            distance: Distance::Cosine,
            seed: 0,
        }
    }
}

impl AnonymizationParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_avg == 0 || self.n_avg > self.n_far {
            return Err(invalid("n_avg", "need 1 <= n_avg <= n_far"));
        }
        Ok(())
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((na, nb))
}

/// Cosine similarity in `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = check_pair(a, b)?;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cos(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// The `n_far` same-gender pool entries furthest from `src`, sorted by
/// descending distance, ties broken by ascending pool index.
pub fn select_far_candidates(
    pool: &EmbeddingPool,
    src: &SpeakerEmbedding,
    params: &AnonymizationParams,
) -> Result<Vec<usize>> {
    params.validate()?;
    src.validate()?;
    if !pool.is_empty() && src.dim() != pool.dim() {
        return Err(Error::DimensionMismatch {
            expected: pool.dim(),
            actual: src.dim(),
        });
    }
    let same = pool.indices_of(src.gender);
    if same.len() < params.n_far {
        return Err(Error::InsufficientCandidates {
            gender: src.gender,
            needed: params.n_far,
            available: same.len(),
        });
    }
    let mut scored = same
        .into_iter()
        .map(|i| {
            let d = match params.distance {
                Distance::Cosine => cosine_distance(&pool.entries()[i].vector, &src.vector)?,
            };
            Ok((d, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if params.n_far < scored.len() {
        scored.select_nth_unstable_by(params.n_far - 1, by_rank);
        scored.truncate(params.n_far);
    }
    scored.sort_by(by_rank);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}

/// Which far candidates were drawn, and their mean before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoDraw {
    pub far_set: Vec<usize>,
    /// Pool indices of the sampled candidates, ascending.
    pub sampled: Vec<usize>,
    pub mean: Vec<f64>,
}

pub fn draw_pseudo(
    pool: &EmbeddingPool,
    src: &SpeakerEmbedding,
    params: &AnonymizationParams,
    rng: &mut Rng,
) -> Result<PseudoDraw> {
    let far_set = select_far_candidates(pool, src, params)?;
    let mut sampled: Vec<usize> = index::sample(rng, far_set.len(), params.n_avg)
        .into_iter()
        .map(|k| far_set[k])
        .collect();
    sampled.sort_unstable();
    let mut mean = vec![0.0; pool.dim()];
    for &i in &sampled {
        for (m, v) in mean.iter_mut().zip(&pool.entries()[i].vector) {
            *m += v;
        }
    }
    let n = sampled.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(PseudoDraw {
        far_set,
        sampled,
        mean,
    })
}

/// Pseudo-speaker embedding for `src`: unit-norm mean of `n_avg` draws from
/// its far set, with the source gender and id `pseudo:<src id>:<seed>`.
pub fn generate_pseudo_embedding(
    pool: &EmbeddingPool,
    src: &SpeakerEmbedding,
    params: &AnonymizationParams,
    rng: &mut Rng,
) -> Result<SpeakerEmbedding> {
    let draw = draw_pseudo(pool, src, params, rng)?;
    let norm = draw.mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(SpeakerEmbedding {
        vector: draw.mean.iter().map(|v| v / norm).collect(),
        speaker_id: format!("pseudo:{}:{}", src.speaker_id, params.seed),
        gender: src.gender,
    })
}
