use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ContentFrames, ContentMode, DiscreteUnits, SoftUnitCodebook};
use crate::error::{invalid, Error, Result};
use crate::seed::rng_from_seed;

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Cosine similarity of `z` with every codebook row.
fn similarities(z: ArrayView1<f64>, w: &Array2<f64>) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    if z.len() != w.ncols() {
        return Err(Error::DimensionMismatch {
            expected: w.ncols(),
            actual: z.len(),
        });
    }
    let zn = norm(z);
    if zn == 0.0 {
        return Err(Error::ZeroVector);
    }
    let row_norms: Vec<f64> = w.rows().into_iter().map(norm).collect();
    let sims = w
        .rows()
        .into_iter()
        .zip(&row_norms)
        .map(|(r, &rn)| r.dot(&z) / (zn * rn))
        .collect();
    Ok((sims, zn, row_norms))
}

fn softmax_scaled(sims: &[f64], tau: f64) -> Vec<f64> {
    let max = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = sims.iter().map(|s| ((s - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `p_i = exp(cos(z, w_i)/τ) / Σ_k exp(cos(z, w_k)/τ)`.
pub fn soft_distribution(z: &[f64], codebook: &SoftUnitCodebook) -> Result<Vec<f64>> {
    let (sims, _, _) = similarities(ArrayView1::from(z), &codebook.embeddings)?;
    Ok(softmax_scaled(&sims, codebook.tau))
}

/// Cross-entropy of the soft distribution against one target unit, with
/// analytic gradients for the projected vector and every codebook row.
#[derive(Debug, Clone, PartialEq)]
pub struct CeLoss {
    pub loss: f64,
    pub probs: Vec<f64>,
    pub grad_z: Array1<f64>,
    pub grad_w: Array2<f64>,
}

fn ce_view(z: ArrayView1<f64>, codebook: &SoftUnitCodebook, target: usize) -> Result<CeLoss> {
    let k = codebook.num_units();
    if target >= k {
        return Err(Error::TargetOutOfRange { target, classes: k });
    }
    let w = &codebook.embeddings;
    let (sims, zn, row_norms) = similarities(z, w)?;
    let probs = softmax_scaled(&sims, codebook.tau);
    let loss = -probs[target].max(f64::MIN_POSITIVE).ln();

    let mut grad_z = Array1::<f64>::zeros(z.len());
    let mut grad_w = Array2::<f64>::zeros(w.dim());
    for i in 0..k {
        // dL/ds_i for s_i = cos(z, w_i)
        let g = (probs[i] - f64::from(u8::from(i == target))) / codebook.tau;
        if g == 0.0 {
            continue;
        }
        let wi = w.row(i);
        let (s, wn) = (sims[i], row_norms[i]);
        // ∂cos/∂z = w/(|z||w|) - cos z/|z|², ∂cos/∂w = z/(|z||w|) - cos w/|w|²
        grad_z.scaled_add(g / (zn * wn), &wi);
        grad_z.scaled_add(-g * s / (zn * zn), &z);
        let mut gw = grad_w.row_mut(i);
        gw.scaled_add(g / (zn * wn), &z);
        gw.scaled_add(-g * s / (wn * wn), &wi);
    }
    Ok(CeLoss {
        loss,
        probs,
        grad_z,
        grad_w,
    })
}

pub fn ce_loss(z: &[f64], codebook: &SoftUnitCodebook, target: usize) -> Result<CeLoss> {
    ce_view(ArrayView1::from(z), codebook, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftTrainConfig {
    /// Number of units `K`.
    pub num_units: usize,
    /// Projected dimension `E`.
    pub embed_dim: usize,
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SoftTrainConfig {
    fn default() -> Self {
        Self {
            num_units: 200,
            embed_dim: 256,
            tau: 0.1,
            lr: 0.05,
            epochs: 10,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl SoftTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_units < 2 {
            return Err(invalid("num_units", "need at least 2"));
        }
        if self.embed_dim == 0 || self.batch_size == 0 {
            return Err(invalid("embed_dim/batch_size", "must be positive"));
        }
        if !(self.tau > 0.0) || !(self.lr > 0.0) {
            return Err(invalid("tau/lr", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedHead {
    pub codebook: SoftUnitCodebook,
    pub initial: SoftUnitCodebook,
    /// Mean CE over all training frames after each epoch.
    pub loss_history: Vec<f64>,
}

fn initialize(
    features: &[Array2<f64>],
    targets: &[DiscreteUnits],
    cfg: &SoftTrainConfig,
    dim: usize,
) -> Result<SoftUnitCodebook> {
    let mut rng = rng_from_seed(cfg.seed);
    let bound = 1.0 / (dim as f64).sqrt();
    let projection =
        Array2::from_shape_fn((dim, cfg.embed_dim), |_| rng.random_range(-bound..=bound));

    // per-unit feature means: the k-means centroids the targets came from
    let mut sums = Array2::<f64>::zeros((cfg.num_units, dim));
    let mut counts = vec![0usize; cfg.num_units];
    for (f, t) in features.iter().zip(targets) {
        for (row, &u) in f.rows().into_iter().zip(&t.0) {
            sums.row_mut(u).scaled_add(1.0, &row);
            counts[u] += 1;
        }
    }
    let mut embeddings = Array2::<f64>::zeros((cfg.num_units, cfg.embed_dim));
    for (u, &count) in counts.iter().enumerate() {
        let projected = if count > 0 {
            (&sums.row(u) / count as f64).dot(&projection)
        } else {
            Array1::zeros(cfg.embed_dim)
        };
        if projected.iter().any(|&v| v != 0.0) {
            embeddings.row_mut(u).assign(&projected);
        } else {
            for v in embeddings.row_mut(u).iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
    }
    SoftUnitCodebook::new(embeddings, projection, cfg.tau)
}

fn mean_loss(
    cb: &SoftUnitCodebook,
    features: &[Array2<f64>],
    targets: &[DiscreteUnits],
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (f, t) in features.iter().zip(targets) {
        for (row, &u) in f.rows().into_iter().zip(&t.0) {
            let z = row.dot(&cb.projection);
            total += ce_view(z.view(), cb, u)?.loss;
            n += 1;
        }
    }
    Ok(total / n.max(1) as f64)
}

/// Mini-batch gradient descent on mean cross-entropy through the soft
/// distribution, updating both the projection and the unit embeddings.
///
/// The projection starts uniform in `±1/√F`; each unit embedding starts at
/// the projected mean of the frames labelled with that unit (seeded Gaussian
/// for units with no frames). Deterministic for a given seed.
pub fn train_soft_head(
    features: &[Array2<f64>],
    targets: &[DiscreteUnits],
    cfg: &SoftTrainConfig,
) -> Result<TrainedHead> {
    cfg.validate()?;
    if features.len() != targets.len() {
        return Err(Error::LengthMismatch(format!(
            "{} feature files vs {} unit files",
            features.len(),
            targets.len()
        )));
    }
    let dim = features
        .first()
        .map(|f| f.ncols())
        .ok_or(Error::EmptyInput("training features"))?;
    for (i, (f, t)) in features.iter().zip(targets).enumerate() {
        if f.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: f.ncols(),
            });
        }
        if f.nrows() != t.len() {
            return Err(Error::LengthMismatch(format!(
                "utterance {i}: {} frames vs {} units",
                f.nrows(),
                t.len()
            )));
        }
        if let Some(&bad) = t.0.iter().find(|&&u| u >= cfg.num_units) {
            return Err(Error::TargetOutOfRange {
                target: bad,
                classes: cfg.num_units,
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training features"));
        }
    }

    let initial = initialize(features, targets, cfg, dim)?;
    let mut cb = initial.clone();
    let mut order: Vec<(usize, usize)> = features
        .iter()
        .enumerate()
        .flat_map(|(u, f)| (0..f.nrows()).map(move |r| (u, r)))
        .collect();
    let mut rng = rng_from_seed(cfg.seed ^ 0x5eed);
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut gp = Array2::<f64>::zeros(cb.projection.dim());
            let mut gw = Array2::<f64>::zeros(cb.embeddings.dim());
            for &(u, r) in batch {
                let x = features[u].row(r);
                let z = x.dot(&cb.projection);
                let ce = ce_view(z.view(), &cb, targets[u].0[r])?;
                gw += &ce.grad_w;
                // z = x P  ⇒  ∂L/∂P = xᵀ ∂L/∂z
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        gp.row_mut(i).scaled_add(xi, &ce.grad_z);
                    }
                }
            }
            let step = cfg.lr / batch.len() as f64;
            cb.projection.scaled_add(-step, &gp);
            cb.embeddings.scaled_add(-step, &gw);
        }
        loss_history.push(mean_loss(&cb, features, targets)?);
    }
    cb.validate()?;
    Ok(TrainedHead {
        codebook: cb,
        initial,
        loss_history,
    })
}

/// Content frames from backbone features: unit distributions (soft) or the
/// projected vectors (raw).
pub fn extract_content(
    features: &Array2<f64>,
    codebook: &SoftUnitCodebook,
    mode: ContentMode,
) -> Result<ContentFrames> {
    if features.ncols() != codebook.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.feature_dim(),
            actual: features.ncols(),
        });
    }
    let projected = features.dot(&codebook.projection);
    let frames = match mode {
        ContentMode::Raw => projected,
        ContentMode::Soft => {
            let mut out = Array2::zeros((features.nrows(), codebook.num_units()));
            for (mut dst, z) in out.rows_mut().into_iter().zip(projected.rows()) {
                let (sims, _, _) = similarities(z, &codebook.embeddings)?;
                let p = softmax_scaled(&sims, codebook.tau);
                dst.iter_mut().zip(p).for_each(|(d, v)| *d = v);
            }
            out
        }
    };
    Ok(ContentFrames { frames, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn cb(w: Array2<f64>, tau: f64) -> SoftUnitCodebook {
        let e = w.ncols();
        SoftUnitCodebook::new(w, Array2::eye(e), tau).unwrap()
    }

    #[test]
    fn two_unit_closed_form() {
        let c = cb(array![[1.0, 0.0], [0.0, 1.0]], 0.1);
        let p = soft_distribution(&[1.0, 0.0], &c).unwrap();
        let e10 = 10f64.exp();
        assert!((p[0] - e10 / (e10 + 1.0)).abs() < 1e-15);
        assert!((p[0] - 0.9999546).abs() < 1e-6);
    }

    #[test]
    fn identical_rows_are_uniform() {
        let c = cb(Array2::from_elem((5, 3), 0.7), 0.1);
        let p = soft_distribution(&[0.3, -1.0, 2.0], &c).unwrap();
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn zero_input_rejected() {
        let c = cb(array![[1.0, 0.0], [0.0, 1.0]], 0.1);
        assert!(matches!(
            soft_distribution(&[0.0, 0.0], &c),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn ce_examples() {
        let c = cb(Array2::from_elem((200, 4), 1.0), 0.1);
        let out = ce_loss(&[1.0, 2.0, 3.0, 4.0], &c, 17).unwrap();
        assert!((out.loss - 200f64.ln()).abs() < 1e-12);
        assert!((out.loss - 5.2983).abs() < 1e-4);
        // near-certain target
        let c = cb(array![[1.0, 0.0], [-1.0, 0.0]], 0.001);
        assert!(ce_loss(&[1.0, 0.0], &c, 0).unwrap().loss < 1e-12);
        assert!(matches!(
            ce_loss(&[1.0, 0.0], &c, 2),
            Err(Error::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let w = Array2::from_shape_fn((6, 5), |_| rng.random_range(-1.0..1.0));
        let z: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = cb(w.clone(), 0.5);
        let out = ce_loss(&z, &c, 3).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[i] += h;
            zm[i] -= h;
            let fd =
                (ce_loss(&zp, &c, 3).unwrap().loss - ce_loss(&zm, &c, 3).unwrap().loss) / (2.0 * h);
            assert!((fd - out.grad_z[i]).abs() <= 1e-6 * fd.abs().max(1.0));
        }
        for r in 0..6 {
            for col in 0..5 {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[[r, col]] += h;
                wm[[r, col]] -= h;
                let fd = (ce_loss(&z, &cb(wp, 0.5), 3).unwrap().loss
                    - ce_loss(&z, &cb(wm, 0.5), 3).unwrap().loss)
                    / (2.0 * h);
                assert!((fd - out.grad_w[[r, col]]).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_epochs_keeps_initialization() {
        let f = vec![array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]];
        let t = vec![DiscreteUnits(vec![0, 1, 0])];
        let cfg = SoftTrainConfig {
            num_units: 2,
            embed_dim: 3,
            epochs: 0,
            ..Default::default()
        };
        let out = train_soft_head(&f, &t, &cfg).unwrap();
        assert_eq!(out.codebook, out.initial);
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn misaligned_inputs_rejected() {
        let f = vec![array![[1.0, 0.0], [0.0, 1.0]]];
        let cfg = SoftTrainConfig {
            num_units: 2,
            embed_dim: 3,
            epochs: 1,
            ..Default::default()
        };
        assert!(train_soft_head(&f, &[DiscreteUnits(vec![0])], &cfg).is_err());
        assert!(train_soft_head(&f, &[], &cfg).is_err());
        assert!(train_soft_head(&f, &[DiscreteUnits(vec![0, 5])], &cfg).is_err());
    }

    #[test]
    fn extract_modes() {
        let c = SoftUnitCodebook::new(
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            array![[1.0, 0.0], [0.0, 2.0], [0.5, 0.5]],
            0.1,
        )
        .unwrap();
        let f = array![[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]];
        let raw = extract_content(&f, &c, ContentMode::Raw).unwrap();
        assert_eq!(raw.frames, array![[1.0, 0.0], [0.5, 2.5]]);
        let soft = extract_content(&f, &c, ContentMode::Soft).unwrap();
        assert_eq!(soft.width(), 3);
        for r in soft.frames.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one_and_is_scale_invariant(
            seed in 0u64..10_000, scale in 0.01f64..100.0, k in 2usize..30
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w = Array2::from_shape_fn((k, 6), |_| rng.random_range(-1.0..1.0));
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c = cb(w, 0.1);
            let p = soft_distribution(&z, &c).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            let zs: Vec<f64> = z.iter().map(|v| v * scale).collect();
            let ps = soft_distribution(&zs, &c).unwrap();
            for (a, b) in p.iter().zip(&ps) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn sharper_temperature_raises_the_mode(seed in 0u64..10_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w = Array2::from_shape_fn((8, 4), |_| rng.random_range(-1.0..1.0));
            let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut last = 0.0;
            for tau in [1.0, 0.5, 0.25, 0.1] {
                let p = soft_distribution(&z, &cb(w.clone(), tau)).unwrap();
                let max = p.iter().cloned().fold(0.0, f64::max);
                prop_assert!(max > last || max == 1.0);
                last = max;
            }
        }
    }
}
