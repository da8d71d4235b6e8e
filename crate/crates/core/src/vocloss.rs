//! Vocoder training objective over abstract discriminator outputs.
//!
//! Generator: `Σ_k [L_adv(G; D_k) + λ_fm L_fm(G; D_k)] + λ_mel L_mel(G)`.
//! Discriminator: `Σ_k L_adv(D_k; G)`. Adversarial terms use the
//! least-squares form; feature matching sums per-layer L1 distances divided
//! by the layer's element count; the mel term is the mean absolute
//! difference of mel spectrograms.

use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dsp::{mel_spectrogram, MelConfig, Waveform};
use crate::error::{invalid, Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialForm {
    #[default]
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocLossConfig {
    pub lambda_fm: f64,
    pub lambda_mel: f64,
    pub mel: MelConfig,
    pub adversarial_form: AdversarialForm,
    /// Sub-discriminator count: five period + three scale discriminators.
    pub num_subdiscriminators: usize,
}

impl Default for VocLossConfig {
    fn default() -> Self {
        Self {
            lambda_fm: 2.0,
            lambda_mel: 45.0,
            mel: MelConfig::default(),
            adversarial_form: AdversarialForm::LeastSquares,
            num_subdiscriminators: 8,
        }
    }
}

impl VocLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_fm >= 0.0 && self.lambda_mel >= 0.0) {
            return Err(invalid("lambda", "loss weights must be >= 0"));
        }
        Ok(())
    }
}

/// Output of one sub-discriminator: its final scores and every
/// intermediate feature map (flattened).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubDiscriminatorOutput {
    pub scores: Vec<f64>,
    pub feature_maps: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscriminatorFeatures {
    pub subs: Vec<SubDiscriminatorOutput>,
}

impl DiscriminatorFeatures {
    pub fn scores(&self) -> Vec<Vec<f64>> {
        self.subs.iter().map(|s| s.scores.clone()).collect()
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    v.sum::<f64>() / n as f64
}

fn check_scores(real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<()> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::EmptyInput("discriminator scores"));
    }
    if real.len() != fake.len() {
        return Err(Error::LengthMismatch(format!(
            "{} real vs {} fake sub-discriminators",
            real.len(),
            fake.len()
        )));
    }
    for (k, (r, f)) in real.iter().zip(fake).enumerate() {
        if r.is_empty() || r.len() != f.len() {
            return Err(Error::LengthMismatch(format!(
                "sub-discriminator {k}: {} real vs {} fake scores",
                r.len(),
                f.len()
            )));
        }
    }
    Ok(())
}

/// Per sub-discriminator least-squares terms `(generator, discriminator)`.
pub fn adversarial_terms(real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    check_scores(real, fake)?;
    Ok(real
        .iter()
        .zip(fake)
        .map(|(r, f)| {
            let g = mean(f.iter().map(|s| (s - 1.0).powi(2)));
            let d = mean(r.iter().map(|s| (s - 1.0).powi(2))) + mean(f.iter().map(|s| s * s));
            (g, d)
        })
        .collect())
}

/// `(L_adv_G, L_adv_D)` summed over sub-discriminators.
pub fn adversarial_losses(
    real_scores: &[Vec<f64>],
    fake_scores: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let terms = adversarial_terms(real_scores, fake_scores)?;
    Ok(terms
        .iter()
        .fold((0.0, 0.0), |acc, t| (acc.0 + t.0, acc.1 + t.1)))
}

/// Feature-matching term per sub-discriminator.
pub fn feature_matching_terms(
    real: &DiscriminatorFeatures,
    fake: &DiscriminatorFeatures,
) -> Result<Vec<f64>> {
    if real.subs.len() != fake.subs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} real vs {} fake sub-discriminators",
            real.subs.len(),
            fake.subs.len()
        )));
    }
    real.subs
        .iter()
        .zip(&fake.subs)
        .enumerate()
        .map(|(k, (r, f))| {
            if r.feature_maps.len() != f.feature_maps.len() {
                return Err(Error::LengthMismatch(format!(
                    "sub-discriminator {k}: layer counts differ"
                )));
            }
            r.feature_maps
                .iter()
                .zip(&f.feature_maps)
                .enumerate()
                .map(|(i, (a, b))| {
                    if a.len() != b.len() || a.is_empty() {
                        return Err(Error::LengthMismatch(format!(
                            "sub-discriminator {k} layer {i}: {} vs {} elements",
                            a.len(),
                            b.len()
                        )));
                    }
                    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
                })
                .sum()
        })
        .collect()
}

pub fn feature_matching_loss(
    real: &DiscriminatorFeatures,
    fake: &DiscriminatorFeatures,
) -> Result<f64> {
    Ok(feature_matching_terms(real, fake)?.iter().sum())
}

pub fn mel_loss(x: &Waveform, x_hat: &Waveform, cfg: &MelConfig) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::LengthMismatch(format!(
            "{} vs {} samples",
            x.len(),
            x_hat.len()
        )));
    }
    if x.sample_rate() != x_hat.sample_rate() {
        return Err(Error::SampleRate {
            expected: x.sample_rate(),
            actual: x_hat.sample_rate(),
        });
    }
    let a = mel_spectrogram(x, cfg)?;
    let b = mel_spectrogram(x_hat, cfg)?;
    Ok((&a - &b).mapv(f64::abs).mean().unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorLossTerms {
    pub adversarial: f64,
    pub feature_matching: f64,
    pub mel: f64,
    pub total: f64,
}

/// All generator-side terms and their weighted total.
pub fn generator_loss_terms(
    x: &Waveform,
    x_hat: &Waveform,
    real: &DiscriminatorFeatures,
    fake: &DiscriminatorFeatures,
    cfg: &VocLossConfig,
) -> Result<GeneratorLossTerms> {
    cfg.validate()?;
    let adv = adversarial_terms(&real.scores(), &fake.scores())?;
    let fm = feature_matching_terms(real, fake)?;
    let mel = mel_loss(x, x_hat, &cfg.mel)?;
    let adversarial: f64 = adv.iter().map(|t| t.0).sum();
    let feature_matching: f64 = fm.iter().sum();
    let per_sub: f64 = adv
        .iter()
        .zip(&fm)
        .map(|(a, f)| a.0 + cfg.lambda_fm * f)
        .sum();
    Ok(GeneratorLossTerms {
        adversarial,
        feature_matching,
        mel,
        total: per_sub + cfg.lambda_mel * mel,
    })
}

pub fn generator_loss(
    x: &Waveform,
    x_hat: &Waveform,
    real: &DiscriminatorFeatures,
    fake: &DiscriminatorFeatures,
    cfg: &VocLossConfig,
) -> Result<f64> {
    Ok(generator_loss_terms(x, x_hat, real, fake, cfg)?.total)
}

pub fn discriminator_loss(
    real: &DiscriminatorFeatures,
    fake: &DiscriminatorFeatures,
) -> Result<f64> {
    Ok(adversarial_losses(&real.scores(), &fake.scores())?.1)
}

/// A stack of seeded linear maps standing in for one sub-discriminator.
/// Every layer output is a feature map; a final linear head gives the scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDiscriminator {
    pub layers: Vec<Array2<f64>>,
    pub head: Array2<f64>,
}

impl LinearDiscriminator {
    /// `widths` lists the output size of each layer.
    pub fn seeded(input_len: usize, widths: &[usize], n_scores: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut prev = input_len;
        let mut layers = Vec::with_capacity(widths.len());
        for &w in widths {
            let bound = 1.0 / (prev as f64).sqrt();
            layers.push(Array2::from_shape_fn((w, prev), |_| {
                rng.random_range(-bound..bound)
            }));
            prev = w;
        }
        let bound = 1.0 / (prev as f64).sqrt();
        let head = Array2::from_shape_fn((n_scores, prev), |_| rng.random_range(-bound..bound));
        Self { layers, head }
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(self.head.ncols(), |l| l.ncols())
    }

    pub fn forward(&self, x: &[f64]) -> Result<SubDiscriminatorOutput> {
        if x.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                actual: x.len(),
            });
        }
        let mut h = Array1::from(x.to_vec());
        let mut feature_maps = Vec::with_capacity(self.layers.len());
        for w in &self.layers {
            h = w.dot(&h);
            feature_maps.push(h.to_vec());
        }
        Ok(SubDiscriminatorOutput {
            scores: self.head.dot(&h).to_vec(),
            feature_maps,
        })
    }

    /// Value and gradient w.r.t. `x_hat` of `L_adv_G + λ_fm L_fm` for this
    /// sub-discriminator.
    pub fn generator_grad(
        &self,
        x: &[f64],
        x_hat: &[f64],
        lambda_fm: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let real = self.forward(x)?;
        let fake = self.forward(x_hat)?;
        let n_s = fake.scores.len() as f64;
        let mut value = mean(fake.scores.iter().map(|s| (s - 1.0).powi(2)));
        let ds = Array1::from_iter(fake.scores.iter().map(|s| 2.0 * (s - 1.0) / n_s));
        let mut g = self.head.t().dot(&ds);
        for (i, w) in self.layers.iter().enumerate().rev() {
            let (r, f) = (&real.feature_maps[i], &fake.feature_maps[i]);
            let n = f.len() as f64;
            value += lambda_fm * r.iter().zip(f).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
            for (gj, (a, b)) in g.iter_mut().zip(r.iter().zip(f)) {
                // d|a - b|/db = sign(b - a)
                *gj += lambda_fm * (b - a).signum() * f64::from(u8::from(a != b)) / n;
            }
            g = w.t().dot(&g);
        }
        Ok((value, g.to_vec()))
    }
}

/// Seeded stand-ins shaped like a five-period plus three-scale bank: the
/// first five use three layers, the last three use four, with varied widths.
pub fn standin_bank(input_len: usize, seed: u64) -> Vec<LinearDiscriminator> {
    (0..8u64)
        .map(|k| {
            let widths: Vec<usize> = if k < 5 {
                vec![16 + 2 * k as usize, 12, 6]
            } else {
                vec![24, 16 - k as usize, 10, 4]
            };
            LinearDiscriminator::seeded(
                input_len,
                &widths,
                3 + k as usize % 2,
                seed.wrapping_add(k),
            )
        })
        .collect()
}

pub fn run_bank(bank: &[LinearDiscriminator], x: &[f64]) -> Result<DiscriminatorFeatures> {
    Ok(DiscriminatorFeatures {
        subs: bank.iter().map(|d| d.forward(x)).collect::<Result<_>>()?,
    })
}
