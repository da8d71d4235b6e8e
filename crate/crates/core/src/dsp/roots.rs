//! Roots of real polynomials (Aberth–Ehrlich iteration) and the inverse
//! operation of rebuilding real coefficients from a conjugate-symmetric
//! root set.

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Maximum allowed `|p(z)|`, relative to the coefficient scale, at each
/// returned root.
pub const RESIDUAL_TOL: f64 = 1e-8;

const MAX_ITERS: usize = 500;

fn eval_with_derivative(coeffs: &[f64], z: C64) -> (C64, C64) {
    let mut p = C64::new(coeffs[0], 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in &coeffs[1..] {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Evaluate the polynomial with highest-degree coefficient first.
pub fn eval(coeffs: &[f64], z: C64) -> C64 {
    eval_with_derivative(coeffs, z).0
}

/// All complex roots of `coeffs[0] z^n + ... + coeffs[n]`.
///
/// Errors if the iteration does not bring every residual under
/// [`RESIDUAL_TOL`].
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<C64>> {
    let lead = coeffs.first().copied().unwrap_or(0.0);
    if lead == 0.0 {
        return Err(Error::Format("leading coefficient must be non-zero".into()));
    }
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let n = monic.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    // Fujiwara-style radius bound for the starting circle.
    let radius = monic[1..]
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs().powf(1.0 / (k + 1) as f64))
        .fold(0.0f64, f64::max)
        .max(1e-3);
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            C64::from_polar(
                radius,
                2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4,
            )
        })
        .collect();

    for _ in 0..MAX_ITERS {
        let mut max_step = 0.0f64;
        for k in 0..n {
            let (p, dp) = eval_with_derivative(&monic, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm() / z[k].norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }

    let scale: f64 = monic.iter().map(|c| c.abs()).sum();
    let worst = z
        .iter()
        .map(|&r| eval(&monic, r).norm() / scale.max(1.0))
        .fold(0.0f64, f64::max);
    if !(worst <= RESIDUAL_TOL) {
        return Err(Error::RootFinding(worst));
    }
    Ok(z)
}

/// A root set of a real polynomial, split into real roots and the
/// upper-half-plane member of each conjugate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateRoots {
    pub real: Vec<f64>,
    pub upper: Vec<C64>,
}

impl ConjugateRoots {
    /// Classify `roots` (from a real polynomial) so that the pairing is
    /// exact: each upper root stands for itself and its conjugate.
    pub fn from_roots(roots: &[C64]) -> Self {
        let n = roots.len();
        let tol = 1e-9;
        let mut by_imag: Vec<C64> = roots.to_vec();
        by_imag.sort_by(|a, b| b.im.total_cmp(&a.im));
        let mut n_complex = roots.iter().filter(|r| r.im.abs() > tol).count();
        if n_complex % 2 == 1 {
            n_complex -= 1;
        }
        let n_upper = n_complex / 2;
        let upper: Vec<C64> = by_imag[..n_upper].to_vec();
        // middle of the imag-sorted list holds the real roots
        let real = by_imag[n_upper..n - n_upper].iter().map(|r| r.re).collect();
        Self { real, upper }
    }

    pub fn degree(&self) -> usize {
        self.real.len() + 2 * self.upper.len()
    }

    /// Full root list with conjugates expanded.
    pub fn all(&self) -> Vec<C64> {
        let mut v: Vec<C64> = self.real.iter().map(|&r| C64::new(r, 0.0)).collect();
        for &u in &self.upper {
            v.push(u);
            v.push(u.conj());
        }
        v
    }

    /// Monic real coefficients (highest degree first) of `Π (z - root)`.
    pub fn to_polynomial(&self) -> Vec<f64> {
        let mut poly = vec![1.0];
        for &r in &self.real {
            poly = poly_mul(&poly, &[1.0, -r]);
        }
        for &u in &self.upper {
            poly = poly_mul(&poly, &[1.0, -2.0 * u.re, u.norm_sqr()]);
        }
        poly
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
