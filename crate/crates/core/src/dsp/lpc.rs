//! Autocorrelation-method linear prediction.

use crate::error::{invalid, Result};

/// Prediction coefficients for `x[n] ≈ Σ a_k x[n-k]`, `k = 1..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcFrame {
    pub coeffs: Vec<f64>,
    /// Final forward prediction error energy.
    pub gain: f64,
    pub order: usize,
    /// Set when the frame had no energy; coefficients are then all zero.
    pub degenerate: bool,
}

impl LpcFrame {
    /// Inverse filter polynomial `[1, -a_1, ..., -a_p]`.
    pub fn inverse_filter(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.coeffs.iter().map(|a| -a))
            .collect()
    }
}

/// Levinson–Durbin recursion on autocorrelation `r[0..=order]`.
///
/// Returns the prediction error after each order `0..=order`; the last entry
/// is the final gain.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if r.len() <= order {
        return Err(invalid("order", "autocorrelation shorter than order + 1"));
    }
    let mut a = vec![0.0; order];
    let mut errors = Vec::with_capacity(order + 1);
    let mut err = r[0];
    errors.push(err);
    if err <= 0.0 {
        errors.resize(order + 1, 0.0);
        return Ok((a, errors));
    }
    let mut prev = vec![0.0; order];
    for i in 0..order {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = (r[i + 1] - acc) / err;
        prev[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        // floor at zero: exact fits (pure sinusoids) can go slightly negative
        err = err.max(0.0);
        errors.push(err);
        if err == 0.0 {
            errors.resize(order + 1, 0.0);
            break;
        }
    }
    Ok((a, errors))
}

pub(crate) fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn lpc_coeffs(frame: &[f64], order: usize) -> Result<LpcFrame> {
    if order == 0 {
        return Err(invalid("order", "must be at least 1"));
    }
    if frame.len() <= order {
        return Err(invalid("frame", "must be longer than the LPC order"));
    }
    let r = autocorrelation(frame, order);
    if r[0] <= 0.0 {
        return Ok(LpcFrame {
            coeffs: vec![0.0; order],
            gain: 0.0,
            order,
            degenerate: true,
        });
    }
    let (coeffs, errors) = levinson_durbin(&r, order)?;
    Ok(LpcFrame {
        coeffs,
        gain: *errors.last().unwrap(),
        order,
        degenerate: false,
    })
}
