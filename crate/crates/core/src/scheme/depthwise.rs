//! The depth-wise logarithmic scale and the solver for its base `K`.
//!
//! With the He base variance `alpha = 2/n`, layer `l` is scaled by
//!
//! ```text
//! beta_l = alpha^(1/log_K(l + c) - 1) = alpha^(ln K / ln(l + c) - 1)
//! ```
//!
//! which is below one for `l + c < K`, exactly one at `l + c = K` and above one
//! beyond. Requiring `prod_{l=2..L} beta_l = V` gives
//! `ln K * sum_{l=2..L} 1/ln(l + c) = log_alpha(V) + (L - 1)`, solved for `K`
//! in closed form by [`KSolution::new`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Depth scale of `layer` for base `k`, He base variance `alpha` and log-base
/// shift `shift`.
pub fn beta(layer: usize, k: f64, alpha: f64, shift: u32) -> Result<f64> {
    let base = layer as f64 + f64::from(shift);
    if base <= 1.0 {
        return Err(invalid(format!(
            "log base l + c = {base} must exceed 1"
        )));
    }
    if !(k.is_finite() && k > 1.0) {
        return Err(invalid(format!("K must be a finite real > 1, got {k}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(alpha.powf(k.ln() / base.ln() - 1.0))
}

/// `S(L) = sum_{l=2..L} 1/ln(l)`.
pub fn log_inverse_sum(layers: usize) -> Result<f64> {
    shifted_log_inverse_sum(layers, 0)
}

/// `sum_{l=2..L} 1/ln(l + shift)`.
pub fn shifted_log_inverse_sum(layers: usize, shift: u32) -> Result<f64> {
    if layers < 2 {
        return Err(invalid(format!("need L >= 2, got {layers}")));
    }
    Ok((2..=layers)
        .map(|l| 1.0 / (l as f64 + f64::from(shift)).ln())
        .sum())
}

/// Closed-form solution for `K` on a network whose scaled layers all share
/// fan `width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSolution {
    pub k: f64,
    /// `2 / width`.
    pub alpha: f64,
    /// `sum_{l=2..L} 1/ln(l + shift)`.
    pub log_inverse_sum: f64,
    /// `log_alpha(V) + (L - 1)`; `K > 1` iff this is positive.
    pub rhs: f64,
    pub layers: usize,
    pub width: usize,
    pub variance: f64,
    pub shift: u32,
}

impl KSolution {
    pub fn new(layers: usize, width: usize, variance: f64, shift: u32) -> Result<Self> {
        if layers < 2 {
            return Err(invalid(format!("need L >= 2, got {layers}")));
        }
        if width <= 2 {
            return Err(Error::Unsupported(format!(
                "width {width} gives alpha = 2/n >= 1; depth-wise scaling needs n >= 3"
            )));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(invalid(format!(
                "target variance must be a finite positive real, got {variance}"
            )));
        }
        let alpha = 2.0 / width as f64;
        let rhs = variance.ln() / alpha.ln() + (layers - 1) as f64;
        if rhs <= 0.0 {
            return Err(Error::NoValidK {
                layers,
                width,
                variance,
                rhs,
            });
        }
        let sum = shifted_log_inverse_sum(layers, shift)?;
        Ok(Self {
            k: (rhs / sum).exp(),
            alpha,
            log_inverse_sum: sum,
            rhs,
            layers,
            width,
            variance,
            shift,
        })
    }
}

/// `K` for an unshifted depth-wise scale reaching total gain `variance` over
/// `layers` layers of width `width`.
pub fn solve_k(layers: usize, width: usize, variance: f64) -> Result<f64> {
    KSolution::new(layers, width, variance, 0).map(|s| s.k)
}
