//! Limiting variance `ρ = 2 + (ν₄ - 3)(1 - y)` and its finite-n
//! counterpart `ρₙ = 2 + (ν₄ - 3)/(n - p + 1) · Σ p_ii²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::qr_gram_schmidt;
use crate::randgen::DataMatrix;

/// Slack allowed on `p_ii ∈ [0, 1]` for rounding in the projector diagonal.
const DIAG_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoValues {
    pub rho_limit: f64,
    pub rho_n: f64,
    /// `(1/n) Σ p_ii²`
    pub pii_sq_mean: f64,
    /// `p / n`
    pub y: f64,
}

pub fn rho_limit(nu4: f64, y: f64) -> Result<f64> {
    if !(nu4 >= 1.0 && nu4.is_finite()) {
        return Err(Error::Domain(format!("ν₄ must be finite and ≥ 1, got {nu4}")));
    }
    if !(0.0..1.0).contains(&y) {
        return Err(Error::Domain(format!("y must lie in [0, 1), got {y}")));
    }
    Ok(2.0 + (nu4 - 3.0) * (1.0 - y))
}

/// `ρₙ` from the diagonal of the rank-`(n-p+1)` projector.
pub fn rho_n(p_diag: &[f64], n: usize, p: usize, nu4: f64) -> Result<RhoValues> {
    if p_diag.len() != n {
        return Err(Error::Domain(format!(
            "projector diagonal has {} entries, expected n = {n}",
            p_diag.len()
        )));
    }
    if p < 1 || p >= n {
        return Err(Error::Domain(format!("need 1 ≤ p < n, got p={p}, n={n}")));
    }
    if let Some(v) = p_diag.iter().find(|v| !(**v >= -DIAG_SLACK && **v <= 1.0 + DIAG_SLACK)) {
        return Err(Error::Domain(format!("projector diagonal entry {v} outside [0, 1]")));
    }
    let y = p as f64 / n as f64;
    let rho_limit = rho_limit(nu4, y)?;
    let sum_sq: f64 = p_diag.iter().map(|v| v * v).sum();
    Ok(RhoValues {
        rho_limit,
        rho_n: 2.0 + (nu4 - 3.0) / (n - p + 1) as f64 * sum_sq,
        pii_sq_mean: sum_sq / n as f64,
        y,
    })
}

/// Diagonal of `P(p-1)`, the complement projector of the first `p - 1`
/// rows, clamped to `[0, 1]`.
pub fn projector_diagonal(x: &DataMatrix) -> Result<Vec<f64>> {
    let (p, n) = (x.p(), x.n());
    if p == 1 {
        return Ok(vec![1.0; n]);
    }
    let order: Vec<usize> = (0..p - 1).collect();
    let f = qr_gram_schmidt(&x.rows_as_columns(&order))?;
    Ok(f.complement(p - 1).diagonal().into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// `((1/n) Σ p_ii², (1/n) Σ (1 - p_ii - y)²)` for `P = P(p-1)` and
/// `y = (p-1)/n`.
pub fn pii_limit_check(x: &DataMatrix) -> Result<(f64, f64)> {
    let (p, n) = (x.p(), x.n());
    let y = (p - 1) as f64 / n as f64;
    let diag = projector_diagonal(x)?;
    let nf = n as f64;
    let sq = diag.iter().map(|v| v * v).sum::<f64>() / nf;
    let dev = diag.iter().map(|v| (1.0 - v - y).powi(2)).sum::<f64>() / nf;
    Ok((sq, dev))
}
