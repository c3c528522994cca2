//! Covariance of two diagonal precision entries under Gaussian data.
//!
//! With `Σ̂ = W/n` and `W ~ W_p(n, Σ)`, the scaled statistic
//! `√(n-p)·(n-p)/n·(Σ̂⁻¹)_qq` equals `(n-p)^{3/2} (W⁻¹)_qq`. The inverse
//! Wishart second moments give its covariance in closed form:
//!
//! `Cov = (n-p)³ [2 σ^{ii}σ^{jj} + 2(n-p-1)(σ^{ij})²] / ((n-p)(n-p-1)²(n-p-3))`
//!
//! which tends to `2(σ^{ij})²`. The report puts the Monte Carlo estimate
//! next to this value and next to the linear alternative `2σ^{ij}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{DistributionConfig, ExperimentConfig, Mode, SigmaConfig};
use crate::precision::PopulationCovariance;
use crate::randgen::DistributionKind;

use super::engine::run_monte_carlo;
use super::stats::pair_dependence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WishartCandidate {
    /// `2 (Σ⁻¹)_{q1,q2}`
    Linear,
    /// `2 ((Σ⁻¹)_{q1,q2})²`
    Squared,
    /// Both candidates give the same value.
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WishartReport {
    pub q1: usize,
    pub q2: usize,
    pub count: usize,
    /// `(Σ⁻¹)_{q1,q2}`
    pub sigma_inv_offdiag: f64,
    pub empirical_cov: f64,
    pub cov_se: f64,
    pub empirical_corr: f64,
    pub linear_candidate: f64,
    pub squared_candidate: f64,
    pub exact_finite_n: f64,
    pub closer: WishartCandidate,
    /// `empirical_cov / cov_se`
    pub z_from_zero: f64,
}

/// `√(n-p)·(n-p)/n`, the factor applied to `(Σ̂⁻¹)_qq`.
pub fn wishart_scale(n: usize, p: usize) -> f64 {
    let g = (n - p) as f64;
    g.sqrt() * g / n as f64
}

/// Closed-form covariance of the two scaled entries.
pub fn wishart_exact_cov(sigma_inv: &nalgebra::DMatrix<f64>, n: usize, p: usize, q1: usize, q2: usize) -> Result<f64> {
    if n < p + 4 {
        return Err(Error::Domain(format!("inverse Wishart covariance needs n - p > 3, got n={n}, p={p}")));
    }
    let g = (n - p) as f64;
    let (i, j) = (q1 - 1, q2 - 1);
    let sij = sigma_inv[(i, j)];
    let num = 2.0 * sigma_inv[(i, i)] * sigma_inv[(j, j)] + 2.0 * (g - 1.0) * sij * sij;
    Ok(g * g * g * num / (g * (g - 1.0) * (g - 1.0) * (g - 3.0)))
}

/// Builds the report from paired raw entries `((Σ̂⁻¹)_{q1q1}, (Σ̂⁻¹)_{q2q2})`.
pub fn wishart_report(
    raw_pairs: &[(f64, f64)],
    sigma: &PopulationCovariance,
    n: usize,
    p: usize,
    q1: usize,
    q2: usize,
) -> Result<WishartReport> {
    if q1 == q2 || q1 < 1 || q2 < 1 || q1.max(q2) > p {
        return Err(Error::Domain(format!("need distinct q1, q2 in 1..={p}, got {q1}, {q2}")));
    }
    let c = wishart_scale(n, p);
    let scaled: Vec<(f64, f64)> = raw_pairs.iter().map(|&(a, b)| (c * a, c * b)).collect();
    let dep = pair_dependence(&scaled)?;
    let sij = sigma.inverse()[(q1 - 1, q2 - 1)];
    let linear = 2.0 * sij;
    let squared = 2.0 * sij * sij;
    let (dl, ds) = ((dep.cov - linear).abs(), (dep.cov - squared).abs());
    let closer = if linear == squared {
        WishartCandidate::Tie
    } else if ds < dl {
        WishartCandidate::Squared
    } else {
        WishartCandidate::Linear
    };
    Ok(WishartReport {
        q1,
        q2,
        count: dep.count,
        sigma_inv_offdiag: sij,
        empirical_cov: dep.cov,
        cov_se: dep.cov_se,
        empirical_corr: dep.corr,
        linear_candidate: linear,
        squared_candidate: squared,
        exact_finite_n: wishart_exact_cov(sigma.inverse(), n, p, q1, q2)?,
        closer,
        z_from_zero: dep.cov / dep.cov_se,
    })
}

/// Monte Carlo run of `M` Gaussian replicates for the pair `(q1, q2)`.
#[allow(clippy::too_many_arguments)]
pub fn wishart_cov_check(
    sigma: &PopulationCovariance,
    p: usize,
    n: usize,
    m: usize,
    q1: usize,
    q2: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<WishartReport> {
    if sigma.dim() != p {
        return Err(Error::Dimension(format!("sigma is {0}×{0}, p = {p}", sigma.dim())));
    }
    let sigma_config = if sigma.is_diagonal() {
        SigmaConfig::Diagonal {
            values: Some(sigma.matrix().diagonal().iter().copied().collect()),
            ramp: false,
        }
    } else {
        SigmaConfig::Explicit {
            matrix: sigma.matrix().row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    };
    let mut config = ExperimentConfig::new(Mode::WishartCov, DistributionConfig::Name(DistributionKind::Gaussian), p, n);
    config.sigma = sigma_config;
    config.replicates = m;
    config.master_seed = seed;
    config.q_indices = vec![q1, q2];
    config.workers = workers;
    run_monte_carlo(&config)?
        .wishart
        .ok_or_else(|| Error::Degenerate(format!("{m} replicates are too few for a covariance")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_on_diagonal_sigma_vanish() {
        let sigma = PopulationCovariance::diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let pairs = [(1.0, 2.0), (2.0, 1.0), (1.5, 1.5)];
        let r = wishart_report(&pairs, &sigma, 20, 3, 1, 3).unwrap();
        assert_eq!((r.linear_candidate, r.squared_candidate), (0.0, 0.0));
        assert_eq!(r.closer, WishartCandidate::Tie);
        // only the 2σ^{ii}σ^{jj} term survives
        let g = 17.0f64;
        let expect = g * g * g * 2.0 * 1.0 * 0.25 / (g * 16.0 * 16.0 * 14.0);
        assert!((r.exact_finite_n - expect).abs() < 1e-15);
    }

    #[test]
    fn unit_offdiagonal_makes_candidates_coincide() {
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let sigma = PopulationCovariance::explicit(m.try_inverse().unwrap()).unwrap();
        let r = wishart_report(&[(1.0, 1.0), (2.0, 3.0), (0.5, 0.1)], &sigma, 40, 2, 1, 2).unwrap();
        assert!((r.sigma_inv_offdiag - 1.0).abs() < 1e-12);
        assert!((r.linear_candidate - r.squared_candidate).abs() < 1e-11);
    }

    #[test]
    fn exact_formula_tends_to_squared_candidate() {
        let sigma = PopulationCovariance::ar1(4, 0.5).unwrap();
        let s = sigma.inverse();
        let big = wishart_exact_cov(s, 1_000_000, 4, 2, 3).unwrap();
        assert!((big - 2.0 * s[(1, 2)].powi(2)).abs() < 1e-4);
        assert!(wishart_exact_cov(s, 7, 4, 2, 3).is_err());
    }

    #[test]
    fn scale_factor() {
        assert!((wishart_scale(120, 30) - 90f64.powf(1.5) / 120.0).abs() < 1e-12);
    }

    #[test]
    fn check_rejects_bad_sigma_dim() {
        let sigma = PopulationCovariance::identity(3).unwrap();
        assert!(wishart_cov_check(&sigma, 4, 40, 10, 1, 2, 0, Some(1)).is_err());
    }
}
