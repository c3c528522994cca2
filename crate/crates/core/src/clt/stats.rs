//! Summary statistics and distances used to judge the Monte Carlo output.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};


use crate::error::{Error, Result};

/// Asymptotic Kolmogorov critical value `c(α)` at `α = 0.01`.
pub const KOLMOGOROV_C_001: f64 = 1.627_6;

/// Inflation applied to the Kolmogorov critical value when judging the
/// finite-n limit laws.
pub const KS_INFLATION: f64 = 1.5;

/// `√(n-p+1)/σ_qq · ((n-p+1)/n · entry - σ_qq)` with `σ_qq = (Σ⁻¹)_qq`.
pub fn standardize_entry(entry: f64, sigma_inv_qq: f64, n: usize, p: usize) -> Result<f64> {
    if !(sigma_inv_qq > 0.0) {
        return Err(Error::Domain(format!("(Σ⁻¹)_qq must be positive, got {sigma_inv_qq}")));
    }
    if p >= n {
        return Err(Error::Domain(format!("p < n required, got p={p}, n={n}")));
    }
    let m = (n - p + 1) as f64;
    Ok(m.sqrt() / sigma_inv_qq * (m / n as f64 * entry - sigma_inv_qq))
}

/// Standard normal CDF through `erfc`, accurate to double precision in
/// both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// First four moments with their large-sample standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub mean_se: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub variance_se: f64,
    pub skewness: f64,
    pub skewness_se: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub kurtosis_se: f64,
}

impl Moments {
    /// Two-pass moments; `None` for fewer than two values.
    pub fn from_values(values: &[f64]) -> Option<Moments> {
        let count = values.len();
        if count < 2 {
            return None;
        }
        let m = count as f64;
        let mean = values.iter().sum::<f64>() / m;
        let (mut c2, mut c3, mut c4) = (0.0, 0.0, 0.0);
        for v in values {
            let d = v - mean;
            let d2 = d * d;
            c2 += d2;
            c3 += d2 * d;
            c4 += d2 * d2;
        }
        let (c2, c3, c4) = (c2 / m, c3 / m, c4 / m);
        let variance = c2 * m / (m - 1.0);
        let skewness = if c2 > 0.0 { c3 / c2.powf(1.5) } else { f64::NAN };
        let kurtosis = if c2 > 0.0 { c4 / (c2 * c2) - 3.0 } else { f64::NAN };
        Some(Moments {
            count,
            mean,
            mean_se: (variance / m).sqrt(),
            variance,
            variance_se: ((c4 - c2 * c2).max(0.0) / m).sqrt(),
            skewness,
            skewness_se: (6.0 / m).sqrt(),
            kurtosis,
            kurtosis_se: (24.0 / m).sqrt(),
        })
    }
}

/// Supremum distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!(
            "KS distance needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("KS distance on non-finite samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
    }
    Ok(d)
}

/// KS distance against `N(ref_mean, ref_var)`.
pub fn ks_statistic(samples: &[f64], ref_mean: f64, ref_var: f64) -> Result<f64> {
    if !(ref_var > 0.0) {
        return Err(Error::Degenerate(format!("reference variance must be positive, got {ref_var}")));
    }
    let sd = ref_var.sqrt();
    ks_distance(samples, |x| normal_cdf((x - ref_mean) / sd))
}

/// KS distance against the χ² law with `df` degrees of freedom.
pub fn ks_statistic_chi_square(samples: &[f64], df: f64) -> Result<f64> {
    let law = ChiSquared::new(df).map_err(|e| Error::Domain(format!("χ² with {df} df: {e}")))?;
    ks_distance(samples, |x| law.cdf(x))
}

/// Kolmogorov critical value at `α = 0.01` for `m` samples, inflated by
/// [`KS_INFLATION`].
pub fn ks_threshold(m: usize) -> f64 {
    KS_INFLATION * KOLMOGOROV_C_001 / (m as f64).sqrt()
}

/// Empirical covariance and correlation of paired statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDependence {
    pub count: usize,
    pub cov: f64,
    pub cov_se: f64,
    pub corr: f64,
    pub corr_se: f64,
}

pub fn pair_dependence(pairs: &[(f64, f64)]) -> Result<PairDependence> {
    let count = pairs.len();
    if count < 2 {
        return Err(Error::Degenerate(format!("need at least 2 pairs, got {count}")));
    }
    let m = count as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::Degenerate("a coordinate has zero variance".into()));
    }
    let cov = sxy / (m - 1.0);
    let prod_mean = sxy / m;
    let prod_var = pairs
        .iter()
        .map(|&(x, y)| {
            let d = (x - mx) * (y - my) - prod_mean;
            d * d
        })
        .sum::<f64>()
        / (m - 1.0).max(1.0);
    let corr = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(PairDependence {
        count,
        cov,
        cov_se: (prod_var / m).sqrt(),
        corr,
        corr_se: (1.0 - corr * corr) / (m - 1.0).sqrt(),
    })
}
