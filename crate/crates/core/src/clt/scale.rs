//! Fluctuation scales of `log|Σ̂|` and of the log-determinant difference
//! `log|Σ̂^{(-p)}| - log|Σ̂|` along a doubling ladder at fixed `p/n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Mode};

use super::engine::run_monte_carlo;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRung {
    pub n: usize,
    pub p: usize,
    pub count: usize,
    pub var_log_det: f64,
    pub var_lss: f64,
    /// `Var(log|Σ̂|) / Var(lss)`
    pub ratio: f64,
    /// `Var(√(n-p+1) · lss)`
    pub var_scaled_lss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub rungs: Vec<ScaleRung>,
    pub ratio_monotone: bool,
    /// Last rung's ratio over the first rung's.
    pub growth_factor: f64,
}

fn variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().count() as f64;
    if m < 2.0 {
        return f64::NAN;
    }
    let mean = v.clone().sum::<f64>() / m;
    v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)
}

/// One `(n, p, [(log|Σ̂|, lss)])` entry per rung, in ladder order.
pub fn scale_report(rungs: &[(usize, usize, Vec<(f64, f64)>)]) -> Result<ScaleReport> {
    if rungs.is_empty() {
        return Err(Error::Degenerate("scale report needs at least one rung".into()));
    }
    let rungs: Vec<ScaleRung> = rungs
        .iter()
        .map(|(n, p, values)| {
            let var_log_det = variance(values.iter().map(|v| v.0));
            let var_lss = variance(values.iter().map(|v| v.1));
            ScaleRung {
                n: *n,
                p: *p,
                count: values.len(),
                var_log_det,
                var_lss,
                ratio: var_log_det / var_lss,
                var_scaled_lss: (n - p + 1) as f64 * var_lss,
            }
        })
        .collect();
    let ratio_monotone = rungs.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let growth_factor = rungs[rungs.len() - 1].ratio / rungs[0].ratio;
    Ok(ScaleReport {
        rungs,
        ratio_monotone,
        growth_factor,
    })
}

/// Runs the ladder described by `config` (mode is forced to scale separation).
pub fn scale_separation(config: &ExperimentConfig) -> Result<ScaleReport> {
    let mut config = config.clone();
    config.mode = Mode::ScaleSeparation;
    run_monte_carlo(&config)?
        .scale
        .ok_or_else(|| Error::Degenerate("scale separation without replicates".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_and_monotonicity() {
        let a = vec![(0.0, 0.0), (2.0, 1.0), (4.0, 2.0)];
        let b = vec![(0.0, 0.0), (4.0, 1.0), (8.0, 2.0)];
        let r = scale_report(&[(10, 5, a), (20, 10, b)]).unwrap();
        assert_eq!(r.rungs[0].ratio, 4.0);
        assert_eq!(r.rungs[1].ratio, 16.0);
        assert!(r.ratio_monotone);
        assert_eq!(r.growth_factor, 4.0);
        assert_eq!(r.rungs[0].var_scaled_lss, 6.0);
    }

    #[test]
    fn flat_ladder_is_not_monotone() {
        let a = vec![(0.0, 0.0), (1.0, 1.0)];
        let r = scale_report(&[(10, 5, a.clone()), (20, 10, a)]).unwrap();
        assert!(!r.ratio_monotone);
    }
}
