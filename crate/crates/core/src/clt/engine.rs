//! The replicate engine.
//!
//! Replicate `i` of a run draws its data from stream `i` of the master seed
//! (rung `r` of a scale ladder uses streams `r·M .. (r+1)·M`), so every
//! replicate is a pure function of `(config, master_seed, rep_id)`. Workers
//! only decide who computes what; the collected samples are ordered by
//! `rep_id` and all aggregation happens afterwards on that ordered list.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Mode, Normalizer};
use crate::linalg::cholesky_lower;
use crate::precision::{
    lss_difference, precision_diag_direct, precision_pair_quadform, quadform_entry, sample_covariance,
    PopulationCovariance,
};
use crate::randgen::{sample_data_matrix, DataMatrix, DistributionSpec, SeedSpec};

use super::rho::{rho_limit, rho_n};
use super::scale::{scale_report, ScaleReport};
use super::stats::{
    ks_statistic, ks_statistic_chi_square, ks_threshold, pair_dependence, standardize_entry, Moments,
    PairDependence,
};
use super::wishart::{wishart_report, WishartReport};

/// Relative gap between the quadform and direct routes that fails an audit.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

/// One standardized statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizedSample {
    pub rep_id: u64,
    pub q: usize,
    pub n: usize,
    pub p: usize,
    /// `(Σ̂⁻¹)_qq`, or `r_qq²` rescaled to unit population scale in
    /// `chi_square_law` mode.
    pub raw_entry: f64,
    pub t_value: f64,
    /// Finite-n normalizer from this replicate's projector (NaN when the
    /// mode does not form one).
    pub rho_n: f64,
    /// `log|Σ̂|`, recorded in `scale_separation` mode only.
    pub log_det: Option<f64>,
}

/// Law the KS distance is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Reference {
    Normal { mean: f64, variance: f64 },
    ChiSquare { df: f64 },
}

impl Reference {
    /// Density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        use statrs::distribution::{ChiSquared, Continuous, Normal};
        match *self {
            Reference::Normal { mean, variance } => Normal::new(mean, variance.sqrt()).map_or(f64::NAN, |d| d.pdf(x)),
            Reference::ChiSquare { df } => ChiSquared::new(df).map_or(f64::NAN, |d| d.pdf(x)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub distance: f64,
    pub threshold: f64,
    pub reference: Reference,
    /// Which sample column was compared: `t_value` or `raw_entry`.
    pub column: KsColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsColumn {
    TValue,
    RawEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSummary {
    pub nu4: f64,
    pub y: f64,
    pub rho_limit: f64,
    /// Mean of the per-replicate `ρₙ`, when the mode records it.
    pub rho_n_mean: Option<f64>,
}

/// Everything known about one `(n, p, q)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub count: usize,
    pub moments: Option<Moments>,
    pub ks: Option<KsResult>,
    pub rho: RhoSummary,
}

/// Direct-path audit bookkeeping. Kept out of the summary JSON because a
/// summary rebuilt from the sample CSV cannot reproduce it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditStats {
    pub audited: usize,
    pub max_rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub config_hash: String,
    pub samples: Vec<StandardizedSample>,
    pub marginals: Vec<Marginal>,
    pub pair: Option<PairDependence>,
    pub wishart: Option<WishartReport>,
    pub scale: Option<ScaleReport>,
    pub audit: AuditStats,
}

impl McSummary {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn marginal(&self, q: usize) -> Option<&Marginal> {
        self.marginals.iter().find(|m| m.q == q)
    }

    pub fn t_values(&self, n: usize, p: usize, q: usize) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| (s.n, s.p, s.q) == (n, p, q))
            .map(|s| s.t_value)
            .collect()
    }
}

/// One rung: the data law and covariance at a fixed `(n, p)`.
struct Rung {
    n: usize,
    p: usize,
    sigma: PopulationCovariance,
    first_rep: u64,
}

struct RepOutput {
    samples: Vec<StandardizedSample>,
    audit: Option<f64>,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn audit_check(rep_id: u64, quadform: f64, direct: f64) -> Result<f64> {
    let d = rel_diff(quadform, direct);
    if !(d < AUDIT_TOLERANCE) {
        return Err(Error::AuditFailure {
            rep_id,
            quadform,
            direct,
            rel_diff: d,
        });
    }
    Ok(d)
}

fn clamp_unit(diag: Vec<f64>) -> Vec<f64> {
    diag.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

struct Engine<'a> {
    config: &'a ExperimentConfig,
    dist: DistributionSpec,
    audit_every: u64,
}

impl Engine<'_> {
    fn data(&self, rung: &Rung, rep_id: u64) -> Result<(DataMatrix, DataMatrix)> {
        let x = sample_data_matrix(&self.dist, rung.p, rung.n, SeedSpec::new(self.config.master_seed, rep_id))?;
        let y = if rung.sigma.is_diagonal() { x.clone() } else { rung.sigma.transform(&x)? };
        Ok((x, y))
    }

    fn sample(&self, rung: &Rung, rep_id: u64, q: usize, raw_entry: f64, entry: f64, rho: f64) -> Result<StandardizedSample> {
        Ok(StandardizedSample {
            rep_id,
            q,
            n: rung.n,
            p: rung.p,
            raw_entry,
            t_value: standardize_entry(entry, rung.sigma.inverse_diag(q), rung.n, rung.p)?,
            rho_n: rho,
            log_det: None,
        })
    }

    /// `(Σ̂⁻¹)_qq` from the quadform route on `data`. Diagonal covariances
    /// keep the raw rows and rescale by `(Σ⁻¹)_qq` afterwards.
    fn entry_scale(&self, rung: &Rung, q: usize) -> f64 {
        if rung.sigma.is_diagonal() {
            rung.sigma.inverse_diag(q)
        } else {
            1.0
        }
    }

    fn replicate(&self, rung: &Rung, rep_id: u64) -> Result<RepOutput> {
        let local = rep_id - rung.first_rep;
        let audited = local % self.audit_every == 0;
        let nu4 = self.dist.nu4();
        let (n, p) = (rung.n, rung.p);
        let (x, data) = self.data(rung, rep_id)?;
        let mut samples = Vec::with_capacity(self.config.q_indices.len());
        let mut computed = Vec::with_capacity(self.config.q_indices.len());

        match self.config.mode {
            Mode::SingleEntry | Mode::ChiSquareLaw | Mode::WishartCov => {
                for &q in &self.config.q_indices {
                    let qe = quadform_entry(&data, q)?;
                    let entry = qe.entry * self.entry_scale(rung, q);
                    let rho = rho_n(&clamp_unit(qe.complement_diagonal()), n, p, nu4)?.rho_n;
                    let raw = if self.config.mode == Mode::ChiSquareLaw {
                        n as f64 * rung.sigma.inverse_diag(q) / entry
                    } else {
                        entry
                    };
                    samples.push(self.sample(rung, rep_id, q, raw, entry, rho)?);
                    computed.push((q, entry));
                }
            }
            Mode::Pair => {
                let pe = precision_pair_quadform(&data)?;
                let last = pe.inv_pp * self.entry_scale(rung, p);
                let prev = pe.inv_pm1 * self.entry_scale(rung, p - 1);
                let rho_last = rho_n(&clamp_unit(pe.diag_last()), n, p, nu4)?.rho_n;
                let rho_prev = rho_n(&clamp_unit(pe.diag_second_last()), n, p, nu4)?.rho_n;
                samples.push(self.sample(rung, rep_id, p, last, last, rho_last)?);
                samples.push(self.sample(rung, rep_id, p - 1, prev, prev, rho_prev)?);
                computed.push((p, last));
                computed.push((p - 1, prev));
            }
            Mode::ScaleSeparation => {
                let s = sample_covariance(&x, &rung.sigma)?;
                let l = cholesky_lower(s.matrix())?;
                let log_diag: Vec<f64> = (0..p).map(|i| 2.0 * l[(i, i)].ln()).collect();
                let log_det: f64 = log_diag.iter().sum();
                // the minor without row p is the leading block, whose factor is
                // the leading block of `l`
                let difference = -log_diag[p - 1];
                let entry = difference.exp();
                let mut sample = self.sample(rung, rep_id, p, entry, entry, f64::NAN)?;
                sample.log_det = Some(log_det);
                samples.push(sample);
                if audited {
                    let full = lss_difference(&s, p)?;
                    let d = audit_check(rep_id, difference, full.difference)?;
                    let via_quadform = quadform_entry(&x, p)?.entry * rung.sigma.inverse_diag(p);
                    let e = audit_check(rep_id, via_quadform, entry)?;
                    return Ok(RepOutput {
                        samples,
                        audit: Some(d.max(e)),
                    });
                }
                return Ok(RepOutput { samples, audit: None });
            }
            Mode::IdentityAudit | Mode::Sweep => {
                return Err(Error::Config(format!(
                    "mode {} is driven by its own subcommand, not the replicate engine",
                    self.config.mode
                )))
            }
        }

        let audit = if audited {
            let s = sample_covariance(&x, &rung.sigma)?;
            let direct = precision_diag_direct(&s)?;
            let mut worst = 0.0f64;
            for (q, entry) in computed {
                worst = worst.max(audit_check(rep_id, entry, direct[q - 1])?);
            }
            Some(worst)
        } else {
            None
        };
        Ok(RepOutput { samples, audit })
    }
}

/// Runs every replicate of a resolved config.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<McSummary> {
    let config = config.clone().resolve()?;
    let engine = Engine {
        config: &config,
        dist: config.distribution_spec()?,
        audit_every: config.audit_cadence() as u64,
    };
    let m = config.replicates as u64;
    let rungs: Vec<Rung> = config
        .dims()
        .into_iter()
        .enumerate()
        .map(|(r, (n, p))| {
            Ok(Rung {
                n,
                p,
                sigma: config.sigma.build(p)?,
                first_rep: r as u64 * m,
            })
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, u64)> = rungs
        .iter()
        .enumerate()
        .flat_map(|(r, rung)| (rung.first_rep..rung.first_rep + m).map(move |id| (r, id)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count())
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<Result<RepOutput>> =
        pool.install(|| tasks.par_iter().map(|&(r, id)| engine.replicate(&rungs[r], id)).collect());

    let mut samples = Vec::with_capacity(tasks.len() * config.q_indices.len());
    let mut audit = AuditStats::default();
    for out in outputs {
        let out = out?;
        if let Some(d) = out.audit {
            audit.audited += 1;
            audit.max_rel_diff = audit.max_rel_diff.max(d);
        }
        samples.extend(out.samples);
    }
    let mut summary = summarize(&config, samples)?;
    summary.audit = audit;
    Ok(summary)
}

/// Aggregates an ordered sample list. Pure: the same samples and config
/// always give the same summary, which is what lets a report rebuilt from
/// the sample CSV match the original run.
pub fn summarize(config: &ExperimentConfig, samples: Vec<StandardizedSample>) -> Result<McSummary> {
    let dist = config.distribution_spec()?;
    let nu4 = dist.nu4();
    let mut cells: BTreeMap<(usize, usize, usize), Vec<&StandardizedSample>> = BTreeMap::new();
    for s in &samples {
        cells.entry((s.n, s.p, s.q)).or_default().push(s);
    }
    // cells with no samples still get a row, so empty runs stay well-formed
    for (n, p) in config.dims() {
        let qs = if config.mode == Mode::ScaleSeparation { vec![p] } else { config.q_indices.clone() };
        for q in qs {
            cells.entry((n, p, q)).or_default();
        }
    }

    let mut marginals = Vec::with_capacity(cells.len());
    for (&(n, p, q), cell) in &cells {
        let t: Vec<f64> = cell.iter().map(|s| s.t_value).collect();
        let rhos: Vec<f64> = cell.iter().map(|s| s.rho_n).filter(|v| v.is_finite()).collect();
        let rho_n_mean = (!rhos.is_empty()).then(|| rhos.iter().sum::<f64>() / rhos.len() as f64);
        let y = p as f64 / n as f64;
        let rho = RhoSummary {
            nu4,
            y,
            rho_limit: rho_limit(nu4, y)?,
            rho_n_mean,
        };
        let ks = if cell.len() < 2 {
            None
        } else if config.mode == Mode::ChiSquareLaw {
            let df = (n - p + 1) as f64;
            let raw: Vec<f64> = cell.iter().map(|s| s.raw_entry).collect();
            Some(KsResult {
                distance: ks_statistic_chi_square(&raw, df)?,
                threshold: ks_threshold(cell.len()),
                reference: Reference::ChiSquare { df },
                column: KsColumn::RawEntry,
            })
        } else {
            let variance = match config.normalizer {
                Normalizer::RhoLimit => rho.rho_limit,
                Normalizer::RhoN => rho_n_mean.unwrap_or(rho.rho_limit),
            };
            Some(KsResult {
                distance: ks_statistic(&t, 0.0, variance)?,
                threshold: ks_threshold(cell.len()),
                reference: Reference::Normal { mean: 0.0, variance },
                column: KsColumn::TValue,
            })
        };
        marginals.push(Marginal {
            n,
            p,
            q,
            count: cell.len(),
            moments: Moments::from_values(&t),
            ks,
            rho,
        });
    }

    let by_rep = |q: usize| -> BTreeMap<u64, &StandardizedSample> {
        samples.iter().filter(|s| s.q == q).map(|s| (s.rep_id, s)).collect()
    };
    let joined = |q1: usize, q2: usize, f: &dyn Fn(&StandardizedSample) -> f64| -> Vec<(f64, f64)> {
        let (a, b) = (by_rep(q1), by_rep(q2));
        a.iter().filter_map(|(id, s)| b.get(id).map(|t| (f(s), f(t)))).collect()
    };

    let pair = if config.mode == Mode::Pair && samples.len() >= 4 {
        let p = config.p;
        Some(pair_dependence(&joined(p, p - 1, &|s| s.t_value))?)
    } else {
        None
    };

    let wishart = if config.mode == Mode::WishartCov && samples.len() >= 4 {
        let (q1, q2) = (config.q_indices[0], config.q_indices[1]);
        let sigma = config.sigma.build(config.p)?;
        Some(wishart_report(&joined(q1, q2, &|s| s.raw_entry), &sigma, config.n, config.p, q1, q2)?)
    } else {
        None
    };

    let scale = if config.mode == Mode::ScaleSeparation && !samples.is_empty() {
        let mut rungs = Vec::new();
        for (n, p) in config.dims() {
            let cell: Vec<(f64, f64)> = samples
                .iter()
                .filter(|s| (s.n, s.p) == (n, p))
                .filter_map(|s| s.log_det.map(|ld| (ld, s.raw_entry.ln())))
                .collect();
            rungs.push((n, p, cell));
        }
        Some(scale_report(&rungs)?)
    } else {
        None
    };

    Ok(McSummary {
        config_hash: config.config_hash()?,
        master_seed: config.master_seed,
        config: config.clone(),
        samples,
        marginals,
        pair,
        wishart,
        scale,
        audit: AuditStats::default(),
    })
}
