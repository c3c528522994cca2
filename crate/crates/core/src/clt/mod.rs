//! Standardized statistics, variance normalizers and the Monte Carlo
//! engine that checks their limit laws.

pub mod engine;
pub mod rho;
pub mod scale;
pub mod stats;
pub mod wishart;

pub use engine::{
    run_monte_carlo, summarize, AuditStats, KsColumn, KsResult, Marginal, McSummary, Reference, RhoSummary,
    StandardizedSample, AUDIT_TOLERANCE,
};
pub use rho::{pii_limit_check, projector_diagonal, rho_limit, rho_n, RhoValues};
pub use scale::{scale_report, scale_separation, ScaleReport, ScaleRung};
pub use stats::{
    ks_distance, ks_statistic, ks_statistic_chi_square, ks_threshold, normal_cdf, pair_dependence,
    standardize_entry, Moments, PairDependence, KOLMOGOROV_C_001, KS_INFLATION,
};
pub use wishart::{wishart_cov_check, wishart_exact_cov, wishart_report, wishart_scale, WishartCandidate, WishartReport};
