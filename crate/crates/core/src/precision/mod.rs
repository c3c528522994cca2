//! Diagonal entries of the sample precision matrix.
//!
//! Precision-entry indices `q` are one-based (`1 ≤ q ≤ p`), matching the
//! row labels `b_1..b_p` used throughout reports and configs.

mod covariance;
mod entries;

pub use covariance::{sample_covariance, CovarianceVariant, PopulationCovariance, SampleCovariance};
pub use entries::{
    lss_difference, precision_diag_cramer, precision_diag_direct, precision_diag_direct_at,
    precision_diag_quadform, precision_pair_quadform, quadform_entry, LssDifference, PairEntries,
    QuadformEntry, LEMMA_AGREEMENT_TOLERANCE, LSS_TOLERANCE,
};
