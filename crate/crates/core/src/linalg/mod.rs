//! Exact computational identities behind the precision-entry formulas.
//!
//! Indices in this module are zero-based.

mod kernels;
pub mod logdet;
pub mod projection;
pub mod qr;

pub use logdet::{cholesky_lower, log_det_psd};
pub use projection::{
    projection_complement, rank_one_projector, residual_quadform, ComplementProjector,
    ProjectionMatrix, MAX_DENSE_DIM,
};
pub use qr::{qr_cross_check, qr_gram_schmidt, qr_reorthogonalized, QrCrossCheck, QrFactors};
