//! The routes to `(Σ̂⁻¹)_qq`.
//!
//! * direct: Cholesky inverse, the oracle every other route is checked against;
//! * Cramer: `|Σ̂^{(-q)}| / |Σ̂|` in log space;
//! * quadform: `n / (b_qᵀ P₋q b_q)` with `P₋q` the complement projector of
//!   the other rows, obtained from Gram-Schmidt after moving row `q` last;
//! * pair: `(Î⁻¹)_pp` and `(Î⁻¹)_{p-1,p-1}` from one shared `P(p-2)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{log_det_psd, qr_gram_schmidt, QrFactors};
use crate::randgen::DataMatrix;

use super::covariance::SampleCovariance;

/// Relative tolerance at which the two pair formulas must agree.
pub const LEMMA_AGREEMENT_TOLERANCE: f64 = 1e-6;

/// Tolerance of the log-determinant difference identity.
pub const LSS_TOLERANCE: f64 = 1e-8;

fn check_index(q: usize, p: usize) -> Result<()> {
    if q < 1 || q > p {
        return Err(Error::Dimension(format!("index q={q} outside 1..={p}")));
    }
    Ok(())
}

fn cholesky(s: &SampleCovariance) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    s.matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("sample covariance Cholesky factorization failed".into()))
}

/// All diagonal entries of `Σ̂⁻¹` from the full inverse.
pub fn precision_diag_direct(s: &SampleCovariance) -> Result<DVector<f64>> {
    Ok(cholesky(s)?.inverse().diagonal())
}

/// `(Σ̂⁻¹)_qq` alone, from one triangular solve against `e_q`.
pub fn precision_diag_direct_at(s: &SampleCovariance, q: usize) -> Result<f64> {
    check_index(q, s.dim())?;
    let mut e = DVector::zeros(s.dim());
    e[q - 1] = 1.0;
    Ok(cholesky(s)?.solve(&e)[q - 1])
}

/// `(Σ̂⁻¹)_qq = exp(log|Σ̂^{(-q)}| - log|Σ̂|)`.
pub fn precision_diag_cramer(s: &SampleCovariance, q: usize) -> Result<f64> {
    check_index(q, s.dim())?;
    let full = log_det_psd(s.matrix())?;
    let minor = if s.dim() == 1 { 0.0 } else { log_det_psd(&s.minor(q))? };
    Ok((minor - full).exp())
}

/// Gram-Schmidt of `Xᵀ` with row `q` moved to the last column.
#[derive(Debug, Clone)]
pub struct QuadformEntry {
    /// `(Î⁻¹)_qq`
    pub entry: f64,
    /// `b_qᵀ P₋q b_q`, the squared last diagonal of `R`.
    pub residual_sq: f64,
    factors: QrFactors,
}

impl QuadformEntry {
    pub fn factors(&self) -> &QrFactors {
        &self.factors
    }

    /// Diagonal of the complement projector `P₋q` of the other `p - 1` rows.
    pub fn complement_diagonal(&self) -> Vec<f64> {
        self.factors.complement(self.factors.ncols() - 1).diagonal()
    }
}

/// Quadratic-form route for one-based `q`, with the factorization kept
/// for diagnostics.
pub fn quadform_entry(x: &DataMatrix, q: usize) -> Result<QuadformEntry> {
    let p = x.p();
    check_index(q, p)?;
    // swap rows q and p: the distributional argument only needs q last
    let mut order: Vec<usize> = (0..p).collect();
    order.swap(q - 1, p - 1);
    let factors = qr_gram_schmidt(&x.rows_as_columns(&order))?;
    let residual_sq = factors.r_diag_sq(p - 1);
    if !(residual_sq > 0.0) {
        return Err(Error::Degenerate(format!("b_qᵀ P b_q = {residual_sq:e}")));
    }
    Ok(QuadformEntry {
        entry: x.n() as f64 / residual_sq,
        residual_sq,
        factors,
    })
}

/// `(Î⁻¹)_qq = n / (b_qᵀ P₋q b_q)`.
pub fn precision_diag_quadform(x: &DataMatrix, q: usize) -> Result<f64> {
    Ok(quadform_entry(x, q)?.entry)
}

/// `(Î⁻¹)_pp` and `(Î⁻¹)_{p-1,p-1}` from one Gram-Schmidt pass.
#[derive(Debug, Clone)]
pub struct PairEntries {
    /// `(Î⁻¹)_pp = n / r_pp²`
    pub inv_pp: f64,
    /// `(Î⁻¹)_{p-1,p-1}` from `b_{p-1}ᵀ (P(p-2) - Q(p)) b_{p-1}`.
    pub inv_pm1: f64,
    /// `(Î⁻¹)_{p-1,p-1}` from `r_pp² r_{p-1,p-1}² / (b_pᵀ P(p-2) b_p)`.
    pub inv_pm1_product: f64,
    /// `r_pp² = b_pᵀ P(p-1) b_p`
    pub residual_pp: f64,
    /// `r_{p-1,p-1}² = b_{p-1}ᵀ P(p-2) b_{p-1}`
    pub residual_pm1: f64,
    /// `b_pᵀ P(p-2) b_p`
    pub shared_quadform: f64,
    factors: QrFactors,
    /// `P(p-2) b_p`
    projected_last: Vec<f64>,
}

impl PairEntries {
    pub fn factors(&self) -> &QrFactors {
        &self.factors
    }

    /// Relative disagreement of the two `(p-1, p-1)` formulas.
    pub fn lemma_disagreement(&self) -> f64 {
        (self.inv_pm1 - self.inv_pm1_product).abs() / self.inv_pm1.abs()
    }

    /// Diagonal of `P(p-1)`, the projector behind `(Î⁻¹)_pp`.
    pub fn diag_last(&self) -> Vec<f64> {
        self.factors.complement(self.factors.ncols() - 1).diagonal()
    }

    /// Diagonal of `P(p-2) - Q(p)`, the projector behind `(Î⁻¹)_{p-1,p-1}`.
    pub fn diag_second_last(&self) -> Vec<f64> {
        let p = self.factors.ncols();
        let mut d = self.factors.complement(p - 2).diagonal();
        for (di, vi) in d.iter_mut().zip(&self.projected_last) {
            *di -= vi * vi / self.shared_quadform;
        }
        d
    }

    /// Trace of `P(p-2) - Q(p)`, summed from its diagonal.
    pub fn second_last_trace(&self) -> f64 {
        self.diag_second_last().iter().sum()
    }
}

pub fn precision_pair_quadform(x: &DataMatrix) -> Result<PairEntries> {
    let (p, n) = (x.p(), x.n());
    if p < 2 {
        return Err(Error::Dimension(format!("pair entries need p ≥ 2, got {p}")));
    }
    let factors = qr_gram_schmidt(&x.transpose())?;
    let shared = factors.complement(p - 2);
    let projected_last = shared.apply_slice(x.entries().row(p - 1).transpose().as_slice());
    let projected_prev = shared.apply_slice(x.entries().row(p - 2).transpose().as_slice());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let shared_quadform = dot(&projected_last, &projected_last);
    let tol = (n as f64) * f64::EPSILON * x.entries().row(p - 1).norm_squared();
    if !(shared_quadform > tol) {
        return Err(Error::Degenerate(format!(
            "b_pᵀ P(p-2) b_p = {shared_quadform:e} below tolerance {tol:e}"
        )));
    }
    let cross = dot(&projected_last, &projected_prev);
    let projector_form = dot(&projected_prev, &projected_prev) - cross * cross / shared_quadform;
    if !(projector_form > 0.0) {
        return Err(Error::Degenerate(format!(
            "b_(p-1)ᵀ (P(p-2) - Q(p)) b_(p-1) = {projector_form:e}"
        )));
    }
    let residual_pp = factors.r_diag_sq(p - 1);
    let residual_pm1 = factors.r_diag_sq(p - 2);
    let product_form = residual_pp * residual_pm1 / shared_quadform;
    let entries = PairEntries {
        inv_pp: n as f64 / residual_pp,
        inv_pm1: n as f64 / projector_form,
        inv_pm1_product: n as f64 / product_form,
        residual_pp,
        residual_pm1,
        shared_quadform,
        factors,
        projected_last,
    };
    let gap = entries.lemma_disagreement();
    if !(gap <= LEMMA_AGREEMENT_TOLERANCE) {
        return Err(Error::IdentityViolation(format!(
            "pair formulas for (p-1, p-1) disagree by {gap:e}"
        )));
    }
    Ok(entries)
}

/// `log|Σ̂^{(-q)}| - log|Σ̂|` with its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LssDifference {
    pub log_det_full: f64,
    pub log_det_minor: f64,
    pub difference: f64,
}

/// Difference of the two log-determinant spectral statistics. The result is
/// checked against `log (Σ̂⁻¹)_qq` from a direct solve.
pub fn lss_difference(s: &SampleCovariance, q: usize) -> Result<LssDifference> {
    check_index(q, s.dim())?;
    let log_det_full = log_det_psd(s.matrix())?;
    let log_det_minor = if s.dim() == 1 { 0.0 } else { log_det_psd(&s.minor(q))? };
    let difference = log_det_minor - log_det_full;
    let reference = precision_diag_direct_at(s, q)?.ln();
    if !((difference - reference).abs() <= LSS_TOLERANCE * reference.abs().max(1.0)) {
        return Err(Error::IdentityViolation(format!(
            "log-determinant difference {difference} vs log precision entry {reference}"
        )));
    }
    Ok(LssDifference {
        log_det_full,
        log_det_minor,
        difference,
    })
}
