//! QR factorization of a full-column-rank `n × p` matrix by Gram-Schmidt.
//!
//! The primary routine is modified Gram-Schmidt processed left to right:
//! column `j` only ever sees columns `0..j`, so truncating the input to its
//! first `k` columns reproduces the leading `k × k` block of `R` bit for bit.
//! A classical Gram-Schmidt pass with one full reorthogonalization serves as
//! the independent cross-check.

use nalgebra::{DMatrix, DVector};

use super::kernels::{dot, norm_sq, sub_scaled};
use super::projection::ComplementProjector;
use crate::error::{Error, Result};

/// Relative disagreement between the two QR routes above which an instance
/// is flagged as ill-conditioned.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-6;

/// `A = Q R` with orthonormal columns in `Q`, upper-triangular `R` and
/// `r_ii > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    q_factor: DMatrix<f64>,
    r_factor: DMatrix<f64>,
}

impl QrFactors {
    pub fn q_factor(&self) -> &DMatrix<f64> {
        &self.q_factor
    }

    pub fn r_factor(&self) -> &DMatrix<f64> {
        &self.r_factor
    }

    pub fn nrows(&self) -> usize {
        self.q_factor.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.q_factor.ncols()
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.r_factor[(i, j)]
    }

    /// `r_ii²`, the squared residual norm at step `i`.
    pub fn r_diag_sq(&self, i: usize) -> f64 {
        let r = self.r_factor[(i, i)];
        r * r
    }

    /// Norms `‖u_i‖` of the residual vectors before normalization.
    pub fn residual_norms(&self) -> Vec<f64> {
        (0..self.ncols()).map(|i| self.r_factor[(i, i)]).collect()
    }

    /// Orthonormal direction `e_i`.
    pub fn direction(&self, i: usize) -> &[f64] {
        let n = self.nrows();
        &self.q_factor.as_slice()[i * n..(i + 1) * n]
    }

    /// Unnormalized residual `u_i = r_ii e_i`.
    pub fn residual(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.direction(i)) * self.r_factor[(i, i)]
    }

    /// `log |AᵀA| = Σ log r_ii²`.
    pub fn log_det_gram(&self) -> f64 {
        (0..self.ncols())
            .map(|i| 2.0 * self.r_factor[(i, i)].ln())
            .sum()
    }

    /// Implicit projector onto the orthogonal complement of the first `k`
    /// columns of `A`.
    pub fn complement(&self, k: usize) -> ComplementProjector<'_> {
        assert!(k <= self.ncols(), "complement of {k} columns out of {}", self.ncols());
        let n = self.nrows();
        ComplementProjector::from_column_major(n, k, &self.q_factor.as_slice()[..n * k])
    }
}

fn rank_tolerance(n: usize, column_norm: f64) -> f64 {
    (n.max(1) as f64) * f64::EPSILON * column_norm
}

fn check_shape(a: &DMatrix<f64>) -> Result<(usize, usize)> {
    let (n, p) = a.shape();
    if p > n {
        return Err(Error::Dimension(format!(
            "QR needs at least as many rows as columns, got {n}×{p}"
        )));
    }
    Ok((n, p))
}

/// Modified Gram-Schmidt, one column at a time in input order.
pub fn qr_gram_schmidt(a: &DMatrix<f64>) -> Result<QrFactors> {
    let (n, p) = check_shape(a)?;
    let src = a.as_slice();
    let mut q = vec![0.0; n * p];
    let mut r = DMatrix::zeros(p, p);
    let mut v = vec![0.0; n];
    for j in 0..p {
        v.copy_from_slice(&src[j * n..(j + 1) * n]);
        let column_norm = norm_sq(&v).sqrt();
        for i in 0..j {
            let e = &q[i * n..(i + 1) * n];
            let rij = dot(e, &v);
            sub_scaled(&mut v, rij, e);
            r[(i, j)] = rij;
        }
        let rjj = norm_sq(&v).sqrt();
        let tol = rank_tolerance(n, column_norm);
        if !(rjj > tol) {
            return Err(Error::RankDeficient {
                column: j,
                residual: rjj,
                tolerance: tol,
            });
        }
        r[(j, j)] = rjj;
        let inv = 1.0 / rjj;
        for (dst, vi) in q[j * n..(j + 1) * n].iter_mut().zip(&v) {
            *dst = vi * inv;
        }
    }
    Ok(QrFactors {
        q_factor: DMatrix::from_vec(n, p, q),
        r_factor: r,
    })
}

/// Classical Gram-Schmidt with a second full orthogonalization pass
/// ("twice is enough").
pub fn qr_reorthogonalized(a: &DMatrix<f64>) -> Result<QrFactors> {
    let (n, p) = check_shape(a)?;
    let src = a.as_slice();
    let mut q = vec![0.0; n * p];
    let mut r = DMatrix::zeros(p, p);
    let mut v = vec![0.0; n];
    let mut coeffs = vec![0.0; p];
    for j in 0..p {
        let aj = &src[j * n..(j + 1) * n];
        v.copy_from_slice(aj);
        let column_norm = norm_sq(&v).sqrt();
        for pass in 0..2 {
            // classical: all coefficients against the current vector first
            for i in 0..j {
                coeffs[i] = dot(&q[i * n..(i + 1) * n], &v);
            }
            for i in 0..j {
                sub_scaled(&mut v, coeffs[i], &q[i * n..(i + 1) * n]);
                if pass == 0 {
                    r[(i, j)] = coeffs[i];
                } else {
                    r[(i, j)] += coeffs[i];
                }
            }
        }
        let rjj = norm_sq(&v).sqrt();
        let tol = rank_tolerance(n, column_norm);
        if !(rjj > tol) {
            return Err(Error::RankDeficient {
                column: j,
                residual: rjj,
                tolerance: tol,
            });
        }
        r[(j, j)] = rjj;
        for (dst, vi) in q[j * n..(j + 1) * n].iter_mut().zip(&v) {
            *dst = vi / rjj;
        }
    }
    Ok(QrFactors {
        q_factor: DMatrix::from_vec(n, p, q),
        r_factor: r,
    })
}

/// Both QR routes on the same input.
#[derive(Debug, Clone)]
pub struct QrCrossCheck {
    pub primary: QrFactors,
    pub hardened: QrFactors,
    /// `max_ij |R₁ - R₂|_ij / max |R₂|`.
    pub max_rel_diff: f64,
    pub ill_conditioned: bool,
}

pub fn qr_cross_check(a: &DMatrix<f64>) -> Result<QrCrossCheck> {
    let primary = qr_gram_schmidt(a)?;
    let hardened = qr_reorthogonalized(a)?;
    let scale = hardened.r_factor.amax().max(f64::MIN_POSITIVE);
    let max_rel_diff = (&primary.r_factor - &hardened.r_factor).amax() / scale;
    Ok(QrCrossCheck {
        ill_conditioned: !(max_rel_diff <= CROSS_CHECK_TOLERANCE),
        primary,
        hardened,
        max_rel_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::{sample_data_matrix, DistributionSpec, SeedSpec};

    fn gaussian(n: usize, p: usize, stream: u64) -> DMatrix<f64> {
        // p×(n) sample transposed gives an n×p input
        sample_data_matrix(&DistributionSpec::gaussian(), p, n, SeedSpec::new(11, stream))
            .unwrap()
            .transpose()
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let f = qr_gram_schmidt(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(f.q_factor(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(f.r_factor(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn two_by_two_by_hand() {
        // columns a1 = (1, 1), a2 = (0, 1)
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let f = qr_gram_schmidt(&a).unwrap();
        let s = std::f64::consts::SQRT_2;
        assert!((f.r(0, 0) - s).abs() < 1e-15);
        assert!((f.r(0, 1) - 1.0 / s).abs() < 1e-15);
        assert!((f.r(1, 1) - 1.0 / s).abs() < 1e-15);
        assert_eq!(f.r(1, 0), 0.0);

        // reference Householder QR, signs flipped so that diag(R) > 0
        let h = a.clone().qr().r();
        for i in 0..2 {
            let sign = h[(i, i)].signum();
            for j in i..2 {
                assert!((sign * h[(i, j)] - f.r(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let a = gaussian(50, 20, 0);
        let f = qr_gram_schmidt(&a).unwrap();
        let rel = (f.q_factor() * f.r_factor() - &a).norm() / a.norm();
        assert!(rel < 1e-10, "reconstruction {rel:e}");
        let gram = f.q_factor().transpose() * f.q_factor();
        assert!((gram - DMatrix::<f64>::identity(20, 20)).norm() < 1e-12);
        for i in 0..20 {
            assert!(f.r(i, i) > 0.0);
            for j in 0..i {
                assert_eq!(f.r(i, j), 0.0);
            }
        }
    }

    #[test]
    fn dropping_trailing_columns_keeps_leading_block_exactly() {
        let a = gaussian(40, 12, 1);
        let full = qr_gram_schmidt(&a).unwrap();
        let trimmed = qr_gram_schmidt(&a.columns(0, 11).into_owned()).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                assert_eq!(full.r(i, j).to_bits(), trimmed.r(i, j).to_bits());
            }
        }
    }

    #[test]
    fn routes_agree_on_well_conditioned_input() {
        let a = gaussian(60, 25, 2);
        let check = qr_cross_check(&a).unwrap();
        assert!(!check.ill_conditioned);
        assert!(check.max_rel_diff < 1e-12, "{:e}", check.max_rel_diff);
    }

    #[test]
    fn residual_matches_r_diag() {
        let a = gaussian(30, 6, 3);
        let f = qr_gram_schmidt(&a).unwrap();
        for i in 0..6 {
            assert!((f.residual(i).norm() - f.r(i, i)).abs() < 1e-12);
        }
        let log_det = (a.transpose() * &a).determinant().ln();
        assert!((f.log_det_gram() - log_det).abs() < 1e-9 * log_det.abs().max(1.0));
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let mut a = gaussian(10, 3, 4);
        let c0 = a.column(0).into_owned();
        a.column_mut(2).copy_from(&(c0 * 2.0));
        assert!(matches!(qr_gram_schmidt(&a), Err(Error::RankDeficient { column: 2, .. })));
        assert!(matches!(qr_reorthogonalized(&a), Err(Error::RankDeficient { column: 2, .. })));
        assert!(matches!(
            qr_gram_schmidt(&DMatrix::zeros(3, 4)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn nearly_dependent_columns_are_flagged() {
        // Läuchli matrix: MGS loses orthogonality, the reorthogonalized route does not
        let eps = 1e-7;
        let mut a = DMatrix::zeros(4, 3);
        a.row_mut(0).fill(1.0);
        for i in 0..3 {
            a[(i + 1, i)] = eps;
        }
        let check = qr_cross_check(&a).unwrap();
        let loss = |f: &QrFactors| {
            (f.q_factor().transpose() * f.q_factor() - DMatrix::<f64>::identity(3, 3)).amax()
        };
        assert!(loss(&check.hardened) < 1e-12);
        assert!(loss(&check.primary) > loss(&check.hardened));
    }
}
