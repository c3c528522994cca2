//! Log-determinants of symmetric positive-definite matrices through a
//! Cholesky factorization, so that `p ~ 10²` never overflows.

use nalgebra::DMatrix;

use super::kernels::dot;
use crate::error::{Error, Result};

fn check_square(s: &DMatrix<f64>) -> Result<usize> {
    let (r, c) = s.shape();
    if r != c {
        return Err(Error::Dimension(format!("expected a square matrix, got {r}×{c}")));
    }
    Ok(r)
}

/// Lower-triangular `L` with `S = L Lᵀ`. Only the lower triangle of `s` is
/// read. Fails on the first pivot `≤ 0` (or NaN).
pub fn cholesky_lower(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = check_square(s)?;
    // rows of L stored contiguously so the inner products are slice dots
    let mut rows = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let (head, tail) = rows.split_at_mut(i * k);
            let li = &tail[..j];
            let acc = if i == j {
                dot(li, li)
            } else {
                dot(li, &head[j * k..j * k + j])
            };
            let value = s[(i, j)] - acc;
            if i == j {
                if !(value > 0.0) {
                    return Err(Error::NotPositiveDefinite(format!("pivot {i} is {value:e}")));
                }
                tail[i] = value.sqrt();
            } else {
                tail[j] = value / head[j * k + j];
            }
        }
    }
    Ok(DMatrix::from_row_slice(k, k, &rows))
}

/// `log |S|` for symmetric positive-definite `S`.
pub fn log_det_psd(s: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky_lower(s)?;
    Ok(l.diagonal().iter().map(|d| 2.0 * d.ln()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::qr_gram_schmidt;
    use crate::randgen::{sample_data_matrix, DistributionSpec, SeedSpec};

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(log_det_psd(&DMatrix::identity(5, 5)).unwrap(), 0.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        assert!((log_det_psd(&d).unwrap() - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn factor_reconstructs() {
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let l = cholesky_lower(&s).unwrap();
        assert!((&l * l.transpose() - &s).amax() < 1e-14);
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn agrees_with_qr_product_formula() {
        let (p, n) = (12, 40);
        let x = sample_data_matrix(&DistributionSpec::gaussian(), p, n, SeedSpec::new(3, 0)).unwrap();
        let s = x.entries() * x.entries().transpose() / n as f64;
        let f = qr_gram_schmidt(&x.transpose()).unwrap();
        let via_qr: f64 = (0..p).map(|i| 2.0 * f.r(i, i).ln()).sum::<f64>() - p as f64 * (n as f64).ln();
        let direct = log_det_psd(&s).unwrap();
        assert!((direct - via_qr).abs() <= 1e-8 * direct.abs().max(1.0));
    }

    #[test]
    fn indefinite_is_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(log_det_psd(&s), Err(Error::NotPositiveDefinite(_))));
        assert!(matches!(log_det_psd(&DMatrix::zeros(2, 3)), Err(Error::Dimension(_))));
        let nan = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(log_det_psd(&nan).is_err());
    }
}
