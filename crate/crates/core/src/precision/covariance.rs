use std::hash::{DefaultHasher, Hash, Hasher};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randgen::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceVariant {
    Diagonal,
    GeneralSpd,
}

/// Population covariance `Σ` with its symmetric square root and inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCovariance {
    variant: CovarianceVariant,
    matrix: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl PopulationCovariance {
    pub fn identity(p: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; p])
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("empty covariance".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::NotPositiveDefinite(format!("diagonal entry {i} is {v}")));
        }
        let d = DVector::from_column_slice(values);
        Ok(PopulationCovariance {
            variant: CovarianceVariant::Diagonal,
            matrix: DMatrix::from_diagonal(&d),
            sqrt: DMatrix::from_diagonal(&d.map(f64::sqrt)),
            inverse: DMatrix::from_diagonal(&d.map(|v| 1.0 / v)),
        })
    }

    /// `Σ_ij = r^{|i-j|}` for `-1 < r < 1`.
    pub fn ar1(p: usize, r: f64) -> Result<Self> {
        if !(r > -1.0 && r < 1.0) {
            return Err(Error::InvalidParameter(format!("ar1 parameter must lie in (-1, 1), got {r}")));
        }
        if p == 0 {
            return Err(Error::Dimension("empty covariance".into()));
        }
        let m = DMatrix::from_fn(p, p, |i, j| r.powi(i.abs_diff(j) as i32));
        Self::explicit(m)
    }

    /// Any symmetric positive-definite matrix. Exactly diagonal input is
    /// classified as the diagonal variant.
    pub fn explicit(matrix: DMatrix<f64>) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c || r == 0 {
            return Err(Error::Dimension(format!("covariance must be square and non-empty, got {r}×{c}")));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("covariance matrix is not symmetric".into()));
        }
        let off_diagonal_zero = (0..r).all(|i| (0..r).all(|j| i == j || matrix[(i, j)] == 0.0));
        if off_diagonal_zero {
            let d: Vec<f64> = matrix.diagonal().iter().copied().collect();
            return Self::diagonal(&d);
        }
        let chol = matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("covariance Cholesky factorization failed".into()))?;
        let mut inverse = chol.inverse();
        inverse = (&inverse + inverse.transpose()) * 0.5;
        let eig = SymmetricEigen::new(matrix.clone());
        if let Some(min) = eig.eigenvalues.iter().copied().reduce(f64::min) {
            if !(min > 0.0) {
                return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {min:e}")));
            }
        }
        let root = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let mut sqrt = &eig.eigenvectors * root * eig.eigenvectors.transpose();
        sqrt = (&sqrt + sqrt.transpose()) * 0.5;
        Ok(PopulationCovariance {
            variant: CovarianceVariant::GeneralSpd,
            matrix,
            sqrt,
            inverse,
        })
    }

    pub fn variant(&self) -> CovarianceVariant {
        self.variant
    }

    pub fn is_diagonal(&self) -> bool {
        self.variant == CovarianceVariant::Diagonal
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `(Σ⁻¹)_qq` for one-based `q`.
    pub fn inverse_diag(&self, q: usize) -> f64 {
        self.inverse[(q - 1, q - 1)]
    }

    pub fn inverse_diagonal(&self) -> DVector<f64> {
        self.inverse.diagonal()
    }

    /// `Y = Σ^{1/2} X`.
    pub fn transform(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.p() != self.dim() {
            return Err(Error::Dimension(format!(
                "covariance is {0}×{0} but data has {1} rows",
                self.dim(),
                x.p()
            )));
        }
        match self.variant {
            CovarianceVariant::Diagonal => {
                let mut y = x.entries().clone();
                for (i, mut row) in y.row_iter_mut().enumerate() {
                    row *= self.sqrt[(i, i)];
                }
                DataMatrix::new(y)
            }
            CovarianceVariant::GeneralSpd => DataMatrix::new(&self.sqrt * x.entries()),
        }
    }
}

/// `Σ̂ = (1/n) Σ^{1/2} X Xᵀ Σ^{1/2}` together with its sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    matrix: DMatrix<f64>,
    n: usize,
    source_hash: u64,
}

impl SampleCovariance {
    /// Wraps an already formed symmetric matrix.
    pub fn from_matrix(matrix: DMatrix<f64>, n: usize) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c {
            return Err(Error::Dimension(format!("sample covariance must be square, got {r}×{c}")));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("sample covariance is not symmetric".into()));
        }
        let source_hash = hash_entries(&matrix);
        Ok(SampleCovariance { matrix, n, source_hash })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Hash of the data the matrix was formed from.
    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    /// `Σ̂^{(-q)}`, row and column `q` (one-based) removed.
    pub fn minor(&self, q: usize) -> DMatrix<f64> {
        self.matrix.clone().remove_row(q - 1).remove_column(q - 1)
    }
}

fn hash_entries(m: &DMatrix<f64>) -> u64 {
    let mut h = DefaultHasher::new();
    m.shape().hash(&mut h);
    for v in m.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

pub fn sample_covariance(x: &DataMatrix, sigma: &PopulationCovariance) -> Result<SampleCovariance> {
    let (p, n) = (x.p(), x.n());
    if sigma.dim() != p {
        return Err(Error::Dimension(format!("covariance is {0}×{0} but data has {p} rows", sigma.dim())));
    }
    let xe = x.entries();
    let mut gram = DMatrix::zeros(p, p);
    gram.gemm(1.0 / n as f64, xe, &xe.transpose(), 0.0);
    let mut matrix = match sigma.variant() {
        CovarianceVariant::Diagonal => {
            let root = sigma.sqrt().diagonal();
            DMatrix::from_fn(p, p, |i, j| gram[(i, j)] * root[i] * root[j])
        }
        CovarianceVariant::GeneralSpd => sigma.sqrt() * gram * sigma.sqrt(),
    };
    for j in 0..p {
        for i in (j + 1)..p {
            let avg = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = avg;
            matrix[(j, i)] = avg;
        }
    }
    Ok(SampleCovariance {
        matrix,
        n,
        source_hash: hash_entries(xe),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::{sample_data_matrix, DistributionSpec, SeedSpec};

    fn data(p: usize, n: usize) -> DataMatrix {
        sample_data_matrix(&DistributionSpec::gaussian(), p, n, SeedSpec::new(21, 0)).unwrap()
    }

    #[test]
    fn scalar_case() {
        let (a, b) = (1.5, -0.5);
        let x = DataMatrix::from_row_slice(1, 2, &[a, b]).unwrap();
        let s = sample_covariance(&x, &PopulationCovariance::identity(1).unwrap()).unwrap();
        assert!((s.matrix()[(0, 0)] - (a * a + b * b) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn identity_root_gives_plain_gram() {
        let x = data(4, 9);
        let s = sample_covariance(&x, &PopulationCovariance::identity(4).unwrap()).unwrap();
        let g = x.entries() * x.entries().transpose() / 9.0;
        assert!((s.matrix() - g).amax() < 1e-14);
        assert_eq!(s.n(), 9);
    }

    #[test]
    fn diagonal_conjugation() {
        let x = data(3, 8);
        let d = [0.5, 2.0, 7.0];
        let s = sample_covariance(&x, &PopulationCovariance::diagonal(&d).unwrap()).unwrap();
        let i = sample_covariance(&x, &PopulationCovariance::identity(3).unwrap()).unwrap();
        for q in 0..3 {
            let rel = (s.matrix()[(q, q)] - d[q] * i.matrix()[(q, q)]).abs() / s.matrix()[(q, q)];
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn general_root_squares_back() {
        let sigma = PopulationCovariance::ar1(6, 0.5).unwrap();
        assert_eq!(sigma.variant(), CovarianceVariant::GeneralSpd);
        let sq = sigma.sqrt() * sigma.sqrt();
        assert!((&sq - sigma.matrix()).norm() / sigma.matrix().norm() < 1e-10);
        assert!((sigma.sqrt() - sigma.sqrt().transpose()).amax() == 0.0);
        let id = sigma.matrix() * sigma.inverse();
        assert!((id - DMatrix::<f64>::identity(6, 6)).amax() < 1e-12);
        // AR(1) precision is tridiagonal: interior diagonal (1 + r²)/(1 - r²)
        assert!((sigma.inverse_diag(3) - 1.25 / 0.75).abs() < 1e-12);
        assert!((sigma.inverse_diag(1) - 1.0 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn general_transform_matches_covariance() {
        let sigma = PopulationCovariance::ar1(4, -0.3).unwrap();
        let x = data(4, 10);
        let y = sigma.transform(&x).unwrap();
        let direct = sample_covariance(&x, &sigma).unwrap();
        let via_y = y.entries() * y.entries().transpose() / 10.0;
        assert!((direct.matrix() - via_y).amax() < 1e-12);
    }

    #[test]
    fn invalid_covariances() {
        assert!(PopulationCovariance::ar1(3, 1.0).is_err());
        assert!(PopulationCovariance::diagonal(&[1.0, 0.0]).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        assert!(PopulationCovariance::explicit(asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(PopulationCovariance::explicit(indefinite), Err(Error::NotPositiveDefinite(_))));
        let diag = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!(PopulationCovariance::explicit(diag).unwrap().is_diagonal());
        let x = data(3, 8);
        assert!(matches!(
            sample_covariance(&x, &PopulationCovariance::identity(2).unwrap()),
            Err(Error::Dimension(_))
        ));
    }
}
