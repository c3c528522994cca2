//! Orthogonal projectors `P(q) = I - X̃ᵀ(X̃X̃ᵀ)⁻¹X̃` and the rank-one `Q(p)`.
//!
//! `P(q)` is never formed through `(X̃X̃ᵀ)⁻¹`: the complement is built from
//! the orthonormal basis returned by Gram-Schmidt, either implicitly
//! ([`ComplementProjector`], applied to vectors) or densely
//! ([`ProjectionMatrix`]).

use nalgebra::{DMatrix, DVector};

use super::kernels::{dot, norm_sq, sub_scaled};
use super::qr::qr_gram_schmidt;
use crate::error::{Error, Result};

/// Largest `n` for which a dense `n × n` projector is materialized.
pub const MAX_DENSE_DIM: usize = 4096;

fn guard_dense(n: usize) -> Result<()> {
    if n > MAX_DENSE_DIM {
        return Err(Error::Dimension(format!(
            "dense projector of size {n} exceeds the {MAX_DENSE_DIM} cap"
        )));
    }
    Ok(())
}

/// Dense symmetric idempotent matrix together with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    matrix: DMatrix<f64>,
    rank: usize,
}

impl ProjectionMatrix {
    pub fn identity(n: usize) -> Result<Self> {
        guard_dense(n)?;
        Ok(ProjectionMatrix {
            matrix: DMatrix::identity(n, n),
            rank: n,
        })
    }

    /// `I - B Bᵀ` for an `n × k` matrix `B` with orthonormal columns.
    pub fn complement_of_basis(basis: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = basis.shape();
        guard_dense(n)?;
        let mut matrix = DMatrix::identity(n, n);
        matrix.gemm(-1.0, basis, &basis.transpose(), 1.0);
        symmetrize(&mut matrix);
        Ok(ProjectionMatrix { matrix, rank: n - k })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.matrix.diagonal()
    }

    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vector of length {} against a {}×{} projector",
                v.len(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(&self.matrix * v)
    }

    /// `‖P - Pᵀ‖_F`
    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).norm()
    }

    /// `‖P² - P‖_F`
    pub fn idempotence_defect(&self) -> f64 {
        (&self.matrix * &self.matrix - &self.matrix).norm()
    }

    /// `‖P‖_F²`, equal to the trace for a projector.
    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.norm_squared()
    }

    /// `max_l Σ_m p_lm²`, a lower bound for `‖P‖²`.
    pub fn max_row_sum_sq(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.norm_squared())
            .fold(0.0, f64::max)
    }

    /// `self - other`, a projector of rank `rank - other.rank` whenever the
    /// range of `other` lies inside the range of `self`.
    pub fn difference(&self, other: &ProjectionMatrix) -> Result<ProjectionMatrix> {
        if self.dim() != other.dim() || other.rank > self.rank {
            return Err(Error::Dimension(format!(
                "cannot subtract a rank-{} projector of size {} from a rank-{} projector of size {}",
                other.rank,
                other.dim(),
                self.rank,
                self.dim()
            )));
        }
        Ok(ProjectionMatrix {
            matrix: &self.matrix - &other.matrix,
            rank: self.rank - other.rank,
        })
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `I - B Bᵀ` applied without forming it. `B` is `n × k`, column-major,
/// with orthonormal columns.
#[derive(Debug, Clone, Copy)]
pub struct ComplementProjector<'a> {
    n: usize,
    k: usize,
    basis: &'a [f64],
}

impl<'a> ComplementProjector<'a> {
    pub fn from_column_major(n: usize, k: usize, basis: &'a [f64]) -> Self {
        assert_eq!(basis.len(), n * k, "basis must hold n·k entries");
        ComplementProjector { n, k, basis }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.n - self.k
    }

    fn direction(&self, i: usize) -> &'a [f64] {
        &self.basis[i * self.n..(i + 1) * self.n]
    }

    /// `P v`, removing one basis direction at a time.
    pub fn apply_slice(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let mut out = v.to_vec();
        for i in 0..self.k {
            let e = self.direction(i);
            let c = dot(e, &out);
            sub_scaled(&mut out, c, e);
        }
        out
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.apply_slice(v.as_slice()))
    }

    /// `bᵀ P b` evaluated as `‖P b‖²`.
    pub fn quadform(&self, b: &[f64]) -> f64 {
        norm_sq(&self.apply_slice(b))
    }

    /// Diagonal entries `p_ii = 1 - Σ_k e_ki²`.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![1.0; self.n];
        for i in 0..self.k {
            for (di, e) in d.iter_mut().zip(self.direction(i)) {
                *di -= e * e;
            }
        }
        d
    }

    pub fn to_dense(&self) -> Result<ProjectionMatrix> {
        let basis = DMatrix::from_column_slice(self.n, self.k, self.basis);
        ProjectionMatrix::complement_of_basis(&basis)
    }
}

/// `P(q)` for the `q × n` matrix of rows `X̃_{n,q}`; `q = 0` gives `I`.
pub fn projection_complement(rows: &DMatrix<f64>) -> Result<ProjectionMatrix> {
    let (q, n) = rows.shape();
    if q >= n {
        return Err(Error::Dimension(format!(
            "complement projector needs q < n, got q={q}, n={n}"
        )));
    }
    guard_dense(n)?;
    if q == 0 {
        return ProjectionMatrix::identity(n);
    }
    let factors = qr_gram_schmidt(&rows.transpose())?;
    ProjectionMatrix::complement_of_basis(factors.q_factor())
}

/// `bᵀ P b`, computed as `‖P b‖²`.
pub fn residual_quadform(b: &DVector<f64>, proj: &ProjectionMatrix) -> Result<f64> {
    Ok(proj.apply(b)?.norm_squared())
}

/// `Q(p) = P b bᵀ P / (bᵀ P b)`.
pub fn rank_one_projector(p_pm2: &ProjectionMatrix, b_p: &DVector<f64>) -> Result<ProjectionMatrix> {
    let v = p_pm2.apply(b_p)?;
    let denom = v.norm_squared();
    let tol = (b_p.len() as f64) * f64::EPSILON * b_p.norm_squared();
    if !(denom > tol) {
        return Err(Error::Degenerate(format!(
            "bᵀ P b = {denom:e} is below tolerance {tol:e}"
        )));
    }
    let mut matrix = &v * v.transpose();
    matrix /= denom;
    Ok(ProjectionMatrix { matrix, rank: 1 })
}
