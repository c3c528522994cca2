//! Seeded generation of standardized i.i.d. data matrices.
//!
//! Every law on the menu is continuous, centered and has unit variance; the
//! standardization is an exact affine map of a raw law, so the stored fourth
//! moment `nu4` is the analytic value rather than an estimate.
//!
//! Randomness comes from ChaCha8 keyed by the master seed with the replicate
//! index as the stream selector, so `(master_seed, stream_id)` fixes the whole
//! matrix no matter which worker draws it or in which order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Gaussian,
    Uniform,
    StudentT,
    ShiftedExponential,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 4] = [
        DistributionKind::Gaussian,
        DistributionKind::Uniform,
        DistributionKind::StudentT,
        DistributionKind::ShiftedExponential,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistributionKind::Gaussian => "gaussian",
            DistributionKind::Uniform => "uniform",
            DistributionKind::StudentT => "student_t",
            DistributionKind::ShiftedExponential => "shifted_exponential",
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(DistributionKind::Gaussian),
            "uniform" => Ok(DistributionKind::Uniform),
            "student_t" => Ok(DistributionKind::StudentT),
            "shifted_exponential" => Ok(DistributionKind::ShiftedExponential),
            other => Err(Error::InvalidParameter(format!(
                "unknown distribution kind {other:?}"
            ))),
        }
    }
}

/// Raw law before standardization.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RawLaw {
    Normal,
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    StudentT { df: f64 },
    /// Exponential with the given rate.
    Exponential { rate: f64 },
}

/// A centered, unit-variance continuous law with known fourth moment.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    kind: DistributionKind,
    params: BTreeMap<String, f64>,
    raw: RawLaw,
    /// Standardized draw is `(raw - shift) / scale`.
    shift: f64,
    scale: f64,
    nu4: f64,
}

impl DistributionSpec {
    pub fn gaussian() -> Self {
        make_distribution(DistributionKind::Gaussian, &BTreeMap::new())
            .expect("gaussian takes no parameters")
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Analytic `E[x⁴]` of the standardized law.
    pub fn nu4(&self) -> f64 {
        self.nu4
    }

    /// Standardizing affine map as `(shift, scale)`.
    pub fn affine_map(&self) -> (f64, f64) {
        (self.shift, self.scale)
    }

    /// One standardized draw. Builds the raw sampler on every call; use
    /// [`sample_data_matrix`] or [`sample_values`] for bulk draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (self.sampler().raw(rng) - self.shift) / self.scale
    }

    /// Sampler with the per-kind distribution objects built once.
    fn sampler(&self) -> Sampler {
        match self.raw {
            RawLaw::Normal => Sampler::Normal,
            RawLaw::Uniform { half_width } => Sampler::Uniform(
                Uniform::new(-half_width, half_width).expect("validated half width"),
            ),
            RawLaw::StudentT { df } => Sampler::StudentT(StudentT::new(df).expect("validated df")),
            RawLaw::Exponential { rate } => Sampler::Exp(Exp::new(rate).expect("validated rate")),
        }
    }
}

enum Sampler {
    Normal,
    Uniform(Uniform<f64>),
    StudentT(StudentT<f64>),
    Exp(Exp<f64>),
}

impl Sampler {
    #[inline]
    fn raw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal => rng.sample(StandardNormal),
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::StudentT(t) => t.sample(rng),
            Sampler::Exp(e) => e.sample(rng),
        }
    }
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(&v) if v.is_finite() => Ok(v),
        Some(&v) => Err(Error::InvalidParameter(format!("{key} = {v} is not finite"))),
        None => default.ok_or_else(|| Error::InvalidParameter(format!("missing parameter {key}"))),
    }
}

fn reject_unknown(params: &BTreeMap<String, f64>, kind: DistributionKind, known: &[&str]) -> Result<()> {
    if let Some(key) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!(
            "{kind} does not take parameter {key:?}"
        )));
    }
    Ok(())
}

/// Builds the standardized law of the requested kind.
///
/// Parameters: `student_t` needs `df > 4`; `uniform` accepts an optional raw
/// `half_width > 0` and `shifted_exponential` an optional raw `rate > 0`.
/// Raw scale parameters do not change the standardized law.
pub fn make_distribution(
    kind: DistributionKind,
    params: &BTreeMap<String, f64>,
) -> Result<DistributionSpec> {
    let (raw, shift, scale, nu4) = match kind {
        DistributionKind::Gaussian => {
            reject_unknown(params, kind, &[])?;
            (RawLaw::Normal, 0.0, 1.0, 3.0)
        }
        DistributionKind::Uniform => {
            reject_unknown(params, kind, &["half_width"])?;
            let a = param(params, "half_width", Some(3f64.sqrt()))?;
            if a <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "uniform half_width must be positive, got {a}"
                )));
            }
            // Var U(-a, a) = a²/3; standardized fourth moment a⁴/5 / (a²/3)² = 9/5
            (RawLaw::Uniform { half_width: a }, 0.0, a / 3f64.sqrt(), 9.0 / 5.0)
        }
        DistributionKind::StudentT => {
            reject_unknown(params, kind, &["df"])?;
            let df = param(params, "df", None)?;
            if df <= 4.0 {
                return Err(Error::InvalidParameter(format!(
                    "student_t needs df > 4 for a finite fourth moment, got {df}"
                )));
            }
            let scale = (df / (df - 2.0)).sqrt();
            (RawLaw::StudentT { df }, 0.0, scale, 3.0 * (df - 2.0) / (df - 4.0))
        }
        DistributionKind::ShiftedExponential => {
            reject_unknown(params, kind, &["rate"])?;
            let rate = param(params, "rate", Some(1.0))?;
            if rate <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "shifted_exponential rate must be positive, got {rate}"
                )));
            }
            // Exp(rate) has mean and standard deviation 1/rate; central E[(E-1)⁴] = 9 for rate 1
            (RawLaw::Exponential { rate }, 1.0 / rate, 1.0 / rate, 9.0)
        }
    };
    debug_assert!(nu4 >= 1.0);
    Ok(DistributionSpec {
        kind,
        params: params.clone(),
        raw,
        shift,
        scale,
        nu4,
    })
}

/// Identifies one replicate's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_id,
        }
    }

    /// Fresh generator for this `(master_seed, stream_id)` pair. The master
    /// seed fills the low key word and the stream id selects the ChaCha
    /// stream, so distinct pairs never share a keystream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// A `p × n` data matrix with `p < n`, rows `b_1..b_p` and columns
/// `x_1..x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    entries: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (p, n) = entries.shape();
        check_dims(p, n)?;
        Ok(DataMatrix { entries })
    }

    pub fn from_row_slice(p: usize, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != p * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {p}×{n} matrix, got {}",
                p * n,
                data.len()
            )));
        }
        DataMatrix::new(DMatrix::from_row_slice(p, n, data))
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// Row `b_i` (zero-based) as an `n`-vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.entries.row(i).transpose()
    }

    /// Column `x_j` (zero-based) as a `p`-vector.
    pub fn column(&self, j: usize) -> DVector<f64> {
        self.entries.column(j).into_owned()
    }

    /// The `n × p` matrix `Xᵀ` whose columns are the rows `b_i` taken in
    /// `order` (zero-based row indices, each used at most once).
    pub fn rows_as_columns(&self, order: &[usize]) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, order.len());
        for (c, &i) in order.iter().enumerate() {
            out.column_mut(c).copy_from(&self.entries.row(i).transpose());
        }
        out
    }

    /// `Xᵀ` with the natural row order.
    pub fn transpose(&self) -> DMatrix<f64> {
        self.entries.transpose()
    }

    /// Copy with rows `i` and `j` swapped.
    pub fn swap_rows(&self, i: usize, j: usize) -> DataMatrix {
        let mut entries = self.entries.clone();
        entries.swap_rows(i, j);
        DataMatrix { entries }
    }
}

fn check_dims(p: usize, n: usize) -> Result<()> {
    if p < 1 {
        return Err(Error::Dimension("p ≥ 1 required".into()));
    }
    if p >= n {
        return Err(Error::Dimension(format!("p < n required, got p={p}, n={n}")));
    }
    Ok(())
}

/// Draws a `p × n` matrix of i.i.d. entries, filled row by row from the
/// stream selected by `seed`.
pub fn sample_data_matrix(
    dist: &DistributionSpec,
    p: usize,
    n: usize,
    seed: SeedSpec,
) -> Result<DataMatrix> {
    check_dims(p, n)?;
    let mut rng = seed.rng();
    let sampler = dist.sampler();
    let (shift, scale) = (dist.shift, dist.scale);
    let mut entries = DMatrix::zeros(p, n);
    for i in 0..p {
        for j in 0..n {
            entries[(i, j)] = (sampler.raw(&mut rng) - shift) / scale;
        }
    }
    Ok(DataMatrix { entries })
}

/// `count` standardized draws from the stream selected by `seed`.
pub fn sample_values(dist: &DistributionSpec, count: usize, seed: SeedSpec) -> Vec<f64> {
    let mut rng = seed.rng();
    let sampler = dist.sampler();
    (0..count)
        .map(|_| (sampler.raw(&mut rng) - dist.shift) / dist.scale)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn analytic_fourth_moments() {
        let none = BTreeMap::new();
        assert_eq!(make_distribution(DistributionKind::Gaussian, &none).unwrap().nu4(), 3.0);
        let u = make_distribution(DistributionKind::Uniform, &none).unwrap();
        assert!((u.nu4() - 1.8).abs() < 1e-15);
        let t = make_distribution(DistributionKind::StudentT, &params(&[("df", 8.0)])).unwrap();
        assert!((t.nu4() - 4.5).abs() < 1e-15);
        let e = make_distribution(DistributionKind::ShiftedExponential, &none).unwrap();
        assert_eq!(e.nu4(), 9.0);
    }

    #[test]
    fn uniform_default_support_is_sqrt3() {
        let u = make_distribution(DistributionKind::Uniform, &BTreeMap::new()).unwrap();
        let (shift, scale) = u.affine_map();
        assert_eq!(shift, 0.0);
        assert!((scale - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters() {
        for df in [4.0, 3.0, -1.0] {
            assert!(matches!(
                make_distribution(DistributionKind::StudentT, &params(&[("df", df)])),
                Err(Error::InvalidParameter(_))
            ));
        }
        assert!(make_distribution(DistributionKind::StudentT, &BTreeMap::new()).is_err());
        assert!(make_distribution(DistributionKind::Uniform, &params(&[("half_width", 0.0)])).is_err());
        assert!(make_distribution(DistributionKind::ShiftedExponential, &params(&[("rate", -2.0)])).is_err());
        assert!(make_distribution(DistributionKind::Gaussian, &params(&[("df", 5.0)])).is_err());
        assert!("cauchy".parse::<DistributionKind>().is_err());
    }

    #[test]
    fn same_seed_same_matrix() {
        let g = DistributionSpec::gaussian();
        let s = SeedSpec::new(7, 3);
        let a = sample_data_matrix(&g, 3, 5, s).unwrap();
        let b = sample_data_matrix(&g, 3, 5, s).unwrap();
        assert_eq!(a.p(), 3);
        assert_eq!(a.n(), 5);
        let bits = |m: &DataMatrix| m.entries().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = sample_data_matrix(&g, 3, 5, SeedSpec::new(7, 4)).unwrap();
        assert_ne!(bits(&a), bits(&c));
        let d = sample_data_matrix(&g, 3, 5, SeedSpec::new(8, 3)).unwrap();
        assert_ne!(bits(&a), bits(&d));
    }

    #[test]
    fn dimension_guard() {
        let g = DistributionSpec::gaussian();
        let s = SeedSpec::new(0, 0);
        assert!(matches!(sample_data_matrix(&g, 5, 5, s), Err(Error::Dimension(_))));
        assert!(matches!(sample_data_matrix(&g, 0, 5, s), Err(Error::Dimension(_))));
        assert!(sample_data_matrix(&g, 4, 5, s).is_ok());
    }

    #[test]
    fn row_and_column_views() {
        let x = DataMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(x.row(1).as_slice(), &[4.0, 5.0, 6.0]);
        assert_eq!(x.column(2).as_slice(), &[3.0, 6.0]);
        let t = x.rows_as_columns(&[1, 0]);
        assert_eq!(t.column(0).as_slice(), &[4.0, 5.0, 6.0]);
        assert_eq!(x.swap_rows(0, 1).row(0).as_slice(), &[4.0, 5.0, 6.0]);
    }
}
