//! Experiment configuration: JSON on disk, command-line overrides on top,
//! defaults filled and every invariant checked before anything runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::precision::PopulationCovariance;
use crate::randgen::{make_distribution, DistributionKind, DistributionSpec};

pub const DEFAULT_REPLICATES: usize = 10_000;

/// Smallest `n - p` accepted unless `allow_small_gap` is set. Below it the
/// inverse-moment integrals behind the statistic's variance blow up.
pub const MIN_GAP: usize = 5;

/// Environment variable that takes precedence over `--workers`.
pub const WORKERS_ENV: &str = "PRECLT_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SingleEntry,
    Pair,
    ChiSquareLaw,
    WishartCov,
    ScaleSeparation,
    IdentityAudit,
    Sweep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SingleEntry => "single_entry",
            Mode::Pair => "pair",
            Mode::ChiSquareLaw => "chi_square_law",
            Mode::WishartCov => "wishart_cov",
            Mode::ScaleSeparation => "scale_separation",
            Mode::IdentityAudit => "identity_audit",
            Mode::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_owned()))
            .map_err(|_| Error::Config(format!("unknown mode `{s}`")))
    }
}

/// Which variance the KS reference normal uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    #[default]
    RhoLimit,
    RhoN,
}

/// A distribution either by bare name or as `{kind, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionConfig {
    Name(DistributionKind),
    Full {
        kind: DistributionKind,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl DistributionConfig {
    pub fn kind(&self) -> DistributionKind {
        match self {
            DistributionConfig::Name(k) | DistributionConfig::Full { kind: k, .. } => *k,
        }
    }

    pub fn spec(&self) -> Result<DistributionSpec> {
        match self {
            DistributionConfig::Name(k) => make_distribution(*k, &BTreeMap::new()),
            DistributionConfig::Full { kind, params } => make_distribution(*kind, params),
        }
    }

    /// Canonical form: always `{kind, params}`.
    fn resolved(&self) -> DistributionConfig {
        match self {
            DistributionConfig::Name(k) => DistributionConfig::Full {
                kind: *k,
                params: BTreeMap::new(),
            },
            full => full.clone(),
        }
    }
}

impl FromStr for DistributionConfig {
    type Err = Error;

    /// `kind` or `kind:key=value`, for instance `student_t:df=10`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = match s.split_once(':') {
            Some((name, rest)) => (name, Some(rest)),
            None => (s, None),
        };
        let kind: DistributionKind = name.trim().parse()?;
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for item in rest.split('+').filter(|t| !t.is_empty()) {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("distribution parameter `{item}` is not key=value")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("distribution parameter `{item}` is not numeric")))?;
                params.insert(k.trim().to_owned(), v);
            }
        }
        Ok(DistributionConfig::Full { kind, params })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaConfig {
    #[default]
    Identity,
    /// Either explicit `values` or `ramp: true` for `diag(1, 2, …, p) / p`.
    Diagonal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        ramp: bool,
    },
    Ar1 {
        r: f64,
    },
    Explicit {
        matrix: Vec<Vec<f64>>,
    },
}

impl SigmaConfig {
    pub fn is_diagonal(&self) -> bool {
        !matches!(self, SigmaConfig::Ar1 { r } if *r != 0.0) && !matches!(self, SigmaConfig::Explicit { .. })
    }

    /// Whether the covariance can be rebuilt at a different dimension.
    pub fn scales_with_dim(&self) -> bool {
        match self {
            SigmaConfig::Identity | SigmaConfig::Ar1 { .. } => true,
            SigmaConfig::Diagonal { ramp, .. } => *ramp,
            SigmaConfig::Explicit { .. } => false,
        }
    }

    pub fn build(&self, p: usize) -> Result<PopulationCovariance> {
        match self {
            SigmaConfig::Identity => PopulationCovariance::identity(p),
            SigmaConfig::Diagonal { values, ramp } => match (values, ramp) {
                (Some(values), false) => {
                    if values.len() != p {
                        return Err(Error::Config(format!(
                            "sigma.values has {} entries but p = {p}",
                            values.len()
                        )));
                    }
                    PopulationCovariance::diagonal(values)
                }
                (None, true) => {
                    let values: Vec<f64> = (1..=p).map(|i| i as f64 / p as f64).collect();
                    PopulationCovariance::diagonal(&values)
                }
                _ => Err(Error::Config(
                    "diagonal sigma needs exactly one of `values` or `ramp: true`".into(),
                )),
            },
            SigmaConfig::Ar1 { r } => PopulationCovariance::ar1(p, *r),
            SigmaConfig::Explicit { matrix } => {
                if matrix.len() != p || matrix.iter().any(|row| row.len() != p) {
                    return Err(Error::Config(format!("sigma.matrix must be {p}×{p}")));
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                PopulationCovariance::explicit(nalgebra::DMatrix::from_row_slice(p, p, &flat))
            }
        }
    }
}

/// Where the report files go. Not part of the resolved config echo.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub distribution: DistributionConfig,
    #[serde(default)]
    pub sigma: SigmaConfig,
    pub p: usize,
    pub n: usize,
    /// One-based row indices; defaults depend on the mode.
    #[serde(default)]
    pub q_indices: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub normalizer: Normalizer,
    /// Sample sizes for scale separation; `p` follows at the ratio `p / n`.
    #[serde(default)]
    pub n_ladder: Vec<usize>,
    /// Direct-path audit cadence; `max(1, M / 100)` when absent.
    #[serde(default)]
    pub audit_every: Option<usize>,
    #[serde(default)]
    pub allow_small_gap: bool,
    /// Optional `[lo, hi]` band on `Var(T)`, turned into a verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_band: Option<[f64; 2]>,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub output: OutputPaths,
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(mode: Mode, distribution: DistributionConfig, p: usize, n: usize) -> Self {
        ExperimentConfig {
            mode,
            distribution,
            sigma: SigmaConfig::Identity,
            p,
            n,
            q_indices: Vec::new(),
            replicates: DEFAULT_REPLICATES,
            master_seed: 0,
            normalizer: Normalizer::RhoLimit,
            n_ladder: Vec::new(),
            audit_every: None,
            allow_small_gap: false,
            variance_band: None,
            workers: None,
            output: OutputPaths::default(),
        }
    }

    /// `p / n`.
    pub fn y(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn distribution_spec(&self) -> Result<DistributionSpec> {
        self.distribution.spec()
    }

    pub fn audit_cadence(&self) -> usize {
        self.audit_every.unwrap_or((self.replicates / 100).max(1)).max(1)
    }

    pub fn worker_count(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }

    /// `(n, p)` for every rung of the scale ladder, or the single pair.
    pub fn dims(&self) -> Vec<(usize, usize)> {
        if self.mode != Mode::ScaleSeparation {
            return vec![(self.n, self.p)];
        }
        self.n_ladder
            .iter()
            .map(|&n| (n, ((self.p as f64) * n as f64 / self.n as f64).round() as usize))
            .collect()
    }

    /// Fills defaults and checks every invariant.
    pub fn resolve(mut self) -> Result<Self> {
        let (p, n) = (self.p, self.n);
        if p == 0 {
            return Err(Error::Config("p ≥ 1 required".into()));
        }
        if p >= n {
            return Err(Error::Config(format!("p < n required (p = {p}, n = {n})")));
        }
        let spec = self.distribution.spec().map_err(into_config)?;
        self.distribution = self.distribution.resolved();
        let gaussian = spec.kind() == DistributionKind::Gaussian;

        match self.mode {
            Mode::Pair => {
                if p < 2 {
                    return Err(Error::Config("pair mode needs p ≥ 2".into()));
                }
                self.q_indices = vec![p, p - 1];
            }
            Mode::WishartCov => {
                if !gaussian {
                    return Err(Error::Config(format!(
                        "wishart_cov applies to normally distributed data only, got {}",
                        spec.kind()
                    )));
                }
                if p < 2 {
                    return Err(Error::Config("wishart_cov needs p ≥ 2".into()));
                }
                if self.q_indices.is_empty() {
                    self.q_indices = vec![p - 1, p];
                }
                if self.q_indices.len() != 2 || self.q_indices[0] == self.q_indices[1] {
                    return Err(Error::Config("wishart_cov needs two distinct q_indices".into()));
                }
            }
            Mode::ChiSquareLaw => {
                if !gaussian {
                    return Err(Error::Config(format!(
                        "chi_square_law is exact for gaussian data only, got {}",
                        spec.kind()
                    )));
                }
            }
            Mode::ScaleSeparation => {
                if !self.sigma.is_diagonal() {
                    return Err(Error::Config("scale_separation needs a diagonal sigma".into()));
                }
                if self.normalizer != Normalizer::RhoLimit {
                    return Err(Error::Config("scale_separation supports normalizer rho_limit only".into()));
                }
                if self.n_ladder.is_empty() {
                    self.n_ladder = vec![n, 2 * n, 4 * n];
                }
                if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("n_ladder must be strictly increasing".into()));
                }
                if self.n_ladder.len() > 1 && !self.sigma.scales_with_dim() {
                    return Err(Error::Config(
                        "a ladder needs sigma identity, ar1 or diagonal ramp".into(),
                    ));
                }
            }
            Mode::SingleEntry | Mode::IdentityAudit | Mode::Sweep => {}
        }
        if self.q_indices.is_empty() {
            self.q_indices = vec![p];
        }
        if matches!(self.mode, Mode::ScaleSeparation) {
            self.q_indices = vec![p];
        }
        if let Some(q) = self.q_indices.iter().find(|&&q| q < 1 || q > p) {
            return Err(Error::Config(format!("q index {q} outside 1..={p}")));
        }
        for (rn, rp) in self.dims() {
            if rp == 0 || rp >= rn {
                return Err(Error::Config(format!("p < n required (p = {rp}, n = {rn})")));
            }
            if !self.allow_small_gap && rn - rp < MIN_GAP {
                return Err(Error::Config(format!(
                    "n - p ≥ {MIN_GAP} required for finite moments (n = {rn}, p = {rp}); set allow_small_gap to override"
                )));
            }
            self.sigma.build(rp).map_err(into_config)?;
        }
        if let Some([lo, hi]) = self.variance_band {
            if !(lo <= hi) {
                return Err(Error::Config(format!("variance_band [{lo}, {hi}] is empty")));
            }
        }
        if self.audit_every == Some(0) {
            return Err(Error::Config("audit_every must be positive".into()));
        }
        self.audit_every = Some(self.audit_cadence());
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(self)
    }

    /// Hex SHA-256 of the canonical resolved config. Worker count and output
    /// paths are excluded, so the hash only changes when the results can.
    pub fn config_hash(&self) -> Result<String> {
        let canonical = serde_json::to_vec(&serde_json::to_value(self)?)?;
        Ok(hex::encode(Sha256::digest(&canonical)))
    }
}

fn into_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Values given on the command line; each one replaces the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub distribution: Option<DistributionConfig>,
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub replicates: Option<usize>,
    pub master_seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

fn parse_error(source_name: &str, e: &serde_json::Error) -> Error {
    Error::Parse {
        source_name: source_name.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads the JSON file (if any), applies the overrides and the worker
/// environment variable, then resolves.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let (source_name, mut value) = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| parse_error(&path.display().to_string(), &e))?;
            (path.display().to_string(), value)
        }
        None => ("command line".to_owned(), Value::Object(Map::new())),
    };
    // a summary.json is accepted too: its config echo is the config
    if let Some(echo) = value.get("config").filter(|v| v.is_object()) {
        value = echo.clone();
    }
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("{source_name}: top level must be a JSON object")))?;
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(key.to_owned(), v);
        }
    };
    set("mode", overrides.mode.map(|m| Value::String(m.as_str().to_owned())));
    set("distribution", overrides.distribution.as_ref().map(serde_json::to_value).transpose()?);
    set("p", overrides.p.map(Value::from));
    set("n", overrides.n.map(Value::from));
    set("replicates", overrides.replicates.map(Value::from));
    set("master_seed", overrides.master_seed.map(Value::from));

    let text = serde_json::to_string(&value)?;
    let mut config: ExperimentConfig = match path {
        Some(path) => {
            // re-read from the original text so data errors keep their line
            let original = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            match serde_json::from_str::<ExperimentConfig>(&text) {
                Ok(c) => c,
                Err(e) => {
                    let located = serde_json::from_str::<ExperimentConfig>(&original).err();
                    return Err(parse_error(&source_name, located.as_ref().unwrap_or(&e)));
                }
            }
        }
        None => serde_json::from_str(&text).map_err(|e| Error::Config(format!("{source_name}: {e}")))?,
    };
    if let Some(w) = overrides.workers {
        config.workers = Some(w);
    }
    if let Ok(env) = std::env::var(WORKERS_ENV) {
        let w: usize = env
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={env} is not a positive integer")))?;
        config.workers = Some(w);
    }
    if let Some(out) = &overrides.out {
        config.output.dir = Some(out.clone());
    }
    config.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let f = write(r#"{"mode": "single_entry", "distribution": "gaussian", "p": 50, "n": 200}"#);
        let c = load_config(Some(f.path()), &Overrides::default()).unwrap();
        assert_eq!(c.replicates, 10_000);
        assert_eq!(c.normalizer, Normalizer::RhoLimit);
        assert_eq!(c.y(), 0.25);
        assert_eq!(c.q_indices, vec![50]);
        assert_eq!(c.audit_every, Some(100));
        assert_eq!(c.sigma, SigmaConfig::Identity);
    }

    #[test]
    fn p_not_below_n_is_rejected() {
        let f = write(r#"{"mode": "single_entry", "distribution": "gaussian", "p": 200, "n": 100}"#);
        let err = load_config(Some(f.path()), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("p < n required"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn wishart_needs_gaussian() {
        let c = ExperimentConfig::new(Mode::WishartCov, DistributionConfig::Name(DistributionKind::Uniform), 30, 120);
        let err = c.resolve().unwrap_err();
        assert!(err.to_string().contains("normally distributed"), "{err}");
    }

    #[test]
    fn mode_guards() {
        let g = DistributionConfig::Name(DistributionKind::Gaussian);
        assert!(ExperimentConfig::new(Mode::Pair, g.clone(), 1, 20).resolve().is_err());
        let c = ExperimentConfig::new(Mode::Pair, g.clone(), 5, 20).resolve().unwrap();
        assert_eq!(c.q_indices, vec![5, 4]);
        assert!(ExperimentConfig::new(Mode::SingleEntry, g.clone(), 18, 20).resolve().is_err());
        let mut c = ExperimentConfig::new(Mode::SingleEntry, g.clone(), 18, 20);
        c.allow_small_gap = true;
        assert!(c.resolve().is_ok());
        let mut c = ExperimentConfig::new(Mode::SingleEntry, g.clone(), 5, 20);
        c.sigma = SigmaConfig::Ar1 { r: 1.0 };
        assert!(c.clone().resolve().is_err());
        c.sigma = SigmaConfig::Explicit {
            matrix: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        c.p = 2;
        assert!(c.resolve().is_err());
        let mut c = ExperimentConfig::new(Mode::ScaleSeparation, g, 100, 200);
        c.q_indices = vec![3];
        let c = c.resolve().unwrap();
        assert_eq!(c.dims(), vec![(200, 100), (400, 200), (800, 400)]);
        assert_eq!(c.q_indices, vec![100]);
    }

    #[test]
    fn parse_errors_carry_position() {
        let f = write("{\n  \"mode\": \"single_entry\",\n  \"p\": 5,,\n}");
        match load_config(Some(f.path()), &Overrides::default()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let f = write("{\n  \"mode\": \"single_entry\",\n  \"distribution\": \"gaussian\",\n  \"p\": 5,\n  \"n\": 50,\n  \"bogus\": 1\n}");
        match load_config(Some(f.path()), &Overrides::default()).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 6);
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn overrides_replace_file_values() {
        let f = write(r#"{"mode": "single_entry", "distribution": "gaussian", "p": 50, "n": 200, "master_seed": 1}"#);
        let o = Overrides {
            n: Some(400),
            master_seed: Some(42),
            distribution: Some("student_t:df=10".parse().unwrap()),
            ..Overrides::default()
        };
        let c = load_config(Some(f.path()), &o).unwrap();
        assert_eq!((c.n, c.master_seed), (400, 42));
        assert_eq!(c.distribution_spec().unwrap().kind(), DistributionKind::StudentT);
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let g = DistributionConfig::Name(DistributionKind::Gaussian);
        let a = ExperimentConfig::new(Mode::SingleEntry, g, 5, 50).resolve().unwrap();
        let mut b = a.clone();
        b.workers = Some(8);
        b.output.dir = Some("elsewhere".into());
        assert_eq!(a.config_hash().unwrap(), b.config_hash().unwrap());
        let mut c = a.clone();
        c.master_seed = 9;
        assert_ne!(a.config_hash().unwrap(), c.config_hash().unwrap());
        assert_eq!(a.config_hash().unwrap().len(), 64);
    }

    #[test]
    fn ramp_sigma() {
        let s = SigmaConfig::Diagonal { values: None, ramp: true }.build(4).unwrap();
        assert_eq!(s.inverse_diag(4), 1.0);
        assert_eq!(s.inverse_diag(1), 4.0);
    }
}
