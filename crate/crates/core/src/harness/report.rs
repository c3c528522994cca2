//! Report files for one run: `samples.csv`, `summary.json`, `verdicts.txt`
//! and `histogram.csv`.
//!
//! Everything except the sample CSV is derived from the summary, and the
//! summary is derived from the samples, so `report` applied to a run's CSV
//! rewrites the same `summary.json` byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::clt::{KsColumn, McSummary, StandardizedSample, WishartCandidate};
use crate::error::{Error, Result};

use super::config::Mode;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const VERDICTS_FILE: &str = "verdicts.txt";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

/// Largest `|corr(T_p, T_{p-1})|` accepted in pair mode.
pub const PAIR_CORR_LIMIT: f64 = 0.05;
/// Mean-centering tolerance in standard errors.
pub const MEAN_SE_LIMIT: f64 = 4.0;
/// Diagonal-covariance Wishart check tolerance in standard errors.
pub const WISHART_SE_LIMIT: f64 = 5.0;
/// Required growth of the scale ratio over a fourfold increase of `n`.
pub const SCALE_GROWTH_LIMIT: f64 = 2.5;

const SAMPLE_HEADER: [&str; 9] = ["rep_id", "mode", "q", "n", "p", "raw_entry", "t_value", "rho_n", "log_det"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    /// Printed for information, not asserted.
    Reported,
}

impl Status {
    fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
            Status::Reported => "reported",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub observed: Option<f64>,
    pub threshold: String,
    pub status: Status,
}

impl Verdict {
    fn new(name: impl Into<String>, observed: f64, threshold: impl Into<String>, status: Status) -> Self {
        Verdict {
            name: name.into(),
            observed: Some(observed),
            threshold: threshold.into(),
            status,
        }
    }
}

/// Paths of the written files and the verdicts they contain.
#[derive(Debug, Clone)]
pub struct Report {
    pub dir: PathBuf,
    pub summary: Value,
    pub csv_path: PathBuf,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn failed(&self) -> bool {
        self.verdicts.iter().any(|v| v.status == Status::Fail)
    }
}

/// Verdicts implied by a summary. Pure, so a rebuilt summary gets the same
/// table.
pub fn verdicts(summary: &McSummary) -> Vec<Verdict> {
    if summary.is_empty() {
        return vec![Verdict {
            name: "run".into(),
            observed: None,
            threshold: "at least 2 replicates".into(),
            status: Status::Skipped,
        }];
    }
    let config = &summary.config;
    let mut out = Vec::new();
    for m in &summary.marginals {
        let cell = format!("n={},p={},q={}", m.n, m.p, m.q);
        if let Some(mo) = m.moments {
            let limit = MEAN_SE_LIMIT * mo.mean_se;
            out.push(Verdict::new(
                format!("mean_centering[{cell}]"),
                mo.mean.abs(),
                format!("|mean| <= {MEAN_SE_LIMIT} SE = {limit:.6}"),
                Status::from_bool(mo.mean.abs() <= limit),
            ));
            if let Some([lo, hi]) = config.variance_band {
                out.push(Verdict::new(
                    format!("variance[{cell}]"),
                    mo.variance,
                    format!("in [{lo}, {hi}]"),
                    Status::from_bool((lo..=hi).contains(&mo.variance)),
                ));
            }
        }
        if let Some(ks) = m.ks {
            let column = match ks.column {
                KsColumn::TValue => "t_value",
                KsColumn::RawEntry => "raw_entry",
            };
            out.push(Verdict::new(
                format!("ks_{column}[{cell}]"),
                ks.distance,
                format!("< {:.6} (1.5 x Kolmogorov 1% critical value)", ks.threshold),
                Status::from_bool(ks.distance < ks.threshold),
            ));
        }
    }
    if let Some(pair) = summary.pair {
        out.push(Verdict::new(
            "pair_correlation",
            pair.corr.abs(),
            format!("|corr| < {PAIR_CORR_LIMIT}"),
            Status::from_bool(pair.corr.abs() < PAIR_CORR_LIMIT),
        ));
    }
    if let Some(w) = summary.wishart {
        if w.sigma_inv_offdiag == 0.0 {
            out.push(Verdict::new(
                "wishart_zero_covariance",
                w.z_from_zero.abs(),
                format!("|cov| / SE <= {WISHART_SE_LIMIT}"),
                Status::from_bool(w.z_from_zero.abs() <= WISHART_SE_LIMIT),
            ));
        } else {
            let closer = match w.closer {
                WishartCandidate::Linear => "linear",
                WishartCandidate::Squared => "squared",
                WishartCandidate::Tie => "tie",
            };
            out.push(Verdict::new(
                "wishart_covariance",
                w.empirical_cov,
                format!(
                    "linear {:.6}, squared {:.6}, exact {:.6}; closer: {closer}",
                    w.linear_candidate, w.squared_candidate, w.exact_finite_n
                ),
                Status::Reported,
            ));
        }
    }
    if let Some(scale) = &summary.scale {
        out.push(Verdict::new(
            "scale_ratio_monotone",
            scale.rungs.last().map_or(f64::NAN, |r| r.ratio),
            "ratio increases along the ladder",
            Status::from_bool(scale.ratio_monotone),
        ));
        let span = match (scale.rungs.first(), scale.rungs.last()) {
            (Some(a), Some(b)) => b.n as f64 / a.n as f64,
            _ => 1.0,
        };
        let status = if span >= 4.0 {
            Status::from_bool(scale.growth_factor >= SCALE_GROWTH_LIMIT)
        } else {
            Status::Reported
        };
        out.push(Verdict::new(
            "scale_ratio_growth",
            scale.growth_factor,
            format!(">= {SCALE_GROWTH_LIMIT} over a fourfold n"),
            status,
        ));
    }
    out
}

/// JSON body of `summary.json`.
pub fn summary_value(summary: &McSummary) -> Result<Value> {
    let cell = |m: &crate::clt::Marginal| json!({"n": m.n, "p": m.p, "q": m.q, "count": m.count});
    let with = |base: Value, extra: Value| -> Value {
        let mut base = base;
        if let (Some(b), Some(e)) = (base.as_object_mut(), extra.as_object()) {
            for (k, v) in e {
                b.insert(k.clone(), v.clone());
            }
        }
        base
    };
    let mut moments = Vec::new();
    let mut ks = Vec::new();
    let mut rho = Vec::new();
    for m in &summary.marginals {
        moments.push(with(cell(m), json!({"moments": m.moments})));
        let ks_body = match m.ks {
            Some(k) => serde_json::to_value(k)?,
            None => json!({ "distance": null }),
        };
        ks.push(with(cell(m), ks_body));
        rho.push(with(cell(m), serde_json::to_value(m.rho)?));
    }
    Ok(json!({
        "config": summary.config,
        "seed": summary.master_seed,
        "config_hash": summary.config_hash,
        "moments": moments,
        "ks": ks,
        "pair": summary.pair,
        "rho": rho,
        "wishart": summary.wishart,
        "scale": summary.scale,
        "verdicts": verdicts(summary),
    }))
}

/// Pretty JSON whose floats carry 17 significant digits.
struct SignificantDigits {
    inner: PrettyFormatter<'static>,
}

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json_string(value: &Value) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        SignificantDigits {
            inner: PrettyFormatter::with_indent(b"  "),
        },
    );
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_samples_csv(path: &Path, mode: Mode, samples: &[StandardizedSample]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
    w.write_record(SAMPLE_HEADER)?;
    for s in samples {
        w.write_record([
            s.rep_id.to_string(),
            mode.as_str().to_owned(),
            s.q.to_string(),
            s.n.to_string(),
            s.p.to_string(),
            fmt_f64(s.raw_entry),
            fmt_f64(s.t_value),
            fmt_f64(s.rho_n),
            s.log_det.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a sample CSV back, returning the mode column and the samples.
pub fn read_samples_csv(path: &Path) -> Result<(Option<Mode>, Vec<StandardizedSample>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(io::BufReader::new(file));
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != SAMPLE_HEADER {
        return Err(Error::Config(format!(
            "{}: expected header {}, found {}",
            path.display(),
            SAMPLE_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut mode = None;
    let mut samples = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let field = |k: usize| record.get(k).unwrap_or("");
        let line = i + 2;
        let bad = |what: &str| Error::Parse {
            source_name: path.display().to_string(),
            line,
            column: 0,
            message: format!("unreadable {what}"),
        };
        let row_mode: Mode = field(1).parse().map_err(|_| bad("mode"))?;
        match mode {
            None => mode = Some(row_mode),
            Some(m) if m != row_mode => return Err(bad("mode (mixed modes)")),
            _ => {}
        }
        let int = |k: usize, what: &str| field(k).parse::<u64>().map_err(|_| bad(what));
        let real = |k: usize, what: &str| field(k).parse::<f64>().map_err(|_| bad(what));
        samples.push(StandardizedSample {
            rep_id: int(0, "rep_id")?,
            q: int(2, "q")? as usize,
            n: int(3, "n")? as usize,
            p: int(4, "p")? as usize,
            raw_entry: real(5, "raw_entry")?,
            t_value: real(6, "t_value")?,
            rho_n: real(7, "rho_n")?,
            log_det: if field(8).is_empty() { None } else { Some(real(8, "log_det")?) },
        });
    }
    Ok((mode, samples))
}

/// Histogram rows for one cell: `⌈√M⌉` equal bins over `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    /// Reference density at the bin midpoint.
    pub reference_density: f64,
}

pub fn histogram(values: &[f64], reference: impl Fn(f64) -> f64) -> Vec<HistogramBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let bins = (values.len() as f64).sqrt().ceil() as usize;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let left = lo + k as f64 * width;
            let right = if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width };
            HistogramBin {
                left,
                right,
                count,
                reference_density: reference(0.5 * (left + right)),
            }
        })
        .collect()
}

fn write_histogram(path: &Path, summary: &McSummary) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
    w.write_record(["n", "p", "q", "column", "bin_left", "bin_right", "count", "reference_density"])?;
    for m in &summary.marginals {
        let Some(ks) = m.ks else { continue };
        let (column, values): (&str, Vec<f64>) = {
            let cell = summary.samples.iter().filter(|s| (s.n, s.p, s.q) == (m.n, m.p, m.q));
            match ks.column {
                KsColumn::TValue => ("t_value", cell.map(|s| s.t_value).collect()),
                KsColumn::RawEntry => ("raw_entry", cell.map(|s| s.raw_entry).collect()),
            }
        };
        for b in histogram(&values, |x| ks.reference.density(x)) {
            w.write_record([
                m.n.to_string(),
                m.p.to_string(),
                m.q.to_string(),
                column.to_owned(),
                fmt_f64(b.left),
                fmt_f64(b.right),
                b.count.to_string(),
                fmt_f64(b.reference_density),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Plain-text verdict table.
pub fn verdict_table(verdicts: &[Verdict]) -> String {
    let width = verdicts.iter().map(|v| v.name.len()).max().unwrap_or(4).max(4);
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:<width$} {:>14}  threshold", "status", "name", "observed");
    for v in verdicts {
        let observed = v.observed.map_or("-".to_owned(), |o| format!("{o:.6}"));
        let _ = writeln!(s, "{:<8} {:<width$} {:>14}  {}", v.status.as_str(), v.name, observed, v.threshold);
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes all four report files into `dir`. With `write_csv = false` the
/// sample CSV is left alone (used when rebuilding from that CSV).
pub fn write_report_files(summary: &McSummary, dir: &Path, write_csv: bool) -> Result<Report> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(SAMPLES_FILE);
    if write_csv {
        write_samples_csv(&csv_path, summary.config.mode, &summary.samples)?;
    }
    let value = summary_value(summary)?;
    write_text(&dir.join(SUMMARY_FILE), &to_json_string(&value)?)?;
    let verdicts = verdicts(summary);
    let mut table = verdict_table(&verdicts);
    if summary.audit.audited > 0 {
        let _ = writeln!(
            table,
            "\naudit: {} replicates checked against the direct inverse, max rel. diff {:e}",
            summary.audit.audited, summary.audit.max_rel_diff
        );
    }
    write_text(&dir.join(VERDICTS_FILE), &table)?;
    write_histogram(&dir.join(HISTOGRAM_FILE), summary)?;
    Ok(Report {
        dir: dir.to_owned(),
        summary: value,
        csv_path,
        verdicts,
    })
}

/// Writes the report for a finished run into `dir`.
pub fn write_report(summary: &McSummary, dir: &Path) -> Result<Report> {
    write_report_files(summary, dir, true)
}
