//! `preclt simulate | verify | sweep | report`.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or configuration
//! error, 3 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::clt::{run_monte_carlo, summarize};
use crate::error::{Error, Result};

use super::config::{load_config, DistributionConfig, ExperimentConfig, Mode, Overrides, WORKERS_ENV};
use super::report::{read_samples_csv, verdict_table, write_report, write_report_files};
use super::verify::{fast_suite, full_suite, CriterionReport, SuiteOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

const DEFAULT_OUT: &str = "preclt-out";

#[derive(Debug, Parser)]
#[command(name = "preclt", version, about = "Monte Carlo laboratory for diagonal entries of sample precision matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one Monte Carlo experiment and write its report files.
    Simulate(RunArgs),
    /// Run the built-in acceptance suite.
    Verify(VerifyArgs),
    /// Grid over sample size, aspect ratio and distribution.
    Sweep(SweepArgs),
    /// Rebuild the summary, verdicts and histogram from a sample CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Distribution as `kind` or `kind:key=value`, e.g. `student_t:df=10`.
    #[arg(long, value_parser = parse_dist)]
    dist: Option<DistributionConfig>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Identity audits only (no Monte Carlo).
    #[arg(long, conflicts_with = "full")]
    fast: bool,
    /// Identity audits plus the statistical suite.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write the suite lines to `DIR/verify.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Base config; grid values replace its `n`, `p` and distribution.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample sizes, `n=200,400,800`.
    #[arg(long, value_parser = parse_grid)]
    grid: Vec<usize>,
    /// Aspect ratio `p / n`.
    #[arg(long)]
    y: f64,
    /// Comma-separated distributions.
    #[arg(long, value_delimiter = ',', value_parser = parse_dist, default_value = "gaussian")]
    dist: Vec<DistributionConfig>,
    #[arg(long, value_parser = parse_mode, default_value = "single_entry")]
    mode: Mode,
    #[arg(long)]
    replicates: Option<usize>,
    /// First seed of the ladder; grid point `k` uses `seed + k`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Experiment config, or the `summary.json` of the run.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    csv: PathBuf,
    /// Output directory, default the CSV's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_dist(s: &str) -> std::result::Result<DistributionConfig, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_grid(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|_| format!("`{s}` is not a sample size"))
}

/// `--grid n=200,400,800` arrives as one token; split it before clap sees it.
fn expand_grid(argv: Vec<OsString>) -> Vec<OsString> {
    let mut out = Vec::with_capacity(argv.len());
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy().into_owned();
        let value = if text == "--grid" {
            iter.next().map(|v| v.to_string_lossy().into_owned())
        } else {
            text.strip_prefix("--grid=").map(str::to_owned)
        };
        match value {
            Some(v) => {
                for item in v.strip_prefix("n=").unwrap_or(&v).split(',').filter(|s| !s.is_empty()) {
                    out.push("--grid".into());
                    out.push(item.into());
                }
            }
            None => out.push(arg),
        }
    }
    out
}

fn out_dir(out: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn simulate(args: RunArgs, stdout: &mut dyn Write) -> Result<i32> {
    let overrides = Overrides {
        mode: args.mode,
        distribution: args.dist,
        p: args.p,
        n: args.n,
        replicates: args.replicates,
        master_seed: args.seed,
        workers: args.workers,
        out: args.out.clone(),
    };
    let config = load_config(args.config.as_deref(), &overrides)?;
    let dir = out_dir(args.out.as_deref(), &config);
    let summary = run_monte_carlo(&config)?;
    let report = write_report(&summary, &dir)?;
    let _ = write!(stdout, "{}", verdict_table(&report.verdicts));
    let _ = writeln!(stdout, "wrote {}", dir.display());
    Ok(if report.failed() { EXIT_CHECK_FAILED } else { EXIT_OK })
}

fn suite_workers(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(flag),
    }
}

fn verify(args: VerifyArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut opts = SuiteOptions {
        workers: suite_workers(args.workers)?,
        ..SuiteOptions::default()
    };
    if let Some(seed) = args.seed {
        opts.master_seed = seed;
    }
    let mut lines = Vec::new();
    let mut print = |r: &CriterionReport| {
        let line = r.line();
        let _ = writeln!(stdout, "{line}");
        let _ = stdout.flush();
        lines.push(line);
    };
    let reports = if args.full && !args.fast {
        full_suite(&opts, &mut print)?
    } else {
        fast_suite(&opts, &mut print)?
    };
    if let Some(dir) = args.out {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("verify.txt");
        fs::write(&path, lines.join("\n") + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(if reports.iter().all(CriterionReport::passed) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn sweep(args: SweepArgs, stdout: &mut dyn Write) -> Result<i32> {
    if args.grid.is_empty() {
        return Err(Error::Config("--grid needs at least one sample size".into()));
    }
    if !(args.y > 0.0 && args.y < 1.0) {
        return Err(Error::Config(format!("--y must lie in (0, 1), got {}", args.y)));
    }
    let base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Some(serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| Error::Parse {
                source_name: path.display().to_string(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?)
        }
        None => None,
    };
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("sweep.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
    let header = [
        "distribution", "n", "p", "y", "replicates", "seed", "mean", "variance", "variance_se", "ks", "rho_limit",
        "rho_n_mean",
    ];
    w.write_record(header)?;
    let _ = writeln!(stdout, "{}", header.join(","));
    let workers = suite_workers(args.workers)?;
    let mut k = 0u64;
    for dist in &args.dist {
        for &n in &args.grid {
            let p = (args.y * n as f64).round() as usize;
            let mut c = base
                .clone()
                .unwrap_or_else(|| ExperimentConfig::new(args.mode, dist.clone(), p, n));
            c.mode = args.mode;
            c.distribution = dist.clone();
            c.p = p;
            c.n = n;
            c.q_indices.clear();
            if let Some(m) = args.replicates {
                c.replicates = m;
            }
            c.master_seed = args.seed.or(base.as_ref().map(|b| b.master_seed)).unwrap_or(0).wrapping_add(k);
            c.workers = workers.or(c.workers);
            k += 1;
            let s = run_monte_carlo(&c)?;
            let m = s.marginal(p).or(s.marginals.first()).cloned();
            let (mean, var, var_se, ks) = m
                .as_ref()
                .and_then(|m| m.moments.map(|mo| (mo.mean, mo.variance, mo.variance_se, m.ks.map_or(f64::NAN, |k| k.distance))))
                .unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
            let (rho, rho_n) = m.map_or((f64::NAN, f64::NAN), |m| (m.rho.rho_limit, m.rho.rho_n_mean.unwrap_or(f64::NAN)));
            let row = [
                dist.kind().to_string(),
                n.to_string(),
                p.to_string(),
                format!("{}", p as f64 / n as f64),
                s.config.replicates.to_string(),
                s.master_seed.to_string(),
                format!("{mean}"),
                format!("{var}"),
                format!("{var_se}"),
                format!("{ks}"),
                format!("{rho}"),
                format!("{rho_n}"),
            ];
            w.write_record(&row)?;
            let _ = writeln!(stdout, "{}", row.join(","));
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(EXIT_OK)
}

fn report(args: ReportArgs, stdout: &mut dyn Write) -> Result<i32> {
    let config = load_config(Some(&args.config), &Overrides::default())?;
    let (mode, samples) = read_samples_csv(&args.csv)?;
    if let Some(mode) = mode {
        if mode != config.mode {
            return Err(Error::Config(format!(
                "CSV holds {mode} samples but the config is for {}",
                config.mode
            )));
        }
    }
    let dir = args
        .out
        .clone()
        .or_else(|| args.csv.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let summary = summarize(&config, samples)?;
    let same_csv = args.out.is_none() || dir.join(super::report::SAMPLES_FILE) == args.csv;
    let report = write_report_files(&summary, &dir, !same_csv)?;
    let _ = write!(stdout, "{}", verdict_table(&report.verdicts));
    Ok(if report.failed() { EXIT_CHECK_FAILED } else { EXIT_OK })
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to `stderr`.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = expand_grid(argv.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
            } else {
                let _ = write!(stdout, "{}", e.render());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::Verify(a) => verify(a, stdout),
        Command::Sweep(a) => sweep(a, stdout),
        Command::Report(a) => report(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(std::iter::once("preclt").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run(&[]).0, EXIT_USAGE);
        assert_eq!(run(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn invalid_config_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, _, err) = run(&["simulate", "--mode", "single_entry", "--dist", "gaussian", "--p", "200", "--n", "100", "--out", out]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("p < n required"), "{err}");
    }

    #[test]
    fn missing_config_file_is_io_error() {
        let (code, _, _) = run(&["simulate", "--config", "/nonexistent/c.json"]);
        assert_eq!(code, EXIT_IO);
    }

    #[test]
    fn grid_tokens_are_split() {
        let v = expand_grid(["preclt", "sweep", "--grid", "n=200,400", "--y", "0.5"].map(OsString::from).to_vec());
        let v: Vec<String> = v.into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(v, ["preclt", "sweep", "--grid", "200", "--grid", "400", "--y", "0.5"]);
    }

    #[test]
    fn sweep_echoes_rho_limit() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, stdout, err) = run(&[
            "sweep", "--grid", "n=40,80", "--y", "0.5", "--dist", "uniform", "--replicates", "30", "--workers", "2", "--out", out,
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        let rows: Vec<&str> = stdout.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields[0], "uniform");
            assert!((fields[10].parse::<f64>().unwrap() - 1.4).abs() < 1e-12, "{row}");
        }
    }
}
