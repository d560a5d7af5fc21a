//! Command-line front end.
//!
//! Every command writes `{"config": ..., "result": ...}` in JSON mode, where
//! `config` is the fully resolved invocation (including defaults taken from
//! the environment), so a run can be repeated from its own output. Scans
//! stream one JSON object per line and end with a summary line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 internal assertion.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, Rational};
use crate::decision::{decide, SpectralCertificate};
use crate::digits::{mu_hat_zero_location, zero_set, GenericDigitSet, ProductDigitSet, ZeroLocation};
use crate::error::Error;
use crate::exec::Exec;
use crate::fourier::{
    orthogonality_report, probe_nested, q_curve, verification_report, EvalConfig, ProbeReport,
    VerificationReport,
};
use crate::spectrum::{
    build_d2, build_freq_set, build_spectrum_with, gcd_difference_certificate, hadamard_check,
    BuildOptions, FreqDigits, HadamardReport, DEFAULT_SPECTRUM_BUDGET,
};
use crate::tiling::{tile_decide, Agreement, TileConfig, TileVerdict, DEFAULT_WORD_BUDGET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Status label for a spectrum whose pairs were all checked.
pub const STATUS_VERIFIED: &str = "verified-orthogonal/completeness-probed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(
    name = "selfsim",
    version,
    about = "Spectrality, explicit spectra and tiling checks for self-similar measures with digits {0..N-1} + m{0..L-1}"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for sampled evaluations.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Run on the current thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Params {
    /// Contraction is 1/p.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub p: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub digits: DigitParams,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DigitParams {
    /// Size of the consecutive block {0..N-1}.
    #[arg(long = "N", value_parser = clap::value_parser!(u64).range(2..))]
    #[serde(rename = "N")]
    pub n: u64,
    /// Size of the spread block m{0..L-1}.
    #[arg(long = "L", value_parser = clap::value_parser!(u64).range(2..))]
    #[serde(rename = "L")]
    pub l: u64,
    /// Spacing of the spread block.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
}

impl DigitParams {
    fn set(&self) -> Result<ProductDigitSet, Error> {
        ProductDigitSet::new(self.n, self.m, self.l)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Number of seeded sample points in [0, 1).
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    /// Truncation tolerance for the infinite product.
    #[arg(long, default_value_t = 1e-9)]
    pub tail_epsilon: f64,
    /// Slack allowed above 1 for Q.
    #[arg(long, default_value_t = 1e-6)]
    pub q_tolerance: f64,
    /// Largest number of frequency pairs checked exactly.
    #[arg(long, env = "SELFSIM_PAIR_BUDGET", default_value_t = 200_000_000)]
    pub pair_budget: u64,
}

impl EvalArgs {
    fn config(&self, seed: u64) -> EvalConfig {
        EvalConfig {
            tail_epsilon: self.tail_epsilon,
            q_tolerance: self.q_tolerance,
            sample_count: self.samples as usize,
            sample_seed: seed,
            pair_budget: self.pair_budget,
        }
    }
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Decide spectrality for one parameter set.
    Decide(Params),
    /// Decide spectrality for every m in an inclusive range `a..b`.
    Scan(ScanArgs),
    /// Build a finite truncation of the explicit spectrum.
    Spectrum(SpectrumArgs),
    /// Check a spectrum file: exact orthogonality and sampled Q.
    Verify(VerifyArgs),
    /// Compare the arithmetic tile verdict at p = N L with brute-force evidence.
    Tile(TileArgs),
    /// Check the Hadamard triple used by the spectrum construction.
    Hadamard(Params),
    /// Test whether a rational frequency is a zero of the Fourier transform.
    Zeros(ZerosArgs),
    /// Re-run a fixed set of reference computations.
    Examples,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub p: u64,
    #[arg(long = "N", value_parser = clap::value_parser!(u64).range(2..))]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long = "L", value_parser = clap::value_parser!(u64).range(2..))]
    #[serde(rename = "L")]
    pub l: u64,
    /// Inclusive range `a..b` with 1 <= a <= b.
    #[arg(long, value_parser = parse_m_range)]
    #[serde(serialize_with = "ser_range")]
    pub m: RangeInclusive<u64>,
}

fn ser_range<S: serde::Serializer>(r: &RangeInclusive<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}..{}", r.start(), r.end()))
}

pub fn parse_m_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected `a..b`, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad start {a:?}: {e}"))?;
    let b: u64 = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|e| format!("bad end {b:?}: {e}"))?;
    if a == 0 {
        return Err("m must be at least 1".into());
    }
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..=b)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: Params,
    /// Number of integer expansion levels.
    #[arg(long, default_value_t = 3)]
    pub levels: u32,
    /// Representatives for the integer frequency digits.
    #[arg(long, default_value = "canonical")]
    pub digits: FreqDigits,
    /// Largest number of frequencies to emit.
    #[arg(long, env = "SELFSIM_SPECTRUM_BUDGET", default_value_t = DEFAULT_SPECTRUM_BUDGET)]
    pub budget: u64,
    /// Skip the orthogonality check and the Q probe.
    #[arg(long)]
    pub no_verify: bool,
    /// Write the spectrum document here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Spectrum document written by `spectrum`.
    #[arg(long)]
    pub input: PathBuf,
    /// Also write `x,q` on a uniform grid of [0, 1) to this CSV file.
    #[arg(long)]
    pub q_csv: Option<PathBuf>,
    /// Grid size for `--q-csv`.
    #[arg(long, default_value_t = 256)]
    pub grid_points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub digits: DigitParams,
    /// Deepest level for the distinct-sums check.
    #[arg(long, default_value_t = 5)]
    pub max_k: u32,
    /// Check every nonzero nu in [-W, W].
    #[arg(long, default_value_t = 50)]
    pub nu_window: u32,
    /// Deepest level for the mask zero search.
    #[arg(long, default_value_t = 12)]
    pub kmax: u32,
    /// Largest number of digit words enumerated at one depth.
    #[arg(long, env = "SELFSIM_WORD_BUDGET", default_value_t = DEFAULT_WORD_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ZerosArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: Params,
    /// Frequency as `a/b` or `a`.
    #[arg(long)]
    pub xi: Rational,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Assertion(_) => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a Cli,
    result: &'a T,
}

/// Spectrum document: written by `spectrum`, read by `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumDoc {
    pub metadata: SpectrumMetadata,
    pub lambda: Vec<Rational>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u64,
    pub m: u64,
    pub d: u32,
    pub levels: u32,
    pub size: usize,
    #[serde(default)]
    pub digits: FreqDigits,
    #[serde(default)]
    pub status: String,
    #[serde(default)]
    pub scale: Option<Rational>,
    #[serde(default)]
    pub certificate: Option<SpectralCertificate>,
    #[serde(default)]
    pub lambda1: Vec<Rational>,
    #[serde(default)]
    pub freq_set: Vec<i64>,
    #[serde(default)]
    pub d2: Option<GenericDigitSet>,
    #[serde(default)]
    pub hadamard: Option<HadamardReport>,
    #[serde(default)]
    pub gcd_certificate: Option<bool>,
    #[serde(default)]
    pub orthogonality: Option<VerificationReport>,
    #[serde(default)]
    pub completeness: Option<ProbeReport>,
}

#[derive(Debug, Serialize)]
struct ScanSummary {
    scanned: u64,
    spectral: u64,
    direct: u64,
}

#[derive(Debug, Serialize)]
struct ScanLine<'a> {
    summary: &'a ScanSummary,
    config: &'a Cli,
}

#[derive(Debug, Serialize)]
struct HadamardResult {
    p: u64,
    #[serde(rename = "N")]
    n: u64,
    #[serde(rename = "L")]
    l: u64,
    m: u64,
    spectral: bool,
    d2: Option<GenericDigitSet>,
    freq_set: Option<Vec<i64>>,
    hadamard: Option<HadamardReport>,
    gcd_certificate: Option<bool>,
}

#[derive(Debug, Serialize)]
struct ZerosResult {
    p: u64,
    #[serde(rename = "N")]
    n: u64,
    #[serde(rename = "L")]
    l: u64,
    m: u64,
    xi: Rational,
    member: bool,
    location: Option<ZeroLocation>,
    mask_zero_set: String,
}

#[derive(Debug, Serialize)]
struct VerifyResult {
    input: String,
    p: u64,
    #[serde(rename = "N")]
    n: u64,
    #[serde(rename = "L")]
    l: u64,
    m: u64,
    report: VerificationReport,
}

#[derive(Debug, Serialize)]
struct ExampleCheck {
    name: String,
    expected: String,
    observed: String,
    pass: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| execute(&cli, out)));
    let code = match outcome {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(CliError::Usage(msg))) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Ok(Err(CliError::Internal(msg))) => {
            let _ = writeln!(err, "internal error: {msg}");
            EXIT_INTERNAL
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            let _ = writeln!(err, "internal error: {msg}");
            EXIT_INTERNAL
        }
    };
    let _ = out.flush();
    code
}

fn exec_of(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Decide(a) => cmd_decide(cli, a, out),
        Command::Scan(a) => cmd_scan(cli, a, out),
        Command::Spectrum(a) => cmd_spectrum(cli, a, out),
        Command::Verify(a) => cmd_verify(cli, a, out),
        Command::Tile(a) => cmd_tile(cli, a, out),
        Command::Hadamard(a) => cmd_hadamard(cli, a, out),
        Command::Zeros(a) => cmd_zeros(cli, a, out),
        Command::Examples => cmd_examples(cli, out),
    }
}

fn write_json<T: Serialize>(cli: &Cli, result: &T, out: &mut dyn Write) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, &Envelope { config: cli, result })?;
    writeln!(out)?;
    Ok(())
}

const CERT_HEADER: [&str; 10] = [
    "p",
    "N",
    "L",
    "m",
    "spectral",
    "direct_sum",
    "cond_N_divides_p",
    "cond_L_divides_p",
    "d",
    "cond_N_divides_mtilde",
];

fn cert_row(c: &SpectralCertificate) -> [String; 10] {
    [
        c.p.to_string(),
        c.n.to_string(),
        c.l.to_string(),
        c.m.to_string(),
        c.spectral.to_string(),
        c.direct_sum.to_string(),
        c.cond_n_divides_p.to_string(),
        c.cond_l_divides_p.to_string(),
        c.d.to_string(),
        c.cond_n_divides_mtilde.to_string(),
    ]
}

fn cert_text(c: &SpectralCertificate) -> String {
    format!(
        "p={} N={} L={} m={}: {} (direct={} N|p={} L|p={} d={} N|m~={})",
        c.p,
        c.n,
        c.l,
        c.m,
        if c.spectral { "spectral" } else { "not spectral" },
        c.direct_sum,
        c.cond_n_divides_p,
        c.cond_l_divides_p,
        c.d,
        c.cond_n_divides_mtilde
    )
}

fn cmd_decide(cli: &Cli, a: &Params, out: &mut dyn Write) -> CliResult<()> {
    let cert = decide(&a.digits.set()?, a.p)?;
    match cli.format {
        Format::Json => write_json(cli, &cert, out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CERT_HEADER)?;
            w.write_record(cert_row(&cert))?;
            w.flush()?;
            Ok(())
        }
        Format::Text => Ok(writeln!(out, "{}", cert_text(&cert))?),
    }
}

const SCAN_CHUNK: u64 = 4096;

enum ScanSink<'a> {
    Csv(Box<csv::Writer<&'a mut dyn Write>>),
    Lines(&'a mut dyn Write),
}

fn cmd_scan(cli: &Cli, a: &ScanArgs, out: &mut dyn Write) -> CliResult<()> {
    let exec = exec_of(cli);
    // Validate once up front so per-m errors cannot appear midway through the stream.
    ProductDigitSet::new(a.n, *a.m.start(), a.l)?;
    let mut summary = ScanSummary {
        scanned: 0,
        spectral: 0,
        direct: 0,
    };
    let mut sink = match cli.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["kind"];
            header.extend(CERT_HEADER);
            w.write_record(&header)?;
            ScanSink::Csv(Box::new(w))
        }
        _ => ScanSink::Lines(out),
    };
    let mut start = *a.m.start();
    let end = *a.m.end();
    loop {
        let stop = end.min(start.saturating_add(SCAN_CHUNK - 1));
        let certs = exec.map_range(start..stop + 1, |m| {
            ProductDigitSet::new(a.n, m, a.l).and_then(|d| decide(&d, a.p))
        });
        for cert in certs {
            let cert = cert?;
            summary.scanned += 1;
            summary.spectral += cert.spectral as u64;
            summary.direct += cert.direct_sum as u64;
            match &mut sink {
                ScanSink::Csv(w) => {
                    let mut row = vec!["row".to_string()];
                    row.extend(cert_row(&cert));
                    w.write_record(&row)?;
                }
                ScanSink::Lines(o) if cli.format == Format::Json => {
                    serde_json::to_writer(&mut **o, &cert)?;
                    writeln!(o)?;
                }
                ScanSink::Lines(o) => writeln!(o, "{}", cert_text(&cert))?,
            }
        }
        if stop == end {
            break;
        }
        start = stop + 1;
    }
    match sink {
        ScanSink::Csv(mut w) => {
            // summary row: m holds the number scanned, spectral/direct_sum hold counts
            let row = [
                "summary".to_string(),
                a.p.to_string(),
                a.n.to_string(),
                a.l.to_string(),
                summary.scanned.to_string(),
                summary.spectral.to_string(),
                summary.direct.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ];
            w.write_record(row)?;
            w.flush()?;
        }
        ScanSink::Lines(o) if cli.format == Format::Json => {
            serde_json::to_writer(&mut *o, &ScanLine { summary: &summary, config: cli })?;
            writeln!(o)?;
        }
        ScanSink::Lines(o) => writeln!(
            o,
            "scanned={} spectral={} direct={}",
            summary.scanned, summary.spectral, summary.direct
        )?,
    }
    Ok(())
}

/// Builds the spectrum document, running the exact pair check and the
/// nested `Q` probe unless disabled or over budget.
pub fn spectrum_document(
    params: &Params,
    levels: u32,
    digits: FreqDigits,
    budget: u64,
    verify: bool,
    cfg: &EvalConfig,
    exec: Exec,
) -> Result<SpectrumDoc, Error> {
    cfg.validate()?;
    let d = params.digits.set()?;
    let opts = BuildOptions {
        levels,
        digits,
        budget,
    };
    let cand = build_spectrum_with(&d, params.p, &opts, exec)?;

    let (orthogonality, completeness, status) = if verify {
        match orthogonality_report(params.p, &d, &cand.lambda, cfg, exec) {
            Ok(rep) => {
                let layers = (levels.min(1)..=levels)
                    .map(|k| {
                        let o = BuildOptions { levels: k, ..opts };
                        build_spectrum_with(&d, params.p, &o, exec).map(|c| (k as u64, c.lambda))
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                let probe = probe_nested(params.p, &d, &layers, cfg, exec)?;
                let status = if rep.orthogonal_failure_count == 0 {
                    STATUS_VERIFIED
                } else {
                    "orthogonality-failed"
                };
                (Some(rep), Some(probe), status)
            }
            Err(Error::BudgetExceeded { .. }) => (None, None, "unverified-pair-budget"),
            Err(e) => return Err(e),
        }
    } else {
        (None, None, "unverified")
    };

    Ok(SpectrumDoc {
        metadata: SpectrumMetadata {
            p: cand.p,
            n: cand.n,
            l: cand.l,
            m: cand.m,
            d: cand.d,
            levels: cand.levels,
            size: cand.lambda.len(),
            digits: cand.digits,
            status: status.into(),
            scale: Some(cand.scale.clone()),
            certificate: Some(cand.certificate.clone()),
            lambda1: cand.lambda1.clone(),
            freq_set: cand.freq_set.clone(),
            d2: Some(cand.d2.clone()),
            hadamard: Some(cand.hadamard.clone()),
            gcd_certificate: Some(cand.gcd_certificate),
            orthogonality,
            completeness,
        },
        lambda: cand.lambda,
    })
}

fn cmd_spectrum(cli: &Cli, a: &SpectrumArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = a.eval.config(cli.seed);
    let doc = spectrum_document(&a.params, a.levels, a.digits, a.budget, !a.no_verify, &cfg, exec_of(cli))?;
    let write_doc = |w: &mut dyn Write| -> CliResult<()> {
        match cli.format {
            Format::Json => write_json(cli, &doc, w),
            Format::Csv => {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["lambda"])?;
                for l in &doc.lambda {
                    c.write_record([l.to_string()])?;
                }
                c.flush()?;
                Ok(())
            }
            Format::Text => {
                let md = &doc.metadata;
                writeln!(
                    w,
                    "p={} N={} L={} m={} d={} levels={} size={} status={}",
                    md.p, md.n, md.l, md.m, md.d, md.levels, md.size, md.status
                )?;
                for l in &doc.lambda {
                    writeln!(w, "{l}")?;
                }
                Ok(())
            }
        }
    };
    match &a.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_doc(&mut w)?;
            w.flush()?;
            let md = &doc.metadata;
            match cli.format {
                Format::Text => writeln!(
                    out,
                    "wrote {} frequencies to {} (status {})",
                    md.size,
                    path.display(),
                    md.status
                )?,
                _ => {
                    serde_json::to_writer(
                        &mut *out,
                        &serde_json::json!({
                            "output": path.display().to_string(),
                            "size": md.size,
                            "status": md.status,
                        }),
                    )?;
                    writeln!(out)?;
                }
            }
            Ok(())
        }
        None => write_doc(out),
    }
}

/// Reads a spectrum document; schema problems are reported with line and column.
pub fn read_spectrum_doc(path: &std::path::Path) -> CliResult<SpectrumDoc> {
    #[derive(Deserialize)]
    struct Wrapped {
        result: SpectrumDoc,
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let doc: Wrapped = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: schema mismatch: {e}", path.display())))?;
    Ok(doc.result)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let doc = read_spectrum_doc(&a.input)?;
    let md = &doc.metadata;
    let d = ProductDigitSet::new(md.n, md.m, md.l)?;
    let cfg = a.eval.config(cli.seed);
    let exec = exec_of(cli);
    let report = verification_report(md.p, &d, &doc.lambda, &cfg, exec)?;
    if let Some(path) = &a.q_csv {
        let curve = q_curve(md.p, &d, &doc.lambda, a.grid_points, &cfg, exec)?;
        let file = File::create(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(["x", "q"])?;
        for (x, q) in curve {
            w.write_record([x.to_string(), q.to_string()])?;
        }
        w.flush()?;
    }
    let result = VerifyResult {
        input: a.input.display().to_string(),
        p: md.p,
        n: md.n,
        l: md.l,
        m: md.m,
        report,
    };
    let r = &result.report;
    match cli.format {
        Format::Json => write_json(cli, &result, out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["p", "N", "L", "m", "frequencies", "pairs_checked", "failures", "q_min", "q_max"])?;
            w.write_record([
                result.p.to_string(),
                result.n.to_string(),
                result.l.to_string(),
                result.m.to_string(),
                r.frequencies.to_string(),
                r.orthogonal_pairs_checked.to_string(),
                r.orthogonal_failure_count.to_string(),
                r.q_min.map(|v| v.to_string()).unwrap_or_default(),
                r.q_max.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
            w.flush()?;
            Ok(())
        }
        Format::Text => Ok(writeln!(
            out,
            "{}: {} frequencies, {} pairs, {} failures, q in [{}, {}]",
            result.input,
            r.frequencies,
            r.orthogonal_pairs_checked,
            r.orthogonal_failure_count,
            r.q_min.unwrap_or(f64::NAN),
            r.q_max.unwrap_or(f64::NAN)
        )?),
    }
}

fn cmd_tile(cli: &Cli, a: &TileArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = TileConfig {
        max_k: a.max_k,
        nu_window: a.nu_window,
        kmax: a.kmax,
        budget: a.budget,
    };
    let v = tile_decide(a.digits.n, a.digits.l, a.digits.m, &cfg, exec_of(cli))?;
    match cli.format {
        Format::Json => write_json(cli, &v, out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(TILE_HEADER)?;
            w.write_record(tile_row(&v))?;
            w.flush()?;
            Ok(())
        }
        Format::Text => {
            let witness = v
                .collision_witness
                .as_ref()
                .map(|w| format!(" witness k={} {:?} = {:?} = {}", w.k, w.word_a, w.word_b, w.sum))
                .unwrap_or_default();
            Ok(writeln!(
                out,
                "N={} L={} m={} p={}: {} (distinct through k={}, uncovered nu={}, {}){}",
                v.n,
                v.l,
                v.m,
                v.p,
                if v.arithmetic_tile { "tile" } else { "not a tile" },
                v.distinct_sums_ok_through,
                v.nu_uncovered,
                agreement_str(v.agreement),
                witness
            )?)
        }
    }
}

const TILE_HEADER: [&str; 9] = [
    "N",
    "L",
    "m",
    "p",
    "direct_sum",
    "arithmetic_tile",
    "distinct_sums_ok_through",
    "nu_uncovered",
    "agreement",
];

fn agreement_str(a: Agreement) -> &'static str {
    match a {
        Agreement::Consistent => "consistent",
        Agreement::Contradiction => "contradiction",
        Agreement::UndecidedByBruteForce => "undecided_by_brute_force",
    }
}

fn tile_row(v: &TileVerdict) -> [String; 9] {
    [
        v.n.to_string(),
        v.l.to_string(),
        v.m.to_string(),
        v.p.to_string(),
        v.direct_sum.to_string(),
        v.arithmetic_tile.to_string(),
        v.distinct_sums_ok_through.to_string(),
        v.nu_uncovered.to_string(),
        agreement_str(v.agreement).to_string(),
    ]
}

/// The Hadamard triple `(p, D2, pℒ)` and gcd certificate, or `None`s when not spectral.
fn hadamard_result(a: &Params) -> Result<HadamardResult, Error> {
    let d = a.digits.set()?;
    let cert = decide(&d, a.p)?;
    let mut res = HadamardResult {
        p: a.p,
        n: d.n(),
        l: d.l(),
        m: d.m(),
        spectral: cert.spectral,
        d2: None,
        freq_set: None,
        hadamard: None,
        gcd_certificate: None,
    };
    if let (true, Some(dec)) = (cert.spectral, cert.decomposition.as_ref()) {
        let d2 = build_d2(dec, d.n(), d.l())?;
        let fs = build_freq_set(dec, a.p, d.n(), d.l())?;
        let fset = GenericDigitSet::new(fs.iter().copied())?;
        res.hadamard = Some(hadamard_check(a.p, &d2, &fset)?);
        res.gcd_certificate = Some(gcd_difference_certificate(&d2)?);
        res.d2 = Some(d2);
        res.freq_set = Some(fs);
    }
    Ok(res)
}

fn cmd_hadamard(cli: &Cli, a: &Params, out: &mut dyn Write) -> CliResult<()> {
    let res = hadamard_result(a)?;
    let (holds, mask, defect) = match &res.hadamard {
        Some(h) => (
            h.holds.to_string(),
            format!("{:e}", h.max_mask_at_differences),
            format!("{:e}", h.unitarity_defect),
        ),
        None => Default::default(),
    };
    match cli.format {
        Format::Json => write_json(cli, &res, out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["p", "N", "L", "m", "spectral", "holds", "max_mask", "unitarity_defect", "gcd_certificate"])?;
            w.write_record([
                res.p.to_string(),
                res.n.to_string(),
                res.l.to_string(),
                res.m.to_string(),
                res.spectral.to_string(),
                holds,
                mask,
                defect,
                res.gcd_certificate.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
            w.flush()?;
            Ok(())
        }
        Format::Text => {
            if res.spectral {
                Ok(writeln!(
                    out,
                    "p={} N={} L={} m={}: hadamard={} max_mask={} defect={} gcd={}",
                    res.p,
                    res.n,
                    res.l,
                    res.m,
                    holds,
                    mask,
                    defect,
                    res.gcd_certificate.unwrap_or(false)
                )?)
            } else {
                Ok(writeln!(out, "p={} N={} L={} m={}: not spectral, no triple", res.p, res.n, res.l, res.m)?)
            }
        }
    }
}

fn cmd_zeros(cli: &Cli, a: &ZerosArgs, out: &mut dyn Write) -> CliResult<()> {
    let d = a.params.digits.set()?;
    let location = mu_hat_zero_location(a.params.p, &d, &a.xi)?;
    let res = ZerosResult {
        p: a.params.p,
        n: d.n(),
        l: d.l(),
        m: d.m(),
        xi: a.xi.clone(),
        member: location.is_some(),
        location,
        mask_zero_set: zero_set(&d)?.to_string(),
    };
    match cli.format {
        Format::Json => write_json(cli, &res, out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["p", "N", "L", "m", "xi", "member", "level", "component"])?;
            w.write_record([
                res.p.to_string(),
                res.n.to_string(),
                res.l.to_string(),
                res.m.to_string(),
                res.xi.to_string(),
                res.member.to_string(),
                location.map(|z| z.level.to_string()).unwrap_or_default(),
                location.map(|z| z.component.to_string()).unwrap_or_default(),
            ])?;
            w.flush()?;
            Ok(())
        }
        Format::Text => Ok(writeln!(out, "xi={} member={}", res.xi, res.member)?),
    }
}

/// `m = 2^(4k+2) 3^t m'` with `t >= 2k+1` and `gcd(m', 6) = 1`.
pub fn closed_form_p144(m: u64) -> bool {
    let f = match factorize(m) {
        Ok(f) => f,
        Err(_) => return false,
    };
    let t1 = f.exponent_of(2);
    let t2 = f.exponent_of(3);
    t1 % 4 == 2 && t2 > 2 * (t1 / 4)
}

fn reference_checks(exec: Exec) -> Result<Vec<ExampleCheck>, Error> {
    let mut out = Vec::new();
    let mut push = |name: &str, expected: String, observed: String| {
        let pass = expected == observed;
        out.push(ExampleCheck {
            name: name.into(),
            expected,
            observed,
            pass,
        });
    };

    let c = decide(&ProductDigitSet::new(2, 8, 2)?, 4)?;
    push("decide p=4 N=2 L=2 m=8", "spectral d=1".into(), format!("{} d={}", spectral_word(c.spectral), c.d));

    let count = exec
        .map_range(1..5001, |m| decide(&ProductDigitSet::new(12, m, 4)?, 72).map(|c| c.spectral))
        .into_iter()
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .filter(|&s| s)
        .count();
    push("scan p=72 N=12 L=4 m=1..5000", "0 spectral".into(), format!("{count} spectral"));

    let mismatches = exec
        .map_range(1..20001, |m| {
            decide(&ProductDigitSet::new(12, m, 4)?, 144).map(|c| c.spectral != closed_form_p144(m))
        })
        .into_iter()
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .filter(|&x| x)
        .count();
    push(
        "scan p=144 N=12 L=4 m=1..20000 against closed form",
        "0 mismatches".into(),
        format!("{mismatches} mismatches"),
    );

    let s = build_spectrum_with(
        &ProductDigitSet::new(2, 8, 2)?,
        4,
        &BuildOptions {
            levels: 2,
            ..Default::default()
        },
        exec,
    )?;
    let first: Vec<String> = s.lambda.iter().take(4).map(|l| l.to_string()).collect();
    push(
        "spectrum p=4 N=2 L=2 m=8 levels=2",
        "32 values starting 0/1,1/4,1/1,5/4".into(),
        format!("{} values starting {}", s.lambda.len(), first.join(",")),
    );

    let cfg = TileConfig::default();
    let t = tile_decide(2, 2, 8, &cfg, exec)?;
    push(
        "tile N=2 L=2 m=8",
        "tile consistent".into(),
        format!("{} {}", tile_word(t.arithmetic_tile), agreement_str(t.agreement)),
    );
    let t = tile_decide(2, 2, 3, &cfg, exec)?;
    push(
        "tile N=2 L=2 m=3",
        "not-tile collision k=2".into(),
        format!(
            "{} collision k={}",
            tile_word(t.arithmetic_tile),
            t.collision_witness.map(|w| w.k.to_string()).unwrap_or_else(|| "none".into())
        ),
    );

    let z = mu_hat_zero_location(4, &ProductDigitSet::new(2, 8, 2)?, &"1/4".parse()?)?;
    push("zeros p=4 N=2 L=2 m=8 xi=1/4", "member".into(), if z.is_some() { "member" } else { "not member" }.into());
    Ok(out)
}

fn spectral_word(s: bool) -> &'static str {
    if s {
        "spectral"
    } else {
        "not-spectral"
    }
}

fn tile_word(t: bool) -> &'static str {
    if t {
        "tile"
    } else {
        "not-tile"
    }
}

fn cmd_examples(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let checks = reference_checks(exec_of(cli))?;
    match cli.format {
        Format::Json => write_json(cli, &checks, out)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["name", "expected", "observed", "pass"])?;
            for c in &checks {
                w.write_record([c.name.as_str(), &c.expected, &c.observed, &c.pass.to_string()])?;
            }
            w.flush()?;
        }
        Format::Text => {
            for c in &checks {
                writeln!(out, "[{}] {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.observed)?;
            }
        }
    }
    match checks.iter().find(|c| !c.pass) {
        Some(c) => Err(CliError::Internal(format!(
            "reference check `{}` expected {} but observed {}",
            c.name, c.expected, c.observed
        ))),
        None => Ok(()),
    }
}
