//! Argument parsing and subcommand dispatch.
//!
//! Exit codes: 0 when the tests agree on accepting H0, 3 when they agree on
//! rejecting it, 4 when they disagree (or, for `disturb`, when more data is
//! recommended), and 2 for malformed input or unwritable output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use paired_equiv_core::evaluation::{PowerGrid, SizeGrid};
use paired_equiv_core::{
    decision_map, disturb, margin_test, mcnemar_test, region_boundary, DisturbanceReport, Method,
    PairedCounts, Recommendation, TestResult,
};
use serde_json::{json, Value};

use crate::io::{
    boundary_json, boundary_svg, disturbance_json, read_counts_csv, surface_json, surface_svg,
    test_result_json, write_boundary_csv, write_surface_csv, Meta,
};
use crate::sweep::{pool, power_sweep, size_sweep, MonteCarlo, Sweep};

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REJECT: i32 = 3;
pub const EXIT_DISAGREE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "paired-equiv",
    version,
    about = "Equivalence tests for paired binary data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the McNemar and margin tests on observed counts.
    Test(TestArgs),
    /// Re-run both tests under unit sample disturbances in favour of H0.
    Disturb(TestArgs),
    /// Boundaries of the acceptance regions over the discordant sample space.
    Region(RegionArgs),
    /// Exact size over a (rho, pi) grid of the null space.
    Size(SizeArgs),
    /// Exact power over a (p10, p01) grid.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    Mcnemar,
    Margin,
    Both,
}

impl MethodChoice {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Mcnemar => vec![Method::McNemar],
            MethodChoice::Margin => vec![Method::Margin],
            MethodChoice::Both => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let alpha: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err("alpha must lie strictly between 0 and 1".into())
    }
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub x10: Option<u32>,
    #[arg(long)]
    pub x01: Option<u32>,
    #[arg(long)]
    pub x00: Option<u32>,
    #[arg(long)]
    pub x11: Option<u32>,
    /// CSV file of tables with columns n,x10,x01 and optionally x00,x11.
    #[arg(long, conflicts_with_all = ["n", "x10", "x01", "x00", "x11"])]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the generation time from JSON metadata.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub counts: CountArgs,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = MethodChoice::Both)]
    pub method: MethodChoice,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = MethodChoice::Both)]
    pub method: MethodChoice,
    /// Monte Carlo trials per cell; 0 disables the cross-check.
    #[arg(long, default_value_t = 0)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "PAIRED_EQUIV_THREADS")]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SizeArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, default_value_t = -0.99, allow_hyphen_values = true)]
    pub rho_min: f64,
    #[arg(long, default_value_t = 0.99, allow_hyphen_values = true)]
    pub rho_max: f64,
    #[arg(long, default_value_t = 100)]
    pub rho_steps: usize,
    #[arg(long, default_value_t = 99)]
    pub pi_steps: usize,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, default_value_t = 0.005)]
    pub p10_min: f64,
    #[arg(long, default_value_t = 0.745)]
    pub p10_max: f64,
    #[arg(long, default_value_t = 0.005)]
    pub p01_min: f64,
    #[arg(long, default_value_t = 0.745)]
    pub p01_max: f64,
    #[arg(long, default_value_t = 99)]
    pub grid_steps: usize,
}

/// Runs a parsed command, writing reports to `stdout`. Returns the exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    match cli.command {
        Command::Test(args) => cmd_test(&args, stdout),
        Command::Disturb(args) => cmd_disturb(&args, stdout),
        Command::Region(args) => cmd_region(&args, stdout),
        Command::Size(args) => cmd_size(&args, stdout),
        Command::Power(args) => cmd_power(&args, stdout),
    }
}

fn load_counts(args: &CountArgs) -> anyhow::Result<Vec<PairedCounts>> {
    if let Some(path) = &args.input {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let rows =
            read_counts_csv(file).with_context(|| format!("cannot parse {}", path.display()))?;
        if rows.is_empty() {
            bail!("{} contains no tables", path.display());
        }
        return rows
            .into_iter()
            .map(|r| build_counts(r.n, Some(r.x10), Some(r.x01), r.x00, r.x11))
            .collect();
    }
    Ok(vec![build_counts(
        args.n, args.x10, args.x01, args.x00, args.x11,
    )?])
}

fn build_counts(
    n: Option<u32>,
    x10: Option<u32>,
    x01: Option<u32>,
    x00: Option<u32>,
    x11: Option<u32>,
) -> anyhow::Result<PairedCounts> {
    let (Some(x10), Some(x01)) = (x10, x01) else {
        bail!("both --x10 and --x01 are required");
    };
    let counts = match (x00, x11) {
        (Some(x00), Some(x11)) => {
            let c = PairedCounts::from_table(x00, x01, x10, x11)?;
            if let Some(n) = n {
                if n != c.n {
                    bail!("table cells sum to {} but n = {n}", c.n);
                }
            }
            c
        }
        (None, None) => {
            let Some(n) = n else {
                bail!("--n is required unless all four cells are given");
            };
            PairedCounts::new(n, x10, x01)?
        }
        _ => bail!("--x00 and --x11 must be given together"),
    };
    if counts.n == 0 {
        bail!("sample size must be positive");
    }
    Ok(counts)
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn stamp(meta: Meta, output: &OutputArgs) -> Meta {
    if output.no_timestamp {
        meta
    } else {
        meta.with("generated_at", json!(timestamp()))
    }
}

/// `out.json` -> `out-margin.json` when several documents share one path.
fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    path.with_file_name(name)
}

fn emit(
    output: &OutputArgs,
    suffix: Option<&str>,
    bytes: &[u8],
    stdout: &mut dyn Write,
) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => {
            let path = suffix.map_or_else(|| path.clone(), |s| suffixed(path, s));
            let mut w = BufWriter::new(
                File::create(&path).with_context(|| format!("cannot write {}", path.display()))?,
            );
            w.write_all(bytes)?;
            w.flush()?;
        }
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn json_bytes(doc: &Value) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn run_both(c: &PairedCounts, alpha: f64) -> anyhow::Result<(TestResult, TestResult)> {
    Ok((mcnemar_test(c, alpha)?, margin_test(c, alpha)?))
}

fn consensus_code(a: &TestResult, b: &TestResult) -> i32 {
    match (a.decision.is_reject(), b.decision.is_reject()) {
        (false, false) => EXIT_ACCEPT,
        (true, true) => EXIT_REJECT,
        _ => EXIT_DISAGREE,
    }
}

fn fmt_result_row(s: &mut String, label: &str, c: &PairedCounts, r: &TestResult) {
    let statistic = r
        .statistic
        .map_or_else(|| "-".to_string(), |m| format!("{m:.4}"));
    let bounds = r
        .bounds
        .map_or_else(String::new, |(l, u)| format!("[{l}, {u}]"));
    let _ = writeln!(
        s,
        "{label:<14} {:<8} {:>5} {:>5} {:>5} {:>10} {:>8} {:>8}  {bounds}",
        r.method.to_string(),
        c.n,
        c.x10,
        c.x01,
        statistic,
        format!("{:.4}", r.p_value),
        r.decision.to_string()
    );
}

fn table_header() -> String {
    format!(
        "{:<14} {:<8} {:>5} {:>5} {:>5} {:>10} {:>8} {:>8}  {}\n",
        "", "method", "n", "n10", "n01", "statistic", "p-value", "decision", "bounds"
    )
}

fn cmd_test(args: &TestArgs, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    if args.output.format == Some(Format::Svg) {
        bail!("svg output is only available for region, size and power");
    }
    let tables = load_counts(&args.counts)?;
    let mut code = EXIT_ACCEPT;
    let mut text = table_header();
    let mut docs = Vec::new();
    let mut csv_rows = csv::Writer::from_writer(Vec::new());
    csv_rows.write_record([
        "method",
        "n",
        "x10",
        "x01",
        "statistic",
        "p_value",
        "decision",
        "lower",
        "upper",
        "p_hat",
    ])?;
    for c in &tables {
        let (mcnemar, margin) = run_both(c, args.alpha)?;
        fmt_result_row(&mut text, "", c, &mcnemar);
        fmt_result_row(&mut text, "", c, &margin);
        code = code.max(consensus_code(&mcnemar, &margin));
        docs.push(json!([
            test_result_json(c, &mcnemar),
            test_result_json(c, &margin)
        ]));
        for r in [&mcnemar, &margin] {
            let (lower, upper) = r.bounds.map_or((String::new(), String::new()), |(l, u)| {
                (l.to_string(), u.to_string())
            });
            csv_rows.write_record([
                r.method.name().to_string(),
                c.n.to_string(),
                c.x10.to_string(),
                c.x01.to_string(),
                r.statistic.map(crate::io::format_value).unwrap_or_default(),
                crate::io::format_value(r.p_value),
                if r.decision.is_reject() {
                    "reject_H0"
                } else {
                    "accept_H0"
                }
                .to_string(),
                lower,
                upper,
                crate::io::format_value(r.p_hat),
            ])?;
        }
    }
    match args.output.format {
        None => stdout.write_all(text.as_bytes())?,
        Some(format) => {
            let bytes = if format == Format::Json {
                let meta = stamp(
                    Meta::new("test", tables[0].n, args.alpha, None),
                    &args.output,
                );
                json_bytes(&json!({ "meta": meta.into_value(), "results": docs }))?
            } else {
                csv_rows.into_inner()?
            };
            if args.output.out.is_some() {
                stdout.write_all(text.as_bytes())?;
            }
            emit(&args.output, None, &bytes, stdout)?;
        }
    }
    Ok(code)
}

pub fn disturbance_table(report: &DisturbanceReport) -> String {
    let mut s = table_header();
    for o in report.outcomes() {
        fmt_result_row(&mut s, o.variant.label(), &o.counts, &o.mcnemar);
        fmt_result_row(&mut s, "", &o.counts, &o.margin);
    }
    let _ = writeln!(s, "recommendation: {}", report.recommendation);
    s
}

fn cmd_disturb(args: &TestArgs, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    if args.output.format == Some(Format::Svg) {
        bail!("svg output is only available for region, size and power");
    }
    let tables = load_counts(&args.counts)?;
    let mut code = EXIT_ACCEPT;
    let mut text = String::new();
    let mut docs = Vec::new();
    for c in &tables {
        let report = disturb(c, args.alpha)?;
        text.push_str(&disturbance_table(&report));
        code = code.max(match report.recommendation {
            Recommendation::AcceptH0 => EXIT_ACCEPT,
            Recommendation::RejectH0 => EXIT_REJECT,
            Recommendation::IncreaseSample => EXIT_DISAGREE,
        });
        docs.push(disturbance_json(&report));
    }
    match args.output.format {
        Some(Format::Json) => {
            let meta = stamp(
                Meta::new("disturb", tables[0].n, args.alpha, None),
                &args.output,
            );
            let bytes = json_bytes(&json!({ "meta": meta.into_value(), "results": docs }))?;
            if args.output.out.is_some() {
                stdout.write_all(text.as_bytes())?;
            }
            emit(&args.output, None, &bytes, stdout)?;
        }
        Some(Format::Csv) => bail!("disturb supports text or json output"),
        _ => stdout.write_all(text.as_bytes())?,
    }
    Ok(code)
}

fn cmd_region(args: &RegionArgs, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    if args.n == 0 {
        bail!("--n must be positive");
    }
    let boundaries: Vec<(Method, Vec<(u32, u32)>)> = args
        .method
        .methods()
        .into_iter()
        .map(|m| Ok((m, region_boundary(&decision_map(args.n, args.alpha, m)?))))
        .collect::<anyhow::Result<_>>()?;
    let bytes = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_boundary_csv(&mut buf, &boundaries)?;
            buf
        }
        Format::Json => {
            let meta = stamp(Meta::new("region", args.n, args.alpha, None), &args.output).with(
                "methods",
                json!(boundaries.iter().map(|(m, _)| m.name()).collect::<Vec<_>>()),
            );
            json_bytes(&boundary_json(&boundaries, meta))?
        }
        Format::Svg => boundary_svg(args.n, &boundaries).into_bytes(),
    };
    emit(&args.output, None, &bytes, stdout)?;
    Ok(EXIT_ACCEPT)
}

fn thread_count(args: &SweepArgs) -> usize {
    args.threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn emit_sweeps(
    args: &SweepArgs,
    sweeps: &[(Method, Sweep)],
    grid_meta: Value,
    stdout: &mut dyn Write,
) -> anyhow::Result<()> {
    let several = sweeps.len() > 1;
    for (method, sweep) in sweeps {
        let mc = sweep.monte_carlo.as_deref();
        let bytes = match args.output.format.unwrap_or(Format::Csv) {
            Format::Csv => {
                let mut buf = Vec::new();
                if several && args.output.out.is_none() {
                    writeln!(buf, "# method: {}", method.name())?;
                }
                write_surface_csv(&mut buf, &sweep.surface, mc)?;
                buf
            }
            Format::Json => {
                let mut meta =
                    Meta::new(sweep.surface.kind.name(), args.n, args.alpha, Some(*method))
                        .with("grid", grid_meta.clone());
                if args.trials > 0 {
                    meta = meta
                        .with("trials", json!(args.trials))
                        .with("seed", json!(args.seed));
                }
                json_bytes(&surface_json(&sweep.surface, stamp(meta, &args.output), mc))?
            }
            Format::Svg => surface_svg(&sweep.surface, args.alpha).into_bytes(),
        };
        emit(&args.output, several.then(|| method.name()), &bytes, stdout)?;
    }
    Ok(())
}

fn monte_carlo(args: &SweepArgs) -> Option<MonteCarlo> {
    (args.trials > 0).then_some(MonteCarlo {
        trials: args.trials,
        seed: args.seed,
    })
}

fn cmd_size(args: &SizeArgs, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    let s = &args.sweep;
    if s.n == 0 {
        bail!("--n must be positive");
    }
    let grid = SizeGrid {
        rho_min: args.rho_min,
        rho_max: args.rho_max,
        rho_steps: args.rho_steps,
        pi_steps: args.pi_steps,
    };
    grid.validate()?;
    let pool = pool(thread_count(s))?;
    let sweeps = s
        .method
        .methods()
        .into_iter()
        .map(|m| {
            let map = decision_map(s.n, s.alpha, m)?;
            Ok((m, size_sweep(&pool, &map, &grid, monte_carlo(s))?))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let grid_meta = json!({
        "rho_min": grid.rho_min,
        "rho_max": grid.rho_max,
        "rho_steps": grid.rho_steps,
        "pi_steps": grid.pi_steps,
    });
    emit_sweeps(s, &sweeps, grid_meta, stdout)?;
    Ok(EXIT_ACCEPT)
}

fn cmd_power(args: &PowerArgs, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    let s = &args.sweep;
    if s.n == 0 {
        bail!("--n must be positive");
    }
    let grid = PowerGrid {
        p10_min: args.p10_min,
        p10_max: args.p10_max,
        p01_min: args.p01_min,
        p01_max: args.p01_max,
        steps: args.grid_steps,
    };
    grid.validate()?;
    let pool = pool(thread_count(s))?;
    let sweeps = s
        .method
        .methods()
        .into_iter()
        .map(|m| {
            let map = decision_map(s.n, s.alpha, m)?;
            Ok((m, power_sweep(&pool, &map, &grid, monte_carlo(s))?))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let grid_meta = json!({
        "p10_min": grid.p10_min,
        "p10_max": grid.p10_max,
        "p01_min": grid.p01_min,
        "p01_max": grid.p01_max,
        "steps": grid.steps,
    });
    emit_sweeps(s, &sweeps, grid_meta, stdout)?;
    Ok(EXIT_ACCEPT)
}

/// Parses `args`, runs the command and maps failures to exit code 2.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_ACCEPT
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

pub fn main() -> i32 {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = main_with_args(std::env::args_os(), &mut out, &mut io::stderr());
    let _ = out.flush();
    code
}
