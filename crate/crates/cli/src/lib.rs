//! `tcreduce` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error.

use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use tcreduce_core::cost;
use tcreduce_core::harness::{self, HarnessError, SweepRecord};
use tcreduce_core::reduction::{self, oracle64, ReductionError};
use tcreduce_core::{AtomicOrder, DistKind, Distribution, InputArray, ReductionConfig, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

pub const SEED_ENV: &str = "TCREDUCE_SEED";

#[derive(Debug, Parser)]
#[command(name = "tcreduce", version, about = "Tensor-core reduction emulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one reduction and compare it with the binary64 reference.
    Reduce(ReduceArgs),
    /// Evaluate the closed-form cost model.
    Cost(CostArgs),
    /// Sweep B×R (recurrence, single_pass) or f (split), emitting CSV.
    Sweep(SweepArgs),
    /// Error and step counts over a grid of input sizes, emitting CSV.
    ErrorCurve(ErrorCurveArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// normal | uniform | integers:LO:HI | constant:C
    #[arg(long, default_value = "normal", value_parser = parse_dist)]
    pub dist: DistKind,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long, value_parser = parse_size, default_value = "1048576")]
    pub n: usize,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Chain length; defaults to the variant's tuned value.
    #[arg(long = "R")]
    pub chain: Option<usize>,
    /// Block size in threads; defaults to the variant's tuned value.
    #[arg(long = "B")]
    pub block: Option<usize>,
    /// Tensor-core share for the split variant.
    #[arg(long = "f")]
    pub fraction: Option<f64>,
    /// Apply block atomics in a seeded random order instead of ascending.
    #[arg(long)]
    pub atomic_seed: Option<u64>,
    /// File of newline-separated decimals; overrides --dist and --n.
    #[arg(long = "input")]
    pub input_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long, value_parser = parse_size)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long = "R", default_value_t = 1)]
    pub chain: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_variant, default_value = "single_pass")]
    pub variant: Variant,
    #[arg(long, value_parser = parse_size, default_value = "1048576")]
    pub n: usize,
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma list or START:END[:STEP].
    #[arg(long = "B-grid", default_value = "32,64,128,256,512,1024", value_parser = parse_usize_grid)]
    pub block_grid: UsizeGrid,
    #[arg(long = "R-grid", default_value = "1:8", value_parser = parse_usize_grid)]
    pub chain_grid: UsizeGrid,
    #[arg(long = "f-grid", default_value = "0:1:0.1", value_parser = parse_f64_grid)]
    pub fraction_grid: F64Grid,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErrorCurveArgs {
    /// One or more variants, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant, default_value = "single_pass")]
    pub variant: Vec<Variant>,
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma list of sizes or LO:HI:xFACTOR (geometric).
    #[arg(long = "n-grid", default_value = "2^10:2^27:x2", value_parser = parse_size_grid)]
    pub n_grid: UsizeGrid,
    /// Consecutive seeds to run, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsizeGrid(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct F64Grid(pub Vec<f64>);

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
}

impl From<ReductionError> for CliError {
    fn from(e: ReductionError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io(e) => CliError::Input(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: ReductionError| e.to_string())
}

fn parse_dist(s: &str) -> Result<DistKind, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

/// Accepts plain integers, `2^k` and integral scientific literals like `1e7`.
pub fn parse_size(s: &str) -> Result<usize, String> {
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        let base: usize = base.parse().map_err(|_| format!("bad size `{s}`"))?;
        let exp: u32 = exp.parse().map_err(|_| format!("bad size `{s}`"))?;
        return base
            .checked_pow(exp)
            .ok_or_else(|| format!("size `{s}` overflows"));
    }
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) => Ok(v as usize),
        _ => Err(format!("bad size `{s}`")),
    }
}

fn parse_usize_grid(s: &str) -> Result<UsizeGrid, String> {
    if s.contains(':') {
        let parts: Vec<_> = s.split(':').collect();
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (parse_size(a)?, parse_size(b)?, 1),
            [a, b, c] => (parse_size(a)?, parse_size(b)?, parse_size(c)?),
            _ => return Err(format!("bad grid `{s}`")),
        };
        if step == 0 || start > end {
            return Err(format!("bad grid `{s}`"));
        }
        return Ok(UsizeGrid((start..=end).step_by(step).collect()));
    }
    let v = s
        .split(',')
        .map(parse_size)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(UsizeGrid(v))
}

fn parse_size_grid(s: &str) -> Result<UsizeGrid, String> {
    let parts: Vec<_> = s.split(':').collect();
    if let [lo, hi, factor] = parts.as_slice() {
        if let Some(factor) = factor.strip_prefix('x') {
            let (lo, hi, factor) = (parse_size(lo)?, parse_size(hi)?, parse_size(factor)?);
            if lo == 0 || factor < 2 || lo > hi {
                return Err(format!("bad size grid `{s}`"));
            }
            let mut v = vec![lo];
            while let Some(next) = v.last().and_then(|l| l.checked_mul(factor)) {
                if next > hi {
                    break;
                }
                v.push(next);
            }
            return Ok(UsizeGrid(v));
        }
    }
    parse_usize_grid(s)
}

fn parse_f64_grid(s: &str) -> Result<F64Grid, String> {
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad grid `{s}`"))
    };
    if s.contains(':') {
        let parts: Vec<_> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("bad grid `{s}`: expected START:END:STEP"));
        };
        let (start, end, step) = (num(a)?, num(b)?, num(c)?);
        if step <= 0.0 || start > end {
            return Err(format!("bad grid `{s}`"));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        // Snap to 1e-9 so that 0.1·3 prints as 0.3.
        let v = (0..count)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect();
        return Ok(F64Grid(v));
    }
    let v = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    Ok(F64Grid(v))
}

/// Reads one decimal per line; blank lines are skipped.
pub fn read_input_file(path: &Path) -> Result<InputArray, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut data = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f32 = line.parse().map_err(|_| {
            CliError::Input(format!(
                "{}:{}: not a number: `{line}`",
                path.display(),
                lineno + 1
            ))
        })?;
        data.push(v);
    }
    InputArray::new(data).map_err(|_| CliError::Input(format!("{}: no values", path.display())))
}

fn cmd_reduce(args: &ReduceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = ReductionConfig::best_known(args.variant).with_m(args.m);
    if let Some(r) = args.chain {
        cfg = cfg.with_chain(r);
    }
    if let Some(b) = args.block {
        cfg = cfg.with_block(b);
    }
    if let Some(f) = args.fraction {
        cfg = cfg.with_split_fraction(f);
    }
    if let Some(s) = args.atomic_seed {
        cfg = cfg.with_atomic_order(AtomicOrder::Permuted(s));
    }
    cfg.validate()?;

    let (x, source) = match &args.input_file {
        Some(path) => (read_input_file(path)?, path.display().to_string()),
        None => {
            let dist = Distribution::new(args.input.dist, args.input.seed);
            (
                dist.generate(args.n)?,
                format!("{} seed={}", dist.kind, dist.seed),
            )
        }
    };
    let res = reduction::reduce(&x, &cfg)?;
    let reference = oracle64(&x);
    let error = match harness::error_percent(res.value, reference) {
        harness::ErrorPct::Percent(p) => p.to_string(),
        harness::ErrorPct::Overflow => "overflow".into(),
        harness::ErrorPct::Undefined => "undefined".into(),
    };
    let value = if cfg.variant == Variant::Oracle64 {
        res.value.to_string()
    } else {
        res.value_f32().to_string()
    };

    writeln!(out, "variant        {}", cfg.variant)?;
    writeln!(out, "input          {source}")?;
    writeln!(out, "n              {}", x.len())?;
    writeln!(out, "m              {}", cfg.m)?;
    writeln!(out, "R              {}", cfg.chain)?;
    writeln!(out, "B              {}", cfg.block)?;
    if cfg.variant == Variant::Split {
        writeln!(out, "f              {}", cfg.split_fraction)?;
    }
    writeln!(out, "value          {value}")?;
    writeln!(out, "oracle64       {reference}")?;
    writeln!(out, "error_pct      {error}")?;
    writeln!(out, "overflow       {}", res.overflow)?;
    writeln!(out, "underflow      {}", res.underflow)?;
    writeln!(out, "level_count    {}", res.level_count)?;
    writeln!(out, "sim_steps      {}", res.sim_steps)?;
    writeln!(out, "mma_count      {}", res.mma_count)?;
    writeln!(out, "atomic_count   {}", res.atomic_count)?;
    writeln!(out, "shuffle_count  {}", res.shuffle_count)?;
    Ok(())
}

fn cmd_cost(args: &CostArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (n, m, r) = (args.n as u64, args.m as u64, args.chain as u64);
    let classic = cost::steps_classic::<f64>(n).map_err(|e| CliError::Usage(e.to_string()))?;
    let speedup = cost::speedup::<f64>(m).map_err(|e| CliError::Usage(e.to_string()))?;
    if r < 1 {
        return Err(CliError::Usage(cost::CostError::InvalidChain.to_string()));
    }
    let show = |v: Result<f64, cost::CostError>| match v {
        Ok(v) => v.to_string(),
        Err(e) => format!("n/a ({e})"),
    };
    writeln!(out, "n                 {n}")?;
    writeln!(out, "m                 {m}")?;
    writeln!(out, "R                 {r}")?;
    writeln!(out, "steps_classic     {classic}")?;
    writeln!(out, "steps_tc          {}", show(cost::steps_tc(n, m)))?;
    writeln!(
        out,
        "steps_chained     {}",
        show(cost::steps_chained(n, m, r))
    )?;
    writeln!(out, "speedup           {speedup}")?;
    if let Ok(exact) = cost::speedup_exact(m) {
        writeln!(out, "speedup_exact     {exact}")?;
    }
    writeln!(out, "brent_processors  {}", show(cost::brent_processors(n)))?;
    writeln!(out, "brent_step_bound  {}", show(cost::brent_step_bound(n)))?;
    Ok(())
}

fn emit_csv(
    records: &[SweepRecord],
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = fs::File::create(p)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            harness::write_csv(records, io::BufWriter::new(file))?;
        }
        None => harness::write_csv(records, out)?,
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let dist = Distribution::new(args.input.dist, args.input.seed);
    let records = match args.variant {
        Variant::Recurrence | Variant::SinglePass => harness::sweep_br(
            dist,
            args.n,
            args.variant,
            &args.block_grid.0,
            &args.chain_grid.0,
        )?,
        Variant::Split => harness::sweep_split(dist, args.n, &args.fraction_grid.0)?,
        other => {
            return Err(CliError::Usage(format!(
                "sweep needs recurrence, single_pass or split, not {other}"
            )))
        }
    };
    emit_csv(&records, args.out.as_deref(), out)?;
    if let Some(best) = harness::best_config(&records) {
        writeln!(
            err,
            "fewest sim_steps per element: B={} R={} f={} ({} steps, {:.6e} per element)",
            best.config.block,
            best.config.chain,
            best.config.split_fraction,
            best.sim_steps,
            best.steps_per_element()
        )?;
    }
    Ok(())
}

fn cmd_error_curve(args: &ErrorCurveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let dist = Distribution::new(args.input.dist, args.input.seed);
    let mut records = Vec::new();
    for &variant in &args.variant {
        records.extend(harness::error_curve_repeated(
            dist,
            variant,
            &args.n_grid.0,
            args.repeats,
        )?);
    }
    emit_csv(&records, args.out.as_deref(), out)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Reduce(a) => cmd_reduce(a, out),
        Command::Cost(a) => cmd_cost(a, out),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::ErrorCurve(a) => cmd_error_curve(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}
