//! Seeded inputs, error metrics, parameter sweeps and their CSV form.

use crate::reduction::{
    oracle64, reduce, reduce_slice, sequential_sum, InputArray, ReductionConfig, ReductionError,
    ReductionOutcome, Variant,
};
use crate::rng::SplitMix64;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("sweep grid `{0}` is empty")]
    EmptyGrid(&'static str),
    #[error("size grid must be strictly ascending")]
    UnsortedGrid,
    #[error("problem size must be at least 1")]
    EmptyInput,
    #[error("bad distribution `{0}`: expected normal, uniform, integers:LO:HI or constant:C")]
    BadDistribution(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistKind {
    /// Standard normal, μ = 0, σ² = 1.
    Normal,
    /// Uniform on [0, 1).
    Uniform,
    /// Uniform integers in `lo..=hi`.
    Integers {
        lo: i64,
        hi: i64,
    },
    Constant(f32),
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistKind::Normal => f.write_str("normal"),
            DistKind::Uniform => f.write_str("uniform"),
            DistKind::Integers { lo, hi } => write!(f, "integers:{lo}:{hi}"),
            DistKind::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

impl FromStr for DistKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::BadDistribution(s.to_owned());
        let mut parts = s.split(':');
        let kind = match parts.next().unwrap_or_default() {
            "normal" => DistKind::Normal,
            "uniform" => DistKind::Uniform,
            "integers" => {
                let lo: i64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let hi: i64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                DistKind::Integers { lo, hi }
            }
            "constant" => {
                let c: f32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                DistKind::Constant(c)
            }
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(kind)
    }
}

/// A distribution plus the seed that pins its sample stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution {
    pub kind: DistKind,
    pub seed: u64,
}

impl Distribution {
    pub fn new(kind: DistKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// First `n` values of the stream. Shorter requests are prefixes of
    /// longer ones.
    pub fn generate(&self, n: usize) -> Result<InputArray, HarnessError> {
        if n == 0 {
            return Err(HarnessError::EmptyInput);
        }
        let mut rng = SplitMix64::new(self.seed);
        let data = match self.kind {
            DistKind::Constant(c) => vec![c; n],
            DistKind::Uniform => (0..n).map(|_| rng.next_f32()).collect(),
            DistKind::Integers { lo, hi } => {
                let span = (hi - lo) as u64 + 1;
                (0..n)
                    .map(|_| (lo + rng.below(span) as i64) as f32)
                    .collect()
            }
            DistKind::Normal => {
                // Box-Muller, both outputs of each pair used in order.
                let mut out = Vec::with_capacity(n + 1);
                while out.len() < n {
                    let u1 = 1.0 - rng.next_f64();
                    let u2 = rng.next_f64();
                    let r = (-2.0 * u1.ln()).sqrt();
                    let (s, c) = (TAU * u2).sin_cos();
                    out.push((r * c) as f32);
                    out.push((r * s) as f32);
                }
                out.truncate(n);
                out
            }
        };
        Ok(InputArray::new(data)?)
    }
}

/// Relative error against the binary64 reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorPct {
    Percent(f64),
    /// The value is ±inf or NaN, so no percentage exists.
    Overflow,
    /// The reference is zero.
    Undefined,
}

impl ErrorPct {
    pub fn percent(self) -> Option<f64> {
        match self {
            ErrorPct::Percent(p) => Some(p),
            _ => None,
        }
    }
}

/// `100·|value − reference| / |reference|`.
pub fn error_percent(value: f64, reference: f64) -> ErrorPct {
    if !value.is_finite() {
        ErrorPct::Overflow
    } else if reference == 0.0 {
        ErrorPct::Undefined
    } else {
        ErrorPct::Percent(100.0 * (value - reference).abs() / reference.abs())
    }
}

/// One reduction run inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub config: ReductionConfig,
    pub dist: Distribution,
    pub n: usize,
    pub value: f64,
    pub error: ErrorPct,
    pub overflow: bool,
    pub sim_steps: u64,
    pub mma_count: u64,
    pub atomic_count: u64,
}

impl SweepRecord {
    pub fn from_outcome(
        config: ReductionConfig,
        dist: Distribution,
        n: usize,
        outcome: &ReductionOutcome,
        reference: f64,
    ) -> Self {
        Self {
            config,
            dist,
            n,
            value: outcome.value,
            error: error_percent(outcome.value, reference),
            overflow: outcome.overflow,
            sim_steps: outcome.sim_steps,
            mma_count: outcome.mma_count,
            atomic_count: outcome.atomic_count,
        }
    }

    pub fn steps_per_element(&self) -> f64 {
        self.sim_steps as f64 / self.n as f64
    }
}

fn run_grid(
    x: &InputArray,
    dist: Distribution,
    configs: Vec<ReductionConfig>,
) -> Result<Vec<SweepRecord>, HarnessError> {
    let reference = oracle64(x);
    configs
        .into_par_iter()
        .map(|cfg| {
            let out = reduce(x, &cfg)?;
            Ok(SweepRecord::from_outcome(
                cfg,
                dist,
                x.len(),
                &out,
                reference,
            ))
        })
        .collect()
}

/// One record per `(B, R)` pair, `B` outer, in grid order.
pub fn sweep_br(
    dist: Distribution,
    n: usize,
    variant: Variant,
    block_grid: &[usize],
    chain_grid: &[usize],
) -> Result<Vec<SweepRecord>, HarnessError> {
    if block_grid.is_empty() {
        return Err(HarnessError::EmptyGrid("B"));
    }
    if chain_grid.is_empty() {
        return Err(HarnessError::EmptyGrid("R"));
    }
    let base = ReductionConfig::best_known(variant);
    let configs: Vec<_> = block_grid
        .iter()
        .flat_map(|&b| {
            chain_grid
                .iter()
                .map(move |&r| base.with_block(b).with_chain(r))
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    run_grid(&dist.generate(n)?, dist, configs)
}

/// One split-variant record per fraction `f`, in grid order.
pub fn sweep_split(
    dist: Distribution,
    n: usize,
    fraction_grid: &[f64],
) -> Result<Vec<SweepRecord>, HarnessError> {
    if fraction_grid.is_empty() {
        return Err(HarnessError::EmptyGrid("f"));
    }
    let base = ReductionConfig::best_known(Variant::Split);
    let configs: Vec<_> = fraction_grid
        .iter()
        .map(|&f| base.with_split_fraction(f))
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    run_grid(&dist.generate(n)?, dist, configs)
}

/// Error and step counts of `variant` at its tuned configuration for each
/// size in `n_grid`. Inputs are prefixes of one stream. Sizes run one after
/// another so only the largest input is ever resident.
pub fn error_curve(
    dist: Distribution,
    variant: Variant,
    n_grid: &[usize],
) -> Result<Vec<SweepRecord>, HarnessError> {
    if n_grid.is_empty() {
        return Err(HarnessError::EmptyGrid("n"));
    }
    if n_grid[0] == 0 {
        return Err(HarnessError::EmptyInput);
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::UnsortedGrid);
    }
    let largest = dist.generate(*n_grid.last().expect("non-empty"))?;
    let cfg = ReductionConfig::best_known(variant);
    n_grid
        .iter()
        .map(|&n| {
            let x = &largest.as_slice()[..n];
            let out = reduce_slice(x, &cfg)?;
            let reference = sequential_sum::<f64>(x);
            Ok(SweepRecord::from_outcome(cfg, dist, n, &out, reference))
        })
        .collect()
}

/// [`error_curve`] over `repeats` consecutive seeds starting at `dist.seed`.
pub fn error_curve_repeated(
    dist: Distribution,
    variant: Variant,
    n_grid: &[usize],
    repeats: u64,
) -> Result<Vec<SweepRecord>, HarnessError> {
    let mut out = Vec::new();
    for k in 0..repeats.max(1) {
        let d = Distribution::new(dist.kind, dist.seed.wrapping_add(k));
        out.extend(error_curve(d, variant, n_grid)?);
    }
    Ok(out)
}

/// Record with the fewest simulated steps per element; ties go to the
/// earliest in grid order.
pub fn best_config(records: &[SweepRecord]) -> Option<&SweepRecord> {
    records.iter().reduce(|best, r| {
        if r.steps_per_element() < best.steps_per_element() {
            r
        } else {
            best
        }
    })
}

pub const CSV_HEADER: &str =
    "variant,n,m,R,B,f,seed,dist,value,error_pct,overflow,sim_steps,mma_count,atomic_count";

impl SweepRecord {
    /// The record as one CSV line (no trailing newline). `error_pct` is left
    /// empty when no percentage exists.
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        let value = if c.variant == Variant::Oracle64 {
            format!("{}", self.value)
        } else {
            format!("{}", self.value as f32)
        };
        let error = self
            .error
            .percent()
            .map(|p| p.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.variant,
            self.n,
            c.m,
            c.chain,
            c.block,
            c.split_fraction,
            self.dist.seed,
            self.dist.kind,
            value,
            error,
            self.overflow,
            self.sim_steps,
            self.mma_count,
            self.atomic_count
        )
    }
}

pub fn write_csv<W: Write>(records: &[SweepRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_parsing() {
        assert_eq!("normal".parse::<DistKind>().unwrap(), DistKind::Normal);
        assert_eq!(
            "integers:0:9".parse::<DistKind>().unwrap(),
            DistKind::Integers { lo: 0, hi: 9 }
        );
        assert_eq!(
            "constant:1".parse::<DistKind>().unwrap(),
            DistKind::Constant(1.0)
        );
        for bad in [
            "",
            "gauss",
            "integers:3",
            "integers:9:0",
            "constant:x",
            "uniform:1",
        ] {
            assert!(bad.parse::<DistKind>().is_err(), "{bad}");
        }
        for k in [
            DistKind::Normal,
            DistKind::Uniform,
            DistKind::Integers { lo: -2, hi: 5 },
            DistKind::Constant(0.5),
        ] {
            assert_eq!(k.to_string().parse::<DistKind>().unwrap(), k);
        }
    }

    #[test]
    fn constant_stream() {
        let x = Distribution::new(DistKind::Constant(1.0), 3)
            .generate(5)
            .unwrap();
        assert_eq!(x.as_slice(), &[1.0; 5]);
    }

    #[test]
    fn streams_are_prefix_stable() {
        for kind in [
            DistKind::Normal,
            DistKind::Uniform,
            DistKind::Integers { lo: 0, hi: 9 },
        ] {
            let d = Distribution::new(kind, 11);
            let short = d.generate(101).unwrap();
            let long = d.generate(1000).unwrap();
            assert_eq!(short.as_slice(), &long.as_slice()[..101]);
        }
    }

    #[test]
    fn integer_range() {
        let x = Distribution::new(DistKind::Integers { lo: 0, hi: 9 }, 1)
            .generate(10_000)
            .unwrap();
        assert!(x
            .as_slice()
            .iter()
            .all(|&v| (0.0..=9.0).contains(&v) && v.fract() == 0.0));
        assert!(x.as_slice().contains(&0.0) && x.as_slice().contains(&9.0));
    }

    #[test]
    fn error_metric() {
        assert_eq!(error_percent(10.0, 10.0), ErrorPct::Percent(0.0));
        let e = error_percent(10.1, 10.0).percent().unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        assert_eq!(error_percent(f64::INFINITY, 5.0), ErrorPct::Overflow);
        assert_eq!(error_percent(f64::NAN, 5.0), ErrorPct::Overflow);
        assert_eq!(error_percent(1.0, 0.0), ErrorPct::Undefined);
    }

    #[test]
    fn tiny_br_sweep() {
        let d = Distribution::new(DistKind::Constant(1.0), 0);
        let recs = sweep_br(d, 16, Variant::SinglePass, &[32], &[1]).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].value, 16.0);
        assert_eq!(recs[0].error, ErrorPct::Percent(0.0));
        assert!(matches!(
            sweep_br(d, 16, Variant::SinglePass, &[], &[1]),
            Err(HarnessError::EmptyGrid("B"))
        ));
        assert!(sweep_br(d, 16, Variant::SinglePass, &[33], &[1]).is_err());
    }

    #[test]
    fn sweep_order_is_b_major() {
        let d = Distribution::new(DistKind::Uniform, 2);
        let recs = sweep_br(d, 5000, Variant::Recurrence, &[32, 128], &[1, 2, 3]).unwrap();
        let grid: Vec<_> = recs
            .iter()
            .map(|r| (r.config.block, r.config.chain))
            .collect();
        assert_eq!(
            grid,
            vec![(32, 1), (32, 2), (32, 3), (128, 1), (128, 2), (128, 3)]
        );
    }

    #[test]
    fn error_curve_checks_grid() {
        let d = Distribution::new(DistKind::Uniform, 0);
        assert!(matches!(
            error_curve(d, Variant::SinglePass, &[100, 10]),
            Err(HarnessError::UnsortedGrid)
        ));
        let recs = error_curve(d, Variant::SinglePass, &[10, 100, 1000]).unwrap();
        assert_eq!(
            recs.iter().map(|r| r.n).collect::<Vec<_>>(),
            vec![10, 100, 1000]
        );
        assert_eq!(recs[0].config.block, 128);
        assert_eq!(recs[0].config.chain, 4);
        let reps = error_curve_repeated(d, Variant::SinglePass, &[10, 100], 3).unwrap();
        assert_eq!(reps.len(), 6);
        assert_eq!(reps[5].dist.seed, 2);
    }

    #[test]
    fn csv_shape() {
        let d = Distribution::new(DistKind::Constant(1.0), 0);
        let recs = sweep_br(d, 16, Variant::SinglePass, &[32], &[1]).unwrap();
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "single_pass,16,4,1,32,0.5,0,constant:1,16,0,false,5,2,1"
        );
    }

    #[test]
    fn best_config_prefers_first_tie() {
        let d = Distribution::new(DistKind::Constant(1.0), 0);
        let recs = sweep_br(d, 64, Variant::SinglePass, &[32, 64], &[1, 2]).unwrap();
        let best = best_config(&recs).unwrap();
        let min = recs.iter().map(|r| r.sim_steps).min().unwrap();
        assert_eq!(best.sim_steps, min);
        let first = recs.iter().position(|r| r.sim_steps == min).unwrap();
        assert!(std::ptr::eq(best, &recs[first]));
        assert!(best_config(&[]).is_none());
    }
}
