//! Reduction variants as deterministic simulations of the grid/block/warp
//! execution model.
//!
//! * `oracle64`: sequential binary64 sum, the error reference.
//! * `shuffle32`: binary32 pairwise tree, the classic warp-shuffle baseline.
//! * `half_tree`: the same tree with every partial stored in binary16.
//! * `recurrence`: repeated kernel passes, each shrinking `n` by `R·m²`,
//!   with inter-level partials stored in binary16.
//! * `single_pass`: chained MMAs per warp, a binary32 tree over the warps of
//!   each block, then serialized atomic adds of the block results.
//! * `split`: a fraction `f` of the input goes through the single-pass
//!   machinery with `R = 1`, the rest through `shuffle32`.
//!
//! Blocks and warps run as a nested loop; "atomics" are applied in
//! [`AtomicOrder`], so every run is bit-reproducible.

use crate::cost::UnitCosts;
use crate::fp16::HalfMonitor;
use crate::mma::{self, AccumFragment, FragmentError, HalfFragment, MmaStats};
use crate::rng::SplitMix64;
use num_traits::Zero;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;
use thiserror::Error;

pub const WARP_SIZE: usize = 32;
pub const MAX_BLOCK_SIZE: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("input array is empty")]
    EmptyInput,
    #[error("block size {0} must be a multiple of 32 in 32..=1024")]
    InvalidBlock(usize),
    #[error("chain length must be at least 1")]
    InvalidChain,
    #[error("split fraction {0} must lie in [0, 1]")]
    InvalidFraction(f64),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error(transparent)]
    Fragment(#[from] FragmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Oracle64,
    Shuffle32,
    HalfTree,
    Recurrence,
    SinglePass,
    Split,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Oracle64,
        Variant::Shuffle32,
        Variant::HalfTree,
        Variant::Recurrence,
        Variant::SinglePass,
        Variant::Split,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Oracle64 => "oracle64",
            Variant::Shuffle32 => "shuffle32",
            Variant::HalfTree => "half_tree",
            Variant::Recurrence => "recurrence",
            Variant::SinglePass => "single_pass",
            Variant::Split => "split",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ReductionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ReductionError::UnknownVariant(s.to_owned()))
    }
}

/// Order in which block results hit the single global accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AtomicOrder {
    #[default]
    Ascending,
    /// A SplitMix64 Fisher-Yates permutation of the block ids.
    Permuted(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionConfig {
    pub variant: Variant,
    /// Fragment side.
    pub m: usize,
    /// MMAs accumulated per warp before the finalizing one (`R`).
    pub chain: usize,
    /// Threads per block (`B`).
    pub block: usize,
    /// Share of the input sent to the tensor path by `split` (`f`).
    pub split_fraction: f64,
    pub atomic_order: AtomicOrder,
}

impl ReductionConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            m: 4,
            chain: 1,
            block: WARP_SIZE,
            split_fraction: 0.5,
            atomic_order: AtomicOrder::Ascending,
        }
    }

    /// Tuned settings: recurrence B=32, R=5; single-pass B=128, R=4.
    pub fn best_known(variant: Variant) -> Self {
        let cfg = Self::new(variant);
        match variant {
            Variant::Recurrence => cfg.with_block(32).with_chain(5),
            Variant::SinglePass => cfg.with_block(128).with_chain(4),
            Variant::Split => cfg.with_block(128),
            _ => cfg,
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_chain(mut self, chain: usize) -> Self {
        self.chain = chain;
        self
    }

    pub fn with_block(mut self, block: usize) -> Self {
        self.block = block;
        self
    }

    pub fn with_split_fraction(mut self, f: f64) -> Self {
        self.split_fraction = f;
        self
    }

    pub fn with_atomic_order(mut self, order: AtomicOrder) -> Self {
        self.atomic_order = order;
        self
    }

    pub fn validate(&self) -> Result<(), ReductionError> {
        mma::check_side(self.m)?;
        if self.chain < 1 {
            return Err(ReductionError::InvalidChain);
        }
        if !self.block.is_multiple_of(WARP_SIZE) || !(WARP_SIZE..=MAX_BLOCK_SIZE).contains(&self.block) {
            return Err(ReductionError::InvalidBlock(self.block));
        }
        if !(0.0..=1.0).contains(&self.split_fraction) {
            return Err(ReductionError::InvalidFraction(self.split_fraction));
        }
        Ok(())
    }

    pub fn warps_per_block(&self) -> usize {
        self.block / WARP_SIZE
    }

    /// Elements consumed by one warp chain (`R·m²`).
    pub fn warp_span(&self) -> usize {
        self.chain * self.m * self.m
    }

    /// Elements consumed by one block.
    pub fn block_span(&self) -> usize {
        self.warp_span() * self.warps_per_block()
    }
}

/// The values `x₁..x_n` to reduce; never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct InputArray(Vec<f32>);

impl InputArray {
    pub fn new(data: Vec<f32>) -> Result<Self, ReductionError> {
        if data.is_empty() {
            Err(ReductionError::EmptyInput)
        } else {
            Ok(Self(data))
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl AsRef<[f32]> for InputArray {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Result and bookkeeping of one simulated reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionOutcome {
    pub variant: Variant,
    /// Binary64 for `oracle64`, otherwise the exact widening of a binary32.
    pub value: f64,
    /// Some binary16 produced during the run was infinite or NaN.
    pub overflow: bool,
    /// Some nonzero value flushed to zero on conversion to binary16.
    pub underflow: bool,
    /// Tree levels for the pairwise variants, kernel passes for recurrence.
    pub level_count: u32,
    pub sim_steps: u64,
    pub mma_count: u64,
    pub atomic_count: u64,
    pub shuffle_count: u64,
}

impl ReductionOutcome {
    fn new(variant: Variant) -> Self {
        Self {
            variant,
            value: 0.0,
            overflow: false,
            underflow: false,
            level_count: 0,
            sim_steps: 0,
            mma_count: 0,
            atomic_count: 0,
            shuffle_count: 0,
        }
    }

    pub fn value_f32(&self) -> f32 {
        self.value as f32
    }

    fn absorb(&mut self, monitor: HalfMonitor) {
        self.overflow |= monitor.overflow;
        self.underflow |= monitor.underflow;
    }
}

/// Output of [`pairwise_tree`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeSum<T> {
    pub value: T,
    pub levels: u32,
    pub adds: u64,
}

/// Pairwise tree over `values` zero-padded to a power of two: at every level
/// slot `i` becomes `x[i] + x[i + len/2]`, then passes through `store`.
/// An empty slice sums to zero.
pub fn pairwise_tree<T, S>(values: &[T], mut store: S) -> TreeSum<T>
where
    T: Copy + Zero + Add<Output = T>,
    S: FnMut(T) -> T,
{
    if values.is_empty() {
        return TreeSum {
            value: T::zero(),
            levels: 0,
            adds: 0,
        };
    }
    let mut buf = values.to_vec();
    buf.resize(values.len().next_power_of_two(), T::zero());
    let mut len = buf.len();
    let mut levels = 0;
    let mut adds = 0u64;
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            buf[i] = store(buf[i] + buf[i + half]);
        }
        adds += half as u64;
        levels += 1;
        len = half;
    }
    TreeSum {
        value: buf[0],
        levels,
        adds,
    }
}

/// Left-to-right sum in `T`.
pub fn sequential_sum<T: crate::Real>(values: &[f32]) -> T {
    values.iter().fold(T::zero(), |acc, &x| {
        acc + T::from_f32(x).expect("binary32 widens into every Real")
    })
}

pub fn oracle64(x: &InputArray) -> f64 {
    sequential_sum::<f64>(x.as_slice())
}

fn oracle_outcome(x: &[f32]) -> ReductionOutcome {
    let mut out = ReductionOutcome::new(Variant::Oracle64);
    out.value = sequential_sum::<f64>(x);
    out.sim_steps = x.len() as u64 - 1;
    out
}

fn shuffle_slice(x: &[f32], costs: &UnitCosts) -> ReductionOutcome {
    let tree = pairwise_tree(x, |v| v);
    let mut out = ReductionOutcome::new(Variant::Shuffle32);
    out.value = f64::from(tree.value);
    out.level_count = tree.levels;
    out.shuffle_count = tree.adds;
    out.sim_steps = u64::from(tree.levels) * costs.classic_level();
    out
}

pub fn shuffle32_reduce(x: &InputArray, _stats: &mut MmaStats) -> ReductionOutcome {
    shuffle_slice(x.as_slice(), &UnitCosts::default())
}

/// Pairwise tree whose inputs and partials are all held in binary16.
pub fn half_tree_reduce(x: &InputArray) -> ReductionOutcome {
    half_tree_slice(x.as_slice())
}

fn half_tree_slice(x: &[f32]) -> ReductionOutcome {
    let mut monitor = HalfMonitor::new();
    let stored: Vec<f32> = x.iter().map(|&v| monitor.convert(v).to_f32()).collect();
    let tree = pairwise_tree(&stored, |v| monitor.convert(v).to_f32());
    let mut out = ReductionOutcome::new(Variant::HalfTree);
    out.value = f64::from(tree.value);
    out.level_count = tree.levels;
    out.shuffle_count = tree.adds;
    out.sim_steps = u64::from(tree.levels) * UnitCosts::default().classic_level();
    out.absorb(monitor);
    out
}

/// Base index of the contiguous `R·m²` chunk owned by a warp.
pub fn warp_offset(block_id: usize, warp_in_block: usize, cfg: &ReductionConfig) -> usize {
    cfg.warp_span() * (block_id * cfg.warps_per_block() + warp_in_block)
}

/// One warp's chain: `C_r = ones×M_r + C_{r−1}` for `r = 1..R`, the move of
/// `C_R` into the half-precision A operand, then `C_{R+1} = C_R×ones + 0`.
/// Returns `C_{R+1}[0][0]`.
pub fn chained_warp_reduce(
    x: &[f32],
    base: usize,
    cfg: &ReductionConfig,
    monitor: &mut HalfMonitor,
    stats: &mut MmaStats,
) -> Result<f32, ReductionError> {
    let m = cfg.m;
    let ones = HalfFragment::ones(m)?;
    let zeros = AccumFragment::zeros(m)?;
    let mut acc = zeros.clone();
    for r in 0..cfg.chain {
        let b = mma::load_fragment(x, base + r * m * m, m, monitor, stats)?;
        acc = mma::mma(&ones, &b, &acc, stats)?;
    }
    let a = HalfFragment::from_accum(&acc, monitor);
    let d = mma::mma(&a, &ones, &zeros, stats)?;
    Ok(d.get(0, 0))
}

fn padded(x: &[f32], len: usize) -> Vec<f32> {
    let mut v = Vec::with_capacity(len.max(x.len()));
    v.extend_from_slice(x);
    v.resize(len.max(x.len()), 0.0);
    v
}

pub fn recurrence_reduce(
    x: &InputArray,
    cfg: &ReductionConfig,
    stats: &mut MmaStats,
) -> Result<ReductionOutcome, ReductionError> {
    cfg.validate()?;
    recurrence_slice(x.as_slice(), cfg, stats)
}

fn recurrence_slice(
    x: &[f32],
    cfg: &ReductionConfig,
    stats: &mut MmaStats,
) -> Result<ReductionOutcome, ReductionError> {
    let costs = UnitCosts::default();
    let start = *stats;
    let m2 = cfg.m * cfg.m;
    let span = cfg.warp_span();
    let mut monitor = HalfMonitor::new();
    let mut out = ReductionOutcome::new(Variant::Recurrence);

    let mut work = x.to_vec();
    let mut n = work.len();
    while n >= m2 {
        let groups = n.div_ceil(span);
        work.resize(groups * span, 0.0);
        let mut next = Vec::with_capacity(groups);
        for g in 0..groups {
            let partial = chained_warp_reduce(&work, g * span, cfg, &mut monitor, stats)?;
            next.push(monitor.convert(partial).to_f32());
            stats.stores += 1;
        }
        work = next;
        n = groups;
        out.level_count += 1;
        out.sim_steps += costs.chain_level(cfg.chain as u64);
    }

    // Fewer than m² values left (or the input was that small to begin with):
    // one zero-padded two-step reduction over a single fragment.
    if out.level_count == 0 || n > 1 {
        let last = padded(&work[..n], m2);
        let tail_cfg = cfg.with_chain(1);
        let partial = chained_warp_reduce(&last, 0, &tail_cfg, &mut monitor, stats)?;
        work = vec![monitor.convert(partial).to_f32()];
        stats.stores += 1;
        out.sim_steps += costs.chain_level(1);
    }

    out.value = f64::from(work[0]);
    out.mma_count = stats.mma_count - start.mma_count;
    out.absorb(monitor);
    Ok(out)
}

/// The single-pass kernel over `x`, returning the outcome with the variant
/// left for the caller to label.
fn single_pass_slice(
    x: &[f32],
    cfg: &ReductionConfig,
    stats: &mut MmaStats,
) -> Result<ReductionOutcome, ReductionError> {
    let costs = UnitCosts::default();
    let start = *stats;
    let n = x.len();
    let warps = cfg.warps_per_block();
    let grid = n.div_ceil(cfg.block_span());
    let data = padded(x, grid * cfg.block_span());
    let mut monitor = HalfMonitor::new();
    let mut out = ReductionOutcome::new(Variant::SinglePass);

    let mut block_results = Vec::with_capacity(grid);
    let mut warp_results = vec![0.0f32; warps];
    let mut tree_levels = 0;
    for block in 0..grid {
        for (w, slot) in warp_results.iter_mut().enumerate() {
            let offset = warp_offset(block, w, cfg);
            *slot = if offset < n {
                chained_warp_reduce(&data, offset, cfg, &mut monitor, stats)?
            } else {
                0.0
            };
        }
        let tree = pairwise_tree(&warp_results, |v| v);
        out.shuffle_count += tree.adds;
        tree_levels = tree.levels;
        block_results.push(tree.value);
    }

    let order: Vec<usize> = match cfg.atomic_order {
        AtomicOrder::Ascending => (0..grid).collect(),
        AtomicOrder::Permuted(seed) => SplitMix64::new(seed).permutation(grid),
    };
    let mut cell = 0.0f32;
    for &b in &order {
        cell += block_results[b];
    }

    out.value = f64::from(cell);
    out.level_count = 1;
    out.atomic_count = grid as u64;
    out.mma_count = stats.mma_count - start.mma_count;
    out.sim_steps = costs.chain(cfg.chain as u64)
        + u64::from(tree_levels) * costs.shuffle_level()
        + grid as u64 * costs.global_coalesced;
    out.absorb(monitor);
    Ok(out)
}

pub fn single_pass_reduce(
    x: &InputArray,
    cfg: &ReductionConfig,
    stats: &mut MmaStats,
) -> Result<ReductionOutcome, ReductionError> {
    cfg.validate()?;
    single_pass_slice(x.as_slice(), cfg, stats)
}

/// Index where the tensor-core region ends: `⌊f·n⌋` rounded down to whole
/// blocks of `m²·(B/32)` elements.
pub fn split_point(n: usize, cfg: &ReductionConfig) -> usize {
    let granule = cfg.m * cfg.m * cfg.warps_per_block();
    let raw = (cfg.split_fraction * n as f64).floor() as usize;
    raw.min(n) / granule * granule
}

pub fn split_reduce(
    x: &InputArray,
    cfg: &ReductionConfig,
    stats: &mut MmaStats,
) -> Result<ReductionOutcome, ReductionError> {
    cfg.validate()?;
    split_slice(x.as_slice(), cfg, stats)
}

fn split_slice(
    x: &[f32],
    cfg: &ReductionConfig,
    stats: &mut MmaStats,
) -> Result<ReductionOutcome, ReductionError> {
    let costs = UnitCosts::default();
    let tensor_cfg = cfg.with_chain(1);
    let cut = split_point(x.len(), cfg);
    let (head, tail) = x.split_at(cut);

    let tensor = (!head.is_empty())
        .then(|| single_pass_slice(head, &tensor_cfg, stats))
        .transpose()?;
    let shuffle = (!tail.is_empty()).then(|| shuffle_slice(tail, &costs));

    let mut out = match (tensor, shuffle) {
        (Some(t), Some(s)) => {
            let mut out = t;
            out.value = f64::from(t.value_f32() + s.value_f32());
            out.shuffle_count += s.shuffle_count;
            out.sim_steps = t.sim_steps.max(s.sim_steps) + costs.add;
            out
        }
        (Some(t), None) => t,
        (None, Some(s)) => s,
        (None, None) => return Err(ReductionError::EmptyInput),
    };
    out.variant = Variant::Split;
    out.level_count = 1;
    Ok(out)
}

/// Runs whichever variant `cfg` selects on fresh counters.
pub fn reduce(x: &InputArray, cfg: &ReductionConfig) -> Result<ReductionOutcome, ReductionError> {
    reduce_slice(x.as_slice(), cfg)
}

/// [`reduce`] over a borrowed, non-empty slice.
pub fn reduce_slice(x: &[f32], cfg: &ReductionConfig) -> Result<ReductionOutcome, ReductionError> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(ReductionError::EmptyInput);
    }
    let mut stats = MmaStats::default();
    match cfg.variant {
        Variant::Oracle64 => Ok(oracle_outcome(x)),
        Variant::Shuffle32 => Ok(shuffle_slice(x, &UnitCosts::default())),
        Variant::HalfTree => Ok(half_tree_slice(x)),
        Variant::Recurrence => recurrence_slice(x, cfg, &mut stats),
        Variant::SinglePass => single_pass_slice(x, cfg, &mut stats),
        Variant::Split => split_slice(x, cfg, &mut stats),
    }
}
