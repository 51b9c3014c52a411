//! CPU emulation of tensor-core arithmetic reduction.
//!
//! The crate reproduces chained matrix-multiply-accumulate (MMA) reductions
//! with binary16 operands and binary32 accumulators, the PRAM-like cost model
//! that predicts their step counts, and the error experiments that compare
//! each variant against a binary64 reference.
//!
//! Module map:
//!
//! * [`fp16`]: bit-exact binary16 conversions.
//! * [`mma`]: fragments and `D = A×B + C`.
//! * [`reduction`]: the oracle, the baselines and the three tensor-core
//!   variants.
//! * [`cost`]: closed-form step counts, speedups and the check against
//!   simulated steps.
//! * [`harness`]: seeded inputs, error metrics, sweeps and CSV output.

pub mod cost;
pub mod fp16;
pub mod harness;
pub mod mma;
pub mod reduction;
pub mod rng;

/// Real scalar type the cost algebra and reference sums are generic over.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + std::fmt::Debug + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Accumulator precision of the emulated tensor core.
pub type Single = f32;
/// Reference precision for error measurements.
pub type Double = f64;
/// Cost figures evaluated in binary64.
pub type CostEstimate = cost::CostEstimate<Double>;
/// Exact rational speedup.
pub type Rational = num_rational::Ratio<u64>;

pub use fp16::Half;
pub use harness::{DistKind, Distribution, ErrorPct, SweepRecord};
pub use mma::{AccumFragment, HalfFragment, MmaStats};
pub use reduction::{
    reduce, AtomicOrder, InputArray, ReductionConfig, ReductionError, ReductionOutcome, Variant,
};
