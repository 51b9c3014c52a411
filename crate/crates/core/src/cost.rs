//! PRAM-like GPU cost model.
//!
//! Unit charges: a coalesced global read or write, a global-memory/fragment
//! transfer, one parallel MMA and one register/L1 move each cost one time
//! unit. Under these rules a classic pairwise reduction costs
//! `T(n) = 4·log₂(n)`, the two-step MMA reduction `T_tc(n) = 5·log_{m²}(n)`
//! and an R-chain per warp `(2R+3)·log_{Rm²}(n)`.
//!
//! Closed forms are generic over the real type so the same algebra can be
//! evaluated in `f32` or `f64`; [`speedup_exact`] gives the rational value
//! when `m` is a power of two.

use crate::reduction::{ReductionConfig, ReductionOutcome, Variant};
use crate::Real;
use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("problem size {n} is below the minimum {min}")]
    SizeTooSmall { n: u64, min: u64 },
    #[error("fragment side {0} must be at least 2")]
    InvalidSide(u64),
    #[error("chain length must be at least 1")]
    InvalidChain,
    #[error("simulation validation needs the recurrence variant, got {0}")]
    WrongVariant(Variant),
    #[error("n = {n} is not an exact power of R·m² = {base}")]
    NotExactPower { n: u64, base: u64 },
    #[error("simulated {simulated} steps but the closed form gives {expected}")]
    Mismatch { expected: u64, simulated: u64 },
}

/// Time charged for each kind of parallel operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitCosts {
    pub global_coalesced: u64,
    /// Non-coalesced global access (`w`). No variant issues one.
    pub global_non_coalesced: u64,
    pub fragment_transfer: u64,
    pub mma: u64,
    pub register_move: u64,
    pub add: u64,
}

/// Default for the non-coalesced charge `w`.
pub const NON_COALESCED_COST: u64 = 1;

impl Default for UnitCosts {
    fn default() -> Self {
        Self {
            global_coalesced: 1,
            global_non_coalesced: NON_COALESCED_COST,
            fragment_transfer: 1,
            mma: 1,
            register_move: 1,
            add: 1,
        }
    }
}

impl UnitCosts {
    /// One level of the classic pairwise reduction: two reads, an add, a store.
    pub fn classic_level(&self) -> u64 {
        2 * self.global_coalesced + self.add + self.global_coalesced
    }

    /// An R-chain without the final global store: R loads and R MMAs, the
    /// accumulator-to-operand move, then the finalizing MMA.
    pub fn chain(&self, chain: u64) -> u64 {
        chain * (self.fragment_transfer + self.mma) + self.register_move + self.mma
    }

    /// One level of the recurrence: a chain followed by its global store.
    pub fn chain_level(&self, chain: u64) -> u64 {
        self.chain(chain) + self.global_coalesced
    }

    /// One level of an intra-block shuffle tree: a register exchange and an add.
    pub fn shuffle_level(&self) -> u64 {
        self.register_move + self.add
    }
}

/// Closed-form figures for one problem size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate<T> {
    pub steps: T,
    pub processors: T,
    pub speedup: T,
}

fn real<T: Real>(v: u64) -> T {
    T::from_u64(v).expect("u64 is representable in every Real")
}

fn log_base<T: Real>(n: u64, base: u64) -> T {
    real::<T>(n).log2() / real::<T>(base).log2()
}

fn check_side(m: u64) -> Result<(), CostError> {
    if m < 2 {
        Err(CostError::InvalidSide(m))
    } else {
        Ok(())
    }
}

/// `4·log₂(n)`.
pub fn steps_classic<T: Real>(n: u64) -> Result<T, CostError> {
    if n < 2 {
        return Err(CostError::SizeTooSmall { n, min: 2 });
    }
    Ok(real::<T>(4) * real::<T>(n).log2())
}

/// `5·log_{m²}(n)`, bottoming out at `T_tc(m²) = 5`.
pub fn steps_tc<T: Real>(n: u64, m: u64) -> Result<T, CostError> {
    check_side(m)?;
    if n < m * m {
        return Err(CostError::SizeTooSmall { n, min: m * m });
    }
    Ok(real::<T>(5) * log_base::<T>(n, m * m))
}

/// `(2R+3)·log_{Rm²}(n)`.
pub fn steps_chained<T: Real>(n: u64, m: u64, chain: u64) -> Result<T, CostError> {
    check_side(m)?;
    if chain < 1 {
        return Err(CostError::InvalidChain);
    }
    let group = chain * m * m;
    if n < group {
        return Err(CostError::SizeTooSmall { n, min: group });
    }
    Ok(real::<T>(2 * chain + 3) * log_base::<T>(n, group))
}

/// `(4/5)·log₂(m²)`, the ratio `T(n) / T_tc(n)`.
pub fn speedup<T: Real>(m: u64) -> Result<T, CostError> {
    check_side(m)?;
    Ok(real::<T>(4) * real::<T>(m * m).log2() / real::<T>(5))
}

/// [`speedup`] as an exact fraction. Needs `m` to be a power of two so that
/// `log₂(m²)` is an integer.
pub fn speedup_exact(m: u64) -> Result<Ratio<u64>, CostError> {
    check_side(m)?;
    if !m.is_power_of_two() {
        return Err(CostError::InvalidSide(m));
    }
    let log2_m2 = 2 * u64::from(m.trailing_zeros());
    Ok(Ratio::new(4 * log2_m2, 5))
}

/// Brent sizing `p = n / log₂(n)`, which keeps `T_p(n) ≤ 2·log₂(n)`.
pub fn brent_processors<T: Real>(n: u64) -> Result<T, CostError> {
    if n < 2 {
        return Err(CostError::SizeTooSmall { n, min: 2 });
    }
    Ok(real::<T>(n) / real::<T>(n).log2())
}

/// Step bound achieved with [`brent_processors`] processors.
pub fn brent_step_bound<T: Real>(n: u64) -> Result<T, CostError> {
    if n < 2 {
        return Err(CostError::SizeTooSmall { n, min: 2 });
    }
    Ok(real::<T>(2) * real::<T>(n).log2())
}

/// Chained-MMA steps for `n` together with the Brent processor count and the
/// speedup over the classic reduction at the same `n`.
pub fn estimate<T: Real>(n: u64, m: u64, chain: u64) -> Result<CostEstimate<T>, CostError> {
    let steps = steps_chained::<T>(n, m, chain)?;
    Ok(CostEstimate {
        steps,
        processors: brent_processors(n)?,
        speedup: steps_classic::<T>(n)? / steps,
    })
}

/// Simulated versus closed-form step counts for one recurrence run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimValidation {
    pub levels: u32,
    pub expected_steps: u64,
    pub simulated_steps: u64,
}

/// Checks that a recurrence run on `n = (R·m²)^k` consumed exactly
/// `(2R+3)·k` simulated steps.
pub fn validate_against_sim(
    outcome: &ReductionOutcome,
    cfg: &ReductionConfig,
    n: u64,
) -> Result<SimValidation, CostError> {
    if cfg.variant != Variant::Recurrence {
        return Err(CostError::WrongVariant(cfg.variant));
    }
    let base = (cfg.chain * cfg.m * cfg.m) as u64;
    let mut rest = n;
    let mut levels = 0u32;
    while rest > 1 && rest.is_multiple_of(base) {
        rest /= base;
        levels += 1;
    }
    if rest != 1 || levels == 0 {
        return Err(CostError::NotExactPower { n, base });
    }
    let expected = (2 * cfg.chain as u64 + 3) * u64::from(levels);
    if outcome.sim_steps != expected {
        return Err(CostError::Mismatch {
            expected,
            simulated: outcome.sim_steps,
        });
    }
    Ok(SimValidation {
        levels,
        expected_steps: expected,
        simulated_steps: outcome.sim_steps,
    })
}
