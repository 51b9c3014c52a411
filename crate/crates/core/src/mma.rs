//! Tensor-core fragment model.
//!
//! `A` and `B` operands are [`HalfFragment`]s, accumulators `C` and `D` are
//! [`AccumFragment`]s holding binary32. [`mma`] computes `D = A×B + C` with
//! exact binary32 products (two 11-bit significands fit in 24 bits), summed
//! in ascending `k` with `C` added last.

use crate::fp16::{Half, HalfMonitor};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FragmentError {
    #[error("fragment side {0} must be a power of two >= 2")]
    InvalidSide(usize),
    #[error("fragment of {len} elements at offset {offset} overruns array of length {available}")]
    OutOfRange {
        offset: usize,
        len: usize,
        available: usize,
    },
    #[error("fragment sides differ: {0:?}")]
    DimensionMismatch([usize; 3]),
}

pub fn check_side(m: usize) -> Result<(), FragmentError> {
    if m >= 2 && m.is_power_of_two() {
        Ok(())
    } else {
        Err(FragmentError::InvalidSide(m))
    }
}

/// Which register file a filled fragment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentKind {
    Half,
    Accum,
}

/// Either kind of fragment, as returned by [`fill_fragment`].
#[derive(Debug, Clone, PartialEq)]
pub enum Fragment {
    Half(HalfFragment),
    Accum(AccumFragment),
}

impl Fragment {
    pub fn into_half(self) -> Option<HalfFragment> {
        match self {
            Fragment::Half(f) => Some(f),
            Fragment::Accum(_) => None,
        }
    }

    pub fn into_accum(self) -> Option<AccumFragment> {
        match self {
            Fragment::Accum(f) => Some(f),
            Fragment::Half(_) => None,
        }
    }
}

/// An m×m row-major matrix of binary16 values (operands A and B).
#[derive(Debug, Clone, PartialEq)]
pub struct HalfFragment {
    m: usize,
    elems: Vec<Half>,
}

/// An m×m row-major matrix of binary32 values (accumulators C and D).
#[derive(Debug, Clone, PartialEq)]
pub struct AccumFragment {
    m: usize,
    elems: Vec<f32>,
}

/// Operation counters for one simulation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MmaStats {
    pub mma_count: u64,
    pub loads: u64,
    pub stores: u64,
}

impl HalfFragment {
    pub fn filled(m: usize, value: Half) -> Result<Self, FragmentError> {
        check_side(m)?;
        Ok(Self {
            m,
            elems: vec![value; m * m],
        })
    }

    pub fn ones(m: usize) -> Result<Self, FragmentError> {
        Self::filled(m, Half::ONE)
    }

    pub fn from_elems(m: usize, elems: Vec<Half>) -> Result<Self, FragmentError> {
        check_side(m)?;
        if elems.len() != m * m {
            return Err(FragmentError::OutOfRange {
                offset: 0,
                len: m * m,
                available: elems.len(),
            });
        }
        Ok(Self { m, elems })
    }

    /// Narrows an accumulator into an operand register, the register move
    /// between the chained MMAs and the final one.
    pub fn from_accum(acc: &AccumFragment, monitor: &mut HalfMonitor) -> Self {
        Self {
            m: acc.m,
            elems: acc.elems.iter().map(|&v| monitor.convert(v)).collect(),
        }
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn elems(&self) -> &[Half] {
        &self.elems
    }

    pub fn get(&self, row: usize, col: usize) -> Half {
        self.elems[row * self.m + col]
    }

    pub fn any_overflowed(&self) -> bool {
        self.elems.iter().any(|h| h.is_overflowed())
    }
}

impl AccumFragment {
    pub fn filled(m: usize, value: f32) -> Result<Self, FragmentError> {
        check_side(m)?;
        Ok(Self {
            m,
            elems: vec![value; m * m],
        })
    }

    pub fn zeros(m: usize) -> Result<Self, FragmentError> {
        Self::filled(m, 0.0)
    }

    pub fn from_elems(m: usize, elems: Vec<f32>) -> Result<Self, FragmentError> {
        check_side(m)?;
        if elems.len() != m * m {
            return Err(FragmentError::OutOfRange {
                offset: 0,
                len: m * m,
                available: elems.len(),
            });
        }
        Ok(Self { m, elems })
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn elems(&self) -> &[f32] {
        &self.elems
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.elems[row * self.m + col]
    }
}

pub fn fill_fragment(m: usize, value: f32, kind: FragmentKind) -> Result<Fragment, FragmentError> {
    Ok(match kind {
        FragmentKind::Half => Fragment::Half(HalfFragment::filled(m, Half::from_f32(value))?),
        FragmentKind::Accum => Fragment::Accum(AccumFragment::filled(m, value)?),
    })
}

/// Loads `src[offset..offset + m²]` into an operand fragment, rounding each
/// element to binary16.
pub fn load_fragment(
    src: &[f32],
    offset: usize,
    m: usize,
    monitor: &mut HalfMonitor,
    stats: &mut MmaStats,
) -> Result<HalfFragment, FragmentError> {
    check_side(m)?;
    let len = m * m;
    let chunk = offset
        .checked_add(len)
        .and_then(|end| src.get(offset..end))
        .ok_or(FragmentError::OutOfRange {
            offset,
            len,
            available: src.len(),
        })?;
    stats.loads += 1;
    Ok(HalfFragment {
        m,
        elems: chunk.iter().map(|&x| monitor.convert(x)).collect(),
    })
}

pub fn store_fragment(
    frag: &AccumFragment,
    dst: &mut [f32],
    offset: usize,
    stats: &mut MmaStats,
) -> Result<(), FragmentError> {
    let len = frag.elems.len();
    let available = dst.len();
    let out = offset
        .checked_add(len)
        .and_then(|end| dst.get_mut(offset..end))
        .ok_or(FragmentError::OutOfRange {
            offset,
            len,
            available,
        })?;
    out.copy_from_slice(&frag.elems);
    stats.stores += 1;
    Ok(())
}

/// `D = A×B + C`.
pub fn mma(
    a: &HalfFragment,
    b: &HalfFragment,
    c: &AccumFragment,
    stats: &mut MmaStats,
) -> Result<AccumFragment, FragmentError> {
    let m = a.m;
    if b.m != m || c.m != m {
        return Err(FragmentError::DimensionMismatch([a.m, b.m, c.m]));
    }
    let a32: Vec<f32> = a.elems.iter().map(|h| h.to_f32()).collect();
    let b32: Vec<f32> = b.elems.iter().map(|h| h.to_f32()).collect();
    let mut d = Vec::with_capacity(m * m);
    for i in 0..m {
        let row = &a32[i * m..(i + 1) * m];
        for j in 0..m {
            let mut acc = row[0] * b32[j];
            for k in 1..m {
                acc += row[k] * b32[k * m + j];
            }
            d.push(acc + c.elems[i * m + j]);
        }
    }
    stats.mma_count += 1;
    Ok(AccumFragment { m, elems: d })
}
