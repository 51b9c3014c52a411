//! Larger-input checks of the reduction variants and the sweep harness.

use tcreduce_core::harness::{self, ErrorPct};
use tcreduce_core::reduction::{self, oracle64, reduce};
use tcreduce_core::{DistKind, Distribution, MmaStats, ReductionConfig, Variant};

fn integers(seed: u64, n: usize) -> tcreduce_core::InputArray {
    Distribution::new(DistKind::Integers { lo: 0, hi: 9 }, seed)
        .generate(n)
        .unwrap()
}

#[test]
fn oracle_matches_exact_fixed_point_sum() {
    // Uniform samples are k·2⁻²⁴ for integer k, so their exact sum is an
    // integer count of 2⁻²⁴ units.
    let x = Distribution::new(DistKind::Uniform, 5)
        .generate(1000)
        .unwrap();
    let units: u64 = x
        .as_slice()
        .iter()
        .map(|&v| (f64::from(v) * 16_777_216.0) as u64)
        .sum();
    let exact = units as f64 / 16_777_216.0;
    let got = oracle64(&x);
    assert!(((got - exact) / exact).abs() < 1e-12, "{got} vs {exact}");
}

#[test]
fn shuffle_is_exact_on_integers() {
    let x = integers(1, 1 << 20);
    let mut stats = MmaStats::default();
    let out = reduction::shuffle32_reduce(&x, &mut stats);
    assert_eq!(out.value, oracle64(&x));
    assert_eq!(out.level_count, 20);
}

#[test]
fn split_half_is_exact_on_integers() {
    let x = integers(1, 1 << 20);
    let cfg = ReductionConfig::best_known(Variant::Split).with_split_fraction(0.5);
    let out = reduce(&x, &cfg).unwrap();
    assert_eq!(out.value, oracle64(&x));
    assert!(out.mma_count > 0 && out.atomic_count > 0);
}

#[test]
fn half_tree_overflows_on_uniform_million() {
    let x = Distribution::new(DistKind::Uniform, 0)
        .generate(1_000_000)
        .unwrap();
    let out = reduction::half_tree_reduce(&x);
    assert!(out.overflow);
    let fp32 = reduce(&x, &ReductionConfig::new(Variant::Shuffle32)).unwrap();
    assert!(!fp32.overflow);
}

#[test]
fn normal_sample_mean_is_centered() {
    let n = 1_000_000;
    for seed in [0, 1, 99] {
        let x = Distribution::new(DistKind::Normal, seed)
            .generate(n)
            .unwrap();
        let mean = oracle64(&x) / n as f64;
        let var = x
            .as_slice()
            .iter()
            .map(|&v| (f64::from(v) - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!(
            mean.abs() < 5.0 / (n as f64).sqrt(),
            "seed {seed}: mean {mean}"
        );
        assert!((var - 1.0).abs() < 0.01, "seed {seed}: var {var}");
    }
}

#[test]
fn br_sweep_on_normal_million_never_overflows() {
    let dist = Distribution::new(DistKind::Normal, 3);
    for variant in [Variant::Recurrence, Variant::SinglePass] {
        let recs =
            harness::sweep_br(dist, 1_000_000, variant, &[32, 128], &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(recs.len(), 10);
        assert!(recs.iter().all(|r| !r.overflow), "{variant}");
    }
}

#[test]
fn recurrence_sweep_on_uniform_always_overflows() {
    let dist = Distribution::new(DistKind::Uniform, 0);
    let recs = harness::sweep_br(
        dist,
        10_000_000,
        Variant::Recurrence,
        &[32, 1024],
        &[1, 5, 8],
    )
    .unwrap();
    assert!(recs
        .iter()
        .all(|r| r.overflow && r.error == ErrorPct::Overflow));
}

#[test]
fn split_sweep_endpoints_and_exactness() {
    let n = 1 << 20;
    let dist = Distribution::new(DistKind::Integers { lo: 0, hi: 9 }, 4);
    let grid: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
    let recs = harness::sweep_split(dist, n, &grid).unwrap();
    assert_eq!(recs.len(), 11);
    assert!(recs.iter().all(|r| r.error == ErrorPct::Percent(0.0)));

    // Non-integer data so the endpoint comparisons are not trivially exact.
    let dist = Distribution::new(DistKind::Normal, 4);
    let x = dist.generate(n).unwrap();
    let recs = harness::sweep_split(dist, n, &[0.0, 1.0]).unwrap();
    let shuffle = reduce(&x, &ReductionConfig::new(Variant::Shuffle32)).unwrap();
    let single = reduce(
        &x,
        &ReductionConfig::best_known(Variant::Split)
            .with_chain(1)
            .with_split_fraction(1.0)
            .with_block(128),
    )
    .unwrap();
    let single_pass = reduce(
        &x,
        &ReductionConfig::new(Variant::SinglePass).with_block(128),
    )
    .unwrap();
    assert_eq!(recs[0].value.to_bits(), shuffle.value.to_bits());
    assert_eq!(recs[1].value.to_bits(), single_pass.value.to_bits());
    assert_eq!(single.value.to_bits(), single_pass.value.to_bits());
}

#[test]
fn error_curve_overflow_flip() {
    let dist = Distribution::new(DistKind::Uniform, 0);
    let grid = [1 << 10, 1 << 14, 1 << 17, 1 << 20];
    let half = harness::error_curve(dist, Variant::HalfTree, &grid).unwrap();
    let single = harness::error_curve(dist, Variant::SinglePass, &grid).unwrap();
    assert!(!half[0].overflow);
    assert!(half.last().unwrap().overflow);
    // Once overflowed, larger prefixes stay overflowed.
    let first = half.iter().position(|r| r.overflow).unwrap();
    assert!(half[first..].iter().all(|r| r.overflow));
    assert!(single.iter().all(|r| !r.overflow));
}

#[test]
fn constant_inputs_have_zero_error() {
    let dist = Distribution::new(DistKind::Constant(1.0), 0);
    for variant in [Variant::SinglePass, Variant::Recurrence, Variant::Split] {
        let recs = harness::error_curve(dist, variant, &[16, 1000, 4096]).unwrap();
        assert!(
            recs.iter().all(|r| r.error == ErrorPct::Percent(0.0)),
            "{variant}"
        );
    }
}

#[test]
fn sweep_records_are_reproducible() {
    let dist = Distribution::new(DistKind::Normal, 12);
    let a = harness::sweep_br(dist, 100_000, Variant::SinglePass, &[32, 256], &[1, 4]).unwrap();
    let b = harness::sweep_br(dist, 100_000, Variant::SinglePass, &[32, 256], &[1, 4]).unwrap();
    assert_eq!(a, b);
}
