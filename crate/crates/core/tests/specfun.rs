use std::f64::consts::PI;

use proptest::prelude::*;
use tbb_cgh::specfun::{bessel_first_peak, bessel_j, bessel_j_prime, bessel_zero, BesselZeroTable};

/// Bessel's integral `J_n(x) = (1/2π) ∫ cos(nτ − x sin τ) dτ` over one
/// period. The trapezoid rule on a periodic analytic integrand converges
/// geometrically once the node count exceeds `x + n` comfortably.
fn oracle(n: i32, x: f64) -> f64 {
    let nodes = 2 * ((x.abs() as usize + n.unsigned_abs() as usize) + 64);
    let h = 2.0 * PI / nodes as f64;
    (0..nodes)
        .map(|k| {
            let t = k as f64 * h;
            (n as f64 * t - x * t.sin()).cos()
        })
        .sum::<f64>()
        / nodes as f64
}

#[test]
fn agrees_with_integral_oracle_across_all_branches() {
    let mut worst: f64 = 0.0;
    for n in 0..=12 {
        let mut x = 0.0;
        while x < 130.0 {
            let err = (bessel_j(n, x) - oracle(n, x)).abs();
            worst = worst.max(err);
            assert!(err < 1e-13, "J_{n}({x}) off by {err:e}");
            x += 0.173;
        }
    }
    assert!(worst > 0.0);
}

#[test]
fn published_zeros() {
    let cases = [
        (0, 0, 2.404_825_557_695_773),
        (1, 0, 3.831_705_970_207_512_5),
        (1, 1, 7.015_586_669_815_619),
    ];
    for (l, p, want) in cases {
        let got = bessel_zero(l, p).unwrap();
        assert!((got - want).abs() < 1e-12, "xi({p},{l}) = {got}");
    }
}

#[test]
fn derivative_at_first_zero_of_j0() {
    let xi = bessel_zero(0, 0).unwrap();
    assert!((bessel_j_prime(0, xi) + 0.519_147_497_3).abs() < 1e-10);
}

#[test]
fn zeros_are_roots_and_ordered() {
    for l in 0..=10 {
        let mut prev = 0.0;
        for p in 0..8 {
            let z = bessel_zero(l, p).unwrap();
            assert!(z > prev);
            assert!(bessel_j(l as i32, z).abs() < 1e-13, "J_{l}({z})");
            prev = z;
        }
    }
}

#[test]
fn table_memoizes_identical_values() {
    let t = BesselZeroTable::new();
    assert!(t.is_empty());
    let a = t.zero(3, 2).unwrap();
    let b = t.zero(3, 2).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert_eq!(t.len(), 1);
    assert_eq!(a.to_bits(), bessel_zero(3, 2).unwrap().to_bits());
}

#[test]
fn first_peak_is_global_maximum() {
    for l in 1..=6u32 {
        let peak = bessel_first_peak(l).unwrap();
        let top = bessel_j(l as i32, peak);
        assert!(bessel_j_prime(l as i32, peak).abs() < 1e-12);
        let mut x = 0.0;
        while x < 60.0 {
            assert!(bessel_j(l as i32, x).abs() <= top + 1e-15);
            x += 0.05;
        }
    }
}

proptest! {
    #[test]
    fn zeros_interlace(l in 0u32..20, p in 0u32..10) {
        let a = bessel_zero(l, p).unwrap();
        let b = bessel_zero(l + 1, p).unwrap();
        let c = bessel_zero(l, p + 1).unwrap();
        prop_assert!(a < b && b < c);
    }

    #[test]
    fn derivative_matches_central_difference(n in -8i32..=8, x in 0.1f64..80.0) {
        let h = 1e-5;
        let fd = (bessel_j(n, x + h) - bessel_j(n, x - h)) / (2.0 * h);
        prop_assert!((fd - bessel_j_prime(n, x)).abs() < 1e-8);
    }

    #[test]
    fn satisfies_bessel_equation(n in 0i32..=10, x in 0.5f64..60.0) {
        let h = 1e-5;
        let d2 = (bessel_j_prime(n, x + h) - bessel_j_prime(n, x - h)) / (2.0 * h);
        let nf = n as f64;
        let residual = d2 + bessel_j_prime(n, x) / x + (1.0 - nf * nf / (x * x)) * bessel_j(n, x);
        prop_assert!(residual.abs() < 1e-9, "residual {residual:e}");
    }

    #[test]
    fn reflection_identities(n in 0i32..=12, x in 0.0f64..100.0) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert_eq!(bessel_j(-n, x), sign * bessel_j(n, x));
        prop_assert_eq!(bessel_j(n, -x), sign * bessel_j(n, x));
    }

    #[test]
    fn recurrence_holds(n in 1i32..=15, x in 0.5f64..100.0) {
        let lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
        let rhs = 2.0 * n as f64 / x * bessel_j(n, x);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + n as f64 / x));
    }
}
