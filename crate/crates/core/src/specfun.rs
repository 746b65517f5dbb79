//! Bessel functions of the first kind and their positive zeros.
//!
//! `J_l(x)` is evaluated with the ascending power series for small arguments,
//! the Hankel asymptotic expansion for large ones, and Miller's downward
//! recurrence normalized with `J_0 + 2 Σ J_2k = 1` in between. The zeros `ξ_pl` quantize the
//! transverse wavevector of a truncated Bessel beam (`k_⊥ ρ_max = ξ_pl`) and
//! are memoized for the lifetime of the process.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;
use std::sync::{OnceLock, RwLock};

use crate::error::{Error, Result};

/// Largest supported `|l|`.
pub const MAX_ORDER: u32 = 64;

const SERIES_LIMIT: f64 = 2.0;
const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

/// Bessel function of the first kind `J_l(x)`.
///
/// Negative orders use `J_{-l}(x) = (-1)^l J_l(x)`; negative arguments use
/// `J_l(-x) = (-1)^l J_l(x)`.
pub fn bessel_j(l: i32, x: f64) -> f64 {
    let order = l.unsigned_abs();
    let mut sign = if l < 0 && order % 2 == 1 { -1.0 } else { 1.0 };
    let x = if x < 0.0 {
        if order % 2 == 1 {
            sign = -sign;
        }
        -x
    } else {
        x
    };
    sign * bessel_j_nonneg(order, x)
}

/// `J'_l(x) = (J_{l-1}(x) - J_{l+1}(x)) / 2`.
pub fn bessel_j_prime(l: i32, x: f64) -> f64 {
    0.5 * (bessel_j(l - 1, x) - bessel_j(l + 1, x))
}

fn bessel_j_nonneg(order: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    if x < SERIES_LIMIT {
        series(order, x)
    } else if x > asymptotic_limit(order) {
        hankel(order, x)
    } else {
        miller(order, x)
    }
}

/// Above this argument the Hankel expansion reaches full double precision.
fn asymptotic_limit(order: u32) -> f64 {
    let l = order as f64;
    40.0 + 0.5 * l * l
}

/// Large-argument expansion
/// `J_l(x) = sqrt(2/πx) (P cos χ − Q sin χ)`, `χ = x − (l/2 + 1/4)π`,
/// summed until the terms stop shrinking.
fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let inv8x = 1.0 / (8.0 * x);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) * inv8x / k as f64;
        if term.abs() >= last || term == 0.0 {
            break;
        }
        last = term.abs();
        // Terms alternate between Q (odd k) and P (even k) with signs + - - + ...
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 * p.abs().max(q.abs()) {
            break;
        }
    }
    let chi = x - (0.5 * order as f64 + 0.25) * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    // (x/2)^l / l!, built incrementally so large orders underflow gracefully.
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + order as f64));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || term == 0.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn miller(order: u32, x: f64) -> f64 {
    let span = (order as f64).max(x);
    let mut start = (span + 20.0 + 10.0 * span.sqrt()).ceil() as u32;
    start += start % 2;

    let two_over_x = 2.0 / x;
    let mut above = 0.0; // J_{k+1}
    let mut current = 1e-30; // J_k, k = start
    let mut norm = 0.0;
    let mut wanted = 0.0;
    if start == order {
        wanted = current;
    }

    for k in (1..=start).rev() {
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        let idx = k - 1;
        if idx == order {
            wanted = current;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * current;
        }
        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            norm *= RESCALE_BY;
            wanted *= RESCALE_BY;
        }
    }
    norm += current;
    wanted / norm
}

/// Memo table of Bessel zeros keyed by `(l, p)`.
///
/// Entries are immutable once inserted. Concurrent inserts of the same key
/// compute the same value, so last-write-wins is harmless.
#[derive(Debug, Default)]
pub struct BesselZeroTable {
    entries: RwLock<HashMap<(u32, u32), f64>>,
}

impl BesselZeroTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide table used by [`bessel_zero`].
    pub fn global() -> &'static BesselZeroTable {
        static TABLE: OnceLock<BesselZeroTable> = OnceLock::new();
        TABLE.get_or_init(BesselZeroTable::new)
    }

    /// The `(p+1)`-th positive zero of `J_l`, computed on first request.
    pub fn zero(&self, l: u32, p: u32) -> Result<f64> {
        if let Some(&v) = self
            .entries
            .read()
            .expect("zero table poisoned")
            .get(&(l, p))
        {
            return Ok(v);
        }
        let v = find_zero(l, p)?;
        self.entries
            .write()
            .expect("zero table poisoned")
            .insert((l, p), v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("zero table poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted copy of the stored entries.
    pub fn entries(&self) -> Vec<((u32, u32), f64)> {
        let mut all: Vec<_> = self
            .entries
            .read()
            .expect("zero table poisoned")
            .iter()
            .map(|(&k, &v)| (k, v))
            .collect();
        all.sort_by_key(|&(k, _)| k);
        all
    }
}

/// `ξ_pl`, the `(p+1)`-th positive root of `J_l`. Memoized globally.
pub fn bessel_zero(l: u32, p: u32) -> Result<f64> {
    BesselZeroTable::global().zero(l, p)
}

fn find_zero(l: u32, p: u32) -> Result<f64> {
    let order = l as i32;
    let f = |x: f64| bessel_j(order, x);
    let failed = || Error::RootNotConverged { order: l, index: p };

    // j_{l,1} > l, so nothing is skipped by starting the scan at max(l, 1).
    let step = FRAC_PI_4;
    let mut lo = (l as f64).max(1.0);
    let mut f_lo = f(lo);
    let mut seen = 0;
    let max_steps = 8 * (p as usize + 2) + 64;
    let mut bracket = None;
    for _ in 0..max_steps {
        let hi = lo + step;
        let f_hi = f(hi);
        if f_lo == 0.0 || f_lo * f_hi < 0.0 {
            if seen == p {
                bracket = Some((lo, hi, f_lo));
                break;
            }
            seen += 1;
        }
        lo = hi;
        f_lo = f_hi;
    }
    let (mut a, mut b, mut fa) = bracket.ok_or_else(failed)?;
    if fa == 0.0 {
        return Ok(a);
    }

    let mut converged = false;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            a = mid;
            b = mid;
        } else if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
        if b - a <= 1e-13 * b.max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(failed());
    }
    let mut root = 0.5 * (a + b);
    let slope = bessel_j_prime(order, root);
    if slope != 0.0 {
        let polished = root - f(root) / slope;
        if polished > a - 1e-12 && polished < b + 1e-12 {
            root = polished;
        }
    }
    Ok(root)
}

/// Location of the first maximum of `|J_l|` on `(0, ∞)`, which is also its
/// global maximum. For `l = 0` this is the origin.
pub fn bessel_first_peak(l: u32) -> Result<f64> {
    if l == 0 {
        return Ok(0.0);
    }
    let order = l as i32;
    let mut a = 1e-9;
    let mut b = bessel_zero(l, 0)?;
    // J'_l > 0 just above the origin and < 0 at the first zero.
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if bessel_j_prime(order, mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-14 * b {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
        assert_eq!(bessel_j(-3, 0.0), 0.0);
        assert_eq!(bessel_j_prime(0, 0.0), 0.0);
        assert!((bessel_j_prime(1, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn continuity_across_series_limit() {
        for l in [0, 1, 5, 20] {
            let below = bessel_j(l, SERIES_LIMIT - 1e-14);
            let above = bessel_j(l, SERIES_LIMIT + 1e-14);
            assert!((below - above).abs() < 1e-13, "l = {l}: {below} vs {above}");
        }
    }

    #[test]
    fn hankel_matches_recurrence_past_crossover() {
        for l in [0u32, 1, 2, 5, 8] {
            let start = asymptotic_limit(l);
            for k in 0..20 {
                let x = start + 0.37 * k as f64;
                let a = hankel(l, x);
                let b = miller(l, x);
                assert!((a - b).abs() < 1e-13, "l = {l}, x = {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn high_order_small_argument_is_tiny_not_nan() {
        let v = bessel_j(64, 0.5);
        assert!((0.0..1e-100).contains(&v));
        let w = bessel_j(64, 3.0);
        assert!(w.is_finite() && w > 0.0 && w < 1e-50);
    }

    #[test]
    fn zero_table_is_memoized() {
        let table = BesselZeroTable::new();
        assert!(table.is_empty());
        let a = table.zero(3, 2).unwrap();
        let b = table.zero(3, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(table.len(), 1);
        assert_eq!(table.entries()[0].0, (3, 2));
    }

    #[test]
    fn first_peak_of_j1() {
        // j'_{1,1} = 1.8411837813406593
        let x = bessel_first_peak(1).unwrap();
        assert!((x - 1.841_183_781_340_659_3).abs() < 1e-12);
        assert_eq!(bessel_first_peak(0).unwrap(), 0.0);
    }
}
