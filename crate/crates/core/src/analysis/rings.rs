//! Prominent-ring counting on the azimuthally averaged radial profile.

use super::polar::resample;
use super::spectrum::{DEFAULT_AZIMUTHAL, DEFAULT_RADIAL};
use crate::field::ComplexField;

pub const DEFAULT_RING_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct RingCount {
    pub count: usize,
    /// Counted rings, innermost first: (radius, amplitude relative to the
    /// brightest).
    pub rings: Vec<(f64, f64)>,
    /// Maxima above threshold outside the brightest ring, treated as Airy
    /// sidebands.
    pub sidebands: usize,
}

impl RingCount {
    pub fn outermost_brightest(&self) -> bool {
        self.rings.last().is_some_and(|&(_, a)| a == 1.0)
    }
}

/// RMS amplitude `sqrt(⟨|f|²⟩_φ)` against radius.
pub fn radial_profile(field: &ComplexField) -> (Vec<f64>, Vec<f64>) {
    let polar = resample(field, DEFAULT_RADIAL, DEFAULT_AZIMUTHAL);
    let amp = (0..polar.n_radial)
        .map(|ir| {
            let ring = polar.ring(ir);
            (ring.iter().map(|v| v.norm_sqr()).sum::<f64>() / ring.len() as f64).sqrt()
        })
        .collect();
    (polar.radii, amp)
}

/// Counts maxima of the radial amplitude profile above `threshold` times its
/// peak, up to and including the brightest ring.
pub fn count_rings(field: &ComplexField, threshold: f64) -> RingCount {
    let (radii, amp) = radial_profile(field);
    let peak = amp.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return RingCount {
            count: 0,
            rings: Vec::new(),
            sidebands: 0,
        };
    }
    let n = amp.len();
    let is_max = |i: usize| {
        let left = if i == 0 {
            f64::NEG_INFINITY
        } else {
            amp[i - 1]
        };
        let right = if i + 1 == n {
            f64::NEG_INFINITY
        } else {
            amp[i + 1]
        };
        amp[i] > left && amp[i] >= right
    };
    let maxima: Vec<usize> = (0..n)
        .filter(|&i| is_max(i) && amp[i] > threshold * peak)
        .collect();
    let brightest = maxima
        .iter()
        .copied()
        .fold(None, |b: Option<usize>, i| match b {
            Some(j) if amp[j] >= amp[i] => Some(j),
            _ => Some(i),
        })
        .unwrap_or(0);
    let rings: Vec<(f64, f64)> = maxima
        .iter()
        .filter(|&&i| i <= brightest)
        .map(|&i| (radii[i], amp[i] / peak))
        .collect();
    let sidebands = maxima.len() - rings.len();
    RingCount {
        count: rings.len(),
        rings,
        sidebands,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Plane;
    use num_complex::Complex64;

    #[test]
    fn two_gaussian_rings() {
        let f = ComplexField::from_fn(128, 1.0, [0.0; 2], Plane::Diffraction, |x, y| {
            let r = x.hypot(y);
            let g = |c: f64, a: f64| a * (-(r - c).powi(2) / 8.0).exp();
            Complex64::new(g(15.0, 0.5) + g(40.0, 1.0), 0.0)
        });
        let rc = count_rings(&f, DEFAULT_RING_THRESHOLD);
        assert_eq!(rc.count, 2);
        assert!(rc.outermost_brightest());
    }

    #[test]
    fn empty_field_has_no_rings() {
        let f = ComplexField::zeros(16, 1.0, Plane::Diffraction);
        assert_eq!(count_rings(&f, 0.15).count, 0);
    }
}
