//! Azimuthal (OAM) and radial mode decomposition.

use std::collections::BTreeMap;

use log::warn;
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::polar::{resample, PolarGrid};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::modes::{ft_tbb_radial, BeamParams, ModeIndex};

pub const DEFAULT_RADIAL: usize = 128;
pub const DEFAULT_AZIMUTHAL: usize = 256;

/// Normalized OAM weights.
#[derive(Debug, Clone, PartialEq)]
pub struct OamSpectrum {
    pub weights: BTreeMap<i32, f64>,
    /// `Σ l · weight`, in units of ℏ.
    pub mean: f64,
}

impl OamSpectrum {
    pub fn weight(&self, l: i32) -> f64 {
        self.weights.get(&l).copied().unwrap_or(0.0)
    }

    /// Heaviest `l`; ties go to the smaller `|l|`, then to the positive one.
    pub fn dominant(&self) -> (i32, f64) {
        self.weights
            .iter()
            .map(|(&l, &w)| (l, w))
            .fold((0, f64::NEG_INFINITY), |best, (l, w)| {
                let better = w > best.1 || (w == best.1 && (l.abs(), -l) < (best.0.abs(), -best.0));
                if better {
                    (l, w)
                } else {
                    best
                }
            })
    }
}

/// Per-ring azimuthal Fourier coefficients `C_l(r) = ⟨f(r,φ) e^{-ilφ}⟩_φ`,
/// laid out like the polar grid with bin `k` holding `l = k` for
/// `k < n/2` and `l = k − n` otherwise.
pub fn azimuthal_harmonics(polar: &PolarGrid) -> Vec<Complex64> {
    let na = polar.n_azimuthal;
    let fft = FftPlanner::new().plan_fft_forward(na);
    let mut out = polar.values.clone();
    for ring in out.chunks_mut(na) {
        fft.process(ring);
        ring.iter_mut().for_each(|v| *v /= na as f64);
    }
    out
}

/// Azimuthal index held by FFT bin `k` of an `n`-point ring.
pub fn bin_to_l(k: usize, n: usize) -> i32 {
    if k < n / 2 {
        k as i32
    } else {
        k as i32 - n as i32
    }
}

fn l_to_bin(l: i32, n: usize) -> Option<usize> {
    let half = (n / 2) as i32;
    if l >= half || l < -half {
        return None;
    }
    Some(if l >= 0 {
        l as usize
    } else {
        (l + n as i32) as usize
    })
}

/// OAM spectrum of a field about its origin on the default polar grid.
pub fn oam_spectrum(field: &ComplexField) -> Result<OamSpectrum> {
    oam_spectrum_polar(&resample(field, DEFAULT_RADIAL, DEFAULT_AZIMUTHAL))
}

/// Ring-energy weighted azimuthal spectrum.
pub fn oam_spectrum_polar(polar: &PolarGrid) -> Result<OamSpectrum> {
    let na = polar.n_azimuthal;
    let coeffs = azimuthal_harmonics(polar);
    let mut raw = vec![0.0; na];
    for (ir, r) in polar.radii.iter().enumerate() {
        for (k, c) in coeffs[ir * na..(ir + 1) * na].iter().enumerate() {
            raw[k] += c.norm_sqr() * r;
        }
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateField);
    }
    let weights: BTreeMap<i32, f64> = raw
        .iter()
        .enumerate()
        .map(|(k, w)| (bin_to_l(k, na), w / total))
        .collect();
    let mean = weights.iter().map(|(&l, &w)| l as f64 * w).sum();
    Ok(OamSpectrum { weights, mean })
}

/// Spectral `−i ∂/∂φ` of a polar-sampled field.
pub fn azimuthal_derivative(polar: &PolarGrid) -> PolarGrid {
    let na = polar.n_azimuthal;
    let mut coeffs = azimuthal_harmonics(polar);
    let ifft = FftPlanner::new().plan_fft_inverse(na);
    for ring in coeffs.chunks_mut(na) {
        for (k, c) in ring.iter_mut().enumerate() {
            // The Nyquist bin has no well-defined sign.
            *c *= if 2 * k == na {
                0.0
            } else {
                bin_to_l(k, na) as f64
            };
        }
        ifft.process(ring);
    }
    PolarGrid {
        values: coeffs,
        ..polar.clone()
    }
}

/// Weights of FT-TBB radial orders `p = 0..=max_p` at fixed `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDecomposition {
    pub l: i32,
    /// Normalized over the captured subspace.
    pub weights: Vec<f64>,
    /// Fraction of the `l` component's energy explained by the references.
    pub captured: f64,
    pub warnings: Vec<String>,
}

impl RadialDecomposition {
    pub fn dominant(&self) -> (u32, f64) {
        self.weights
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (p, &w)| {
                if w > b.1 {
                    (p as u32, w)
                } else {
                    b
                }
            })
    }
}

/// Minimum captured fraction before a warning is raised.
pub const CAPTURE_FLOOR: f64 = 0.8;

/// Projects the `l_fixed` azimuthal component of a far-field window onto
/// FT-TBB radial profiles renormalized over the window.
pub fn radial_decompose(
    field: &ComplexField,
    l_fixed: i32,
    beam: &BeamParams,
    max_p: u32,
) -> Result<RadialDecomposition> {
    radial_decompose_polar(
        &resample(field, DEFAULT_RADIAL, DEFAULT_AZIMUTHAL),
        l_fixed,
        beam,
        max_p,
    )
}

pub fn radial_decompose_polar(
    polar: &PolarGrid,
    l_fixed: i32,
    beam: &BeamParams,
    max_p: u32,
) -> Result<RadialDecomposition> {
    let na = polar.n_azimuthal;
    let bin = l_to_bin(l_fixed, na)
        .ok_or_else(|| Error::InvalidMode(format!("l = {l_fixed} beyond azimuthal sampling")))?;
    let coeffs = azimuthal_harmonics(polar);
    let profile: Vec<Complex64> = (0..polar.n_radial)
        .map(|ir| coeffs[ir * na + bin])
        .collect();
    let component: f64 = profile
        .iter()
        .zip(&polar.radii)
        .map(|(c, r)| c.norm_sqr() * r)
        .sum();
    if !(component > 0.0) {
        return Err(Error::DegenerateField);
    }
    let mut raw = Vec::with_capacity(max_p as usize + 1);
    for p in 0..=max_p {
        let mode = ModeIndex::new(p, l_fixed)?;
        let reference: Vec<f64> = polar
            .radii
            .iter()
            .map(|&r| ft_tbb_radial(mode, beam.u_of_angle(r)))
            .collect::<Result<_>>()?;
        let norm: f64 = reference
            .iter()
            .zip(&polar.radii)
            .map(|(f, r)| f * f * r)
            .sum();
        let overlap: Complex64 = reference
            .iter()
            .zip(&profile)
            .zip(&polar.radii)
            .map(|((f, c), r)| c * (f * r))
            .sum();
        raw.push(overlap.norm_sqr() / norm);
    }
    let sum: f64 = raw.iter().sum();
    let captured = sum / component;
    let mut warnings = Vec::new();
    if captured < CAPTURE_FLOOR {
        let msg = format!(
            "radial references capture {:.1}% of the l = {l_fixed} component",
            100.0 * captured
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let weights = if sum > 0.0 {
        raw.iter().map(|w| w / sum).collect()
    } else {
        vec![0.0; raw.len()]
    };
    Ok(RadialDecomposition {
        l: l_fixed,
        weights,
        captured,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Plane;

    fn vortex(l: i32) -> ComplexField {
        ComplexField::from_fn(64, 1.0, [0.0; 2], Plane::Diffraction, move |x, y| {
            let r = x.hypot(y);
            Complex64::from_polar(r * (-r * r / 100.0).exp(), l as f64 * y.atan2(x))
        })
    }

    #[test]
    fn pure_vortex_has_single_weight() {
        let s = oam_spectrum(&vortex(3)).unwrap();
        assert!(s.weight(3) > 0.99, "{:?}", s.dominant());
        assert_eq!(s.dominant().0, 3);
        let total: f64 = s.weights.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bins_round_trip() {
        for l in -128..128 {
            assert_eq!(bin_to_l(l_to_bin(l, 256).unwrap(), 256), l);
        }
        assert!(l_to_bin(128, 256).is_none());
    }

    #[test]
    fn zero_field_is_degenerate() {
        let f = ComplexField::zeros(16, 1.0, Plane::Diffraction);
        assert!(matches!(oam_spectrum(&f), Err(Error::DegenerateField)));
    }
}
