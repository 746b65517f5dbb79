//! Far-field propagation, astigmatic transformation and per-order
//! extraction.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use log::{debug, warn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft2_centered, zoom_dft};
use crate::field::{centre, ComplexField, Plane};
use crate::modes::BeamParams;

/// Located diffraction order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderCenter {
    pub h: i32,
    /// Radians along x.
    pub theta: f64,
}

/// Far-field pattern plus the aperture field it came from, so orders can be
/// re-evaluated at finer angular sampling.
#[derive(Debug, Clone)]
pub struct DiffractionPattern {
    pub field: ComplexField,
    /// Radians per sample.
    pub theta_pitch: f64,
    pub order_centers: Vec<OrderCenter>,
    pub source: Arc<ComplexField>,
    pub wavelength: f64,
    /// Grating period in meters, when the input carries one.
    pub fringe_period: Option<f64>,
    /// `|E_out − E_in| / E_in`.
    pub parseval_error: f64,
}

impl DiffractionPattern {
    /// Angular spacing `λ/d` between orders.
    pub fn order_spacing(&self) -> Option<f64> {
        self.fringe_period.map(|d| self.wavelength / d)
    }

    /// Largest angle still inside the sampled window.
    pub fn half_band(&self) -> f64 {
        0.5 * self.field.n as f64 * self.theta_pitch
    }

    pub fn center_of(&self, h: i32) -> Option<f64> {
        self.order_centers
            .iter()
            .find(|c| c.h == h)
            .map(|c| c.theta)
    }
}

/// Quadratic astigmatic phase `exp(i c (x'² − y'²) / ρ_max²)` with `(x', y')`
/// rotated by `axis_angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AstigParams {
    pub strength: f64,
    /// Radians.
    pub axis_angle: f64,
}

impl AstigParams {
    pub fn new(strength: f64, axis_angle: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::InvalidBeam(format!(
                "astigmatism strength {strength}"
            )));
        }
        Ok(Self {
            strength,
            axis_angle,
        })
    }
}

/// Bits of the largest Parseval error seen by [`propagate`] in this process.
/// Non-negative floats order like their bit patterns.
static WORST_PARSEVAL: AtomicU64 = AtomicU64::new(0);

/// Largest relative energy drift of any propagation so far.
pub fn worst_parseval_error() -> f64 {
    f64::from_bits(WORST_PARSEVAL.load(Ordering::Relaxed))
}

/// Fraunhofer pattern of an aperture-plane field under unit plane-wave
/// illumination.
///
/// Samples are scaled by `pitch / θ_pitch` so `Σ|Ψ|² θ_pitch²` equals
/// `Σ|a|² pitch²`.
pub fn propagate(
    field: impl Into<Arc<ComplexField>>,
    beam: &BeamParams,
    fringe_period: Option<f64>,
) -> Result<DiffractionPattern> {
    let source: Arc<ComplexField> = field.into();
    source.require_plane(Plane::Aperture)?;
    let n = source.n;
    let theta_pitch = beam.wavelength / (n as f64 * source.pitch);
    let scale = source.pitch / theta_pitch;
    let mut values = fft2_centered(&source.values, n);
    values.iter_mut().for_each(|v| *v *= scale);
    let field = ComplexField {
        n,
        pitch: theta_pitch,
        origin: [0.0; 2],
        plane: Plane::Diffraction,
        values,
    };
    let e_in = source.energy();
    let e_out = field.energy();
    let parseval_error = if e_in > 0.0 {
        (e_out - e_in).abs() / e_in
    } else {
        0.0
    };
    WORST_PARSEVAL.fetch_max(parseval_error.to_bits(), Ordering::Relaxed);
    if parseval_error > 1e-10 {
        warn!("energy drifted by {parseval_error:.3e} in propagation");
    }
    let mut pattern = DiffractionPattern {
        field,
        theta_pitch,
        order_centers: Vec::new(),
        source,
        wavelength: beam.wavelength,
        fringe_period,
        parseval_error,
    };
    if fringe_period.is_some() {
        pattern.order_centers = locate_orders(&pattern);
    }
    Ok(pattern)
}

/// Finds order centers on the x-projection of the intensity: local maxima
/// taken strongest first with a minimum separation of half an order spacing,
/// refined by [`refine_center`] and labelled by the nearest `h`.
fn locate_orders(pattern: &DiffractionPattern) -> Vec<OrderCenter> {
    let Some(spacing) = pattern.order_spacing() else {
        return Vec::new();
    };
    let n = pattern.field.n;
    let mut projection = vec![0.0; n];
    for row in pattern.field.values.chunks(n) {
        for (p, v) in projection.iter_mut().zip(row) {
            *p += v.norm_sqr();
        }
    }
    let peak = projection.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| {
            projection[i] > projection[i - 1]
                && projection[i] >= projection[i + 1]
                && projection[i] > 1e-12 * peak
        })
        .collect();
    candidates.sort_by(|&a, &b| projection[b].total_cmp(&projection[a]).then(a.cmp(&b)));

    let spacing_px = spacing / pattern.theta_pitch;
    let mut kept: Vec<usize> = Vec::new();
    for i in candidates {
        if kept
            .iter()
            .all(|&k| (k as f64 - i as f64).abs() >= 0.5 * spacing_px)
        {
            kept.push(i);
        }
    }

    let c = centre(n);
    let mut centers: Vec<OrderCenter> = Vec::new();
    for i in kept {
        let start = (i as f64 - c) * pattern.theta_pitch;
        let theta = refine_center(pattern, [start, 0.0], 0.25 * spacing)[0];
        let h = (theta / spacing).round() as i32;
        if centers.iter().all(|o| o.h != h) {
            centers.push(OrderCenter { h, theta });
        }
    }
    centers.sort_by_key(|o| o.h);
    centers
}

/// Applies the astigmatic phase and propagates. Zero strength returns
/// exactly [`propagate`] of the untouched field.
pub fn astig_transform(
    field: impl Into<Arc<ComplexField>>,
    beam: &BeamParams,
    astig: &AstigParams,
    fringe_period: Option<f64>,
) -> Result<DiffractionPattern> {
    let field: Arc<ComplexField> = field.into();
    if astig.strength == 0.0 {
        return propagate(field, beam, fringe_period);
    }
    field.require_plane(Plane::Aperture)?;
    propagate(
        apply_astigmatism(&field, beam.rho_max, astig),
        beam,
        fringe_period,
    )
}

/// Multiplies an aperture field by the astigmatic phase.
pub fn apply_astigmatism(field: &ComplexField, rho_max: f64, astig: &AstigParams) -> ComplexField {
    let (s, c) = astig.axis_angle.sin_cos();
    let k = astig.strength / (rho_max * rho_max);
    let n = field.n;
    let mut out = field.clone();
    let zero = Complex64::new(0.0, 0.0);
    for (row, chunk) in out.values.chunks_mut(n).enumerate() {
        let y = field.coord(row, 1);
        for (col, v) in chunk.iter_mut().enumerate() {
            if *v == zero {
                continue;
            }
            let x = field.coord(col, 0);
            let xr = c * x + s * y;
            let yr = -s * x + c * y;
            *v *= Complex64::from_polar(1.0, k * (xr * xr - yr * yr));
        }
    }
    out
}

/// One diffraction order resampled on its own window.
#[derive(Debug, Clone)]
pub struct ExtractedOrder {
    pub h: i32,
    /// Diffraction-plane field whose origin is the order center.
    pub field: ComplexField,
    /// Fraction of the pattern's total energy inside the window.
    pub energy_fraction: f64,
    /// Fraction of the window energy in its outer rim, a proxy for leakage
    /// from neighbouring orders.
    pub rim_fraction: f64,
    pub warnings: Vec<String>,
}

/// Rim fraction above which the window is considered contaminated.
pub const OVERLAP_LIMIT: f64 = 0.05;

/// Crops a window one order spacing wide around order `h`, sampled
/// `oversample` times finer than the pattern, and re-centers it on the
/// intensity centroid of the order.
pub fn extract_order(
    pattern: &DiffractionPattern,
    h: i32,
    oversample: usize,
) -> Result<ExtractedOrder> {
    let spacing = pattern
        .order_spacing()
        .ok_or(Error::NoGratingPeriod { h })?;
    let oversample = oversample.max(1);
    let nominal = h as f64 * spacing;
    if nominal.abs() + 0.5 * spacing > pattern.half_band() {
        return Err(Error::OrderOutOfBand { h });
    }
    let center = refine_center(pattern, [nominal, 0.0], 0.25 * spacing);

    let step = pattern.theta_pitch / oversample as f64;
    let m = (spacing / step).ceil() as usize;
    let field = evaluate_window(pattern, center, m, step);

    let total = pattern.field.energy();
    let energy = field.energy();
    let energy_fraction = if total > 0.0 { energy / total } else { 0.0 };
    let rim_fraction = rim_energy(&field, 0.4 * spacing) / energy.max(f64::MIN_POSITIVE);
    let mut warnings = Vec::new();
    if rim_fraction > OVERLAP_LIMIT {
        let msg = format!(
            "order {h}: {:.1}% of the window energy sits near its rim (neighbouring-order overlap)",
            100.0 * rim_fraction
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    debug!(
        "order {h}: center {:.4e} rad, energy fraction {energy_fraction:.4e}",
        center[0]
    );
    Ok(ExtractedOrder {
        h,
        field,
        energy_fraction,
        rim_fraction,
        warnings,
    })
}

/// Zoom transform of the pattern's source onto an `m×m` window.
pub fn evaluate_window(
    pattern: &DiffractionPattern,
    center: [f64; 2],
    m: usize,
    step: f64,
) -> ComplexField {
    let src = &pattern.source;
    // Angles in cycles per aperture sample: θ · pitch / λ.
    let to_freq = src.pitch / pattern.wavelength;
    let mut values = zoom_dft(
        &src.values,
        src.n,
        [center[0] * to_freq, center[1] * to_freq],
        m,
        step * to_freq,
    );
    let scale = src.pitch * src.pitch / pattern.wavelength;
    values.iter_mut().for_each(|v| *v *= scale);
    ComplexField {
        n: m,
        pitch: step,
        origin: center,
        plane: Plane::Diffraction,
        values,
    }
}

/// Iterated intensity centroid over a disk of radius `radius`, starting at
/// `start`. A disk rather than a strip keeps the tails of neighbouring orders
/// from dragging the estimate.
pub fn refine_center(pattern: &DiffractionPattern, start: [f64; 2], radius: f64) -> [f64; 2] {
    let f = &pattern.field;
    let mut center = start;
    for _ in 0..5 {
        let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
        let (r0, r1) = index_span(f, 1, center[1], radius);
        let (c0, c1) = index_span(f, 0, center[0], radius);
        for row in r0..r1 {
            let ty = f.coord(row, 1);
            for col in c0..c1 {
                let tx = f.coord(col, 0);
                if (tx - center[0]).hypot(ty - center[1]) > radius {
                    continue;
                }
                let i = f.get(row, col).norm_sqr();
                w += i;
                sx += i * tx;
                sy += i * ty;
            }
        }
        if w <= 0.0 {
            break;
        }
        let next = [sx / w, sy / w];
        let moved = (next[0] - center[0]).hypot(next[1] - center[1]);
        center = next;
        if moved < 1e-3 * f.pitch {
            break;
        }
    }
    center
}

/// Index range covering `[at − half, at + half]` along `axis`.
fn index_span(f: &ComplexField, axis: usize, at: f64, half: f64) -> (usize, usize) {
    let c = centre(f.n);
    let lo = ((at - half - f.origin[axis]) / f.pitch + c)
        .floor()
        .max(0.0) as usize;
    let hi = ((at + half - f.origin[axis]) / f.pitch + c).ceil() + 1.0;
    (lo.min(f.n), (hi.max(0.0) as usize).min(f.n))
}

/// Energy within `radius` of the window origin.
pub fn disk_energy(field: &ComplexField, radius: f64) -> f64 {
    let mut e = 0.0;
    for row in 0..field.n {
        let dy = field.coord(row, 1) - field.origin[1];
        for col in 0..field.n {
            let dx = field.coord(col, 0) - field.origin[0];
            if dx.hypot(dy) <= radius {
                e += field.get(row, col).norm_sqr();
            }
        }
    }
    e * field.pitch * field.pitch
}

fn rim_energy(field: &ComplexField, radius: f64) -> f64 {
    let mut e = 0.0;
    for row in 0..field.n {
        let dy = field.coord(row, 1) - field.origin[1];
        for col in 0..field.n {
            let dx = field.coord(col, 0) - field.origin[0];
            if dx.hypot(dy) > radius {
                e += field.get(row, col).norm_sqr();
            }
        }
    }
    e * field.pitch * field.pitch
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(n: usize, radius: f64) -> ComplexField {
        ComplexField::from_fn(n, 1e-9, [0.0; 2], Plane::Aperture, |x, y| {
            Complex64::new(f64::from(u8::from(x.hypot(y) <= radius)), 0.0)
        })
    }

    #[test]
    fn parseval_holds() {
        let beam = BeamParams::new(200e3, 40e-9).unwrap();
        let p = propagate(disk(128, 40e-9), &beam, None).unwrap();
        assert!(p.parseval_error < 1e-12);
    }

    #[test]
    fn zero_astigmatism_is_identity() {
        let beam = BeamParams::new(200e3, 40e-9).unwrap();
        let a = propagate(disk(64, 20e-9), &beam, None).unwrap();
        let b = astig_transform(
            disk(64, 20e-9),
            &beam,
            &AstigParams::new(0.0, 0.3).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(a.field.values, b.field.values);
    }

    #[test]
    fn rejects_diffraction_input() {
        let beam = BeamParams::new(200e3, 40e-9).unwrap();
        let mut f = disk(32, 10e-9);
        f.plane = Plane::Diffraction;
        assert!(matches!(
            propagate(f, &beam, None),
            Err(Error::PlaneMismatch { .. })
        ));
    }

    #[test]
    fn extraction_needs_a_grating() {
        let beam = BeamParams::new(200e3, 40e-9).unwrap();
        let p = propagate(disk(32, 10e-9), &beam, None).unwrap();
        assert!(matches!(
            extract_order(&p, 1, 2),
            Err(Error::NoGratingPeriod { h: 1 })
        ));
    }

    #[test]
    fn negative_strength_rejected() {
        assert!(AstigParams::new(-1.0, 0.0).is_err());
    }
}
