//! Forked-grating transmission functions, their binarization, and the plain
//! rectangular grating used as a control.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{centre, ComplexField, Plane};
use crate::modes::{peak_amplitude, zone_boundaries, ApertureGrid, BeamParams, ModeIndex};
use crate::specfun::bessel_j;

/// Tilted-reference grating parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingSpec {
    /// Fringes across the aperture diameter, `k_x0 ρ_max / π`.
    pub periods: u32,
    /// Radians per meter.
    pub k_x0: f64,
    /// Binarization threshold as a fraction of `T_max`.
    pub alpha: f64,
    pub rho_max: f64,
}

impl GratingSpec {
    pub fn new(periods: u32, rho_max: f64, alpha: f64) -> Result<Self> {
        if periods < 8 {
            return Err(Error::InvalidGrating(format!(
                "{periods} periods, need at least 8"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidThreshold(alpha));
        }
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(Error::InvalidGrating(format!("rho_max {rho_max}")));
        }
        Ok(Self {
            periods,
            k_x0: periods as f64 * PI / rho_max,
            alpha,
            rho_max,
        })
    }

    /// Fringe period `d = 2π / k_x0` in meters.
    pub fn fringe_period(&self) -> f64 {
        2.0 * PI / self.k_x0
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidThreshold(alpha));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn check_grid(&self, grid: &ApertureGrid) -> Result<()> {
        let samples = self.fringe_period() / grid.pitch;
        if samples < 4.0 {
            return Err(Error::InvalidGrating(format!(
                "fringe period spans {samples:.2} samples, need at least 4"
            )));
        }
        grid.check_aperture(self.rho_max)
    }
}

/// What a transmission function encodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskSource {
    Mode(ModeIndex),
    PlainGrating,
}

impl MaskSource {
    pub fn mode(&self) -> Option<ModeIndex> {
        match self {
            MaskSource::Mode(m) => Some(*m),
            MaskSource::PlainGrating => None,
        }
    }

    pub fn azimuthal_index(&self) -> i32 {
        self.mode().map_or(0, |m| m.l)
    }
}

/// Real transmission raster in `[0, 4]`, zero outside the aperture.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub grid: ApertureGrid,
    pub values: Vec<f64>,
    pub t_max: f64,
    pub source: MaskSource,
    pub grating: GratingSpec,
}

/// Binary mask, `bits[row * n + col] ∈ {0, 1}`.
#[derive(Debug, Clone)]
pub struct HologramMask {
    pub grid: ApertureGrid,
    pub bits: Vec<u8>,
    pub source: MaskSource,
    pub grating: GratingSpec,
    /// Mean open fraction `a/d` of the fringes.
    pub duty_estimate: f64,
}

impl HologramMask {
    /// Unit plane-wave illumination of the mask.
    pub fn to_field(&self) -> ComplexField {
        ComplexField {
            n: self.grid.n,
            pitch: self.grid.pitch,
            origin: [0.0; 2],
            plane: Plane::Aperture,
            values: self
                .bits
                .iter()
                .map(|&b| Complex64::new(b as f64, 0.0))
                .collect(),
        }
    }

    pub fn open_fraction(&self) -> f64 {
        let n = self.grid.n;
        let r = self.grid.radius_samples(self.grating.rho_max);
        let (mut inside, mut open) = (0usize, 0usize);
        for (i, &b) in self.bits.iter().enumerate() {
            let (x, y) = pixel_xy(i, n);
            if x.hypot(y) <= r {
                inside += 1;
                open += b as usize;
            }
        }
        open as f64 / inside.max(1) as f64
    }
}

fn pixel_xy(i: usize, n: usize) -> (f64, f64) {
    let c = centre(n);
    ((i % n) as f64 - c, (i / n) as f64 - c)
}

fn fill<F>(grid: &ApertureGrid, rho_max: f64, f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let n = grid.n;
    let c = centre(n);
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(row, out)| {
        let y = (row as f64 - c) * grid.pitch;
        for (col, v) in out.iter_mut().enumerate() {
            let x = (col as f64 - c) * grid.pitch;
            if x.hypot(y) <= rho_max {
                *v = f(x, y);
            }
        }
    });
    values
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// `T = A² + 1 + 2A cos(lφ + k_x0 x)` with `A = J_l(ξρ/ρ_max) / max|J_l|`.
pub fn transmission_exact(
    mode: ModeIndex,
    beam: &BeamParams,
    grating: &GratingSpec,
    grid: &ApertureGrid,
) -> Result<Transmission> {
    grating.check_grid(grid)?;
    if (grating.rho_max - beam.rho_max).abs() > 1e-12 * beam.rho_max {
        return Err(Error::InvalidGrating(
            "grating and beam disagree on rho_max".into(),
        ));
    }
    let xi = mode.xi()?;
    let peak = peak_amplitude(mode.l)?;
    let (l, k, rho_max) = (mode.l, grating.k_x0, beam.rho_max);
    let values = fill(grid, rho_max, |x, y| {
        let a = bessel_j(l, xi * x.hypot(y) / rho_max) / peak;
        a * a + 1.0 + 2.0 * a * (l as f64 * y.atan2(x) + k * x).cos()
    });
    let t_max = max_of(&values);
    Ok(Transmission {
        grid: *grid,
        values,
        t_max,
        source: MaskSource::Mode(mode),
        grating: *grating,
    })
}

/// `T = 2 (1 + cos k_x0 x)` inside the aperture.
pub fn transmission_plain(grating: &GratingSpec, grid: &ApertureGrid) -> Result<Transmission> {
    grating.check_grid(grid)?;
    let k = grating.k_x0;
    let values = fill(grid, grating.rho_max, |x, _| 2.0 * (1.0 + (k * x).cos()));
    let t_max = max_of(&values);
    Ok(Transmission {
        grid: *grid,
        values,
        t_max,
        source: MaskSource::PlainGrating,
        grating: *grating,
    })
}

/// `bit = 1` where `T ≥ α T_max`; zero outside the aperture.
pub fn binarize(t: &Transmission, alpha: f64) -> Result<HologramMask> {
    let grating = t.grating.with_alpha(alpha)?;
    let bits = threshold_bits(t, alpha);
    let ones = bits.iter().filter(|&&b| b == 1).count();
    if ones == 0 {
        warn!("binarization at alpha = {alpha} produced an all-zero mask");
    }
    let r = t.grid.radius_samples(grating.rho_max);
    let inside = (PI * r * r) as usize;
    if ones >= inside {
        warn!("binarization at alpha = {alpha} left the aperture fully open");
    }
    let period = grating.fringe_period() / t.grid.pitch;
    let duty_estimate = duty_of(&bits, t.grid.n, period);
    Ok(HologramMask {
        grid: t.grid,
        bits,
        source: t.source,
        grating,
        duty_estimate,
    })
}

fn threshold_bits(t: &Transmission, alpha: f64) -> Vec<u8> {
    let level = alpha * t.t_max;
    let r = t.grid.radius_samples(t.grating.rho_max);
    let n = t.grid.n;
    t.values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let (x, y) = pixel_xy(i, n);
            u8::from(x.hypot(y) <= r && v >= level && v > 0.0)
        })
        .collect()
}

/// Mean open fraction of the fringes, measured row by row: each run of open
/// samples contributes its length over the distance to the next run start,
/// provided that distance is at most 1.5 fringe periods. Falls back to the
/// open fraction of the raster when no fringe pair qualifies.
pub fn duty_of(bits: &[u8], n: usize, period_samples: f64) -> f64 {
    let per_row: Vec<(f64, usize)> = bits
        .par_chunks(n)
        .map(|row| {
            let mut starts = Vec::new();
            let mut lengths = Vec::new();
            let mut col = 0;
            while col < row.len() {
                if row[col] == 1 {
                    let s = col;
                    while col < row.len() && row[col] == 1 {
                        col += 1;
                    }
                    starts.push(s);
                    lengths.push(col - s);
                } else {
                    col += 1;
                }
            }
            let mut sum = 0.0;
            let mut count = 0;
            for i in 1..starts.len() {
                let gap = (starts[i] - starts[i - 1]) as f64;
                if gap <= 1.5 * period_samples {
                    sum += lengths[i - 1] as f64 / gap;
                    count += 1;
                }
            }
            (sum, count)
        })
        .collect();
    let (sum, count) = per_row.iter().fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if count > 0 {
        sum / count as f64
    } else {
        let ones = bits.iter().filter(|&&b| b == 1).count();
        ones as f64 / bits.len().max(1) as f64
    }
}

/// Bisection for the threshold whose mask has the requested duty.
pub fn calibrate_alpha(t: &Transmission, target_duty: f64) -> Result<f64> {
    if !(target_duty > 0.0 && target_duty < 1.0) {
        return Err(Error::InvalidGrating(format!(
            "duty target {target_duty} outside (0, 1)"
        )));
    }
    let period = t.grating.fringe_period() / t.grid.pitch;
    let (mut lo, mut hi) = (1e-3, 1.0 - 1e-3);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let duty = duty_of(&threshold_bits(t, mid), t.grid.n, period);
        // Raising alpha closes fringes.
        if duty > target_duty {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Binarized plain grating at `grating.alpha`.
pub fn plain_grating(grating: &GratingSpec, grid: &ApertureGrid) -> Result<HologramMask> {
    binarize(&transmission_plain(grating, grid)?, grating.alpha)
}

/// Threshold at which a plain grating opens a fraction `duty` of each period:
/// `cos(k x) ≥ 2α − 1` holds on `arccos(2α−1)/π` of the period.
pub fn alpha_for_plain_duty(duty: f64) -> f64 {
    0.5 * (1.0 + (PI * duty).cos())
}

/// Fringe phase of one annular zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonePhase {
    /// Meters.
    pub inner: f64,
    pub outer: f64,
    /// Radians in `(-π, π]`.
    pub phase: f64,
    /// Radial extent in fringe periods.
    pub fringes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneReport {
    pub zones: Vec<ZonePhase>,
    /// Wrapped phase steps between neighbouring zones.
    pub shifts: Vec<f64>,
    /// Every step lies within `tolerance` of π.
    pub complementary: bool,
    pub tolerance: f64,
}

/// Demodulates the carrier `exp(i(k_x0 x + lφ))` over each annular zone of
/// the source mode and compares neighbouring fringe phases.
pub fn fringe_shift_check(mask: &HologramMask) -> Result<ZoneReport> {
    let mode = mask
        .source
        .mode()
        .ok_or_else(|| Error::InvalidMode("plain grating has no radial zones".into()))?;
    let rho_max = mask.grating.rho_max;
    let d = mask.grating.fringe_period();
    let mut edges = vec![0.0];
    edges.extend(zone_boundaries(mode, rho_max)?);
    edges.push(rho_max);

    let n = mask.grid.n;
    let pitch = mask.grid.pitch;
    let k = mask.grating.k_x0;
    let mut zones = Vec::with_capacity(edges.len() - 1);
    for (zone, w) in edges.windows(2).enumerate() {
        let (inner, outer) = (w[0], w[1]);
        let fringes = (outer - inner) / d;
        if fringes < 2.0 {
            return Err(Error::InsufficientFringes { zone, fringes });
        }
        let in_zone = |i: usize| {
            let (x, y) = pixel_xy(i, n);
            let rho = x.hypot(y) * pitch;
            rho >= inner && rho < outer
        };
        let (sum, count) = mask
            .bits
            .iter()
            .enumerate()
            .filter(|&(i, _)| in_zone(i))
            .fold((0.0, 0usize), |a, (_, &b)| (a.0 + b as f64, a.1 + 1));
        let mean = sum / count.max(1) as f64;
        let acc: Complex64 = mask
            .bits
            .iter()
            .enumerate()
            .filter(|&(i, _)| in_zone(i))
            .map(|(i, &b)| {
                let (x, y) = pixel_xy(i, n);
                let arg = k * x * pitch + mode.l as f64 * y.atan2(x);
                Complex64::from_polar(b as f64 - mean, -arg)
            })
            .sum();
        zones.push(ZonePhase {
            inner,
            outer,
            phase: acc.arg(),
            fringes,
        });
    }
    let tolerance = 0.2;
    let shifts: Vec<f64> = zones
        .windows(2)
        .map(|z| wrap(z[1].phase - z[0].phase))
        .collect();
    let complementary = shifts.iter().all(|s| (s.abs() - PI).abs() <= tolerance);
    Ok(ZoneReport {
        zones,
        shifts,
        complementary,
        tolerance,
    })
}

fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}
