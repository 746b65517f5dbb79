//! Truncated Bessel beam (TBB) modes on the aperture plane and their
//! analytic far-field transforms (FT-TBB).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Plane};
use crate::specfun::{bessel_first_peak, bessel_j, bessel_j_prime, bessel_zero, MAX_ORDER};

const PLANCK: f64 = 6.626_070_15e-34;
const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radial index `p ≥ 0` and azimuthal index `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub p: u32,
    pub l: i32,
}

impl ModeIndex {
    pub fn new(p: u32, l: i32) -> Result<Self> {
        if l.unsigned_abs() > MAX_ORDER {
            return Err(Error::InvalidMode(format!(
                "|l| = {} exceeds {MAX_ORDER}",
                l.abs()
            )));
        }
        Ok(Self { p, l })
    }

    /// `ξ_pl`, the `(p+1)`-th zero of `J_|l|`.
    pub fn xi(&self) -> Result<f64> {
        bessel_zero(self.l.unsigned_abs(), self.p)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.p, self.l)
    }
}

impl FromStr for ModeIndex {
    type Err = Error;

    /// Parses `p:l`, e.g. `1:-2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidMode(format!("expected p:l, got {s:?}"));
        let (p, l) = s.trim().split_once(':').ok_or_else(bad)?;
        let p = p.trim().parse().map_err(|_| bad())?;
        let l = l.trim().parse().map_err(|_| bad())?;
        ModeIndex::new(p, l)
    }
}

/// Electron beam and aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    /// Electronvolts.
    pub kinetic_energy: f64,
    /// Meters, relativistic de Broglie wavelength.
    pub wavelength: f64,
    /// Radians per meter, `2π/λ`.
    pub k0: f64,
    /// Aperture radius in meters.
    pub rho_max: f64,
}

impl BeamParams {
    pub fn new(kinetic_energy: f64, rho_max: f64) -> Result<Self> {
        if !(kinetic_energy.is_finite() && kinetic_energy > 0.0) {
            return Err(Error::InvalidBeam(format!(
                "kinetic energy {kinetic_energy} eV"
            )));
        }
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(Error::InvalidBeam(format!("rho_max {rho_max} m")));
        }
        let wavelength = electron_wavelength(kinetic_energy);
        Ok(Self {
            kinetic_energy,
            wavelength,
            k0: 2.0 * PI / wavelength,
            rho_max,
        })
    }

    /// Diffraction angle (radians) corresponding to `u = k_⊥ ρ_max`.
    pub fn angle_of_u(&self, u: f64) -> f64 {
        u / (self.k0 * self.rho_max)
    }

    /// Dimensionless `u = k_⊥ ρ_max` of a small diffraction angle.
    pub fn u_of_angle(&self, theta: f64) -> f64 {
        self.k0 * self.rho_max * theta
    }
}

/// `λ = h / sqrt(2 m₀ eV (1 + eV / 2m₀c²))`.
pub fn electron_wavelength(kinetic_energy_ev: f64) -> f64 {
    let ev = kinetic_energy_ev * ELEMENTARY_CHARGE;
    let rest = ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    PLANCK / (2.0 * ELECTRON_MASS * ev * (1.0 + ev / (2.0 * rest))).sqrt()
}

/// Square aperture-plane sampling grid centered on the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureGrid {
    pub n: usize,
    /// Meters per sample.
    pub pitch: f64,
}

impl ApertureGrid {
    pub fn new(n: usize, pitch: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two ≥ 16"
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "pitch {pitch} must be positive"
            )));
        }
        Ok(Self { n, pitch })
    }

    /// Grid whose aperture spans about 40% of the half-width, with the pitch
    /// nudged so one fringe of a `periods`-fringe grating covers an even
    /// whole number of samples.
    pub fn for_aperture(rho_max: f64, n: usize, periods: u32) -> Result<Self> {
        if periods == 0 {
            return Err(Error::InvalidGrating("periods must be positive".into()));
        }
        let half = (0.4 * (n / 2) as f64 / periods as f64).round().max(1.0) as usize;
        let samples_per_period = 2 * half;
        let grid = Self::new(
            n,
            2.0 * rho_max / (periods as f64 * samples_per_period as f64),
        )?;
        grid.check_aperture(rho_max)?;
        Ok(grid)
    }

    pub fn check_aperture(&self, rho_max: f64) -> Result<()> {
        if self.n as f64 * self.pitch <= 2.0 * rho_max {
            return Err(Error::InvalidGrid(format!(
                "aperture diameter {:.3e} m does not fit in {} x {:.3e} m",
                2.0 * rho_max,
                self.n,
                self.pitch
            )));
        }
        Ok(())
    }

    /// Aperture radius in samples.
    pub fn radius_samples(&self, rho_max: f64) -> f64 {
        rho_max / self.pitch
    }

    /// Angular pitch of the centered transform, `λ / (n·pitch)`.
    pub fn theta_pitch(&self, wavelength: f64) -> f64 {
        wavelength / (self.n as f64 * self.pitch)
    }
}

/// Analytic unit-norm constant `1 / (√π ρ_max |J_{l+1}(ξ_pl)|)`.
pub fn tbb_normalization(mode: ModeIndex, rho_max: f64) -> Result<f64> {
    let l = mode.l.unsigned_abs() as i32;
    let xi = mode.xi()?;
    Ok(1.0 / (PI.sqrt() * rho_max * bessel_j(l + 1, xi).abs()))
}

/// `N_pl J_l(ξ_pl ρ/ρ_max) e^{ilφ}` inside the aperture, zero outside,
/// rescaled to unit discrete norm.
pub fn tbb_field(mode: ModeIndex, beam: &BeamParams, grid: &ApertureGrid) -> Result<ComplexField> {
    grid.check_aperture(beam.rho_max)?;
    let xi = mode.xi()?;
    let half_oscillation = PI * beam.rho_max / xi;
    if half_oscillation < 4.0 * grid.pitch {
        return Err(Error::InvalidGrid(format!(
            "mode {mode} oscillates every {:.2} samples, need at least 4",
            half_oscillation / grid.pitch
        )));
    }
    let norm = tbb_normalization(mode, beam.rho_max)?;
    let rho_max = beam.rho_max;
    let mut field = ComplexField::from_fn(grid.n, grid.pitch, [0.0; 2], Plane::Aperture, |x, y| {
        let rho = x.hypot(y);
        if rho > rho_max {
            return Complex64::new(0.0, 0.0);
        }
        let phi = y.atan2(x);
        Complex64::from_polar(
            norm * bessel_j(mode.l, xi * rho / rho_max),
            mode.l as f64 * phi,
        )
    });
    field.normalize()?;
    Ok(field)
}

/// Radial FT-TBB profile in `u = k_⊥ ρ_max`:
/// `ξ J'_l(ξ) J_l(u) / (ξ² − u²)`, with the removable singularity at `u = ξ`
/// replaced by its limit `−J'_l(ξ)²/2`.
pub fn ft_tbb_radial(mode: ModeIndex, u: f64) -> Result<f64> {
    let xi = mode.xi()?;
    let dj = bessel_j_prime(mode.l, xi);
    if (u - xi).abs() < 1e-6 * xi {
        return Ok(-0.5 * dj * dj);
    }
    Ok(xi * dj * bessel_j(mode.l, u) / (xi * xi - u * u))
}

/// Samples `i^l · ft_tbb_radial(u) · e^{ilφ}` on an `n×n` diffraction-plane
/// window centered on angle `origin` (which becomes the beam axis), then
/// normalizes to unit energy over the window.
pub fn ft_tbb_window(
    mode: ModeIndex,
    beam: &BeamParams,
    n: usize,
    theta_pitch: f64,
    origin: [f64; 2],
) -> Result<ComplexField> {
    let xi = mode.xi()?;
    let dj = bessel_j_prime(mode.l, xi);
    let limit = -0.5 * dj * dj;
    let prefactor = Complex64::i().powi(mode.l);
    let scale = beam.k0 * beam.rho_max;
    let mut field = ComplexField::from_fn(n, theta_pitch, origin, Plane::Diffraction, |tx, ty| {
        let (dx, dy) = (tx - origin[0], ty - origin[1]);
        let u = scale * dx.hypot(dy);
        let radial = if (u - xi).abs() < 1e-6 * xi {
            limit
        } else {
            xi * dj * bessel_j(mode.l, u) / (xi * xi - u * u)
        };
        prefactor * Complex64::from_polar(radial, mode.l as f64 * dy.atan2(dx))
    });
    field.normalize()?;
    Ok(field)
}

/// Analytic far field of [`tbb_field`] on the full diffraction grid of the
/// centered transform.
pub fn ft_tbb_field(
    mode: ModeIndex,
    beam: &BeamParams,
    grid: &ApertureGrid,
) -> Result<ComplexField> {
    ft_tbb_window(
        mode,
        beam,
        grid.n,
        grid.theta_pitch(beam.wavelength),
        [0.0; 2],
    )
}

/// Radii (meters) of the `p` interior nodes of the mode, innermost first.
pub fn zone_boundaries(mode: ModeIndex, rho_max: f64) -> Result<Vec<f64>> {
    let l = mode.l.unsigned_abs();
    let xi = mode.xi()?;
    (0..mode.p)
        .map(|k| Ok(bessel_zero(l, k)? * rho_max / xi))
        .collect()
}

/// Stepped radial phase `R_p(ρ)`: 0 where `J_|l|(ξρ/ρ_max) ≥ 0`, π where it
/// is negative. Only the sign of the radial factor matters, so `±l` agree.
pub fn radial_phase(mode: ModeIndex, rho: f64, rho_max: f64) -> Result<f64> {
    let boundaries = zone_boundaries(mode, rho_max)?;
    let crossed = boundaries.iter().filter(|&&b| rho > b).count();
    Ok(if crossed % 2 == 0 { 0.0 } else { PI })
}

/// Largest value of `|J_l|` on the positive axis.
pub fn peak_amplitude(l: i32) -> Result<f64> {
    let order = l.unsigned_abs();
    let x = bessel_first_peak(order)?;
    Ok(bessel_j(order as i32, x).abs())
}
