//! Sampled complex fields on the aperture or diffraction plane.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Which plane a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plane {
    /// Coordinates in meters.
    Aperture,
    /// Coordinates are scattering angles in radians.
    Diffraction,
}

impl Plane {
    pub fn tag(self) -> &'static str {
        match self {
            Plane::Aperture => "aperture",
            Plane::Diffraction => "diffraction",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Plane> {
        match tag {
            "aperture" => Some(Plane::Aperture),
            "diffraction" => Some(Plane::Diffraction),
            _ => None,
        }
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Square raster of complex samples, row-major, `values[row * n + col]`.
///
/// Sample `(row, col)` sits at `x = origin[0] + (col - (n-1)/2)·pitch`,
/// `y = origin[1] + (row - (n-1)/2)·pitch`, so the grid is symmetric about
/// `origin`. `pitch` is meters per sample on the aperture plane and radians
/// per sample on the diffraction plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub n: usize,
    pub pitch: f64,
    pub origin: [f64; 2],
    pub plane: Plane,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(
        n: usize,
        pitch: f64,
        origin: [f64; 2],
        plane: Plane,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {n}x{n} raster",
                values.len()
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "pitch {pitch} must be positive"
            )));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidGrid("non-finite sample".into()));
        }
        Ok(Self {
            n,
            pitch,
            origin,
            plane,
            values,
        })
    }

    pub fn zeros(n: usize, pitch: f64, plane: Plane) -> Self {
        Self {
            n,
            pitch,
            origin: [0.0, 0.0],
            plane,
            values: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Builds a field by evaluating `f(x, y)` at every sample, in parallel.
    pub fn from_fn<F>(n: usize, pitch: f64, origin: [f64; 2], plane: Plane, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let c = centre(n);
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(row, out)| {
            let y = origin[1] + (row as f64 - c) * pitch;
            for (col, v) in out.iter_mut().enumerate() {
                let x = origin[0] + (col as f64 - c) * pitch;
                *v = f(x, y);
            }
        });
        Self {
            n,
            pitch,
            origin,
            plane,
            values,
        }
    }

    /// Physical coordinate of column (or row) index `i` along x (or y).
    pub fn coord(&self, i: usize, axis: usize) -> f64 {
        self.origin[axis] + (i as f64 - centre(self.n)) * self.pitch
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.n + col]
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `Σ |v|² · pitch²`, the discrete squared norm.
    pub fn energy(&self) -> f64 {
        let rows: Vec<f64> = self
            .values
            .par_chunks(self.n)
            .map(|row| row.iter().map(|v| v.norm_sqr()).sum())
            .collect();
        rows.iter().sum::<f64>() * self.pitch * self.pitch
    }

    /// `Σ conj(self)·other · pitch²`. Rasters must share size and pitch.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.check_compatible(other)?;
        // Row partials are summed in a fixed order so results are reproducible.
        let rows: Vec<Complex64> = self
            .values
            .par_chunks(self.n)
            .zip(other.values.par_chunks(other.n))
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(a, b)| a.conj() * b).sum())
            .collect();
        let s: Complex64 = rows.iter().sum();
        Ok(s * self.pitch * self.pitch)
    }

    /// Normalized cross-correlation magnitude `|<a,b>| / (‖a‖ ‖b‖)`, which is
    /// insensitive to a global phase.
    pub fn ncc(&self, other: &ComplexField) -> Result<f64> {
        let ab = self.inner(other)?.norm();
        let denom = (self.energy() * other.energy()).sqrt();
        if denom == 0.0 {
            return Err(Error::DegenerateField);
        }
        Ok(ab / denom)
    }

    pub fn conj(&self) -> ComplexField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&mut self, s: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Rescales to unit discrete energy.
    pub fn normalize(&mut self) -> Result<()> {
        let e = self.energy();
        if !(e > 0.0) {
            return Err(Error::DegenerateField);
        }
        self.scale(Complex64::new(1.0 / e.sqrt(), 0.0));
        Ok(())
    }

    pub fn require_plane(&self, expected: Plane) -> Result<()> {
        if self.plane != expected {
            return Err(Error::PlaneMismatch {
                expected,
                found: self.plane,
            });
        }
        Ok(())
    }

    fn check_compatible(&self, other: &ComplexField) -> Result<()> {
        if self.n != other.n || (self.pitch - other.pitch).abs() > 1e-12 * self.pitch {
            return Err(Error::InvalidGrid(format!(
                "raster mismatch: {}x{} @ {} vs {}x{} @ {}",
                self.n, self.n, self.pitch, other.n, other.n, other.pitch
            )));
        }
        Ok(())
    }
}

/// Index of the optical axis, `(n-1)/2`; half-integer for even `n`.
pub fn centre(n: usize) -> f64 {
    (n as f64 - 1.0) * 0.5
}

/// Normalized cross-correlation of two real images (non-centered), used for
/// intensity comparisons.
pub fn ncc_real(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_coordinates() {
        let f = ComplexField::zeros(4, 2.0, Plane::Aperture);
        assert_eq!(f.coord(0, 0), -3.0);
        assert_eq!(f.coord(3, 0), 3.0);
    }

    #[test]
    fn ncc_ignores_global_phase() {
        let a = ComplexField::from_fn(8, 1.0, [0.0; 2], Plane::Aperture, |x, y| {
            Complex64::new(x, y * y)
        });
        let mut b = a.clone();
        b.scale(Complex64::from_polar(3.0, 1.1));
        assert!((a.ncc(&b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(ComplexField::new(3, 1.0, [0.0; 2], Plane::Aperture, vec![]).is_err());
    }

    #[test]
    fn plane_tags_round_trip() {
        for p in [Plane::Aperture, Plane::Diffraction] {
            assert_eq!(Plane::from_tag(p.tag()), Some(p));
        }
    }
}
