//! Bilinear resampling of a square raster onto a polar grid about its
//! origin.

use num_complex::Complex64;

use crate::field::{centre, ComplexField};

/// `values[ir * n_azimuthal + ia]` sampled at radius `radii[ir]` (same units
/// as the field pitch) and angle `2π ia / n_azimuthal`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub n_radial: usize,
    pub n_azimuthal: usize,
    pub radii: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl PolarGrid {
    pub fn ring(&self, ir: usize) -> &[Complex64] {
        &self.values[ir * self.n_azimuthal..(ir + 1) * self.n_azimuthal]
    }

    /// Ring-area weighted energy, `Σ |v|² r`.
    pub fn energy(&self) -> f64 {
        self.radii
            .iter()
            .enumerate()
            .map(|(ir, r)| r * self.ring(ir).iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// Samples the field on `n_radial` rings at midpoint radii out to the
/// inscribed circle of the raster, each with `n_azimuthal` points.
pub fn resample(field: &ComplexField, n_radial: usize, n_azimuthal: usize) -> PolarGrid {
    let c = centre(field.n);
    let r_max = c * field.pitch;
    let radii: Vec<f64> = (0..n_radial)
        .map(|i| (i as f64 + 0.5) * r_max / n_radial as f64)
        .collect();
    let trig: Vec<(f64, f64)> = (0..n_azimuthal)
        .map(|k| (2.0 * std::f64::consts::PI * k as f64 / n_azimuthal as f64).sin_cos())
        .collect();
    let mut values = Vec::with_capacity(n_radial * n_azimuthal);
    for &r in &radii {
        let rp = r / field.pitch;
        for &(s, co) in &trig {
            values.push(bilinear(field, c + rp * co, c + rp * s));
        }
    }
    PolarGrid {
        n_radial,
        n_azimuthal,
        radii,
        values,
    }
}

/// Interpolates at fractional column `x` and row `y`; points outside the
/// raster read as zero.
pub fn bilinear(field: &ComplexField, x: f64, y: f64) -> Complex64 {
    sample(
        field.n,
        x,
        y,
        |r, c| field.get(r, c),
        Complex64::new(0.0, 0.0),
    )
}

/// Same interpolation over a real row-major raster.
pub fn bilinear_real(data: &[f64], n: usize, x: f64, y: f64) -> f64 {
    sample(n, x, y, |r, c| data[r * n + c], 0.0)
}

fn sample<T, F>(n: usize, x: f64, y: f64, at: F, zero: T) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    F: Fn(usize, usize) -> T,
{
    let last = (n - 1) as f64;
    if !(x >= 0.0 && y >= 0.0 && x <= last && y <= last) {
        return zero;
    }
    let x0 = (x.floor() as usize).min(n.saturating_sub(2));
    let y0 = (y.floor() as usize).min(n.saturating_sub(2));
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    at(y0, x0) * ((1.0 - fx) * (1.0 - fy))
        + at(y0, x0 + 1) * (fx * (1.0 - fy))
        + at(y0 + 1, x0) * ((1.0 - fx) * fy)
        + at(y0 + 1, x0 + 1) * (fx * fy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Plane;

    #[test]
    fn linear_fields_are_reproduced() {
        let f = ComplexField::from_fn(16, 0.5, [1.0, 2.0], Plane::Diffraction, |x, y| {
            Complex64::new(x - 1.0, 2.0 * (y - 2.0))
        });
        let p = resample(&f, 4, 8);
        for ir in 0..4 {
            for ia in 0..8 {
                let phi = 2.0 * std::f64::consts::PI * ia as f64 / 8.0;
                let expect = Complex64::new(p.radii[ir] * phi.cos(), 2.0 * p.radii[ir] * phi.sin());
                assert!((p.values[ir * 8 + ia] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn outside_reads_zero() {
        assert_eq!(bilinear_real(&[1.0; 4], 2, 1.5, 0.0), 0.0);
        assert_eq!(bilinear_real(&[1.0; 4], 2, 1.0, 1.0), 1.0);
    }
}
