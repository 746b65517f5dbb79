//! Centered 2-D discrete Fourier transforms.
//!
//! Both transforms index samples symmetrically about `c = (n-1)/2`:
//!
//! ```text
//! F[k] = n^{-1/2} Σ_j a[j] exp(∓2πi (j-c)(k-c)/n)      (per axis)
//! ```
//!
//! which is unitary and maps a field symmetric about the optical axis to one
//! symmetric about the zero angle, with no half-pixel shift for even `n`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::field::centre;

struct Plan {
    fft: Arc<dyn Fft<f64>>,
    twiddle: Vec<Complex64>,
    global: Complex64,
}

impl Plan {
    fn new(n: usize, direction: FftDirection) -> Self {
        let sign = match direction {
            FftDirection::Forward => -1.0,
            FftDirection::Inverse => 1.0,
        };
        let fft = FftPlanner::new().plan_fft(n, direction);
        // (j-c)(k-c) = jk - c·j - c·k + c². Reduce the integer numerators
        // exactly before converting to an angle.
        let two_n = 2 * n as u64;
        let twiddle = (0..n as u64)
            .map(|j| {
                let m = ((n as u64 - 1) * j) % two_n;
                Complex64::from_polar(1.0, -sign * PI * m as f64 / n as f64)
            })
            .collect();
        let nm1 = n as u64 - 1;
        let m2 = (nm1 * nm1) % (4 * n as u64);
        let global = Complex64::from_polar(1.0, sign * PI * m2 as f64 / (2.0 * n as f64));
        Self {
            fft,
            twiddle,
            global,
        }
    }

    fn rows(&self, data: &mut [Complex64], n: usize) {
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
            |scratch, row| {
                for (v, t) in row.iter_mut().zip(&self.twiddle) {
                    *v *= t;
                }
                self.fft.process_with_scratch(row, scratch);
                for (v, t) in row.iter_mut().zip(&self.twiddle) {
                    *v *= t;
                }
            },
        );
    }
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(col, dst)| {
        for (row, v) in dst.iter_mut().enumerate() {
            *v = data[row * n + col];
        }
    });
    out
}

fn transform(data: &[Complex64], n: usize, direction: FftDirection) -> Vec<Complex64> {
    assert_eq!(data.len(), n * n, "raster is not {n}x{n}");
    let plan = Plan::new(n, direction);
    let mut work = data.to_vec();
    plan.rows(&mut work, n);
    let mut work = transpose(&work, n);
    plan.rows(&mut work, n);
    let mut out = transpose(&work, n);
    let s = plan.global * plan.global / n as f64;
    out.par_iter_mut().for_each(|v| *v *= s);
    out
}

/// Unitary centered forward transform (kernel `exp(-2πi…)`).
pub fn fft2_centered(data: &[Complex64], n: usize) -> Vec<Complex64> {
    transform(data, n, FftDirection::Forward)
}

/// Inverse of [`fft2_centered`].
pub fn ifft2_centered(data: &[Complex64], n: usize) -> Vec<Complex64> {
    transform(data, n, FftDirection::Inverse)
}

/// Direct evaluation of the forward transform on an arbitrary square window
/// of frequencies.
///
/// `data` is an `n×n` raster with unit sample spacing and axis at `(n-1)/2`.
/// Output sample `(v, u)` is
/// `Σ a[y,x] exp(-2πi (x·fx[u] + y·fy[v]))` with
/// `f[u] = centre_freq + (u - (m-1)/2)·step` in cycles per sample. Only the
/// bounding box of nonzero samples is visited. No normalization is applied.
pub fn zoom_dft(
    data: &[Complex64],
    n: usize,
    centre_freq: [f64; 2],
    m: usize,
    step: f64,
) -> Vec<Complex64> {
    assert_eq!(data.len(), n * n, "raster is not {n}x{n}");
    let zero = Complex64::new(0.0, 0.0);
    let Some((r0, r1, c0, c1)) = support(data, n) else {
        return vec![zero; m * m];
    };
    let c = centre(n);
    let cm = centre(m);
    let freq = |axis: usize, u: usize| centre_freq[axis] + (u as f64 - cm) * step;
    let kernel = |pos: f64, f: f64| {
        let t = pos * f;
        Complex64::from_polar(1.0, -2.0 * PI * (t - t.round()))
    };

    let cols = c1 - c0 + 1;
    // ex[j * m + u] = exp(-2πi x_j fx_u)
    let ex: Vec<Complex64> = (0..cols)
        .flat_map(|j| {
            let x = (c0 + j) as f64 - c;
            (0..m).map(move |u| (x, u))
        })
        .map(|(x, u)| kernel(x, freq(0, u)))
        .collect();

    // Partial transform along x for each occupied row.
    let partial: Vec<Vec<Complex64>> = (r0..=r1)
        .into_par_iter()
        .map(|row| {
            let mut acc = vec![zero; m];
            let src = &data[row * n + c0..=row * n + c1];
            for (j, a) in src.iter().enumerate() {
                if *a == zero {
                    continue;
                }
                let k = &ex[j * m..(j + 1) * m];
                for (o, e) in acc.iter_mut().zip(k) {
                    *o += a * e;
                }
            }
            acc
        })
        .collect();

    let mut out = vec![zero; m * m];
    out.par_chunks_mut(m).enumerate().for_each(|(v, dst)| {
        let fy = freq(1, v);
        for (i, row) in partial.iter().enumerate() {
            let y = (r0 + i) as f64 - c;
            let e = kernel(y, fy);
            for (o, p) in dst.iter_mut().zip(row) {
                *o += e * p;
            }
        }
    });
    out
}

/// Row/column bounds of the nonzero samples, inclusive.
fn support(data: &[Complex64], n: usize) -> Option<(usize, usize, usize, usize)> {
    let zero = Complex64::new(0.0, 0.0);
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for (row, chunk) in data.chunks(n).enumerate() {
        let first = chunk.iter().position(|v| *v != zero);
        let last = chunk.iter().rposition(|v| *v != zero);
        if let (Some(a), Some(b)) = (first, last) {
            bounds = Some(match bounds {
                None => (row, row, a, b),
                Some((r0, _, c0, c1)) => (r0, row, c0.min(a), c1.max(b)),
            });
        }
    }
    bounds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(data: &[Complex64], n: usize) -> Vec<Complex64> {
        let c = centre(n);
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for kv in 0..n {
            for ku in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for y in 0..n {
                    for x in 0..n {
                        let ph = -2.0
                            * PI
                            * ((x as f64 - c) * (ku as f64 - c) + (y as f64 - c) * (kv as f64 - c))
                            / n as f64;
                        s += data[y * n + x] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[kv * n + ku] = s / n as f64;
            }
        }
        out
    }

    fn sample(n: usize) -> Vec<Complex64> {
        (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect()
    }

    #[test]
    fn matches_direct_sum() {
        for n in [4, 6, 8] {
            let a = sample(n);
            let fast = fft2_centered(&a, n);
            let slow = naive(&a, n);
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).norm() < 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn round_trip() {
        let n = 16;
        let a = sample(n);
        let back = ifft2_centered(&fft2_centered(&a, n), n);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn zoom_at_native_spacing_equals_fft() {
        let n = 16;
        let a = sample(n);
        let full = fft2_centered(&a, n);
        let z = zoom_dft(&a, n, [0.0, 0.0], n, 1.0 / n as f64);
        for (f, s) in full.iter().zip(&z) {
            assert!((f - s / n as f64).norm() < 1e-12);
        }
    }

    #[test]
    fn zoom_of_empty_raster_is_zero() {
        let n = 8;
        let a = vec![Complex64::new(0.0, 0.0); n * n];
        assert!(zoom_dft(&a, n, [0.1, 0.0], 5, 0.01)
            .iter()
            .all(|v| v.norm() == 0.0));
    }
}
