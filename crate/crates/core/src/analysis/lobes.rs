//! Lobe-array counting for astigmatically transformed orders.

use log::warn;

use super::polar::bilinear_real;
use crate::field::ComplexField;

pub const DEFAULT_LOBE_THRESHOLD: f64 = 0.2;

/// Second-moment eigenvalue ratio above which principal axes are considered
/// undefined.
const ISOTROPY_LIMIT: f64 = 0.9;
/// Peaks within this factor of the threshold make a count ambiguous.
const AMBIGUITY_BAND: f64 = 1.3;

#[derive(Debug, Clone, PartialEq)]
pub struct LobeCount {
    /// Lobes across the short axis.
    pub rows: usize,
    /// Lobes along the long axis, `cols ≥ rows`.
    pub cols: usize,
    /// One minus the mean valley-to-peak ratio between neighbouring lobes,
    /// averaged over both axes; 0 when no axis shows two lobes.
    pub contrast: f64,
    /// Minor over major second moment.
    pub isotropy: f64,
    pub ambiguous: bool,
    pub warnings: Vec<String>,
}

impl LobeCount {
    /// Hermite-Gauss indices `(m, n)` with `m = rows − 1` and `n = cols − 1`.
    pub fn hg_indices(&self) -> (usize, usize) {
        (self.rows.saturating_sub(1), self.cols.saturating_sub(1))
    }

    /// `(p, l) = (m, n − m)` read off the dark-line counts.
    pub fn implied_mode(&self) -> (usize, i64) {
        let (m, n) = self.hg_indices();
        (m, n as i64 - m as i64)
    }
}

struct AxisCount {
    peaks: Vec<usize>,
    profile: Vec<f64>,
    near_threshold: bool,
}

/// Clips intensity below `threshold` of its maximum, projects the remainder
/// onto the principal axes of its second-moment tensor and counts projection
/// maxima above `threshold` of each projection's peak.
pub fn count_lobes(field: &ComplexField, threshold: f64) -> LobeCount {
    let n = field.n;
    let raw = field.intensity();
    let top = raw.iter().copied().fold(0.0, f64::max);
    let clipped: Vec<f64> = raw
        .iter()
        .map(|&v| if v >= threshold * top { v } else { 0.0 })
        .collect();

    let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (i, &v) in clipped.iter().enumerate() {
        w += v;
        sx += v * (i % n) as f64;
        sy += v * (i / n) as f64;
    }
    if !(w > 0.0) {
        return LobeCount {
            rows: 0,
            cols: 0,
            contrast: 0.0,
            isotropy: 1.0,
            ambiguous: true,
            warnings: vec!["no intensity to count".into()],
        };
    }
    let (cx, cy) = (sx / w, sy / w);
    let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
    for (i, &v) in clipped.iter().enumerate() {
        let dx = (i % n) as f64 - cx;
        let dy = (i / n) as f64 - cy;
        mxx += v * dx * dx;
        myy += v * dy * dy;
        mxy += v * dx * dy;
    }
    let (mxx, myy, mxy) = (mxx / w, myy / w, mxy / w);
    let angle = 0.5 * (2.0 * mxy).atan2(mxx - myy);
    let mean = 0.5 * (mxx + myy);
    let spread = (0.25 * (mxx - myy).powi(2) + mxy * mxy).sqrt();
    let (major, minor) = (mean + spread, mean - spread);
    let isotropy = if major > 0.0 { minor / major } else { 1.0 };

    let (s, c) = angle.sin_cos();
    let long = project(&clipped, n, [cx, cy], [c, s], threshold);
    let short = project(&clipped, n, [cx, cy], [-s, c], threshold);

    let contrasts: Vec<f64> = [&long, &short]
        .iter()
        .filter(|a| a.peaks.len() > 1)
        .map(|a| valley_contrast(a))
        .collect();
    let contrast = if contrasts.is_empty() {
        0.0
    } else {
        contrasts.iter().sum::<f64>() / contrasts.len() as f64
    };

    let mut warnings = Vec::new();
    if isotropy > ISOTROPY_LIMIT {
        warnings.push(format!(
            "nearly isotropic pattern (moment ratio {isotropy:.2}); principal axes ill-defined"
        ));
    }
    if long.near_threshold || short.near_threshold {
        warnings.push("projection peak within 1.3x of the counting threshold".into());
    }
    for msg in &warnings {
        warn!("lobe count: {msg}");
    }
    let (a, b) = (long.peaks.len(), short.peaks.len());
    LobeCount {
        rows: a.min(b),
        cols: a.max(b),
        contrast,
        isotropy,
        ambiguous: !warnings.is_empty(),
        warnings,
    }
}

/// Index of the sweep entry with the highest contrast; ties go to the
/// smaller strength.
pub fn select_best(sweep: &[(f64, LobeCount)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (c, lc)) in sweep.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (bc, bl) = &sweep[b];
                let better = lc.contrast > bl.contrast || (lc.contrast == bl.contrast && c < bc);
                Some(if better { i } else { b })
            }
        };
    }
    best
}

fn project(data: &[f64], n: usize, center: [f64; 2], axis: [f64; 2], threshold: f64) -> AxisCount {
    let perp = [-axis[1], axis[0]];
    let half = (n / 2) as isize;
    let mut profile = Vec::with_capacity(n);
    for t in -half..half {
        let mut acc = 0.0;
        for s in -half..half {
            let (t, s) = (t as f64, s as f64);
            let x = center[0] + t * axis[0] + s * perp[0];
            let y = center[1] + t * axis[1] + s * perp[1];
            acc += bilinear_real(data, n, x, y);
        }
        profile.push(acc);
    }
    let peak = profile.iter().copied().fold(0.0, f64::max);
    let mut peaks = Vec::new();
    let mut near_threshold = false;
    for i in 1..profile.len().saturating_sub(1) {
        if profile[i] > profile[i - 1] && profile[i] >= profile[i + 1] {
            let rel = profile[i] / peak;
            if rel > threshold {
                peaks.push(i);
            }
            if rel > threshold / AMBIGUITY_BAND && rel < threshold * AMBIGUITY_BAND {
                near_threshold = true;
            }
        }
    }
    AxisCount {
        peaks,
        profile,
        near_threshold,
    }
}

fn valley_contrast(a: &AxisCount) -> f64 {
    let ratios: Vec<f64> = a
        .peaks
        .windows(2)
        .map(|w| {
            let valley = a.profile[w[0]..=w[1]]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            valley / a.profile[w[0]].min(a.profile[w[1]])
        })
        .collect();
    1.0 - ratios.iter().sum::<f64>() / ratios.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Plane;
    use num_complex::Complex64;

    fn spots(centres: &[(f64, f64)]) -> ComplexField {
        let centres = centres.to_vec();
        ComplexField::from_fn(96, 1.0, [0.0; 2], Plane::Diffraction, move |x, y| {
            let v: f64 = centres
                .iter()
                .map(|&(a, b)| (-((x - a).powi(2) + (y - b).powi(2)) / 12.0).exp())
                .sum();
            Complex64::new(v, 0.0)
        })
    }

    #[test]
    fn two_by_three_array() {
        let mut c = Vec::new();
        for r in [-8.0, 8.0] {
            for k in [-20.0, 0.0, 20.0] {
                c.push((k, r));
            }
        }
        let lc = count_lobes(&spots(&c), DEFAULT_LOBE_THRESHOLD);
        assert_eq!((lc.rows, lc.cols), (2, 3));
        assert_eq!(lc.implied_mode(), (1, 1));
        assert!(lc.contrast > 0.9);
    }

    #[test]
    fn rotated_pair() {
        let lc = count_lobes(
            &spots(&[(-10.0, -10.0), (10.0, 10.0)]),
            DEFAULT_LOBE_THRESHOLD,
        );
        assert_eq!((lc.rows, lc.cols), (1, 2));
        assert!(!lc.ambiguous);
    }

    #[test]
    fn ring_is_ambiguous() {
        let f = ComplexField::from_fn(96, 1.0, [0.0; 2], Plane::Diffraction, |x, y| {
            Complex64::new((-(x.hypot(y) - 20.0).powi(2) / 10.0).exp(), 0.0)
        });
        assert!(count_lobes(&f, DEFAULT_LOBE_THRESHOLD).ambiguous);
    }
}
