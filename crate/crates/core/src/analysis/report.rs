//! Per-order reports, the even/odd verdict and CSV export.

use std::f64::consts::PI;
use std::io::Write;

use super::lobes::LobeCount;
use super::polar::resample;
use super::rings::count_rings;
use super::spectrum::{oam_spectrum_polar, radial_decompose_polar, OamSpectrum};
use super::{AnalysisOptions, EVEN_PURITY, ODD_PURITY};
use crate::error::Result;
use crate::hologram::HologramMask;
use crate::modes::{BeamParams, ModeIndex};
use crate::optics::ExtractedOrder;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub h: i32,
    pub oam_mean: f64,
    pub oam_spectrum: OamSpectrum,
    pub dominant_mode: ModeIndex,
    /// Joint weight of the dominant `(p, l)`: OAM weight times radial weight.
    pub purity: f64,
    pub radial_weights: Vec<f64>,
    pub ring_count: usize,
    pub outermost_ring_brightest: bool,
    /// `(rows, cols)` from the astigmatic run, when one was analyzed.
    pub lobe_grid: Option<(usize, usize)>,
    pub astig_strength: Option<f64>,
    /// Fraction of the pattern's energy inside the order window.
    pub integrated_intensity: f64,
    pub warnings: Vec<String>,
}

impl OrderReport {
    pub fn with_lobes(mut self, lobes: &LobeCount, strength: f64) -> Self {
        self.lobe_grid = Some((lobes.rows, lobes.cols));
        self.astig_strength = Some(strength);
        self.warnings
            .extend(lobes.warnings.iter().map(|w| format!("lobes: {w}")));
        self
    }
}

/// Azimuthal and radial decomposition plus ring count of one order.
pub fn analyze_order(
    order: &ExtractedOrder,
    beam: &BeamParams,
    opts: &AnalysisOptions,
) -> Result<OrderReport> {
    let polar = resample(&order.field, opts.polar_radial, opts.polar_azimuthal);
    let spectrum = oam_spectrum_polar(&polar)?;
    let (l, wl) = spectrum.dominant();
    let radial = radial_decompose_polar(&polar, l, beam, opts.max_p)?;
    let (p, wp) = radial.dominant();
    let rings = count_rings(&order.field, opts.ring_threshold);
    let mut warnings = order.warnings.clone();
    warnings.extend(radial.warnings.iter().cloned());
    Ok(OrderReport {
        h: order.h,
        oam_mean: spectrum.mean,
        dominant_mode: ModeIndex::new(p, l)?,
        purity: wl * wp,
        radial_weights: radial.weights,
        oam_spectrum: spectrum,
        ring_count: rings.count,
        outermost_ring_brightest: rings.outermost_brightest(),
        lobe_grid: None,
        astig_strength: None,
        integrated_intensity: order.energy_fraction,
        warnings,
    })
}

/// Mode expected in order `h`: `l → h·l`, `p` kept for odd `h` and reset to
/// 0 for even `h`.
pub fn expected_mode(source: ModeIndex, h: i32) -> ModeIndex {
    let p = if h % 2 == 0 { 0 } else { source.p };
    ModeIndex { p, l: h * source.l }
}

/// Binary-grating order amplitude `(2/hπ) sin(hπ a/d)`, squared.
pub fn envelope(h: i32, duty: f64) -> f64 {
    if h == 0 {
        return duty * duty;
    }
    let hf = h as f64;
    (2.0 / (hf * PI) * (hf * PI * duty).sin()).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub h: i32,
    pub expected: ModeIndex,
    pub measured: ModeIndex,
    pub purity: f64,
    pub l_pass: bool,
    pub p_pass: bool,
    pub purity_pass: bool,
    pub notes: Vec<String>,
}

impl VerdictRow {
    pub fn passed(&self) -> bool {
        self.l_pass && self.p_pass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeNote {
    pub duty: f64,
    /// `h` in 2..=4 with the smallest predicted envelope.
    pub predicted_min_h: i32,
    /// `h` in 2..=4 with the smallest measured intensity, when all were analyzed.
    pub measured_min_h: Option<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvenOddVerdict {
    pub source: ModeIndex,
    pub rows: Vec<VerdictRow>,
    pub envelope: EnvelopeNote,
}

impl EvenOddVerdict {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(VerdictRow::passed)
    }
}

/// Compares measured dominant modes against [`expected_mode`].
pub fn even_odd_report(mask: &HologramMask, orders: &[OrderReport]) -> Result<EvenOddVerdict> {
    let source = mask.source.mode().unwrap_or(ModeIndex { p: 0, l: 0 });
    let duty = mask.duty_estimate;
    let predicted_min_h = (2..=4)
        .min_by(|&a, &b| envelope(a, duty).total_cmp(&envelope(b, duty)))
        .unwrap_or(3);
    let measured: Vec<(i32, f64)> = (2..=4)
        .filter_map(|h| {
            orders
                .iter()
                .find(|o| o.h == h)
                .map(|o| (h, o.integrated_intensity))
        })
        .collect();
    let measured_min_h = (measured.len() == 3)
        .then(|| {
            measured
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|m| m.0)
        })
        .flatten();

    let mut rows = Vec::new();
    for o in orders.iter().filter(|o| o.h > 0) {
        let expected = expected_mode(source, o.h);
        let floor = if o.h % 2 == 0 {
            EVEN_PURITY
        } else {
            ODD_PURITY
        };
        let mut notes = o.warnings.clone();
        if o.purity < floor {
            notes.push(format!("purity {:.2} below {floor}", o.purity));
        }
        if o.h == predicted_min_h {
            notes.push(format!(
                "envelope minimum predicted at h = {predicted_min_h} for a/d = {duty:.2}"
            ));
        }
        rows.push(VerdictRow {
            h: o.h,
            expected,
            measured: o.dominant_mode,
            purity: o.purity,
            l_pass: o.dominant_mode.l == expected.l,
            p_pass: o.dominant_mode.p == expected.p,
            purity_pass: o.purity >= floor,
            notes,
        });
    }
    Ok(EvenOddVerdict {
        source,
        rows,
        envelope: EnvelopeNote {
            duty,
            predicted_min_h,
            measured_min_h,
        },
    })
}

/// Human-readable verdict summary.
pub fn write_verdict<W: Write>(mut out: W, label: &str, v: &EvenOddVerdict) -> Result<()> {
    writeln!(
        out,
        "mask {label}  source (p, l) = ({}, {})",
        v.source.p, v.source.l
    )?;
    for r in &v.rows {
        writeln!(
            out,
            "  h = {:>2}  expected ({}, {:>3})  measured ({}, {:>3})  purity {:.3}  {}",
            r.h,
            r.expected.p,
            r.expected.l,
            r.measured.p,
            r.measured.l,
            r.purity,
            if r.passed() { "PASS" } else { "FAIL" }
        )?;
        for n in &r.notes {
            writeln!(out, "          note: {n}")?;
        }
    }
    let measured = v
        .envelope
        .measured_min_h
        .map_or("n/a".to_string(), |h| h.to_string());
    writeln!(
        out,
        "  envelope a/d = {:.3}: predicted minimum h = {}, measured minimum h = {}",
        v.envelope.duty, v.envelope.predicted_min_h, measured
    )?;
    Ok(())
}

pub const CSV_HEADER: [&str; 11] = [
    "mask",
    "h",
    "oam_mean",
    "dominant_p",
    "dominant_l",
    "purity",
    "ring_count",
    "lobe_rows",
    "lobe_cols",
    "intensity",
    "warnings",
];

/// One CSV row per `(mask, h)`.
pub fn write_csv<W: Write>(out: W, rows: &[(String, OrderReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (label, r) in rows {
        let (lr, lc) = r
            .lobe_grid
            .map_or((String::new(), String::new()), |(a, b)| {
                (a.to_string(), b.to_string())
            });
        w.write_record([
            label.clone(),
            r.h.to_string(),
            format!("{:.6}", r.oam_mean),
            r.dominant_mode.p.to_string(),
            r.dominant_mode.l.to_string(),
            format!("{:.6}", r.purity),
            r.ring_count.to_string(),
            lr,
            lc,
            format!("{:.6e}", r.integrated_intensity),
            r.warnings.join("; "),
        ])?;
    }
    w.flush()?;
    Ok(())
}
