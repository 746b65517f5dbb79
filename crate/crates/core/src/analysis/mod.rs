//! Mode analysis of extracted diffraction orders.

pub mod lobes;
pub mod polar;
pub mod report;
pub mod rings;
pub mod spectrum;

pub use lobes::{count_lobes, select_best, LobeCount, DEFAULT_LOBE_THRESHOLD};
pub use polar::{resample, PolarGrid};
pub use report::{
    analyze_order, envelope, even_odd_report, expected_mode, write_csv, write_verdict,
    EvenOddVerdict, OrderReport, VerdictRow,
};
pub use rings::{count_rings, RingCount, DEFAULT_RING_THRESHOLD};
pub use spectrum::{
    azimuthal_derivative, oam_spectrum, radial_decompose, OamSpectrum, RadialDecomposition,
};

/// Purity an odd order must reach.
pub const ODD_PURITY: f64 = 0.7;
/// Purity an even order must reach.
pub const EVEN_PURITY: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub max_p: u32,
    pub ring_threshold: f64,
    pub lobe_threshold: f64,
    pub polar_radial: usize,
    pub polar_azimuthal: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            max_p: 4,
            ring_threshold: DEFAULT_RING_THRESHOLD,
            lobe_threshold: DEFAULT_LOBE_THRESHOLD,
            polar_radial: spectrum::DEFAULT_RADIAL,
            polar_azimuthal: spectrum::DEFAULT_AZIMUTHAL,
        }
    }
}
