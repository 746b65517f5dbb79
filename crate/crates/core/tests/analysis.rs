use num_complex::Complex64;
use proptest::prelude::*;
use tbb_cgh::analysis::{
    analyze_order, count_lobes, count_rings, envelope, even_odd_report, oam_spectrum,
    radial_decompose, select_best, write_csv, AnalysisOptions, LobeCount, DEFAULT_LOBE_THRESHOLD,
    DEFAULT_RING_THRESHOLD,
};
use tbb_cgh::field::{ComplexField, Plane};
use tbb_cgh::hologram::{binarize, calibrate_alpha, transmission_exact, GratingSpec};
use tbb_cgh::modes::{ft_tbb_window, tbb_field, ApertureGrid, BeamParams, ModeIndex};
use tbb_cgh::optics::{apply_astigmatism, evaluate_window, propagate, AstigParams, ExtractedOrder};

const RHO: f64 = 2e-6;
const M: usize = 205;

fn beam() -> BeamParams {
    BeamParams::new(200e3, RHO).unwrap()
}

/// Exact far field of a mode on a window the size of one order spacing.
fn window(p: u32, l: i32) -> ComplexField {
    let b = beam();
    let spacing = b.wavelength / (2.0 * RHO / 20.0);
    ft_tbb_window(
        ModeIndex::new(p, l).unwrap(),
        &b,
        M,
        spacing / M as f64,
        [0.0; 2],
    )
    .unwrap()
}

fn as_order(h: i32, field: ComplexField, energy_fraction: f64) -> ExtractedOrder {
    ExtractedOrder {
        h,
        field,
        energy_fraction,
        rim_fraction: 0.0,
        warnings: Vec::new(),
    }
}

#[test]
fn ring_count_is_radial_order_plus_one() {
    for l in [1, 2] {
        for p in 0..=2 {
            let rings = count_rings(&window(p, l), DEFAULT_RING_THRESHOLD);
            assert_eq!(rings.count, p as usize + 1, "(p, l) = ({p}, {l})");
            assert!(rings.outermost_brightest(), "(p, l) = ({p}, {l})");
        }
    }
}

#[test]
fn exact_modes_have_pure_spectra() {
    for l in [-2, 1, 3] {
        let s = oam_spectrum(&window(1, l)).unwrap();
        assert!(s.weight(l) > 0.98, "l = {l}: {}", s.weight(l));
        assert_eq!(s.dominant().0, l);
        assert!((s.mean - l as f64).abs() < 0.05);
    }
    for p in 0..=2 {
        let r = radial_decompose(&window(p, 1), 1, &beam(), 4).unwrap();
        assert!(r.weights[p as usize] > 0.9, "p = {p}: {:?}", r.weights);
        assert_eq!(r.dominant().0, p);
    }
}

#[test]
fn analyzing_an_exact_order_recovers_its_mode() {
    let opts = AnalysisOptions::default();
    for (p, l) in [(0, 2), (1, 1), (2, 3)] {
        let rep = analyze_order(&as_order(1, window(p, l), 0.1), &beam(), &opts).unwrap();
        assert_eq!(rep.dominant_mode, ModeIndex::new(p, l).unwrap());
        assert!(rep.purity > 0.9, "({p}, {l}): {}", rep.purity);
        assert_eq!(rep.ring_count, p as usize + 1);
    }
}

#[test]
fn untransformed_vortex_gives_no_lobe_grid() {
    let lc = count_lobes(&window(0, 1), DEFAULT_LOBE_THRESHOLD);
    assert!(lc.ambiguous);
    assert!(lc.isotropy > 0.9);
}

#[test]
fn astigmatic_vortex_splits_into_lobes() {
    // A first-order vortex under a cylindrical phase becomes a two-lobe
    // Hermite-Gauss-like pattern.
    let b = beam();
    let grid = ApertureGrid::for_aperture(RHO, 512, 20).unwrap();
    let f = tbb_field(ModeIndex::new(0, 1).unwrap(), &b, &grid).unwrap();
    let f = apply_astigmatism(&f, RHO, &AstigParams::new(4.0, 0.0).unwrap());
    let pattern = propagate(f, &b, None).unwrap();
    let step = b.angle_of_u(0.15);
    let w = evaluate_window(&pattern, [0.0; 2], 160, step);
    let lc = count_lobes(&w, DEFAULT_LOBE_THRESHOLD);
    assert_eq!((lc.rows, lc.cols), (1, 2), "{lc:?}");
    assert_eq!(lc.implied_mode(), (0, 1));
}

fn lobes(contrast: f64) -> LobeCount {
    LobeCount {
        rows: 1,
        cols: 2,
        contrast,
        isotropy: 0.3,
        ambiguous: false,
        warnings: Vec::new(),
    }
}

#[test]
fn sweep_selection_prefers_contrast_then_weaker_strength() {
    let sweep = vec![
        (4.0, lobes(0.5)),
        (2.0, lobes(0.8)),
        (3.0, lobes(0.8)),
        (6.0, lobes(0.1)),
    ];
    assert_eq!(select_best(&sweep), Some(1));
    let sweep = vec![(5.0, lobes(0.7)), (3.0, lobes(0.7))];
    assert_eq!(select_best(&sweep), Some(1));
    assert_eq!(select_best(&[]), None);
}

#[test]
fn exact_orders_satisfy_the_even_odd_rule() {
    let source = ModeIndex::new(1, 1).unwrap();
    let grid = ApertureGrid::for_aperture(RHO, 1024, 20).unwrap();
    let spec = GratingSpec::new(20, RHO, 0.5).unwrap();
    let t = transmission_exact(source, &beam(), &spec, &grid).unwrap();
    let mask = binarize(&t, calibrate_alpha(&t, 0.4).unwrap()).unwrap();
    let opts = AnalysisOptions::default();
    let reports: Vec<_> = (1..=4)
        .map(|h: i32| {
            let p = if h % 2 == 0 { 0 } else { source.p };
            let order = as_order(h, window(p, h * source.l), envelope(h, mask.duty_estimate));
            analyze_order(&order, &beam(), &opts).unwrap()
        })
        .collect();
    let verdict = even_odd_report(&mask, &reports).unwrap();
    assert!(verdict.all_passed(), "{:?}", verdict.rows);
    assert_eq!(verdict.envelope.predicted_min_h, 3);
    assert_eq!(verdict.envelope.measured_min_h, Some(3));

    let mut wrong = reports.clone();
    wrong[1] = analyze_order(&as_order(2, window(1, 2), 0.1), &beam(), &opts).unwrap();
    let verdict = even_odd_report(&mask, &wrong).unwrap();
    assert!(!verdict.all_passed());
    assert!(!verdict.rows[1].p_pass && verdict.rows[1].l_pass);
}

#[test]
fn csv_rows_follow_the_header() {
    let rep = analyze_order(
        &as_order(1, window(0, 1), 0.25),
        &beam(),
        &AnalysisOptions::default(),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &[("p0_l1".to_string(), rep)]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "mask,h,oam_mean,dominant_p,dominant_l,purity,ring_count,lobe_rows,lobe_cols,intensity,warnings");
    assert!(lines[1].starts_with("p0_l1,1,"));
    assert!(lines[1].contains(",2.500000e-1,"));
}

/// Superposition of a few exact windows with the given coefficients.
fn mixture(coeffs: &[(i32, f64, f64)]) -> ComplexField {
    let mut out = ComplexField::zeros(M, window(0, 1).pitch, Plane::Diffraction);
    for &(l, re, im) in coeffs {
        let w = window(0, l);
        for (o, v) in out.values.iter_mut().zip(&w.values) {
            *o += Complex64::new(re, im) * v;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn conjugation_mirrors_the_oam_spectrum(
        coeffs in prop::collection::vec((-3i32..=3, -1.0f64..1.0, -1.0f64..1.0), 1..4)
    ) {
        let f = mixture(&coeffs);
        prop_assume!(f.energy() > 1e-6);
        let a = oam_spectrum(&f).unwrap();
        let b = oam_spectrum(&f.conj()).unwrap();
        // The Nyquist bin has no mirror partner.
        let (mut ma, mut mb) = (0.0, 0.0);
        for (&l, &w) in a.weights.iter().filter(|(l, _)| b.weights.contains_key(&-**l)) {
            prop_assert!((w - b.weight(-l)).abs() < 1e-9);
            ma += l as f64 * w;
            mb += l as f64 * b.weight(l);
        }
        prop_assert!((ma + mb).abs() < 1e-9);
    }

    #[test]
    fn radial_weights_ignore_global_phase(phase in -3.2f64..3.2, p in 0u32..=2) {
        let f = window(p, 1);
        let mut g = f.clone();
        g.scale(Complex64::from_polar(1.0, phase));
        let a = radial_decompose(&f, 1, &beam(), 3).unwrap();
        let b = radial_decompose(&g, 1, &beam(), 3).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
