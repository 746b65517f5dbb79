//! The `mask → simulate → astig → analyze` pipeline behind the CLI verbs.
//!
//! Every stage reads its inputs from and writes its outputs under one output
//! directory:
//!
//! ```text
//! masks/<label>.pgm, masks/<label>.meta
//! simulate/<label>_pattern.pgm, simulate/<label>_h<h>.cfld,
//! simulate/<label>_orders.csv, simulate/comparison.csv, simulate/run.log
//! astig/<label>_c<c>_h<h>.pgm, astig/sweep.csv, astig/selection.csv
//! reports/orders.csv, reports/verdict.txt, reports/gratings.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use num_complex::Complex64;

use crate::analysis::{
    analyze_order, count_lobes, envelope, even_odd_report, select_best, write_csv, write_verdict,
    AnalysisOptions, LobeCount, OrderReport,
};
use crate::config::{AlphaMode, RunConfig};
use crate::error::{Error, Result};
use crate::field::{ncc_real, ComplexField, Plane};
use crate::hologram::{
    alpha_for_plain_duty, binarize, calibrate_alpha, plain_grating, transmission_exact,
    GratingSpec, HologramMask, MaskSource,
};
use crate::io::{
    prepare_output, read_artifact, read_cfld, read_meta, read_pgm, write_cfld, write_intensity_pgm,
    write_mask_pgm, write_meta,
};
use crate::modes::{ApertureGrid, BeamParams, ModeIndex};
use crate::optics::{
    astig_transform, disk_energy, evaluate_window, extract_order, propagate, AstigParams,
    DiffractionPattern, ExtractedOrder,
};

const MICRO: f64 = 1e6;
/// First-order intensity correlation the binary mask must reach against the
/// unbinarized transmission.
pub const COMPARISON_FLOOR: f64 = 0.95;
/// Relative intensity below which a grating order counts as suppressed.
pub const SUPPRESSION_LIMIT: f64 = 1e-3;
/// First zero of `J_1`: the aperture's central Airy lobe ends at `u` equal
/// to this, and plain-grating orders are compared over that lobe so the
/// tails of neighbouring orders stay out.
const AIRY_FIRST_ZERO: f64 = 3.831_705_970_207_512;

/// One mask of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskSpec {
    Mode(ModeIndex),
    /// Plain grating with the given open fraction.
    Plain(f64),
}

impl MaskSpec {
    /// File-name stem, e.g. `p1_l-2` or `grating_ad0.50`.
    pub fn label(&self) -> String {
        match self {
            MaskSpec::Mode(m) => format!("p{}_l{}", m.p, m.l),
            MaskSpec::Plain(d) => format!("grating_ad{d:.2}"),
        }
    }
}

/// Outcome of `analyze`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSummary {
    pub reports: Vec<(String, OrderReport)>,
    /// Every even-odd expectation held on every mode mask.
    pub even_odd_passed: bool,
    /// Even orders of every `a/d = 0.5` grating fell below the suppression limit.
    pub suppression_passed: bool,
}

/// Selected `(rows, cols, c)` per `(mask label, h)`.
type LobeSelection = BTreeMap<(String, i32), (usize, usize, f64)>;

pub struct Pipeline {
    pub config: RunConfig,
    pub out: PathBuf,
    pub force: bool,
    beam: BeamParams,
    grid: ApertureGrid,
}

impl Pipeline {
    pub fn new(config: RunConfig, out: Option<PathBuf>, force: bool) -> Result<Self> {
        config.validate()?;
        let out = out.unwrap_or_else(|| config.output_dir.clone());
        let beam = config.beam()?;
        let grid = config.grid()?;
        Ok(Self {
            config,
            out,
            force,
            beam,
            grid,
        })
    }

    pub fn beam(&self) -> &BeamParams {
        &self.beam
    }

    pub fn grid(&self) -> &ApertureGrid {
        &self.grid
    }

    pub fn specs(&self) -> Vec<MaskSpec> {
        let modes = self.config.modes.iter().map(|&m| MaskSpec::Mode(m));
        modes
            .chain(
                self.config
                    .plain_gratings
                    .iter()
                    .map(|&d| MaskSpec::Plain(d)),
            )
            .collect()
    }

    fn path(&self, dir: &str, file: String) -> PathBuf {
        self.out.join(dir).join(file)
    }

    fn grating(&self) -> Result<GratingSpec> {
        GratingSpec::new(self.config.periods, self.config.rho_max_m, 0.5)
    }

    /// Synthesizes one mask in memory.
    pub fn build_mask(&self, spec: MaskSpec) -> Result<HologramMask> {
        let grating = self.grating()?;
        match spec {
            MaskSpec::Mode(mode) => {
                let t = transmission_exact(mode, &self.beam, &grating, &self.grid)?;
                let alpha = match self.config.alpha_mode {
                    AlphaMode::Fixed(a) => a,
                    AlphaMode::DutyTarget(d) => calibrate_alpha(&t, d)?,
                };
                binarize(&t, alpha)
            }
            MaskSpec::Plain(duty) => {
                plain_grating(&grating.with_alpha(alpha_for_plain_duty(duty))?, &self.grid)
            }
        }
    }

    /// Writes `masks/<label>.pgm` and its sidecar for every mask.
    pub fn run_mask(&self) -> Result<Vec<PathBuf>> {
        if self.config.modes.is_empty() {
            return Err(Error::Config {
                line: 0,
                message: "mode list is empty".into(),
            });
        }
        let mut written = Vec::new();
        for spec in self.specs() {
            let mask = self.build_mask(spec)?;
            let (pgm, meta) = self.write_mask(spec, &mask)?;
            info!(
                "{}: alpha {:.4}, duty {:.3}",
                spec.label(),
                mask.grating.alpha,
                mask.duty_estimate
            );
            written.push(pgm);
            written.push(meta);
        }
        Ok(written)
    }

    fn write_mask(&self, spec: MaskSpec, mask: &HologramMask) -> Result<(PathBuf, PathBuf)> {
        let label = spec.label();
        let pgm = self.path("masks", format!("{label}.pgm"));
        let meta = self.path("masks", format!("{label}.meta"));
        let g = &mask.grating;
        let source = match mask.source {
            MaskSource::Mode(m) => m.to_string(),
            MaskSource::PlainGrating => "plain".into(),
        };
        let comment = format!(
            "mode = {source}\nalpha = {}\nk_x0 = {:e}\nrho_max = {:e}\npitch = {:e}",
            g.alpha, g.k_x0, g.rho_max, mask.grid.pitch
        );
        write_mask_pgm(&pgm, mask.grid.n, &mask.bits, &comment, self.force)?;
        write_meta(
            &meta,
            &[
                ("source", source),
                ("n", mask.grid.n.to_string()),
                ("pitch", format!("{:e}", mask.grid.pitch)),
                ("periods", g.periods.to_string()),
                ("rho_max", format!("{:e}", g.rho_max)),
                ("k_x0", format!("{:e}", g.k_x0)),
                ("alpha", g.alpha.to_string()),
                ("duty", mask.duty_estimate.to_string()),
                ("open_fraction", mask.open_fraction().to_string()),
            ],
            self.force,
        )?;
        Ok((pgm, meta))
    }

    /// Reads a mask written by [`Pipeline::run_mask`].
    pub fn read_mask(&self, spec: MaskSpec) -> Result<HologramMask> {
        let label = spec.label();
        let pgm_path = self.path("masks", format!("{label}.pgm"));
        let meta_path = self.path("masks", format!("{label}.meta"));
        let meta = read_meta(&meta_path)?;
        let pgm = read_pgm(&pgm_path)?;
        let bad = |m: String| Error::Format {
            path: meta_path.clone(),
            message: m,
        };
        let get = |k: &str| meta.get(k).ok_or_else(|| bad(format!("missing key {k}")));
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| bad(format!("bad value for {k}")))
        };
        let n = num("n")? as usize;
        if pgm.width != n || pgm.height != n {
            return Err(bad(format!(
                "image is {}x{}, sidecar says {n}",
                pgm.width, pgm.height
            )));
        }
        let grid = ApertureGrid::new(n, num("pitch")?)?;
        let grating = GratingSpec::new(num("periods")? as u32, num("rho_max")?, num("alpha")?)?;
        let source = match get("source")?.as_str() {
            "plain" => MaskSource::PlainGrating,
            s => MaskSource::Mode(s.parse()?),
        };
        let bits = pgm.data.iter().map(|&v| u8::from(v > 0)).collect();
        Ok(HologramMask {
            grid,
            bits,
            source,
            grating,
            duty_estimate: num("duty")?,
        })
    }

    /// Loads a mask from disk, or builds it when no mask was written.
    fn obtain_mask(&self, spec: MaskSpec) -> Result<HologramMask> {
        let pgm = self.path("masks", format!("{}.pgm", spec.label()));
        if pgm.exists() {
            self.read_mask(spec)
        } else {
            info!("{}: no mask on disk, generating in-run", spec.label());
            self.build_mask(spec)
        }
    }

    /// Far field of every mask: full-pattern image, per-order field dumps,
    /// order table and the binary-versus-exact first-order comparison.
    pub fn run_simulate(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut log = String::new();
        let mut comparison = csv::Writer::from_writer(Vec::new());
        comparison.write_record(["mask", "ncc_intensity", "pass"])?;
        for spec in self.specs() {
            let label = spec.label();
            let mask = self.obtain_mask(spec)?;
            let d = mask.grating.fringe_period();
            let pattern = propagate(mask.to_field(), &self.beam, Some(d))?;
            writeln!(
                log,
                "{label}: parseval error {:.3e}",
                pattern.parseval_error
            )
            .ok();

            let image = self.path("simulate", format!("{label}_pattern.pgm"));
            let comment = format!(
                "far-field intensity of {label}\ntheta_pitch_urad = {}",
                pattern.theta_pitch * MICRO
            );
            write_intensity_pgm(
                &image,
                pattern.field.n,
                &pattern.field.intensity(),
                &comment,
                self.force,
            )?;
            written.push(image);

            let mut table = csv::Writer::from_writer(Vec::new());
            table.write_record([
                "h",
                "located_urad",
                "nominal_urad",
                "energy_fraction",
                "rim_fraction",
                "core_fraction",
                "dumped",
                "warnings",
            ])?;
            let mut first: Option<ExtractedOrder> = None;
            let total = pattern.field.energy();
            let core_radius = self.beam.angle_of_u(AIRY_FIRST_ZERO);
            for h in -self.config.h_max..=self.config.h_max {
                let located = pattern
                    .center_of(h)
                    .map_or(String::new(), |t| format!("{:.6}", t * MICRO));
                let nominal = format!("{:.6}", h as f64 * self.beam.wavelength / d * MICRO);
                let extracted = if h >= 0 {
                    match extract_order(&pattern, h, self.config.oversample) {
                        Ok(o) => Some(o),
                        Err(Error::OrderOutOfBand { h }) => {
                            let msg = format!(
                                "{label}: order {h} lies outside the angular window, skipped"
                            );
                            warn!("{msg}");
                            writeln!(log, "{msg}").ok();
                            None
                        }
                        Err(e) => return Err(e),
                    }
                } else {
                    None
                };
                let Some(order) = extracted else {
                    table.write_record([
                        h.to_string(),
                        located,
                        nominal,
                        "".into(),
                        "".into(),
                        "".into(),
                        "false".into(),
                        "".into(),
                    ])?;
                    continue;
                };
                for w in &order.warnings {
                    writeln!(log, "{label}: {w}").ok();
                }
                let dump = self.path("simulate", format!("{label}_h{h}.cfld"));
                write_cfld(&dump, &order.field, self.force)?;
                written.push(dump);
                table.write_record([
                    h.to_string(),
                    located,
                    nominal,
                    format!("{:.9e}", order.energy_fraction),
                    format!("{:.9e}", order.rim_fraction),
                    format!("{:.9e}", disk_energy(&order.field, core_radius) / total),
                    "true".into(),
                    order.warnings.join("; "),
                ])?;
                if h == 1 {
                    first = Some(order);
                }
            }
            let table_path = self.path("simulate", format!("{label}_orders.csv"));
            write_bytes(&table_path, &into_bytes(table)?, self.force)?;
            written.push(table_path);

            if let (MaskSpec::Mode(mode), Some(first)) = (spec, first) {
                let ncc = self.first_order_comparison(mode, &mask, &first)?;
                writeln!(log, "{label}: first-order intensity correlation {ncc:.6}").ok();
                comparison.write_record([
                    label.clone(),
                    format!("{ncc:.6}"),
                    (ncc > COMPARISON_FLOOR).to_string(),
                ])?;
            }
        }
        let cmp = self.path("simulate", "comparison.csv".into());
        write_bytes(&cmp, &into_bytes(comparison)?, self.force)?;
        written.push(cmp);
        let log_path = self.path("simulate", "run.log".into());
        write_bytes(&log_path, log.as_bytes(), self.force)?;
        written.push(log_path);
        Ok(written)
    }

    /// Intensity correlation between the binary mask's first order and the
    /// unbinarized transmission's first order, on the same window.
    pub fn first_order_comparison(
        &self,
        mode: ModeIndex,
        mask: &HologramMask,
        first: &ExtractedOrder,
    ) -> Result<f64> {
        let t = transmission_exact(mode, &self.beam, &mask.grating, &self.grid)?;
        let field = ComplexField::new(
            self.grid.n,
            self.grid.pitch,
            [0.0; 2],
            Plane::Aperture,
            t.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )?;
        let exact = propagate(field, &self.beam, Some(mask.grating.fringe_period()))?;
        let w = &first.field;
        let window = evaluate_window(&exact, w.origin, w.n, w.pitch);
        Ok(ncc_real(&w.intensity(), &window.intensity()))
    }

    /// Astigmatic sweep over every mode mask and order `1..=h_max`.
    pub fn run_astig(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut sweep_csv = csv::Writer::from_writer(Vec::new());
        sweep_csv.write_record(["mask", "h", "c", "rows", "cols", "contrast", "ambiguous"])?;
        let mut selection = csv::Writer::from_writer(Vec::new());
        selection.write_record([
            "mask",
            "h",
            "c",
            "rows",
            "cols",
            "contrast",
            "ambiguous",
            "implied_p",
            "implied_l",
            "warnings",
        ])?;
        for spec in self.specs() {
            let MaskSpec::Mode(_) = spec else { continue };
            let label = spec.label();
            let mask = self.obtain_mask(spec)?;
            let d = mask.grating.fringe_period();
            let source = std::sync::Arc::new(mask.to_field());
            let mut per_order: BTreeMap<i32, Vec<(f64, LobeCount)>> = BTreeMap::new();
            for &c in &self.config.astig_sweep {
                let astig = AstigParams::new(c, self.config.astig_axis)?;
                let pattern = astig_transform(source.clone(), &self.beam, &astig, Some(d))?;
                for h in 1..=self.config.h_max {
                    let order = match extract_order(&pattern, h, self.config.oversample) {
                        Ok(o) => o,
                        Err(Error::OrderOutOfBand { .. }) => continue,
                        Err(e) => return Err(e),
                    };
                    let image = self.path("astig", format!("{label}_c{c}_h{h}.pgm"));
                    let comment = format!("{label} order {h}, astigmatism c = {c}");
                    write_intensity_pgm(
                        &image,
                        order.field.n,
                        &order.field.intensity(),
                        &comment,
                        self.force,
                    )?;
                    written.push(image);
                    let lc = count_lobes(&order.field, self.config.lobe_threshold);
                    sweep_csv.write_record([
                        label.clone(),
                        h.to_string(),
                        c.to_string(),
                        lc.rows.to_string(),
                        lc.cols.to_string(),
                        format!("{:.6}", lc.contrast),
                        lc.ambiguous.to_string(),
                    ])?;
                    per_order.entry(h).or_default().push((c, lc));
                }
            }
            for (h, sweep) in &per_order {
                let Some(best) = select_best(sweep) else {
                    continue;
                };
                let (c, lc) = &sweep[best];
                let (p, l) = lc.implied_mode();
                info!(
                    "{label} h{h}: best c = {c}, lobes ({}, {})",
                    lc.rows, lc.cols
                );
                selection.write_record([
                    label.clone(),
                    h.to_string(),
                    c.to_string(),
                    lc.rows.to_string(),
                    lc.cols.to_string(),
                    format!("{:.6}", lc.contrast),
                    lc.ambiguous.to_string(),
                    p.to_string(),
                    l.to_string(),
                    lc.warnings.join("; "),
                ])?;
            }
        }
        for (name, w) in [("sweep.csv", sweep_csv), ("selection.csv", selection)] {
            let path = self.path("astig", name.into());
            write_bytes(&path, &into_bytes(w)?, self.force)?;
            written.push(path);
        }
        Ok(written)
    }

    fn load_order(&self, label: &str, h: i32, row: &csv::StringRecord) -> Result<ExtractedOrder> {
        let field = read_cfld(&self.path("simulate", format!("{label}_h{h}.cfld")))?;
        let parse = |i: usize| {
            row.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .unwrap_or(0.0)
        };
        let warnings = row
            .get(7)
            .filter(|s| !s.is_empty())
            .map(|s| s.split("; ").map(String::from).collect())
            .unwrap_or_default();
        Ok(ExtractedOrder {
            h,
            field,
            energy_fraction: parse(3),
            rim_fraction: parse(4),
            warnings,
        })
    }

    fn order_table(&self, label: &str) -> Result<Vec<csv::StringRecord>> {
        let path = self.path("simulate", format!("{label}_orders.csv"));
        let bytes = read_artifact(&path)?;
        let mut rd = csv::Reader::from_reader(bytes.as_slice());
        Ok(rd.records().collect::<std::result::Result<_, _>>()?)
    }

    fn lobe_selection(&self) -> Result<LobeSelection> {
        let path = self.path("astig", "selection.csv".into());
        let mut map = BTreeMap::new();
        if !path.exists() {
            info!(
                "no astigmatic selection at {}, lobe columns left empty",
                path.display()
            );
            return Ok(map);
        }
        let bytes = read_artifact(&path)?;
        let mut rd = csv::Reader::from_reader(bytes.as_slice());
        for rec in rd.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let (Ok(h), Ok(c), Ok(rows), Ok(cols)) = (
                field(1).parse(),
                field(2).parse(),
                field(3).parse(),
                field(4).parse(),
            ) else {
                return Err(Error::Format {
                    path: path.clone(),
                    message: format!("bad row {rec:?}"),
                });
            };
            map.insert((field(0).to_string(), h), (rows, cols, c));
        }
        Ok(map)
    }

    /// Mode reports, even-odd verdicts and the grating order table.
    pub fn run_analyze(&self) -> Result<AnalyzeSummary> {
        let opts = AnalysisOptions {
            max_p: self.config.max_p,
            ring_threshold: self.config.ring_threshold,
            lobe_threshold: self.config.lobe_threshold,
            ..AnalysisOptions::default()
        };
        let lobes = self.lobe_selection()?;
        let mut reports = Vec::new();
        let mut verdict_text = Vec::new();
        let mut even_odd_passed = true;
        let mut gratings = csv::Writer::from_writer(Vec::new());
        gratings.write_record([
            "mask",
            "duty",
            "h",
            "intensity_rel",
            "envelope_rel",
            "suppressed",
        ])?;
        let mut suppression_passed = true;

        for spec in self.specs() {
            let label = spec.label();
            let table = self.order_table(&label)?;
            let mask = self.obtain_mask(spec)?;
            let dumped: Vec<(i32, &csv::StringRecord)> = table
                .iter()
                .filter(|r| r.get(6) == Some("true"))
                .filter_map(|r| r.get(0).and_then(|h| h.parse().ok()).map(|h| (h, r)))
                .collect();
            match spec {
                MaskSpec::Mode(_) => {
                    let mut mask_reports = Vec::new();
                    for &(h, row) in dumped.iter().filter(|(h, _)| *h >= 1) {
                        let order = self.load_order(&label, h, row)?;
                        let mut report = analyze_order(&order, &self.beam, &opts)?;
                        if let Some(&(rows, cols, c)) = lobes.get(&(label.clone(), h)) {
                            report.lobe_grid = Some((rows, cols));
                            report.astig_strength = Some(c);
                        }
                        mask_reports.push(report);
                    }
                    let verdict = even_odd_report(&mask, &mask_reports)?;
                    even_odd_passed &= verdict.all_passed();
                    write_verdict(&mut verdict_text, &label, &verdict)?;
                    reports.extend(mask_reports.into_iter().map(|r| (label.clone(), r)));
                }
                MaskSpec::Plain(duty) => {
                    let energy: BTreeMap<i32, f64> = dumped
                        .iter()
                        .map(|&(h, r)| (h, r.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.0)))
                        .collect();
                    let Some(&e1) = energy.get(&1) else {
                        return Err(Error::MissingArtifact(
                            self.path("simulate", format!("{label}_h1.cfld")),
                        ));
                    };
                    for (&h, &e) in energy.iter().filter(|(h, _)| **h >= 1) {
                        let rel = e / e1;
                        let suppressed = rel < SUPPRESSION_LIMIT;
                        if (duty - 0.5).abs() < 1e-9 && h % 2 == 0 && !suppressed {
                            suppression_passed = false;
                        }
                        gratings.write_record([
                            label.clone(),
                            format!("{duty:.2}"),
                            h.to_string(),
                            format!("{rel:.6e}"),
                            format!("{:.6e}", envelope(h, duty) / envelope(1, duty)),
                            suppressed.to_string(),
                        ])?;
                    }
                }
            }
        }
        let mut csv_bytes = Vec::new();
        write_csv(&mut csv_bytes, &reports)?;
        write_bytes(
            &self.path("reports", "orders.csv".into()),
            &csv_bytes,
            self.force,
        )?;
        write_bytes(
            &self.path("reports", "verdict.txt".into()),
            &verdict_text,
            self.force,
        )?;
        write_bytes(
            &self.path("reports", "gratings.csv".into()),
            &into_bytes(gratings)?,
            self.force,
        )?;
        Ok(AnalyzeSummary {
            reports,
            even_odd_passed,
            suppression_passed,
        })
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<AnalyzeSummary> {
        self.run_mask()?;
        self.run_simulate()?;
        self.run_astig()?;
        self.run_analyze()
    }
}

/// A pattern together with the mask it came from, for callers that keep
/// working in memory.
pub fn simulate_mask(mask: &HologramMask, beam: &BeamParams) -> Result<DiffractionPattern> {
    propagate(mask.to_field(), beam, Some(mask.grating.fringe_period()))
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn write_bytes(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    prepare_output(path, force)?;
    fs::write(path, bytes)?;
    Ok(())
}
