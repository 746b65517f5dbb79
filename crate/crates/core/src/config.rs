//! Run configuration: flat `key = value` text with `#` comments and
//! comma-separated lists.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hologram::GratingSpec;
use crate::modes::{ApertureGrid, BeamParams, ModeIndex};

/// How the binarization threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    Fixed(f64),
    /// Calibrate `α` until the fringes have this open fraction.
    DutyTarget(f64),
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaMode::Fixed(a) => write!(f, "fixed:{a}"),
            AlphaMode::DutyTarget(d) => write!(f, "duty:{d}"),
        }
    }
}

impl FromStr for AlphaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| format!("expected fixed:<alpha> or duty:<a/d>, got {s:?}"))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("bad number {value:?}"))?;
        if !(v > 0.0 && v < 1.0) {
            return Err(format!("{v} outside (0, 1)"));
        }
        match kind.trim() {
            "fixed" => Ok(AlphaMode::Fixed(v)),
            "duty" => Ok(AlphaMode::DutyTarget(v)),
            other => Err(format!("unknown alpha mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub energy_ev: f64,
    pub rho_max_m: f64,
    pub grid_n: usize,
    pub periods: u32,
    pub alpha_mode: AlphaMode,
    pub modes: Vec<ModeIndex>,
    pub h_max: i32,
    pub astig_sweep: Vec<f64>,
    /// Radians.
    pub astig_axis: f64,
    /// Open fractions of control gratings without an encoded mode.
    pub plain_gratings: Vec<f64>,
    pub oversample: usize,
    pub max_p: u32,
    pub ring_threshold: f64,
    pub lobe_threshold: f64,
    /// Make `analyze` exit with failure when an even-odd expectation fails.
    pub require_even_odd: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            energy_ev: 200e3,
            rho_max_m: 2e-6,
            grid_n: 2048,
            periods: 20,
            alpha_mode: AlphaMode::DutyTarget(0.4),
            modes: vec![
                ModeIndex { p: 0, l: 1 },
                ModeIndex { p: 1, l: 1 },
                ModeIndex { p: 2, l: 1 },
            ],
            h_max: 6,
            astig_sweep: vec![2.0, 3.0, 4.0, 5.0, 6.0, 8.0],
            astig_axis: 0.0,
            plain_gratings: vec![0.5, 0.4],
            oversample: 4,
            max_p: 4,
            ring_threshold: 0.15,
            lobe_threshold: 0.2,
            require_even_odd: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: [&str; 16] = [
    "energy_ev",
    "rho_max_m",
    "grid_n",
    "periods",
    "alpha_mode",
    "modes",
    "h_max",
    "astig_sweep",
    "astig_axis",
    "plain_gratings",
    "oversample",
    "max_p",
    "ring_threshold",
    "lobe_threshold",
    "require_even_odd",
    "output_dir",
];

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn scalar<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("{value:?}: {e}"))
}

impl RunConfig {
    /// Parses config text. Keys not given keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| err(format!("unknown key {key:?}")))?;
            if seen.contains(known) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            seen.push(known);
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config {
                line: 0,
                message: format!("cannot read {}: {e}", path.display()),
            },
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "energy_ev" => self.energy_ev = scalar(value)?,
            "rho_max_m" => self.rho_max_m = scalar(value)?,
            "grid_n" => self.grid_n = scalar(value)?,
            "periods" => self.periods = scalar(value)?,
            "alpha_mode" => self.alpha_mode = value.parse()?,
            "modes" => self.modes = list(value)?,
            "h_max" => self.h_max = scalar(value)?,
            "astig_sweep" => self.astig_sweep = list(value)?,
            "astig_axis" => self.astig_axis = scalar(value)?,
            "plain_gratings" => self.plain_gratings = list(value)?,
            "oversample" => self.oversample = scalar(value)?,
            "max_p" => self.max_p = scalar(value)?,
            "ring_threshold" => self.ring_threshold = scalar(value)?,
            "lobe_threshold" => self.lobe_threshold = scalar(value)?,
            "require_even_odd" => self.require_even_odd = scalar(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Re-checks every value against the constraints of the types it feeds.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::Config { line: 0, message };
        self.beam().map_err(|e| bad(e.to_string()))?;
        self.grid().map_err(|e| bad(e.to_string()))?;
        GratingSpec::new(self.periods, self.rho_max_m, 0.5)
            .and_then(|g| g.check_grid(&self.grid()?))
            .map_err(|e| bad(e.to_string()))?;
        for m in &self.modes {
            m.xi().map_err(|e| bad(e.to_string()))?;
        }
        if self.h_max < 1 {
            return Err(bad(format!("h_max {} must be at least 1", self.h_max)));
        }
        if self.oversample == 0 {
            return Err(bad("oversample must be at least 1".into()));
        }
        if let Some(c) = self
            .astig_sweep
            .iter()
            .find(|c| !(c.is_finite() && **c >= 0.0))
        {
            return Err(bad(format!(
                "astigmatism strength {c} must be finite and non-negative"
            )));
        }
        if !self.astig_axis.is_finite() {
            return Err(bad("astig_axis must be finite".into()));
        }
        if let Some(d) = self
            .plain_gratings
            .iter()
            .find(|d| !(**d > 0.0 && **d < 1.0))
        {
            return Err(bad(format!("plain grating duty {d} outside (0, 1)")));
        }
        for (name, t) in [
            ("ring_threshold", self.ring_threshold),
            ("lobe_threshold", self.lobe_threshold),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(bad(format!("{name} {t} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn beam(&self) -> Result<BeamParams> {
        BeamParams::new(self.energy_ev, self.rho_max_m)
    }

    pub fn grid(&self) -> Result<ApertureGrid> {
        ApertureGrid::for_aperture(self.rho_max_m, self.grid_n, self.periods)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "energy_ev = {}", self.energy_ev)?;
        writeln!(f, "rho_max_m = {}", self.rho_max_m)?;
        writeln!(f, "grid_n = {}", self.grid_n)?;
        writeln!(f, "periods = {}", self.periods)?;
        writeln!(f, "alpha_mode = {}", self.alpha_mode)?;
        writeln!(f, "modes = {}", join(&self.modes))?;
        writeln!(f, "h_max = {}", self.h_max)?;
        writeln!(f, "astig_sweep = {}", join(&self.astig_sweep))?;
        writeln!(f, "astig_axis = {}", self.astig_axis)?;
        writeln!(f, "plain_gratings = {}", join(&self.plain_gratings))?;
        writeln!(f, "oversample = {}", self.oversample)?;
        writeln!(f, "max_p = {}", self.max_p)?;
        writeln!(f, "ring_threshold = {}", self.ring_threshold)?;
        writeln!(f, "lobe_threshold = {}", self.lobe_threshold)?;
        writeln!(f, "require_even_odd = {}", self.require_even_odd)?;
        writeln!(f, "output_dir = {}", self.output_dir.display())
    }
}
