//! Strict `key = value` configuration format with dotted sections and `#`
//! comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::absorber::{DomainLayout, PmlParams, Sides, DEFAULT_AMPLITUDE, DEFAULT_DECAY_LENGTH, DEFAULT_WIDTH};
use crate::error::{Error, Result};
use crate::potentials::{RampSpec, WashboardParams};
use crate::propagator::SolverConfig;
use crate::state::Grid1D;

/// Every key the parser accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "mode",
    "V0",
    "gamma",
    "output_dir",
    "initial_state",
    "ramp.gamma_start",
    "ramp.gamma_end",
    "ramp.T",
    "ramp.shape",
    "pml.A",
    "pml.l_ext",
    "pml.x0",
    "pml.width",
    "pml.sides",
    "pml.x0_left",
    "grid.dx",
    "grid.x_min",
    "grid.x_max",
    "solver.dt",
    "solver.t_end",
    "solver.observe_every",
    "solver.stop_survival",
    "relax.dtau",
    "relax.tau_max",
    "sweep.gammas",
    "measure.t_measure",
    "measure.x_cut",
    "pml_check.momenta",
    "switching.bins",
];

pub const DEFAULT_V0: f64 = 2.0;
pub const DEFAULT_DX: f64 = 0.05;
pub const DEFAULT_T_MEASURE: f64 = 500.0;
pub const DEFAULT_SWITCHING_BINS: usize = 100;
pub const DEFAULT_MOMENTA: &[f64] = &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Evolve,
    Sweep,
    Ramp,
    RelaxAfterMeasurement,
    PmlCheck,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evolve" => Ok(Mode::Evolve),
            "sweep" => Ok(Mode::Sweep),
            "ramp" => Ok(Mode::Ramp),
            "relax_after_measurement" => Ok(Mode::RelaxAfterMeasurement),
            "pml_check" => Ok(Mode::PmlCheck),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Evolve => "evolve",
            Mode::Sweep => "sweep",
            Mode::Ramp => "ramp",
            Mode::RelaxAfterMeasurement => "relax_after_measurement",
            Mode::PmlCheck => "pml_check",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// Imaginary-time relaxed lowest state of the well.
    Relaxed,
    /// Harmonic Gaussian at the well minimum.
    Gaussian,
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relaxed" => Ok(InitialState::Relaxed),
            "gaussian" => Ok(InitialState::Gaussian),
            other => Err(Error::Config(format!("unknown initial_state '{other}'"))),
        }
    }
}

/// Absorber settings; onsets default to the well-relative layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlSettings {
    pub amplitude: f64,
    pub decay_length: f64,
    pub width: f64,
    pub sides: Sides,
    pub x0: Option<f64>,
    pub x0_left: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSettings {
    pub dx: f64,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxSettings {
    pub dtau: f64,
    pub tau_max: f64,
}

impl RelaxSettings {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dtau,
            t_end: self.tau_max,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureSettings {
    pub t_measure: f64,
    /// Projection edge; the barrier top when absent.
    pub x_cut: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub washboard: WashboardParams,
    pub ramp: Option<RampSpec>,
    pub pml: PmlSettings,
    pub grid: GridSettings,
    pub solver: SolverConfig,
    pub relax: RelaxSettings,
    pub initial_state: InitialState,
    pub sweep_gammas: Option<Vec<f64>>,
    pub measure: MeasureSettings,
    pub pml_check_momenta: Vec<f64>,
    pub switching_bins: usize,
    pub output_dir: PathBuf,
    /// `key = value` for every default filled in, in key order.
    pub defaults_applied: Vec<String>,
}

impl ExperimentConfig {
    /// Grid and absorber for a run at bias `gamma`, with any explicit
    /// overrides applied.
    pub fn layout_for(&self, gamma: f64) -> Result<DomainLayout> {
        let w = self.washboard.with_gamma(gamma)?;
        let p = &self.pml;
        let mut layout =
            DomainLayout::around_well_with(&w, self.grid.dx, p.sides, p.amplitude, p.decay_length, p.width)?;
        let mut pml: PmlParams = layout.pml;
        if let Some(x0) = p.x0 {
            pml.x0 = x0;
        }
        if let Some(x0_left) = p.x0_left {
            pml.x0_left = x0_left;
        }
        let lo = self.grid.x_min.unwrap_or(if pml.sides.left() {
            pml.x0_left - pml.width
        } else {
            layout.grid.x_min()
        });
        let hi = self.grid.x_max.unwrap_or(if pml.sides.right() {
            pml.x0 + pml.width
        } else {
            layout.grid.x_max()
        });
        if lo != layout.grid.x_min() || hi != layout.grid.x_max() {
            layout.grid = Grid1D::with_spacing(lo, hi, self.grid.dx)?;
        }
        pml.check_fits(&layout.grid)?;
        layout.pml = pml;
        Ok(layout)
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
    parse_config(&text, None)
}

/// Parses configuration text. `mode_override` supplies the mode when the
/// file omits it; a conflicting mode in the file is an error.
pub fn parse_config(text: &str, mode_override: Option<Mode>) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;
    let cfg = build(&mut raw, mode_override)?;
    for d in &cfg.defaults_applied {
        log::info!("default applied: {d}");
    }
    Ok(cfg)
}

struct RawConfig {
    values: BTreeMap<&'static str, (usize, String)>,
    defaults: Vec<String>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let n = n + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {n}: expected 'key = value'")))?;
            let key = key.trim();
            let value = value.trim();
            let known = KNOWN_KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| Error::Config(format!("line {n}: unknown key '{key}'")))?;
            if value.is_empty() {
                return Err(Error::Config(format!("line {n}: empty value for '{key}'")));
            }
            if let Some((first, _)) = values.insert(*known, (n, value.to_string())) {
                return Err(Error::Config(format!(
                    "line {n}: duplicate key '{key}' (first set on line {first})"
                )));
            }
        }
        Ok(Self {
            values,
            defaults: Vec::new(),
        })
    }

    fn raw(&self, key: &'static str) -> Option<&(usize, String)> {
        self.values.get(key)
    }

    fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((n, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {n}: cannot parse '{v}' for '{key}'"))),
        }
    }

    fn get_or<T: FromStr + fmt::Display>(&mut self, key: &'static str, default: T) -> Result<T> {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.defaults.push(format!("{key} = {default}"));
                Ok(default)
            }
        }
    }

    fn list(&self, key: &'static str) -> Result<Option<Vec<f64>>> {
        let Some((n, v)) = self.raw(key) else {
            return Ok(None);
        };
        let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
        inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {n}: cannot parse '{s}' in '{key}'")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn require<T: FromStr>(&self, key: &'static str, mode: Mode) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("mode {mode} requires '{key}'")))
    }
}

fn build(raw: &mut RawConfig, mode_override: Option<Mode>) -> Result<ExperimentConfig> {
    let file_mode: Option<Mode> = raw.get("mode")?;
    let mode = match (file_mode, mode_override) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "mode '{b}' conflicts with mode = {a} in the file"
            )));
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(Error::Config("missing 'mode'".into())),
    };

    let v0 = raw.get_or("V0", DEFAULT_V0)?;
    let gamma = match mode {
        Mode::Evolve | Mode::RelaxAfterMeasurement => raw.require("gamma", mode)?,
        Mode::Sweep | Mode::Ramp | Mode::PmlCheck => raw.get_or("gamma", 0.0)?,
    };
    let washboard = WashboardParams::new(v0, gamma)?;

    let ramp = if mode == Mode::Ramp {
        let start = raw.get_or("ramp.gamma_start", 0.0)?;
        let end = raw.get_or("ramp.gamma_end", 1.0)?;
        let duration: f64 = raw.require("ramp.T", mode)?;
        let shape: String = raw.get_or("ramp.shape", "linear".to_string())?;
        if shape != "linear" {
            return Err(Error::Config(format!("unsupported ramp.shape '{shape}'")));
        }
        Some(RampSpec::new(start, end, duration)?)
    } else {
        None
    };

    let pml = PmlSettings {
        amplitude: raw.get_or("pml.A", DEFAULT_AMPLITUDE)?,
        decay_length: raw.get_or("pml.l_ext", DEFAULT_DECAY_LENGTH)?,
        width: raw.get_or("pml.width", DEFAULT_WIDTH)?,
        sides: raw.get_or("pml.sides", Sides::Right)?,
        x0: raw.get("pml.x0")?,
        x0_left: raw.get("pml.x0_left")?,
    };
    PmlParams {
        amplitude: pml.amplitude,
        decay_length: pml.decay_length,
        x0: 0.0,
        width: pml.width,
        sides: pml.sides,
        x0_left: 0.0,
    }
    .validate()?;

    let grid = GridSettings {
        dx: raw.get_or("grid.dx", DEFAULT_DX)?,
        x_min: raw.get("grid.x_min")?,
        x_max: raw.get("grid.x_max")?,
    };
    if !(grid.dx > 0.0) {
        return Err(Error::invalid("grid.dx", format!("must be > 0, got {}", grid.dx)));
    }

    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        dt: raw.get_or("solver.dt", defaults.dt)?,
        t_end: raw.get_or("solver.t_end", defaults.t_end)?,
        observe_every: raw.get_or("solver.observe_every", defaults.observe_every)?,
        stop_survival: raw.get("solver.stop_survival")?,
    };
    solver.validate()?;
    let relax = RelaxSettings {
        dtau: raw.get_or("relax.dtau", 0.005)?,
        tau_max: raw.get_or("relax.tau_max", 200.0)?,
    };
    relax.solver().validate()?;
    let initial_state = match raw.get::<String>("initial_state")? {
        Some(s) => s.parse()?,
        None => {
            raw.defaults.push("initial_state = relaxed".into());
            InitialState::Relaxed
        }
    };

    let sweep_gammas = match raw.list("sweep.gammas")? {
        Some(mut g) => {
            if g.is_empty() {
                return Err(Error::Config("sweep.gammas is empty".into()));
            }
            for &x in &g {
                washboard.with_gamma(x)?;
            }
            g.sort_by(f64::total_cmp);
            if g.windows(2).any(|p| p[0] == p[1]) {
                return Err(Error::Config("sweep.gammas contains duplicates".into()));
            }
            Some(g)
        }
        None if mode == Mode::Sweep => return Err(Error::Config("mode sweep requires 'sweep.gammas'".into())),
        None => None,
    };

    let measure = MeasureSettings {
        t_measure: if mode == Mode::RelaxAfterMeasurement {
            raw.get_or("measure.t_measure", DEFAULT_T_MEASURE)?
        } else {
            raw.get("measure.t_measure")?.unwrap_or(DEFAULT_T_MEASURE)
        },
        x_cut: raw.get("measure.x_cut")?,
    };
    if !(measure.t_measure > 0.0) {
        return Err(Error::invalid("measure.t_measure", "must be > 0"));
    }

    let pml_check_momenta = match raw.list("pml_check.momenta")? {
        Some(k) if k.is_empty() || k.iter().any(|&k| !(k > 0.0)) => {
            return Err(Error::invalid(
                "pml_check.momenta",
                "must be a non-empty list of positive values",
            ));
        }
        Some(k) => k,
        None => {
            if mode == Mode::PmlCheck {
                raw.defaults.push(format!("pml_check.momenta = {DEFAULT_MOMENTA:?}"));
            }
            DEFAULT_MOMENTA.to_vec()
        }
    };
    let switching_bins = if mode == Mode::Ramp {
        raw.get_or("switching.bins", DEFAULT_SWITCHING_BINS)?
    } else {
        raw.get("switching.bins")?.unwrap_or(DEFAULT_SWITCHING_BINS)
    };
    if switching_bins == 0 {
        return Err(Error::invalid("switching.bins", "must be positive"));
    }
    let output_dir = PathBuf::from(raw.get_or("output_dir", "output".to_string())?);

    Ok(ExperimentConfig {
        mode,
        washboard,
        ramp,
        pml,
        grid,
        solver,
        relax,
        initial_state,
        sweep_gammas,
        measure,
        pml_check_momenta,
        switching_bins,
        output_dir,
        defaults_applied: std::mem::take(&mut raw.defaults),
    })
}
