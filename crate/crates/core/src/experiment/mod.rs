//! Configuration ingestion, experiment orchestration and CSV output.
//!
//! Modes:
//! * `evolve`: one static-bias run; time series, final state, fitted rate.
//! * `sweep`: static runs over a list of biases, in parallel; one series per
//!   bias plus `rates.csv`.
//! * `ramp`: linear bias ramp; time series and switching distribution.
//! * `relax_after_measurement`: run, project onto the well, run again; the
//!   relaxation knee of the escape rate.
//! * `pml_check`: reflection of Gaussian packets off the absorbing layer,
//!   on a potential-free grid; onsets and grid overrides do not apply.

mod config;
mod output;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{
    load_config, parse_config, ExperimentConfig, GridSettings, InitialState, MeasureSettings, Mode, PmlSettings,
    RelaxSettings, DEFAULT_DX, DEFAULT_MOMENTA, DEFAULT_SWITCHING_BINS, DEFAULT_T_MEASURE, DEFAULT_V0, KNOWN_KEYS,
};
pub use output::{
    fmt_f64, CsvTable, ERROR_SENTINEL, MEASUREMENT_HEADER, PML_HEADER, RATES_HEADER, RELAXATION_HEADER, STATE_HEADER,
    SWITCHING_HEADER, TIME_SERIES_HEADER,
};

use crate::absorber::{reflection_coefficient, DomainLayout};
use crate::analysis::{
    detect_relaxation_time, fit_after_knee, fit_asymptotic, instantaneous_rate, project_null_measurement,
    switching_distribution_from_ramp_binned, wkb_rate, DecayFit, SwitchingDistribution, DEFAULT_KNEE_FRACTION,
};
use crate::error::{Error, Result};
use crate::potentials::{well_extrema, WashboardParams};
use crate::propagator::{
    default_relax_region, evolve, gaussian_ground_state, imaginary_time_relax, Drive, Evolution, TimeSeries,
};
use crate::state::WaveFunction;
use output::{state_table, switching_table, time_series_table};

/// Process exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 1,
        Error::NumericalBlowUp { .. } | Error::SingularSystem(_) | Error::NotConverged { .. } | Error::NullState => 3,
        Error::Analysis(_) | Error::ParticleOutside => 4,
        _ => 2,
    }
}

/// Runtime options that do not belong in the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for independent runs; `None` uses all cores.
    pub threads: Option<usize>,
    /// Replaces `output_dir` from the config.
    pub output_dir: Option<PathBuf>,
}

/// One row of `rates.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub gamma: f64,
    pub fit: DecayFit,
    pub rate_wkb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementOutcome {
    pub gamma: f64,
    pub survival_at_measure: f64,
    pub rate_asymptotic: f64,
    pub knee_time: f64,
    pub rate_post_knee: f64,
}

/// Results of a run, alongside the files written.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub rates: Vec<RateRow>,
    pub switching: Option<SwitchingDistribution>,
    pub measurement: Option<MeasurementOutcome>,
    /// `(k, R)` pairs from `pml_check`.
    pub reflections: Vec<(f64, f64)>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_with(cfg, &RunOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let dir = opts.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    log::info!("mode {} writing to {}", cfg.mode, dir.display());
    let mut run = Runner {
        cfg,
        dir: &dir,
        report: RunReport::default(),
    };
    pool.install(|| match cfg.mode {
        Mode::Evolve => run.evolve(),
        Mode::Sweep => run.sweep(),
        Mode::Ramp => run.ramp(),
        Mode::RelaxAfterMeasurement => run.measurement(),
        Mode::PmlCheck => run.pml_check(),
    })?;
    Ok(run.report)
}

/// Initial state for a static run at `w` on `layout`.
pub fn initial_state(cfg: &ExperimentConfig, w: &WashboardParams, layout: &DomainLayout) -> Result<WaveFunction> {
    match cfg.initial_state {
        InitialState::Gaussian => gaussian_ground_state(w, &layout.grid),
        InitialState::Relaxed => imaginary_time_relax(w, &layout.grid, default_relax_region(w)?, &cfg.relax.solver()),
    }
}

/// Relaxed state evolved at fixed bias `gamma`.
pub fn static_run(cfg: &ExperimentConfig, gamma: f64) -> Result<Evolution> {
    let w = cfg.washboard.with_gamma(gamma)?;
    let layout = cfg.layout_for(gamma)?;
    let psi0 = initial_state(cfg, &w, &layout)?;
    evolve(&psi0, &Drive::Static(w), &layout.pml, &cfg.solver)
}

fn rate_row(gamma: f64, ts: &TimeSeries, w: &WashboardParams) -> Result<RateRow> {
    Ok(RateRow {
        gamma,
        fit: fit_asymptotic(ts)?,
        rate_wkb: wkb_rate(&w.with_gamma(gamma)?)?,
    })
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    report: RunReport,
}

impl Runner<'_> {
    fn write(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let path = self.dir.join(name);
        table.write(&path)?;
        log::info!("wrote {}", path.display());
        self.report.files.push(path);
        Ok(())
    }

    /// Writes the series of a finished run, or the partial series of a run
    /// that blew up followed by the sentinel row.
    fn write_series(&mut self, name: &str, run: &Result<Evolution>) -> Result<()> {
        match run {
            Ok(ev) => self.write(name, &time_series_table(&ev.series)),
            Err(err @ Error::NumericalBlowUp { partial, .. }) => {
                let mut t = time_series_table(partial);
                t.flag_error(err.to_string());
                self.write(name, &t)
            }
            Err(_) => Ok(()),
        }
    }

    fn write_rates(&mut self) -> Result<()> {
        let mut t = CsvTable::new(RATES_HEADER);
        for r in &self.report.rates {
            t.push(vec![
                r.gamma,
                r.fit.rate,
                r.rate_wkb,
                r.fit.residual_rms,
                r.fit.window.0,
                r.fit.window.1,
            ]);
        }
        self.write("rates.csv", &t)
    }

    fn evolve(&mut self) -> Result<()> {
        let gamma = self.cfg.washboard.gamma;
        let run = static_run(self.cfg, gamma);
        self.write_series("time_series.csv", &run)?;
        let ev = run?;
        self.write("final_state.csv", &state_table(&ev.final_state))?;
        if self.cfg.pml.amplitude > 0.0 {
            match rate_row(gamma, &ev.series, &self.cfg.washboard) {
                Ok(row) => {
                    self.report.rates.push(row);
                    self.write_rates()?;
                }
                Err(e) => log::warn!("no decay rate fitted: {e}"),
            }
        }
        Ok(())
    }

    fn sweep(&mut self) -> Result<()> {
        let gammas = self.cfg.sweep_gammas.clone().unwrap_or_default();
        let cfg = self.cfg;
        // Collected in input order, which is ascending in gamma.
        let runs: Vec<Result<Evolution>> = gammas.par_iter().map(|&g| static_run(cfg, g)).collect();
        for (g, run) in gammas.iter().zip(&runs) {
            self.write_series(&format!("time_series_gamma_{}.csv", fmt_f64(*g)), run)?;
        }
        let mut first_err = None;
        for (&g, run) in gammas.iter().zip(runs) {
            match run.and_then(|ev| rate_row(g, &ev.series, &cfg.washboard)) {
                Ok(row) => self.report.rates.push(row),
                Err(e) => {
                    log::error!("gamma = {g}: {e}");
                    first_err.get_or_insert(e);
                }
            }
        }
        self.write_rates()?;
        if let Some(e) = first_err {
            return Err(e);
        }
        let rates: Vec<f64> = self.report.rates.iter().map(|r| r.fit.rate).collect();
        if rates.windows(2).any(|p| p[1] <= p[0]) {
            log::warn!("fitted rates are not strictly increasing in gamma: {rates:?}");
        }
        Ok(())
    }

    fn ramp(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let ramp = cfg
            .ramp
            .ok_or_else(|| Error::Config("mode ramp requires ramp settings".into()))?;
        let w = cfg.washboard.with_gamma(ramp.gamma_start)?;
        let layout = cfg.layout_for(ramp.gamma_start)?;
        let psi0 = initial_state(cfg, &w, &layout)?;
        let drive = Drive::Ramp { v0: w.v0, ramp };
        let run = evolve(&psi0, &drive, &layout.pml, &cfg.solver);
        self.write_series("time_series.csv", &run)?;
        let ev = run?;
        let dist = switching_distribution_from_ramp_binned(&ev.series, &ramp, cfg.switching_bins)?;
        for w in &dist.warnings {
            log::warn!("{w}");
        }
        self.write("switching.csv", &switching_table(&dist))?;
        self.report.switching = Some(dist);
        Ok(())
    }

    fn measurement(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let gamma = cfg.washboard.gamma;
        let w = cfg.washboard;
        let layout = cfg.layout_for(gamma)?;
        let psi0 = initial_state(cfg, &w, &layout)?;
        let before_cfg = crate::propagator::SolverConfig {
            t_end: cfg.measure.t_measure,
            stop_survival: None,
            ..cfg.solver
        };
        let before = evolve(&psi0, &Drive::Static(w), &layout.pml, &before_cfg);
        self.write_series("time_series_before.csv", &before)?;
        let before = before?;
        let asymptotic = fit_asymptotic(&before.series)?;
        let x_cut = match cfg.measure.x_cut {
            Some(x) => x,
            None => well_extrema(&w)?.1,
        };
        let projected = project_null_measurement(&before.final_state, x_cut)?;
        let after = evolve(&projected, &Drive::Static(w), &layout.pml, &cfg.solver);
        self.write_series("time_series.csv", &after)?;
        let after = after?;

        let rate = instantaneous_rate(&after.series)?;
        let mut t = CsvTable::new(RELAXATION_HEADER);
        for (i, r) in rate.iter().enumerate() {
            t.push(vec![after.series.times[i + 1], *r, r / asymptotic.rate]);
        }
        self.write("relaxation.csv", &t)?;

        let knee = detect_relaxation_time(&after.series, asymptotic.rate, DEFAULT_KNEE_FRACTION)?;
        let post = fit_after_knee(&after.series, knee)?;
        let outcome = MeasurementOutcome {
            gamma,
            survival_at_measure: *before.series.survival.last().unwrap_or(&f64::NAN),
            rate_asymptotic: asymptotic.rate,
            knee_time: knee,
            rate_post_knee: post.rate,
        };
        log::info!(
            "knee at t = {knee}, post-knee rate {} vs asymptotic {}",
            post.rate,
            asymptotic.rate
        );
        let mut t = CsvTable::new(MEASUREMENT_HEADER);
        t.push(vec![
            gamma,
            cfg.measure.t_measure,
            x_cut,
            outcome.survival_at_measure,
            outcome.rate_asymptotic,
            outcome.knee_time,
            outcome.rate_post_knee,
        ]);
        self.write("measurement.csv", &t)?;
        self.report.measurement = Some(outcome);
        Ok(())
    }

    fn pml_check(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let momenta = &cfg.pml_check_momenta;
        let k_min = momenta.iter().copied().fold(f64::INFINITY, f64::min);
        let p = &cfg.pml;
        let layout = DomainLayout::for_reflection(p.amplitude, p.decay_length, p.width, p.sides, cfg.grid.dx, k_min)?;
        let results: Vec<Result<f64>> = momenta
            .par_iter()
            .map(|&k| reflection_coefficient(&layout.pml, k, &layout.grid))
            .collect();
        let mut t = CsvTable::new(PML_HEADER);
        for (&k, r) in momenta.iter().zip(results) {
            let r = r?;
            log::info!("k = {k}: R = {r:e}");
            t.push(vec![
                k,
                layout.pml.amplitude,
                layout.pml.decay_length,
                layout.pml.width,
                r,
            ]);
            self.report.reflections.push((k, r));
        }
        self.write("pml_report.csv", &t)
    }
}
