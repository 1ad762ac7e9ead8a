//! Post-processing of survival curves: decay-rate fits, the post-measurement
//! relaxation knee, the null-measurement projector, the cubic-barrier WKB rate
//! and switching-current distributions.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potentials::{barrier_height_washboard, plasma_frequency, RampSpec, WashboardParams};
use crate::propagator::TimeSeries;
use crate::state::{renormalize, WaveFunction};

pub const MIN_FIT_SAMPLES: usize = 10;
/// Consecutive samples the instantaneous rate must stay above threshold.
pub const KNEE_PERSISTENCE: usize = 5;
pub const DEFAULT_KNEE_FRACTION: f64 = 0.9;
/// Survival increases smaller than this are treated as round-off.
pub const MONOTONE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
}

/// Least-squares line through `ln P(t)` over `window`; the rate is minus the slope.
pub fn fit_decay_rate(ts: &TimeSeries, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Analysis(format!("empty fit window [{lo}, {hi}]")));
    }
    let mut points = Vec::new();
    for (&t, &p) in ts.times.iter().zip(&ts.survival) {
        if t >= lo && t <= hi {
            if !(p > 0.0) {
                return Err(Error::Analysis("window reaches noise floor".into()));
            }
            points.push((t, p.ln()));
        }
    }
    if points.len() < MIN_FIT_SAMPLES {
        return Err(Error::Analysis(format!(
            "{} samples in window [{lo}, {hi}], need at least {MIN_FIT_SAMPLES}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, y) in &points {
        sxy += (t - t_mean) * (y - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let ss: f64 = points.iter().map(|&(t, y)| (y - intercept - slope * t).powi(2)).sum();
    Ok(DecayFit {
        rate: (-slope).max(0.0),
        intercept,
        window: (points[0].0, points[points.len() - 1].0),
        residual_rms: (ss / n).sqrt(),
    })
}

/// `-d ln P / dt` by centered differences at every interior sample.
pub fn instantaneous_rate(ts: &TimeSeries) -> Result<Vec<f64>> {
    if ts.survival.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Analysis("survival must be strictly positive".into()));
    }
    Ok((1..ts.len().saturating_sub(1))
        .map(|i| -(ts.survival[i + 1].ln() - ts.survival[i - 1].ln()) / (ts.times[i + 1] - ts.times[i - 1]))
        .collect())
}

/// Earliest time at which the instantaneous rate reaches `fraction` of the
/// asymptotic rate and stays there for [`KNEE_PERSISTENCE`] samples.
pub fn detect_relaxation_time(ts: &TimeSeries, asymptotic_rate: f64, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Analysis(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    if !(asymptotic_rate > 0.0) {
        return Err(Error::Analysis(format!(
            "asymptotic rate must be > 0, got {asymptotic_rate}"
        )));
    }
    let rates = instantaneous_rate(ts)?;
    let threshold = fraction * asymptotic_rate;
    let mut run = 0;
    for (i, &r) in rates.iter().enumerate() {
        if r >= threshold {
            run += 1;
            if run == KNEE_PERSISTENCE {
                // rates[i] belongs to sample i + 1.
                return Ok(ts.times[i + 2 - KNEE_PERSISTENCE]);
            }
        } else {
            run = 0;
        }
    }
    Err(Error::Analysis("no relaxation detected within series".into()))
}

/// Decay rate over the asymptotic part of a survival curve.
///
/// A provisional rate from the second half of the series locates the knee;
/// the final window starts one knee-length after it and never earlier than
/// a quarter of the way through the series.
pub fn fit_asymptotic(ts: &TimeSeries) -> Result<DecayFit> {
    if ts.len() < 2 * MIN_FIT_SAMPLES {
        return Err(Error::Analysis(format!(
            "series has {} samples, need at least {}",
            ts.len(),
            2 * MIN_FIT_SAMPLES
        )));
    }
    let t0 = ts.times[0];
    let t_last = ts.times[ts.len() - 1];
    let provisional = fit_decay_rate(ts, (ts.times[ts.len() / 2], t_last))?;
    let knee = if provisional.rate > 0.0 {
        detect_relaxation_time(ts, provisional.rate, DEFAULT_KNEE_FRACTION).unwrap_or(t0)
    } else {
        t0
    };
    let lo = (2.0 * knee - t0).max(t0 + 0.25 * (t_last - t0));
    let latest = ts.times[ts.len() - MIN_FIT_SAMPLES];
    fit_decay_rate(ts, (lo.min(latest), t_last))
}

/// Decay rate from one knee-length past `knee` to the end of the series.
pub fn fit_after_knee(ts: &TimeSeries, knee: f64) -> Result<DecayFit> {
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Analysis(format!(
            "series has {} samples, need {MIN_FIT_SAMPLES}",
            ts.len()
        )));
    }
    let t0 = ts.times[0];
    let t_last = ts.times[ts.len() - 1];
    let latest = ts.times[ts.len() - MIN_FIT_SAMPLES];
    fit_decay_rate(ts, ((2.0 * knee - t0).min(latest), t_last))
}

/// Keeps the part of `psi` left of `x_cut` and renormalizes it.
pub fn project_null_measurement(psi: &WaveFunction, x_cut: f64) -> Result<WaveFunction> {
    let grid = *psi.grid();
    let amplitudes = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, &a)| if grid.x(i) < x_cut { a } else { Complex64::new(0.0, 0.0) })
        .collect();
    let projected = WaveFunction::new(grid, amplitudes)?;
    renormalize(&projected).map_err(|_| Error::ParticleOutside)
}

/// Cubic-barrier tunneling rate
/// `(omega_p / 2 pi) sqrt(864 pi dU / omega_p) exp(-36 dU / (5 omega_p))`.
pub fn wkb_rate(w: &WashboardParams) -> Result<f64> {
    let omega = plasma_frequency(w)?;
    let barrier = barrier_height_washboard(w)?;
    wkb_rate_from(barrier, omega)
}

pub fn wkb_rate_from(barrier: f64, omega_p: f64) -> Result<f64> {
    if !(barrier > 0.0) {
        return Err(Error::Analysis(format!("barrier must be > 0, got {barrier}")));
    }
    let ratio = barrier / omega_p;
    Ok(omega_p / (2.0 * PI) * (864.0 * PI * ratio).sqrt() * (-36.0 * ratio / 5.0).exp())
}

/// Probability density of the bias at which the junction switches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SwitchingDistribution {
    /// Bin edges; bin `i` spans `edges[i]..edges[i + 1]`.
    pub edges: Vec<f64>,
    pub gamma_bins: Vec<f64>,
    pub pdf: Vec<f64>,
    /// Switched probability up to the upper edge of each bin.
    pub cumulative: Vec<f64>,
    pub total_switch_probability: f64,
    /// Negative probability removed by clipping.
    pub clipped: f64,
    pub warnings: Vec<String>,
}

impl SwitchingDistribution {
    fn from_edge_survival(edges: Vec<f64>, survival: &[f64]) -> Self {
        let mut pdf = Vec::with_capacity(edges.len() - 1);
        let mut cumulative = Vec::with_capacity(edges.len() - 1);
        let mut clipped = 0.0;
        let mut acc = 0.0;
        for i in 0..edges.len() - 1 {
            let drop = survival[i] - survival[i + 1];
            if drop < 0.0 {
                clipped += -drop;
            }
            let drop = drop.max(0.0);
            acc += drop;
            pdf.push(drop / (edges[i + 1] - edges[i]));
            cumulative.push(acc);
        }
        let gamma_bins = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
        let mut warnings = Vec::new();
        if clipped > MONOTONE_TOLERANCE {
            let msg = format!("survival not monotone: clipped {clipped:e} of negative switching probability");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Self {
            total_switch_probability: survival[0] - survival[survival.len() - 1],
            edges,
            gamma_bins,
            pdf,
            cumulative,
            clipped,
            warnings,
        }
    }

    /// `∫ pdf dgamma`.
    pub fn integral(&self) -> f64 {
        self.pdf
            .iter()
            .zip(self.edges.windows(2))
            .map(|(p, e)| p * (e[1] - e[0]))
            .sum()
    }

    /// Index of the most probable bin.
    pub fn peak_bin(&self) -> Option<usize> {
        self.pdf
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }

    pub fn peak_gamma(&self) -> Option<f64> {
        self.peak_bin().map(|i| self.gamma_bins[i])
    }
}

/// Survival as a function of bias, one point per distinct bias value (the
/// last sample recorded at that bias).
fn survival_by_gamma(ts: &TimeSeries) -> (Vec<f64>, Vec<f64>) {
    let mut gammas: Vec<f64> = Vec::new();
    let mut survival: Vec<f64> = Vec::new();
    for (&g, &p) in ts.gamma.iter().zip(&ts.survival) {
        match gammas.last() {
            Some(&last) if g <= last => {
                *survival.last_mut().unwrap() = p;
            }
            _ => {
                gammas.push(g);
                survival.push(p);
            }
        }
    }
    (gammas, survival)
}

/// `-dP/dgamma` from a ramped evolution, one bin per pair of consecutive
/// samples (a centered difference about the bin center).
pub fn switching_distribution_from_ramp(ts: &TimeSeries, ramp: &RampSpec) -> Result<SwitchingDistribution> {
    if !(ramp.sweep_rate() > 0.0) {
        return Err(Error::Analysis("ramp must be strictly increasing".into()));
    }
    let (gammas, survival) = survival_by_gamma(ts);
    if gammas.len() < 2 {
        return Err(Error::Analysis("need at least two distinct bias samples".into()));
    }
    Ok(SwitchingDistribution::from_edge_survival(gammas, &survival))
}

/// Ramp-extracted distribution on `n_bins` uniform bins over the ramp range,
/// with the survival interpolated linearly in bias at the bin edges.
pub fn switching_distribution_from_ramp_binned(
    ts: &TimeSeries,
    ramp: &RampSpec,
    n_bins: usize,
) -> Result<SwitchingDistribution> {
    if n_bins == 0 {
        return Err(Error::Analysis("need at least one bin".into()));
    }
    if !(ramp.sweep_rate() > 0.0) {
        return Err(Error::Analysis("ramp must be strictly increasing".into()));
    }
    let (gammas, survival) = survival_by_gamma(ts);
    if gammas.len() < 2 {
        return Err(Error::Analysis("need at least two distinct bias samples".into()));
    }
    let edges = uniform_edges(ramp, n_bins);
    let at = |g: f64| -> f64 {
        if g <= gammas[0] {
            return survival[0];
        }
        let last = gammas.len() - 1;
        if g >= gammas[last] {
            return survival[last];
        }
        let k = gammas.partition_point(|&x| x <= g);
        let (g0, g1) = (gammas[k - 1], gammas[k]);
        let f = (g - g0) / (g1 - g0);
        survival[k - 1] + f * (survival[k] - survival[k - 1])
    };
    let mut edge_survival: Vec<f64> = edges.iter().map(|&g| at(g)).collect();
    // The telescoping sum must reproduce P(0) - P(final), including any decay
    // recorded after the ramp has stopped.
    edge_survival[0] = survival[0];
    *edge_survival.last_mut().unwrap() = survival[survival.len() - 1];
    Ok(SwitchingDistribution::from_edge_survival(edges, &edge_survival))
}

fn uniform_edges(ramp: &RampSpec, n_bins: usize) -> Vec<f64> {
    let width = (ramp.gamma_end - ramp.gamma_start) / n_bins as f64;
    (0..=n_bins)
        .map(|i| {
            if i == n_bins {
                ramp.gamma_end
            } else {
                ramp.gamma_start + i as f64 * width
            }
        })
        .collect()
}

const RATE_SUBSTEPS: usize = 16;

/// First-passage distribution `p = (Gamma / v) exp(-∫ Gamma / v)` for a
/// linear ramp with sweep rate `v`.
pub fn switching_distribution_rate_model(
    v0: f64,
    ramp: &RampSpec,
    rate_fn: impl Fn(f64) -> f64,
    n_bins: usize,
) -> Result<SwitchingDistribution> {
    if !(v0 > 0.0) {
        return Err(Error::invalid("V0", "must be > 0"));
    }
    let v = ramp.sweep_rate();
    if !(v > 0.0) {
        return Err(Error::Analysis(format!("sweep rate must be > 0, got {v}")));
    }
    if n_bins == 0 {
        return Err(Error::Analysis("need at least one bin".into()));
    }
    let edges = uniform_edges(ramp, n_bins);
    let mut exponent = 0.0;
    let mut survival = Vec::with_capacity(edges.len());
    survival.push(1.0);
    for e in edges.windows(2) {
        let h = (e[1] - e[0]) / RATE_SUBSTEPS as f64;
        let mut prev = rate_fn(e[0]);
        for k in 1..=RATE_SUBSTEPS {
            let g = if k == RATE_SUBSTEPS { e[1] } else { e[0] + k as f64 * h };
            let cur = rate_fn(g);
            if !(prev >= 0.0 && cur >= 0.0) {
                return Err(Error::Analysis(format!(
                    "rate function negative or NaN near gamma = {g}"
                )));
            }
            exponent += 0.5 * (prev + cur) * h / v;
            prev = cur;
        }
        survival.push((-exponent).exp());
    }
    Ok(SwitchingDistribution::from_edge_survival(edges, &survival))
}

/// `Gamma(gamma)` interpolated linearly in `ln Gamma` between measured points
/// and extrapolated along the end segments.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearRates {
    gammas: Vec<f64>,
    log_rates: Vec<f64>,
}

impl LogLinearRates {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.len() < 2 || pts.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Analysis("need at least two distinct bias points".into()));
        }
        if pts.iter().any(|p| !(p.1 > 0.0)) {
            return Err(Error::Analysis("rates must be > 0 for log interpolation".into()));
        }
        Ok(Self {
            gammas: pts.iter().map(|p| p.0).collect(),
            log_rates: pts.iter().map(|p| p.1.ln()).collect(),
        })
    }

    pub fn rate(&self, gamma: f64) -> f64 {
        let n = self.gammas.len();
        let k = self.gammas.partition_point(|&g| g <= gamma).clamp(1, n - 1);
        let (g0, g1) = (self.gammas[k - 1], self.gammas[k]);
        let (l0, l1) = (self.log_rates[k - 1], self.log_rates[k]);
        (l0 + (gamma - g0) * (l1 - l0) / (g1 - g0)).exp()
    }
}
