//! Time evolution in the washboard with an absorbing layer: real-time
//! Crank–Nicolson stepping, imaginary-time relaxation of the initial state
//! and the closed-form Gaussian seed.

mod cayley;
mod ftz;

use num_complex::Complex64;

pub use cayley::{rayleigh_quotient, Cayley};
pub(crate) use ftz::FlushSubnormals;

use crate::absorber::{absorber_profile, PmlParams};
use crate::error::{Error, Result};
use crate::potentials::{
    barrier_exit, plasma_frequency, ramp_gamma, washboard_eval, well_extrema, RampSpec, WashboardParams,
};
use crate::state::{norm_squared, probability_current, Grid1D, Region, WaveFunction};

/// Imaginary-time relaxation stops once the Rayleigh quotient moves by less
/// than this per unit of imaginary time.
pub const RELAX_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded samples.
    pub observe_every: usize,
    /// Stop early once the survival probability falls below this value.
    pub stop_survival: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_end: 1000.0,
            observe_every: 200,
            stop_survival: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("solver.dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid(
                "solver.t_end",
                format!("must be > 0, got {}", self.t_end),
            ));
        }
        if self.observe_every == 0 {
            return Err(Error::invalid("solver.observe_every", "must be >= 1"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Sampled observables of one evolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Probability left in the absorber-free part of the grid.
    pub survival: Vec<f64>,
    /// Norm over the whole grid, absorbing layers included.
    pub norm_full: Vec<f64>,
    pub x_mean: Vec<f64>,
    /// Probability current at the barrier top of the current bias.
    pub flux_at_xstar: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Series built from `(t, survival)` pairs with the other columns zeroed.
    pub fn from_survival(times: Vec<f64>, survival: Vec<f64>) -> Self {
        let n = times.len();
        Self {
            gamma: vec![0.0; n],
            norm_full: survival.clone(),
            x_mean: vec![0.0; n],
            flux_at_xstar: vec![0.0; n],
            times,
            survival,
        }
    }

    /// Copy with every time shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t + offset).collect(),
            ..self.clone()
        }
    }
}

/// Bias protocol applied during an evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    Static(WashboardParams),
    Ramp { v0: f64, ramp: RampSpec },
}

impl Drive {
    fn v0(&self) -> f64 {
        match self {
            Drive::Static(w) => w.v0,
            Drive::Ramp { v0, .. } => *v0,
        }
    }

    fn max_gamma(&self) -> f64 {
        match self {
            Drive::Static(w) => w.gamma,
            Drive::Ramp { ramp, .. } => ramp.gamma_start.max(ramp.gamma_end),
        }
    }

    fn gamma_at(&self, t: f64) -> Result<f64> {
        match self {
            Drive::Static(w) => Ok(w.gamma),
            Drive::Ramp { ramp, .. } => ramp_gamma(ramp, t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub series: TimeSeries,
    pub final_state: WaveFunction,
}

/// Node-wise pieces of `U(x; gamma) - i W(x)` so the bias can change cheaply.
struct PotentialParts {
    v0: f64,
    cosine: Vec<f64>,
    x: Vec<f64>,
    absorption: Vec<f64>,
}

impl PotentialParts {
    fn new(v0: f64, pml: &PmlParams, grid: &Grid1D) -> Self {
        let x: Vec<f64> = grid.coordinates().collect();
        Self {
            v0,
            cosine: x.iter().map(|x| -v0 * x.cos()).collect(),
            absorption: x.iter().map(|&x| absorber_profile(pml, x)).collect(),
            x,
        }
    }

    fn fill(&self, gamma: f64, out: &mut [Complex64]) {
        let tilt = self.v0 * gamma;
        for (j, v) in out.iter_mut().enumerate() {
            *v = Complex64::new(self.cosine[j] - tilt * self.x[j], -self.absorption[j]);
        }
    }
}

/// One Crank–Nicolson step of `i dpsi/dt = (-1/2 d^2/dx^2 + V) psi`.
pub fn step(psi: &WaveFunction, potential: &[Complex64], dt: f64) -> Result<WaveFunction> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let grid = *psi.grid();
    if potential.len() != grid.n_points() {
        return Err(Error::invalid("potential", "length does not match grid"));
    }
    let mut cn = Cayley::real_time(dt, grid.dx(), potential)?;
    let mut next = psi.clone();
    cn.apply(next.amplitudes_mut());
    Ok(next)
}

fn barrier_probe(gamma: f64) -> f64 {
    std::f64::consts::PI - gamma.min(1.0).asin()
}

fn sample(series: &mut TimeSeries, psi: &WaveFunction, accounting: Region, t: f64, gamma: f64) -> Result<()> {
    let grid = psi.grid();
    let probe = barrier_probe(gamma);
    let flux = if probe > grid.x_min() && probe < grid.x_max() {
        probability_current(psi, probe)?
    } else {
        f64::NAN
    };
    series.times.push(t);
    series.gamma.push(gamma);
    series.survival.push(norm_squared(psi, accounting)?);
    series.norm_full.push(psi.norm());
    series.x_mean.push(psi.mean_position());
    series.flux_at_xstar.push(flux);
    Ok(())
}

/// Propagates `psi0` under `drive` with the absorbing layer `pml`.
///
/// For a ramp the potential is rebuilt every step at the step midpoint.
pub fn evolve(psi0: &WaveFunction, drive: &Drive, pml: &PmlParams, cfg: &SolverConfig) -> Result<Evolution> {
    cfg.validate()?;
    let _ftz = FlushSubnormals::new();
    let grid = *psi0.grid();
    pml.check_fits(&grid)?;
    let parts = PotentialParts::new(drive.v0(), pml, &grid);
    let accounting = pml.free_region(&grid);

    let dt = cfg.dt;
    let mut potential = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    let mut gamma_now = drive.gamma_at(0.5 * dt)?;
    parts.fill(gamma_now, &mut potential);
    warn_on_coarse_step(&potential, &grid, accounting, dt);
    warn_on_band_edge(&parts, psi0, drive.max_gamma(), grid.dx());
    let mut cn = Cayley::real_time(dt, grid.dx(), &potential)?;

    let mut psi = psi0.clone();
    psi.clamp_endpoints();
    let mut series = TimeSeries::default();
    sample(&mut series, &psi, accounting, 0.0, drive.gamma_at(0.0)?)?;

    let n_steps = cfg.n_steps();
    for s in 1..=n_steps {
        if let Drive::Ramp { .. } = drive {
            let g = drive.gamma_at((s as f64 - 0.5) * dt)?;
            if g != gamma_now {
                gamma_now = g;
                parts.fill(g, &mut potential);
                cn.refactor(&potential)?;
            }
        }
        cn.apply(psi.amplitudes_mut());

        if s % cfg.observe_every == 0 || s == n_steps {
            let t = s as f64 * dt;
            sample(&mut series, &psi, accounting, t, drive.gamma_at(t)?)?;
            let last = *series.survival.last().unwrap_or(&f64::NAN);
            if !last.is_finite() || !series.norm_full.last().is_some_and(|n| n.is_finite()) {
                return Err(Error::NumericalBlowUp {
                    step: s,
                    partial: Box::new(series),
                });
            }
            if cfg.stop_survival.is_some_and(|floor| last < floor) {
                break;
            }
        }
    }
    Ok(Evolution {
        series,
        final_state: psi,
    })
}

fn warn_on_coarse_step(potential: &[Complex64], grid: &Grid1D, region: Region, dt: f64) {
    if let Some((lo, hi)) = grid.index_range(region) {
        let max_u = potential[lo..=hi].iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        if dt * max_u > 0.5 {
            log::warn!(
                "dt * max|U| = {:.3} exceeds 0.5 in the absorber-free region",
                dt * max_u
            );
        }
    }
}

/// The three-point Laplacian caps kinetic energy at `2 / dx^2`. Particles
/// that slide further down the tilt than that undergo Bloch reflection and
/// return toward the well instead of being absorbed.
fn warn_on_band_edge(parts: &PotentialParts, psi0: &WaveFunction, gamma: f64, dx: f64) {
    let peak = psi0
        .amplitudes()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map_or(0, |(j, _)| j);
    let u = |j: usize| parts.cosine[j] - parts.v0 * gamma * parts.x[j];
    let lowest = (0..parts.x.len()).map(u).fold(f64::INFINITY, f64::min);
    let kinetic = u(peak) - lowest;
    let band_top = 2.0 / (dx * dx);
    if kinetic > band_top {
        log::warn!(
            "escaping kinetic energy {kinetic:.0} exceeds the lattice band top {band_top:.0}; reduce dx to avoid Bloch reflection"
        );
    }
}

/// Harmonic ground state `exp(-omega_p (x - x_min)^2 / 2)` of the well.
pub fn gaussian_ground_state(w: &WashboardParams, g: &Grid1D) -> Result<WaveFunction> {
    let omega = plasma_frequency(w)?;
    let (x_min, _) = well_extrema(w)?;
    let mut psi = WaveFunction::from_fn(*g, |x| {
        let d = x - x_min;
        Complex64::new((-0.5 * omega * d * d).exp(), 0.0)
    });
    psi.clamp_endpoints();
    crate::state::renormalize(&psi)
}

/// Well region used for relaxation: one half period left of the minimum up to
/// halfway between the barrier top and the point where the potential falls
/// back to the well-bottom value.
pub fn default_relax_region(w: &WashboardParams) -> Result<Region> {
    let (x_min, x_top) = well_extrema(w)?;
    let exit = barrier_exit(w)?;
    Region::new(x_min - std::f64::consts::PI, x_top + 0.5 * (exit - x_top))
}

/// Lowest state of the well obtained by propagating in imaginary time with
/// Dirichlet walls at the edges of `region`.
///
/// `cfg.dt` is the imaginary-time step and `cfg.t_end` bounds the total
/// imaginary time.
pub fn imaginary_time_relax(
    w: &WashboardParams,
    grid: &Grid1D,
    region: Region,
    cfg: &SolverConfig,
) -> Result<WaveFunction> {
    cfg.validate()?;
    let (x_min, x_top) = well_extrema(w)?;
    if region.lo > x_min - std::f64::consts::PI + 1e-12 || region.hi < x_top - 1e-12 {
        return Err(Error::invalid(
            "region",
            format!(
                "[{}, {}] must contain the well [{}, {}]",
                region.lo,
                region.hi,
                x_min - std::f64::consts::PI,
                x_top
            ),
        ));
    }
    let (lo, hi) = grid.index_range(region).ok_or(Error::RegionOutsideGrid)?;
    let _ftz = FlushSubnormals::new();
    if hi - lo < 4 {
        return Err(Error::invalid("region", "fewer than five nodes"));
    }
    let dx = grid.dx();
    let real_potential: Vec<f64> = (lo..=hi).map(|i| washboard_eval(w, grid.x(i))).collect();
    let potential: Vec<Complex64> = real_potential.iter().map(|&u| Complex64::new(u, 0.0)).collect();

    let seed = gaussian_ground_state(w, grid)?;
    let mut psi: Vec<Complex64> = seed.amplitudes()[lo..=hi].to_vec();
    let m = psi.len();
    psi[0] = Complex64::new(0.0, 0.0);
    psi[m - 1] = Complex64::new(0.0, 0.0);

    let mut cn = Cayley::imaginary_time(cfg.dt, dx, &potential)?;
    let mut energy = rayleigh_quotient(&psi, &real_potential, dx);
    let max_steps = cfg.n_steps();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_steps {
        cn.apply(&mut psi);
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NullState);
        }
        let scale = 1.0 / norm.sqrt();
        psi.iter_mut().for_each(|a| *a *= scale);
        let next = rayleigh_quotient(&psi, &real_potential, dx);
        residual = (next - energy).abs() / cfg.dt;
        energy = next;
        if residual < RELAX_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            steps: max_steps,
            residual,
        });
    }
    let mut full = WaveFunction::zeros(*grid);
    full.amplitudes_mut()[lo..=hi].copy_from_slice(&psi);
    crate::state::renormalize(&full)
}
