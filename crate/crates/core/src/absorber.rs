//! Imaginary absorbing layer `W(s) = exp(s / l_ext) (A s)^6`, where `s` is the
//! depth into the layer, and the reflection diagnostic that checks it.
//!
//! The layer enters the Hamiltonian as `U(x) - i W(x)` with `W >= 0`, so the
//! norm can only decrease.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potentials::{washboard_eval, well_extrema, WashboardParams};
use crate::propagator::Cayley;
use crate::state::{norm_squared, Grid1D, Region, WaveFunction};

pub const DEFAULT_AMPLITUDE: f64 = 1e-3;
pub const DEFAULT_DECAY_LENGTH: f64 = 1e3;
pub const DEFAULT_WIDTH: f64 = 1e3;

/// Free space left of the well, in units of pi.
const WELL_MARGIN_LEFT: f64 = 6.0;
/// Distance from the barrier top to the layer onset, in units of pi.
const LAYER_OFFSET_RIGHT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sides {
    Right,
    Left,
    Both,
}

impl Sides {
    pub fn right(self) -> bool {
        matches!(self, Sides::Right | Sides::Both)
    }

    pub fn left(self) -> bool {
        matches!(self, Sides::Left | Sides::Both)
    }
}

impl std::str::FromStr for Sides {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(Sides::Right),
            "left" => Ok(Sides::Left),
            "both" => Ok(Sides::Both),
            other => Err(Error::invalid(
                "pml.sides",
                format!("expected right|left|both, got {other:?}"),
            )),
        }
    }
}

impl std::fmt::Display for Sides {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sides::Right => "right",
            Sides::Left => "left",
            Sides::Both => "both",
        })
    }
}

/// Absorbing layer geometry and strength.
///
/// The right layer occupies `[x0, x0 + width]`; the left layer mirrors it on
/// `[x0_left - width, x0_left]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlParams {
    pub amplitude: f64,
    pub decay_length: f64,
    pub x0: f64,
    pub width: f64,
    pub sides: Sides,
    pub x0_left: f64,
}

impl PmlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::invalid("pml.A", format!("must be >= 0, got {}", self.amplitude)));
        }
        if !(self.decay_length > 0.0) {
            return Err(Error::invalid(
                "pml.l_ext",
                format!("must be > 0, got {}", self.decay_length),
            ));
        }
        if !(self.width > 0.0) {
            return Err(Error::invalid("pml.width", format!("must be > 0, got {}", self.width)));
        }
        if self.sides.left() && self.sides.right() && self.x0_left > self.x0 {
            return Err(Error::invalid(
                "pml.x0_left",
                "left layer onset lies right of the right onset",
            ));
        }
        Ok(())
    }

    /// Checks that every active layer lies inside `grid`.
    pub fn check_fits(&self, grid: &Grid1D) -> Result<()> {
        self.validate()?;
        let tol = 1e-9 * (1.0 + grid.x_max().abs().max(grid.x_min().abs()));
        if self.sides.right() && (self.x0 < grid.x_min() || self.x0 + self.width > grid.x_max() + tol) {
            return Err(Error::LayerOutsideGrid(format!(
                "right layer [{}, {}] exceeds grid [{}, {}]",
                self.x0,
                self.x0 + self.width,
                grid.x_min(),
                grid.x_max()
            )));
        }
        if self.sides.left() && (self.x0_left > grid.x_max() || self.x0_left - self.width < grid.x_min() - tol) {
            return Err(Error::LayerOutsideGrid(format!(
                "left layer [{}, {}] exceeds grid [{}, {}]",
                self.x0_left - self.width,
                self.x0_left,
                grid.x_min(),
                grid.x_max()
            )));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.amplitude > 0.0
    }

    /// Part of the grid where the absorber vanishes identically. This is the
    /// domain over which the survival probability is accounted.
    pub fn free_region(&self, grid: &Grid1D) -> Region {
        let lo = if self.is_active() && self.sides.left() {
            self.x0_left.max(grid.x_min())
        } else {
            grid.x_min()
        };
        let hi = if self.is_active() && self.sides.right() {
            self.x0.min(grid.x_max())
        } else {
            grid.x_max()
        };
        Region { lo, hi }
    }

    /// Same layer with the amplitude set to zero.
    pub fn disabled(&self) -> Self {
        Self {
            amplitude: 0.0,
            ..*self
        }
    }
}

/// Grid plus absorber placed around the principal well of a washboard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainLayout {
    pub grid: Grid1D,
    pub pml: PmlParams,
}

impl DomainLayout {
    /// Layer strength from the standard calibration (`A = 1e-3`,
    /// `l_ext = 1e3`, width `1e3`); the right onset sits `8 pi` past the
    /// barrier top and the grid extends `6 pi` left of the well minimum (plus
    /// a mirrored layer when `sides` includes the left).
    pub fn around_well(w: &WashboardParams, dx: f64, sides: Sides) -> Result<Self> {
        Self::around_well_with(w, dx, sides, DEFAULT_AMPLITUDE, DEFAULT_DECAY_LENGTH, DEFAULT_WIDTH)
    }

    pub fn around_well_with(
        w: &WashboardParams,
        dx: f64,
        sides: Sides,
        amplitude: f64,
        decay_length: f64,
        width: f64,
    ) -> Result<Self> {
        let (x_min, x_top) = well_extrema(w)?;
        let left_edge = x_min - WELL_MARGIN_LEFT * PI;
        let x0 = x_top + LAYER_OFFSET_RIGHT * PI;
        let grid_lo = if sides.left() { left_edge - width } else { left_edge };
        let grid_hi = if sides.right() { x0 + width } else { x0 };
        let grid = Grid1D::with_spacing(grid_lo, grid_hi, dx)?;
        let pml = PmlParams {
            amplitude,
            decay_length,
            x0,
            width,
            sides,
            x0_left: left_edge,
        };
        pml.check_fits(&grid)?;
        Ok(Self { grid, pml })
    }
}

impl DomainLayout {
    /// Layers around a potential-free stretch `[0, L]` long enough for the
    /// probe packet that [`reflection_coefficient`] launches at momentum
    /// `k_min`.
    pub fn for_reflection(
        amplitude: f64,
        decay_length: f64,
        width: f64,
        sides: Sides,
        dx: f64,
        k_min: f64,
    ) -> Result<Self> {
        if !(k_min > 0.0) {
            return Err(Error::invalid("k", format!("must be > 0, got {k_min}")));
        }
        let length = 16.0 * (4.0 / k_min).clamp(4.0, MAX_PROBE_SIGMA);
        let grid_lo = if sides.left() { -width } else { 0.0 };
        let grid_hi = if sides.right() { length + width } else { length };
        let grid = Grid1D::with_spacing(grid_lo, grid_hi, dx)?;
        let pml = PmlParams {
            amplitude,
            decay_length,
            x0: length,
            width,
            sides,
            x0_left: 0.0,
        };
        pml.check_fits(&grid)?;
        Ok(Self { grid, pml })
    }
}

/// `W(x) >= 0`; zero outside the active layers.
pub fn absorber_profile(p: &PmlParams, x: f64) -> f64 {
    if p.amplitude == 0.0 {
        return 0.0;
    }
    let depth = if p.sides.right() && x >= p.x0 && x <= p.x0 + p.width {
        x - p.x0
    } else if p.sides.left() && x <= p.x0_left && x >= p.x0_left - p.width {
        p.x0_left - x
    } else {
        return 0.0;
    };
    (depth / p.decay_length).exp() * (p.amplitude * depth).powi(6)
}

/// Per-node `U(x) - i W(x)`.
pub fn build_complex_potential(w: &WashboardParams, p: &PmlParams, g: &Grid1D) -> Result<Vec<Complex64>> {
    p.check_fits(g)?;
    Ok(g.coordinates()
        .map(|x| Complex64::new(washboard_eval(w, x), -absorber_profile(p, x)))
        .collect())
}

/// Per-node `-i W(x)` (free particle inside the absorber).
pub fn absorber_only_potential(p: &PmlParams, g: &Grid1D) -> Result<Vec<Complex64>> {
    p.check_fits(g)?;
    Ok(g.coordinates()
        .map(|x| Complex64::new(0.0, -absorber_profile(p, x)))
        .collect())
}

/// Gaussian test packet for [`reflection_coefficient_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionProbe {
    pub k: f64,
    pub center: f64,
    pub sigma: f64,
}

/// Packets start this many widths away from any layer.
const PROBE_CLEARANCE: f64 = 6.0;
/// The transient is over once the norm left in the layers drops below this
/// fraction of the initial norm.
const LAYER_EMPTY: f64 = 1e-10;
const MAX_PROBE_SIGMA: f64 = 20.0;

/// Fraction of a free Gaussian packet with mean momentum `k` that returns from
/// the absorbing layer. The packet is placed in the middle of the free region
/// and aimed at the right layer (or the left one if only that is active).
pub fn reflection_coefficient(p: &PmlParams, k: f64, g: &Grid1D) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::invalid("k", format!("must be > 0, got {k}")));
    }
    let free = p.free_region(g);
    let length = free.hi - free.lo;
    let sigma = (length / 16.0).min(MAX_PROBE_SIGMA);
    if sigma < 4.0 / k {
        return Err(Error::invalid(
            "grid",
            format!("free region of length {length} is too short for a packet with k = {k}"),
        ));
    }
    let center = 0.5 * (free.lo + free.hi);
    let k = if p.sides.right() { k } else { -k };
    reflection_coefficient_with(p, ReflectionProbe { k, center, sigma }, g)
}

pub fn reflection_coefficient_with(p: &PmlParams, probe: ReflectionProbe, g: &Grid1D) -> Result<f64> {
    p.check_fits(g)?;
    let free = p.free_region(g);
    let reach = PROBE_CLEARANCE * probe.sigma;
    if probe.center - reach < free.lo || probe.center + reach > free.hi {
        return Err(Error::invalid(
            "probe",
            "packet initially overlapping the absorber (or the grid edge)",
        ));
    }
    if !(probe.sigma > 0.0) || probe.k == 0.0 {
        return Err(Error::invalid("probe", "need sigma > 0 and k != 0"));
    }
    let dx = g.dx();
    let speed = probe.k.abs();
    let energy = 0.5 * speed * speed;
    let dt = (0.1 / energy).min(0.05);

    // Cayley-form group velocity on the lattice; bounds the round trip.
    let lattice_energy = (1.0 - (speed * dx).cos()) / (dx * dx);
    let group = ((speed * dx).sin() / dx) / (1.0 + (0.5 * lattice_energy * dt).powi(2));
    let wall_distance = if probe.k > 0.0 {
        g.x_max() - probe.center
    } else {
        probe.center - g.x_min()
    };
    let t_max = (2.0 * wall_distance + 10.0 * probe.sigma) / group;
    let t_entered = (free.hi - free.lo) / group;

    let amp = (2.0 * PI * probe.sigma * probe.sigma).powf(-0.25);
    let mut psi = WaveFunction::from_fn(*g, |x| {
        let d = x - probe.center;
        Complex64::from_polar(amp * (-d * d / (4.0 * probe.sigma * probe.sigma)).exp(), probe.k * d)
    });
    psi.clamp_endpoints();
    let initial = psi.norm();

    let potential = absorber_only_potential(p, g)?;
    let _ftz = crate::propagator::FlushSubnormals::new();
    let mut cn = Cayley::real_time(dt, dx, &potential)?;
    let check_every = ((1.0 / dt).ceil() as usize).max(1);
    let steps = (t_max / dt).ceil() as usize;
    for s in 1..=steps {
        cn.apply(psi.amplitudes_mut());
        if s % check_every == 0 && s as f64 * dt > t_entered {
            let total = psi.norm();
            let free_norm = norm_squared(&psi, free)?;
            if (total - free_norm).max(0.0) < LAYER_EMPTY * initial {
                break;
            }
        }
    }
    if psi.has_non_finite() {
        return Err(Error::NumericalBlowUp {
            step: steps,
            partial: Box::default(),
        });
    }
    let r = norm_squared(&psi, free)? / initial;
    Ok(r.clamp(0.0, 1.0))
}
