//! Spatial lattice, wavefunction storage and integral observables.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Minimum number of lattice points accepted by [`Grid1D::new`].
pub const MIN_POINTS: usize = 16;

/// Uniform lattice on `[x_min, x_max]`.
///
/// Coordinates are always computed from the index (`x_min + i * dx`), so long
/// grids do not accumulate drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::invalid(
                "grid",
                format!("need x_min < x_max, got [{x_min}, {x_max}]"),
            ));
        }
        if n_points < MIN_POINTS {
            return Err(Error::invalid("grid.n_points", format!("{n_points} < {MIN_POINTS}")));
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Self {
            x_min,
            x_max,
            n_points,
            dx,
        })
    }

    /// Grid starting at `x_min` with spacing exactly `dx`, extended so that it
    /// reaches at least `x_max`.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::invalid("grid.dx", format!("must be > 0, got {dx}")));
        }
        if x_min >= x_max {
            return Err(Error::invalid(
                "grid",
                format!("need x_min < x_max, got [{x_min}, {x_max}]"),
            ));
        }
        let cells = ((x_max - x_min) / dx - 1e-9).ceil().max(1.0) as usize;
        let n_points = cells + 1;
        if n_points < MIN_POINTS {
            return Err(Error::invalid("grid.n_points", format!("{n_points} < {MIN_POINTS}")));
        }
        Ok(Self {
            x_min,
            x_max: x_min + cells as f64 * dx,
            n_points,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx
        }
    }

    pub fn coordinates(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let f = ((x - self.x_min) / self.dx).round();
        if f <= 0.0 {
            0
        } else {
            (f as usize).min(self.n_points - 1)
        }
    }

    /// Inclusive node range covered by `region`, or `None` when no node lies in it.
    pub fn index_range(&self, region: Region) -> Option<(usize, usize)> {
        let tol = 1e-9;
        let lo = ((region.lo - self.x_min) / self.dx - tol).ceil().max(0.0);
        let hi = ((region.hi - self.x_min) / self.dx + tol).floor();
        if hi < 0.0 || lo > (self.n_points - 1) as f64 {
            return None;
        }
        let lo = lo as usize;
        let hi = (hi as usize).min(self.n_points - 1);
        (lo <= hi).then_some((lo, hi))
    }
}

/// Closed integration interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
}

impl Region {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid("region", format!("need lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn full(grid: &Grid1D) -> Self {
        Self {
            lo: grid.x_min(),
            hi: grid.x_max(),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Complex amplitudes on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid1D, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::invalid(
                "amplitudes",
                format!("length {} does not match grid ({})", amplitudes.len(), grid.n_points()),
            ));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.coordinates().map(f).collect();
        Self { grid, amplitudes }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Sets both endpoint amplitudes to zero.
    pub fn clamp_endpoints(&mut self) {
        let n = self.amplitudes.len();
        self.amplitudes[0] = Complex64::new(0.0, 0.0);
        self.amplitudes[n - 1] = Complex64::new(0.0, 0.0);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// Full-grid norm.
    pub fn norm(&self) -> f64 {
        trapezoid_norm(&self.amplitudes, self.grid.dx())
    }

    /// `<x>` weighted by `|psi|^2`, normalized by the full-grid norm.
    pub fn mean_position(&self) -> f64 {
        let n = self.amplitudes.len();
        let (mut num, mut den) = (0.0, 0.0);
        for (i, a) in self.amplitudes.iter().enumerate() {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            let p = w * a.norm_sqr();
            num += p * self.grid.x(i);
            den += p;
        }
        if den > 0.0 {
            num / den
        } else {
            f64::NAN
        }
    }

    /// `<x^2> - <x>^2`.
    pub fn position_variance(&self) -> f64 {
        let mean = self.mean_position();
        let n = self.amplitudes.len();
        let (mut num, mut den) = (0.0, 0.0);
        for (i, a) in self.amplitudes.iter().enumerate() {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            let p = w * a.norm_sqr();
            let d = self.grid.x(i) - mean;
            num += p * d * d;
            den += p;
        }
        num / den
    }

    /// `<phi|psi>` by trapezoid quadrature; both states must share a grid.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid", "states live on different grids"));
        }
        let n = self.amplitudes.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, (a, b)) in self.amplitudes.iter().zip(&other.amplitudes).enumerate() {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            acc += a.conj() * b * w;
        }
        Ok(acc * self.grid.dx())
    }

    pub fn has_non_finite(&self) -> bool {
        self.amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite())
    }
}

pub(crate) fn trapezoid_norm(amplitudes: &[Complex64], dx: f64) -> f64 {
    let n = amplitudes.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = amplitudes[1..n - 1].iter().map(|a| a.norm_sqr()).sum();
    dx * (interior + 0.5 * (amplitudes[0].norm_sqr() + amplitudes[n - 1].norm_sqr()))
}

/// `∫_region |psi|^2 dx` by composite trapezoid over the nodes inside `region`.
pub fn norm_squared(psi: &WaveFunction, region: Region) -> Result<f64> {
    let (lo, hi) = psi.grid.index_range(region).ok_or(Error::RegionOutsideGrid)?;
    Ok(trapezoid_norm(&psi.amplitudes[lo..=hi], psi.grid.dx()))
}

/// Probability current `Im(psi* dpsi/dx)` at the node nearest `x_probe`.
pub fn probability_current(psi: &WaveFunction, x_probe: f64) -> Result<f64> {
    let g = psi.grid;
    if !(x_probe > g.x_min() && x_probe < g.x_max()) {
        return Err(Error::ProbeOutsideGrid(x_probe));
    }
    let i = g.nearest_index(x_probe).clamp(1, g.n_points() - 2);
    let a = &psi.amplitudes;
    let derivative = (a[i + 1] - a[i - 1]) / (2.0 * g.dx());
    Ok((a[i].conj() * derivative).im)
}

pub fn renormalize(psi: &WaveFunction) -> Result<WaveFunction> {
    let n = psi.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::NullState);
    }
    Ok(psi.scaled(1.0 / n.sqrt()))
}
