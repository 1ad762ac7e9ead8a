//! Tilted washboard and cubic potentials, barrier heights, the bias ramp and
//! conversion from junction parameters to normalized units.
//!
//! Energies are in units of the charging energy and lengths are the phase
//! coordinate, so the kinetic term is `-1/2 d^2/dx^2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Barrier heights below this are treated as a vanished well.
pub const MIN_BARRIER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WashboardParams {
    /// Barrier scale `E_J / E_C`.
    pub v0: f64,
    /// Normalized bias `I / I_0`.
    pub gamma: f64,
}

impl WashboardParams {
    pub fn new(v0: f64, gamma: f64) -> Result<Self> {
        if !(v0 > 0.0) || !v0.is_finite() {
            return Err(Error::invalid("V0", format!("must be > 0, got {v0}")));
        }
        check_gamma(gamma)?;
        Ok(Self { v0, gamma })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.v0, gamma)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid("gamma", format!("gamma must lie in [0,1], got {gamma}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicParams {
    pub g: f64,
    pub omega_p: f64,
}

impl CubicParams {
    pub fn new(g: f64, omega_p: f64) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid("g", format!("must be > 0, got {g}")));
        }
        if !(omega_p > 0.0) || !omega_p.is_finite() {
            return Err(Error::invalid("omega_p", format!("must be > 0, got {omega_p}")));
        }
        Ok(Self { g, omega_p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RampShape {
    #[default]
    Linear,
}

/// Bias sweep from `gamma_start` to `gamma_end` over a duration `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSpec {
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub duration: f64,
    pub shape: RampShape,
}

impl RampSpec {
    pub fn new(gamma_start: f64, gamma_end: f64, duration: f64) -> Result<Self> {
        check_gamma(gamma_start)?;
        check_gamma(gamma_end)?;
        if gamma_start > gamma_end {
            return Err(Error::invalid(
                "ramp",
                format!("gamma_start ({gamma_start}) exceeds gamma_end ({gamma_end})"),
            ));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::invalid("ramp.T", format!("must be > 0, got {duration}")));
        }
        Ok(Self {
            gamma_start,
            gamma_end,
            duration,
            shape: RampShape::Linear,
        })
    }

    /// `d gamma / d t`.
    pub fn sweep_rate(&self) -> f64 {
        (self.gamma_end - self.gamma_start) / self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalJunction {
    /// Critical current in amperes.
    pub critical_current: f64,
    /// Capacitance in farads.
    pub capacitance: f64,
}

/// Result of [`physical_to_normalized`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedUnits {
    pub v0: f64,
    pub time_unit_seconds: f64,
    pub josephson_energy: f64,
    pub charging_energy: f64,
}

/// `U(x) = -V0 (cos x + gamma x)`.
#[inline]
pub fn washboard_eval(p: &WashboardParams, x: f64) -> f64 {
    -p.v0 * (x.cos() + p.gamma * x)
}

/// `U(x) = -g x^3 + omega_p^2 x^2 / 2`.
#[inline]
pub fn cubic_eval(p: &CubicParams, x: f64) -> f64 {
    -p.g * x * x * x + 0.5 * p.omega_p * p.omega_p * x * x
}

/// `2 V0 [sqrt(1 - gamma^2) - gamma arccos(gamma)]`.
pub fn barrier_height_washboard(p: &WashboardParams) -> Result<f64> {
    check_gamma(p.gamma)?;
    let g = p.gamma;
    let h = 2.0 * p.v0 * ((1.0 - g * g).sqrt() - g * g.acos());
    Ok(h.max(0.0))
}

/// `omega_p^6 / (54 g^2)`.
pub fn barrier_height_cubic(p: &CubicParams) -> f64 {
    p.omega_p.powi(6) / (54.0 * p.g * p.g)
}

/// Well minimum and barrier top `(arcsin gamma, pi - arcsin gamma)` of the principal cell.
pub fn well_extrema(p: &WashboardParams) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&p.gamma) {
        return Err(Error::NoMetastableWell(p.gamma));
    }
    let x_min = p.gamma.asin();
    Ok((x_min, PI - x_min))
}

/// Small-oscillation frequency at the well bottom, `sqrt(V0 sqrt(1 - gamma^2))`.
pub fn plasma_frequency(p: &WashboardParams) -> Result<f64> {
    if !(0.0..1.0).contains(&p.gamma) {
        return Err(Error::NoMetastableWell(p.gamma));
    }
    Ok((p.v0 * (1.0 - p.gamma * p.gamma).sqrt()).sqrt())
}

/// Cubic model with the same well curvature and barrier height as `p`.
pub fn cubic_fit_from_washboard(p: &WashboardParams) -> Result<CubicParams> {
    let omega_p = plasma_frequency(p)?;
    let barrier = barrier_height_washboard(p)?;
    if barrier < MIN_BARRIER {
        return Err(Error::DegenerateBarrier(barrier));
    }
    CubicParams::new(omega_p.powi(3) / (54.0 * barrier).sqrt(), omega_p)
}

/// Bias at time `t`; holds at `gamma_end` once the ramp has finished.
pub fn ramp_gamma(r: &RampSpec, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::invalid("t", format!("ramp time must be >= 0, got {t}")));
    }
    if t >= r.duration {
        return Ok(r.gamma_end);
    }
    match r.shape {
        RampShape::Linear => Ok(r.gamma_start + (r.gamma_end - r.gamma_start) * t / r.duration),
    }
}

// CODATA 2018 exact SI values.
const PLANCK: f64 = 6.626_070_15e-34;
const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

pub fn physical_to_normalized(j: &PhysicalJunction) -> Result<NormalizedUnits> {
    if !(j.critical_current > 0.0) {
        return Err(Error::invalid("I0", "critical current must be > 0"));
    }
    if !(j.capacitance > 0.0) {
        return Err(Error::invalid("C", "capacitance must be > 0"));
    }
    let hbar = PLANCK / (2.0 * PI);
    let reduced_flux = PLANCK / (2.0 * ELEMENTARY_CHARGE) / (2.0 * PI);
    let josephson_energy = j.critical_current * reduced_flux;
    let charging_energy = hbar * hbar / (j.capacitance * reduced_flux * reduced_flux);
    Ok(NormalizedUnits {
        v0: josephson_energy / charging_energy,
        time_unit_seconds: hbar / charging_energy,
        josephson_energy,
        charging_energy,
    })
}

/// First point right of the barrier top where the potential falls back to the
/// well-bottom value; for `gamma = 0` this is the next minimum at `2 pi`.
pub fn barrier_exit(p: &WashboardParams) -> Result<f64> {
    let (x_min, x_top) = well_extrema(p)?;
    let target = washboard_eval(p, x_min);
    let (mut lo, mut hi) = (x_top, x_min + 2.0 * PI);
    if p.gamma == 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if washboard_eval(p, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Golden-section search for a local extremum of `f` on `[a, b]`.
    fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, maximize: bool) -> f64 {
        let s = if maximize { -1.0 } else { 1.0 };
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if s * f(c) < s * f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    fn numeric_barrier(p: &WashboardParams) -> f64 {
        let u = |x| washboard_eval(p, x);
        let x_min = golden(u, -PI / 2.0, PI / 2.0, false);
        let x_top = golden(u, PI / 2.0, 3.0 * PI / 2.0, true);
        u(x_top) - u(x_min)
    }

    #[test]
    fn washboard_examples() {
        let p = WashboardParams::new(1.0, 0.0).unwrap();
        assert_eq!(washboard_eval(&p, 0.0), -1.0);
        assert_relative_eq!(washboard_eval(&p, PI), 1.0);
        let p = WashboardParams::new(2.0, 0.5).unwrap();
        assert_relative_eq!(washboard_eval(&p, PI / 6.0), -2.255_649_1, epsilon = 1e-6);
    }

    #[test]
    fn washboard_tilted_periodicity() {
        let p = WashboardParams::new(1.7, 0.35).unwrap();
        for x in [-4.0, 0.0, 0.3, 11.0] {
            let d = washboard_eval(&p, x + 2.0 * PI) - washboard_eval(&p, x);
            assert_relative_eq!(d, -2.0 * PI * p.v0 * p.gamma, epsilon = 1e-12);
        }
    }

    #[test]
    fn cubic_examples() {
        let p = CubicParams::new(1.0, 1.0).unwrap();
        assert_eq!(cubic_eval(&p, 0.0), 0.0);
        assert_relative_eq!(cubic_eval(&p, 1.0 / 3.0), 1.0 / 54.0, epsilon = 1e-15);
        assert_relative_eq!(cubic_eval(&p, -1.0), 1.5);
    }

    #[test]
    fn barrier_washboard_examples() {
        let p = WashboardParams::new(3.0, 0.0).unwrap();
        assert_relative_eq!(barrier_height_washboard(&p).unwrap(), 6.0);
        let p = WashboardParams::new(3.0, 1.0).unwrap();
        assert_eq!(barrier_height_washboard(&p).unwrap(), 0.0);
        let p = WashboardParams::new(1.0, 0.5).unwrap();
        let h = barrier_height_washboard(&p).unwrap();
        assert!((h - 0.68490).abs() < 1e-4, "{h}");
        // The sqrt(1 - gamma) variant would give 0.36700.
        assert!((h - 0.36700).abs() > 0.3);
    }

    #[test]
    fn barrier_washboard_rejects_out_of_range_bias() {
        let p = WashboardParams { v0: 1.0, gamma: 1.2 };
        assert!(barrier_height_washboard(&p).is_err());
        assert!(WashboardParams::new(1.0, 1.2)
            .unwrap_err()
            .to_string()
            .contains("gamma must lie in [0,1]"));
    }

    #[test]
    fn barrier_matches_numeric_extremum_oracle() {
        for i in 1..=9 {
            let p = WashboardParams::new(1.0, i as f64 / 10.0).unwrap();
            let exact = barrier_height_washboard(&p).unwrap();
            let oracle = numeric_barrier(&p);
            assert!(
                ((exact - oracle) / oracle).abs() <= 1e-8,
                "gamma {}: {exact} vs {oracle}",
                p.gamma
            );
        }
    }

    #[test]
    fn barrier_decreases_with_bias() {
        let mut last = f64::INFINITY;
        for i in 0..=100 {
            let p = WashboardParams::new(2.0, i as f64 / 100.0).unwrap();
            let h = barrier_height_washboard(&p).unwrap();
            assert!(h < last || (i == 100 && h == 0.0));
            last = h;
        }
    }

    #[test]
    fn cubic_barrier_examples() {
        let p = CubicParams::new(1.0, 1.0).unwrap();
        assert_relative_eq!(barrier_height_cubic(&p), 1.0 / 54.0);
        assert_eq!(barrier_height_cubic(&CubicParams { g: 1.0, omega_p: 0.0 }), 0.0);
        // Brute-force scan for the maximum of the cubic on its barrier side.
        let p = CubicParams::new(2.0, 1.0).unwrap();
        let top = golden(|x| cubic_eval(&p, x), 0.0, 1.0, true);
        assert_relative_eq!(cubic_eval(&p, top), 1.0 / 216.0, epsilon = 1e-12);
        assert_relative_eq!(barrier_height_cubic(&p), 1.0 / 216.0);
    }

    #[test]
    fn extrema_examples() {
        let p = WashboardParams::new(1.0, 0.0).unwrap();
        assert_eq!(well_extrema(&p).unwrap(), (0.0, PI));
        let p = WashboardParams::new(1.0, 0.5).unwrap();
        let (lo, hi) = well_extrema(&p).unwrap();
        assert_relative_eq!(lo, PI / 6.0, epsilon = 1e-14);
        assert_relative_eq!(hi, 5.0 * PI / 6.0, epsilon = 1e-14);
        // Sign change of dU/dx brackets both.
        let du = |x: f64| p.v0 * (x.sin() - p.gamma);
        assert!(du(lo - 1e-6) < 0.0 && du(lo + 1e-6) > 0.0);
        assert!(du(hi - 1e-6) > 0.0 && du(hi + 1e-6) < 0.0);
        let p = WashboardParams::new(1.0, 1.0 - 1e-12).unwrap();
        let (lo, hi) = well_extrema(&p).unwrap();
        assert!((lo - PI / 2.0).abs() < 1e-5 && (hi - PI / 2.0).abs() < 1e-5);
        let p = WashboardParams::new(1.0, 1.0).unwrap();
        assert!(matches!(well_extrema(&p), Err(Error::NoMetastableWell(_))));
    }

    #[test]
    fn plasma_frequency_examples() {
        assert_relative_eq!(plasma_frequency(&WashboardParams::new(1.0, 0.0).unwrap()).unwrap(), 1.0);
        assert_relative_eq!(plasma_frequency(&WashboardParams::new(4.0, 0.0).unwrap()).unwrap(), 2.0);
        let p = WashboardParams::new(1.0, 0.6).unwrap();
        let u = |x| washboard_eval(&p, x);
        let x0 = golden(u, -1.0, 1.5, false);
        let h = 1e-4;
        let curvature = (u(x0 + h) - 2.0 * u(x0) + u(x0 - h)) / (h * h);
        let w = plasma_frequency(&p).unwrap();
        assert_relative_eq!(w, curvature.sqrt(), epsilon = 1e-6);
        assert_relative_eq!(w, 0.894_427_191, epsilon = 1e-9);
        assert!(plasma_frequency(&WashboardParams::new(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn cubic_fit_examples() {
        for gamma in [0.0, 0.3, 0.7] {
            let p = WashboardParams::new(1.3, gamma).unwrap();
            let c = cubic_fit_from_washboard(&p).unwrap();
            let dw = barrier_height_washboard(&p).unwrap();
            assert!((barrier_height_cubic(&c) - dw).abs() <= 1e-10);
            // Curvature of the cubic at its minimum is omega_p^2.
            assert_relative_eq!(c.omega_p, plasma_frequency(&p).unwrap());
        }
        let c = cubic_fit_from_washboard(&WashboardParams::new(1.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(c.omega_p, 1.0);
        assert_relative_eq!(c.g, 1.0 / 108f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(c.g, 0.096_225, epsilon = 1e-6);
        let near = WashboardParams::new(1.0, 1.0 - 1e-15).unwrap();
        assert!(matches!(
            cubic_fit_from_washboard(&near),
            Err(Error::DegenerateBarrier(_))
        ));
        assert!(cubic_fit_from_washboard(&WashboardParams::new(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn ramp_examples() {
        let r = RampSpec::new(0.0, 1.0, 2000.0).unwrap();
        assert_eq!(ramp_gamma(&r, 0.0).unwrap(), 0.0);
        assert_eq!(ramp_gamma(&r, 2000.0).unwrap(), 1.0);
        assert_eq!(ramp_gamma(&r, 1000.0).unwrap(), 0.5);
        assert_eq!(ramp_gamma(&r, 5000.0).unwrap(), 1.0);
        assert!(ramp_gamma(&r, -1.0).is_err());
        assert!(RampSpec::new(0.6, 0.2, 10.0).is_err());
        assert!(RampSpec::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn physical_units_scale_as_expected() {
        let base = PhysicalJunction {
            critical_current: 1e-6,
            capacitance: 1e-12,
        };
        let a = physical_to_normalized(&base).unwrap();
        let c2 = physical_to_normalized(&PhysicalJunction {
            capacitance: 2e-12,
            ..base
        })
        .unwrap();
        assert_relative_eq!(c2.v0 / a.v0, 2.0, epsilon = 1e-12);
        assert_relative_eq!(c2.time_unit_seconds / a.time_unit_seconds, 2.0, epsilon = 1e-12);
        let i2 = physical_to_normalized(&PhysicalJunction {
            critical_current: 2e-6,
            ..base
        })
        .unwrap();
        assert_relative_eq!(i2.v0 / a.v0, 2.0, epsilon = 1e-12);
        assert_relative_eq!(i2.time_unit_seconds, a.time_unit_seconds, epsilon = 0.0);
        // Choose I0 so that E_J equals E_C.
        let matched = PhysicalJunction {
            critical_current: base.critical_current / a.v0,
            ..base
        };
        assert_relative_eq!(physical_to_normalized(&matched).unwrap().v0, 1.0, epsilon = 1e-12);
        assert!(physical_to_normalized(&PhysicalJunction {
            critical_current: 0.0,
            capacitance: 1e-12
        })
        .is_err());
    }

    #[test]
    fn barrier_exit_sits_at_well_bottom_energy() {
        let p = WashboardParams::new(2.0, 0.4).unwrap();
        let (x_min, x_top) = well_extrema(&p).unwrap();
        let x = barrier_exit(&p).unwrap();
        assert!(x > x_top && x < x_min + 2.0 * PI);
        assert_relative_eq!(washboard_eval(&p, x), washboard_eval(&p, x_min), epsilon = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ramp_is_monotone(t1 in 0.0f64..3000.0, t2 in 0.0f64..3000.0, a in 0.0f64..0.5, b in 0.5f64..1.0) {
                let r = RampSpec::new(a, b, 2000.0).unwrap();
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                prop_assert!(ramp_gamma(&r, lo).unwrap() <= ramp_gamma(&r, hi).unwrap());
            }

            #[test]
            fn cubic_fit_matches_curvature_and_barrier(v0 in 0.5f64..50.0, gamma in 0.0f64..0.95) {
                let p = WashboardParams::new(v0, gamma).unwrap();
                let c = cubic_fit_from_washboard(&p).unwrap();
                let dw = barrier_height_washboard(&p).unwrap();
                prop_assert!((barrier_height_cubic(&c) - dw).abs() <= 1e-10 * dw.max(1.0));
                let w = plasma_frequency(&p).unwrap();
                prop_assert!((c.omega_p * c.omega_p - w * w).abs() <= 1e-10 * w * w);
            }
        }
    }
}
