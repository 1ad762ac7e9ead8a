//! Cayley-form (Crank–Nicolson) propagator for `H = -1/2 d^2/dx^2 + V(x)` on a
//! uniform grid with Dirichlet endpoints.
//!
//! One step solves `(1 + a H/2) psi' = (1 - a H/2) psi` with `a = i dt` for real
//! time and `a = dtau` for imaginary time. The interior system is tridiagonal
//! with a constant off-diagonal; its LU factors are cached so that a step with
//! an unchanged potential costs two sweeps.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct Cayley {
    alpha: Complex64,
    inv_dx2: f64,
    /// Off-diagonal of the left-hand matrix, `-a / (4 dx^2)`. Rows are stored
    /// divided by it, which leaves unit off-diagonals in both matrices.
    off: Complex64,
    /// Right-hand diagonal over `off`.
    rhs_diag: Vec<Complex64>,
    /// Inverse pivots of the scaled left-hand matrix; also its upper factor.
    inv_pivot: Vec<Complex64>,
}

impl Cayley {
    /// `alpha` is `i dt` (real time) or `dtau` (imaginary time).
    pub fn new(alpha: Complex64, dx: f64, potential: &[Complex64]) -> Result<Self> {
        let n = potential.len();
        if n < 3 {
            return Err(Error::invalid("grid", "need at least three nodes"));
        }
        let inv_dx2 = 1.0 / (dx * dx);
        let mut c = Self {
            alpha,
            inv_dx2,
            off: -alpha * (0.25 * inv_dx2),
            rhs_diag: vec![ZERO; n],
            inv_pivot: vec![ZERO; n],
        };
        c.refactor(potential)?;
        Ok(c)
    }

    pub fn real_time(dt: f64, dx: f64, potential: &[Complex64]) -> Result<Self> {
        Self::new(Complex64::new(0.0, dt), dx, potential)
    }

    pub fn imaginary_time(dtau: f64, dx: f64, potential: &[Complex64]) -> Result<Self> {
        Self::new(Complex64::new(dtau, 0.0), dx, potential)
    }

    pub fn len(&self) -> usize {
        self.rhs_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs_diag.is_empty()
    }

    /// Rebuilds the factorization for a new potential on the same grid.
    #[allow(clippy::needless_range_loop)]
    pub fn refactor(&mut self, potential: &[Complex64]) -> Result<()> {
        let n = self.len();
        if potential.len() != n {
            return Err(Error::invalid(
                "potential",
                format!("length {} != {}", potential.len(), n),
            ));
        }
        let half = 0.5 * self.alpha;
        let inv_off = 1.0 / self.off;
        let mut prev_inv = ZERO;
        for j in 1..n - 1 {
            let h = potential[j] + self.inv_dx2;
            self.rhs_diag[j] = (Complex64::new(1.0, 0.0) - half * h) * inv_off;
            let pivot = (Complex64::new(1.0, 0.0) + half * h) * inv_off - prev_inv;
            let mag = pivot.norm_sqr();
            if !(mag > 0.0) || !mag.is_finite() {
                return Err(Error::SingularSystem(j));
            }
            prev_inv = pivot.conj() / mag;
            self.inv_pivot[j] = prev_inv;
        }
        Ok(())
    }

    /// Advances `psi` in place by one step. Endpoints are held at zero.
    pub fn apply(&mut self, psi: &mut [Complex64]) {
        let n = self.len();
        assert_eq!(psi.len(), n);
        let diag = &self.rhs_diag[..n];
        let inv = &self.inv_pivot[..n];
        psi[0] = ZERO;
        psi[n - 1] = ZERO;
        // Right-hand side fused into the forward sweep; the intermediate
        // solution overwrites `psi` once the old value has been consumed.
        let mut prev = ZERO;
        let mut left = ZERO;
        for j in 1..n - 1 {
            let cur = psi[j];
            let rhs = diag[j] * cur - (left + psi[j + 1]);
            prev = (rhs - prev) * inv[j];
            psi[j] = prev;
            left = cur;
        }
        let mut next = ZERO;
        for j in (1..n - 1).rev() {
            next = psi[j] - inv[j] * next;
            psi[j] = next;
        }
    }
}

/// `<psi|H|psi> / <psi|psi>` for a real potential, with the same second-order
/// Laplacian the propagator uses.
pub fn rayleigh_quotient(psi: &[Complex64], potential: &[f64], dx: f64) -> f64 {
    let n = psi.len();
    let inv_dx2 = 1.0 / (dx * dx);
    let (mut num, mut den) = (0.0, 0.0);
    for j in 1..n - 1 {
        let lap = (2.0 * psi[j] - psi[j - 1] - psi[j + 1]) * (0.5 * inv_dx2);
        let h_psi = lap + psi[j] * potential[j];
        num += (psi[j].conj() * h_psi).re;
        den += psi[j].norm_sqr();
    }
    num / den
}
