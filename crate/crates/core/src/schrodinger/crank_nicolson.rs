use std::sync::Arc;

use ndarray::{s, Array2, Zip};

use crate::geometry::{dirichlet_laplacian, forward_rows, inverse_rows};
use crate::tridiag::TridiagonalFactor;
use crate::{CylinderGrid, Error, GridFunction, Result, C64};

/// Largest admissible contraction factor `τ ‖q - q̄‖_∞` of the fixed-point
/// iteration.
pub const MAX_CONTRACTION: f64 = 0.5;

const MAX_ITERATIONS: usize = 200;

/// `(I + iτ(-Δ_h + q̄))^{-1}` for a constant `q̄`, diagonal in the axial
/// frequency: one factored tridiagonal system per fiber.
#[derive(Clone, Debug)]
struct FiberedResolvent {
    grid: Arc<CylinderGrid>,
    factors: Vec<TridiagonalFactor>,
}

impl FiberedResolvent {
    fn new(grid: &Arc<CylinderGrid>, tau: f64, qbar: f64) -> Result<Self> {
        let h = grid.cross().spacing();
        let m = grid.cross().interior_len();
        let inv_h2 = 1.0 / (h * h);
        let off = C64::new(0.0, -tau * inv_h2);
        let factors = grid
            .axial()
            .frequencies()
            .iter()
            .map(|&p| {
                let diag = C64::new(1.0, tau * (2.0 * inv_h2 + p * p + qbar));
                TridiagonalFactor::toeplitz(m, off, diag, off)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: Arc::clone(grid),
            factors,
        })
    }

    /// Applies the inverse to the interior rows of `values` in place; the
    /// boundary rows are set to zero.
    fn apply(&self, values: &mut Array2<C64>) {
        let nx = values.nrows();
        let axial = self.grid.axial();
        let mut inner = values.slice(s![1..nx - 1, ..]).to_owned();
        forward_rows(axial, &mut inner);
        let mut col = vec![C64::new(0.0, 0.0); nx - 2];
        for (k, factor) in self.factors.iter().enumerate() {
            for (i, z) in inner.column(k).iter().enumerate() {
                col[i] = *z;
            }
            factor.solve_in_place(&mut col);
            for (i, z) in inner.column_mut(k).iter_mut().enumerate() {
                *z = col[i];
            }
        }
        inverse_rows(axial, &mut inner);
        values.slice_mut(s![1..nx - 1, ..]).assign(&inner);
        values.row_mut(0).fill(C64::new(0.0, 0.0));
        values.row_mut(nx - 1).fill(C64::new(0.0, 0.0));
    }
}

/// Crank–Nicolson integrator for `v' = -iHv + i f`, `H = -Δ_h + q` with
/// homogeneous Dirichlet conditions.
///
/// Each step solves `(I + iτH) v⁺ = (I - iτH) v + iΔt f(t + Δt/2)`,
/// `τ = Δt / 2`, by the fixed-point iteration
/// `w ← P^{-1}(rhs - iτ(q - q̄) w)` with the fibered `P = I + iτ(-Δ_h + q̄)`.
#[derive(Clone, Debug)]
pub struct CrankNicolson {
    grid: Arc<CylinderGrid>,
    q: GridFunction,
    /// `q - q̄` on the interior, zero on the boundary rows.
    dq: Array2<C64>,
    dt: f64,
    contraction: f64,
    resolvent: FiberedResolvent,
}

/// Iteration count and final increment of one step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepStats {
    pub iterations: usize,
    pub increment: f64,
}

impl CrankNicolson {
    pub fn new(q: &GridFunction, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("time step must be positive, got {dt}")));
        }
        if q.max_imag() != 0.0 {
            return Err(Error::param("q", "potential must be real"));
        }
        let grid = Arc::clone(q.grid());
        let nx = grid.cross().len();
        let interior = q.values().slice(s![1..nx - 1, ..]);
        let (lo, hi) = interior
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), z| (l.min(z.re), h.max(z.re)));
        let qbar = 0.5 * (lo + hi);
        let tau = 0.5 * dt;
        let contraction = tau * 0.5 * (hi - lo);
        if contraction >= MAX_CONTRACTION {
            return Err(Error::LinearSolve(format!(
                "fixed-point contraction τ‖q - q̄‖ = {contraction:.3} >= {MAX_CONTRACTION} \
                 (q ∈ [{lo:.3e}, {hi:.3e}], Δt = {dt:.3e}); reduce the time step"
            )));
        }
        let mut dq = q.values().mapv(|z| C64::new(z.re - qbar, 0.0));
        dq.row_mut(0).fill(C64::new(0.0, 0.0));
        dq.row_mut(nx - 1).fill(C64::new(0.0, 0.0));
        Ok(Self {
            resolvent: FiberedResolvent::new(&grid, tau, qbar)?,
            grid,
            q: q.clone(),
            dq,
            dt,
            contraction,
        })
    }

    pub fn grid(&self) -> &Arc<CylinderGrid> {
        &self.grid
    }

    pub fn time_step(&self) -> f64 {
        self.dt
    }

    pub fn contraction(&self) -> f64 {
        self.contraction
    }

    /// `H v = (-Δ_h + q) v` on the interior, zero on the boundary rows.
    pub fn apply_hamiltonian(&self, v: &GridFunction) -> GridFunction {
        let mut out = dirichlet_laplacian(v).scale(C64::new(-1.0, 0.0));
        let nx = self.grid.cross().len();
        Zip::from(out.values_mut().slice_mut(s![1..nx - 1, ..]))
            .and(self.q.values().slice(s![1..nx - 1, ..]))
            .and(v.values().slice(s![1..nx - 1, ..]))
            .for_each(|o, &q, &w| *o += q * w);
        out
    }

    /// Advances `v` by one step with source `f_mid = f(t + Δt/2)`; `guess`
    /// seeds the iteration (the current state when `None`).
    pub fn step(&self, v: &GridFunction, f_mid: &GridFunction, guess: Option<&GridFunction>) -> Result<(GridFunction, StepStats)> {
        let tau = 0.5 * self.dt;
        let hv = self.apply_hamiltonian(v);
        let nx = self.grid.cross().len();
        let mut rhs = v.values().clone();
        Zip::from(&mut rhs)
            .and(hv.values())
            .and(f_mid.values())
            .for_each(|r, &h, &f| *r += C64::new(0.0, -tau) * h + C64::new(0.0, self.dt) * f);
        rhs.row_mut(0).fill(C64::new(0.0, 0.0));
        rhs.row_mut(nx - 1).fill(C64::new(0.0, 0.0));

        let mut w = guess.unwrap_or(v).values().clone();
        let mut next = Array2::zeros(w.dim());
        let mut prev_inc = f64::INFINITY;
        for it in 1..=MAX_ITERATIONS {
            Zip::from(&mut next)
                .and(&rhs)
                .and(&self.dq)
                .and(&w)
                .for_each(|n, &r, &d, &x| *n = r - C64::new(0.0, tau) * d * x);
            self.resolvent.apply(&mut next);
            let mut inc = 0.0f64;
            let mut size = 0.0f64;
            Zip::from(&next).and(&w).for_each(|a, b| {
                inc = inc.max((a - b).norm());
                size = size.max(a.norm());
            });
            std::mem::swap(&mut w, &mut next);
            if inc <= 1e-15 * size || size == 0.0 || (inc >= prev_inc && inc <= 1e-12 * size) {
                return Ok((
                    GridFunction::from_values_unchecked(&self.grid, w),
                    StepStats { iterations: it, increment: inc },
                ));
            }
            prev_inc = inc;
        }
        Err(Error::LinearSolve(format!(
            "fixed-point iteration did not converge in {MAX_ITERATIONS} iterations (contraction {:.3e}, last increment {prev_inc:.3e})",
            self.contraction
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(nx: usize, nn: usize, l: f64) -> Arc<CylinderGrid> {
        Arc::new(CylinderGrid::build(0.0, 1.0, nx, l, nn, 1.0, 16).unwrap())
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid(17, 32, 4.0);
        let q = GridFunction::from_real_fn(&g, |x, z| x + 1.0 / (1.0 + z * z));
        let cn = CrankNicolson::new(&q, 0.01).unwrap();
        let zero = GridFunction::zeros(&g);
        let (v, _) = cn.step(&zero, &zero, None).unwrap();
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn unitary_without_source() {
        let g = grid(33, 64, 6.0);
        let q = GridFunction::from_real_fn(&g, |x, z| (3.0 * x).cos() - 1.0 / (1.0 + z * z));
        let cn = CrankNicolson::new(&q, 1.0 / 64.0).unwrap();
        let zero = GridFunction::zeros(&g);
        let mut v = GridFunction::from_fn(&g, |x, z| C64::from_polar((PI * x).sin() * (-z * z).exp(), 2.0 * z + x));
        v.zero_boundary();
        let n0 = v.l2_norm();
        for _ in 0..64 {
            let (next, _) = cn.step(&v, &zero, None).unwrap();
            let rel = (next.l2_norm() - v.l2_norm()).abs() / n0;
            assert!(rel < 1e-12, "{rel}");
            v = next;
        }
        assert!((v.l2_norm() - n0).abs() < 1e-10 * n0);
    }

    #[test]
    fn solves_the_implicit_system() {
        let g = grid(17, 32, 4.0);
        let q = GridFunction::from_real_fn(&g, |x, z| 2.0 * x - (-z * z).exp());
        let dt = 0.05;
        let cn = CrankNicolson::new(&q, dt).unwrap();
        let mut v = GridFunction::from_fn(&g, |x, z| C64::new(x * (1.0 - x), z) * (-z * z).exp());
        v.zero_boundary();
        let f = GridFunction::from_fn(&g, |x, z| C64::new(0.0, x) * (-z * z).exp());
        let (w, stats) = cn.step(&v, &f, None).unwrap();
        assert!(stats.iterations > 1);
        // (I + iτH) w = (I - iτH) v + iΔt f on the interior.
        let tau = C64::new(0.0, 0.5 * dt);
        let mut lhs = w.clone();
        lhs.axpy(tau, &cn.apply_hamiltonian(&w));
        let mut rhs = v.clone();
        rhs.axpy(-tau, &cn.apply_hamiltonian(&v));
        rhs.axpy(C64::new(0.0, dt), &f);
        rhs.zero_boundary();
        assert!((&lhs - &rhs).sup_norm() < 1e-12);
    }

    #[test]
    fn rejects_weak_contraction() {
        let g = grid(17, 32, 4.0);
        let q = GridFunction::from_real_fn(&g, |x, _| 100.0 * x);
        assert!(matches!(CrankNicolson::new(&q, 0.1), Err(Error::LinearSolve(_))));
        let complex = GridFunction::from_fn(&g, |_, _| C64::new(0.0, 1.0));
        assert!(CrankNicolson::new(&complex, 0.1).is_err());
    }
}
