//! Dirichlet problem `-Δv = φ` on the truncated cylinder, solved fiber by
//! fiber after the axial Fourier transform: for every discrete frequency `p`
//! the cross-section problem `(-d²/dx'² + p²) v̂(p) = φ̂(p)` is tridiagonal.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::geometry::{forward_rows, h_norm, inverse_rows, schrodinger_operator, CylinderGrid, GridFunction};
use crate::tridiag::TridiagonalFactor;
use crate::{Error, Result, C64};

/// Absolute tolerance for boundary traces of unit-scaled data.
pub const TRACE_TOLERANCE: f64 = 1e-8;

/// Slack allowed on the per-fiber resolvent bound.
pub const RESOLVENT_SLACK: f64 = 1e-6;

/// One cross-section problem `(-d²/dx'² + p²) v = φ̂` with Dirichlet
/// conditions, on the interior nodes.
#[derive(Clone, Debug)]
pub struct FiberProblem {
    pub p: f64,
    pub rhs: Vec<C64>,
}

impl FiberProblem {
    /// Solves on a cross-section of spacing `h`; the result has the length of
    /// `rhs`.
    pub fn solve(&self, h: f64) -> Result<Vec<C64>> {
        let inv_h2 = 1.0 / (h * h);
        let off = C64::new(-inv_h2, 0.0);
        let factor = TridiagonalFactor::toeplitz(self.rhs.len(), off, C64::new(2.0 * inv_h2 + self.p * self.p, 0.0), off)?;
        let mut v = self.rhs.clone();
        factor.solve_in_place(&mut v);
        Ok(v)
    }
}

/// Norm `(h Σ |z_i|²)^{1/2}` over interior cross-section nodes.
fn fiber_norm(values: impl Iterator<Item = C64>, h: f64) -> f64 {
    (h * values.map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// Solves every fiber; returns the transformed right-hand side and solution
/// (boundary rows zero).
fn solve_fibers(phi: &GridFunction) -> Result<(Array2<C64>, Array2<C64>)> {
    let grid = phi.grid();
    let axial = grid.axial();
    let h = grid.cross().spacing();
    let nx = grid.cross().len();
    let mut spec = phi.values().clone();
    forward_rows(axial, &mut spec);
    let freqs = axial.frequencies();
    let columns: Vec<Vec<C64>> = (0..spec.ncols())
        .into_par_iter()
        .map(|k| {
            FiberProblem {
                p: freqs[k],
                rhs: spec.column(k).iter().skip(1).take(nx - 2).copied().collect(),
            }
            .solve(h)
        })
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros(spec.dim());
    for (k, col) in columns.into_iter().enumerate() {
        for (i, z) in col.into_iter().enumerate() {
            out[[i + 1, k]] = z;
        }
    }
    Ok((spec, out))
}

/// `v = (-Δ_D)^{-1} φ`; only the interior values of `φ` enter, and `v`
/// vanishes on the boundary rows.
pub fn solve_dirichlet(phi: &GridFunction) -> Result<GridFunction> {
    if phi.values().iter().any(|z| !z.is_finite()) {
        return Err(Error::param("phi", "non-finite right-hand side"));
    }
    let (spec, mut v) = solve_fibers(phi)?;
    let report = fiber_table(phi.grid(), &spec, &v);
    if let Some(row) = report.rows.iter().find(|r| r.ratio > r.bound * (1.0 + RESOLVENT_SLACK)) {
        return Err(Error::LinearSolve(format!(
            "fiber p = {} violates the resolvent bound: {} > {}",
            row.p, row.ratio, row.bound
        )));
    }
    inverse_rows(phi.grid().axial(), &mut v);
    Ok(GridFunction::from_values_unchecked(phi.grid(), v))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolventRow {
    pub p: f64,
    pub ratio: f64,
    pub bound: f64,
}

/// Per-frequency ratios `‖v̂(p)‖ / ‖φ̂(p)‖` against `(c₀ + p²)^{-1}`.
#[derive(Clone, Debug)]
pub struct ResolventReport {
    pub c0: f64,
    pub rows: Vec<ResolventRow>,
}

impl ResolventReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.ratio <= r.bound * (1.0 + RESOLVENT_SLACK))
    }

    /// Largest `ratio / bound`.
    pub fn worst(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio / r.bound).fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["p", "ratio", "bound"])?;
        for r in &self.rows {
            w.write_record([format!("{:.17e}", r.p), format!("{:.17e}", r.ratio), format!("{:.17e}", r.bound)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fiber_table(grid: &Arc<CylinderGrid>, spec: &Array2<C64>, v: &Array2<C64>) -> ResolventReport {
    let cross = grid.cross();
    let h = cross.spacing();
    let nx = cross.len();
    let c0 = cross.poincare_constant();
    let rows = grid
        .axial()
        .frequencies()
        .iter()
        .enumerate()
        .filter_map(|(k, &p)| {
            let nphi = fiber_norm(spec.column(k).iter().skip(1).take(nx - 2).copied(), h);
            (nphi > 0.0).then(|| ResolventRow {
                p,
                ratio: fiber_norm(v.column(k).iter().copied(), h) / nphi,
                bound: 1.0 / (c0 + p * p),
            })
        })
        .collect();
    ResolventReport { c0, rows }
}

/// Solves `-Δv = φ` and tabulates the resolvent bound per fiber.
pub fn resolvent_bound_report(phi: &GridFunction) -> Result<ResolventReport> {
    let (spec, v) = solve_fibers(phi)?;
    let report = fiber_table(phi.grid(), &spec, &v);
    if report.rows.is_empty() {
        return Err(Error::param("phi", "vanishes on every fiber"));
    }
    Ok(report)
}

/// Boundary traces of `(-Δ_h + q)^j w`, `j < k`.
/// Random right-hand side: a shifted, modulated Gaussian in `x_n` times a
/// low sine mode in `x'`, plus a fixed smooth background.
pub fn random_source(grid: &Arc<CylinderGrid>, rng: &mut impl Rng) -> GridFunction {
    let c: f64 = rng.gen_range(-3.0..3.0);
    let w: f64 = rng.gen_range(0.5..2.0);
    let m: i32 = rng.gen_range(1..5);
    let phase: f64 = rng.gen_range(0.0..6.0);
    let (a, len) = (grid.cross().a(), grid.cross().length());
    GridFunction::from_fn(grid, |x, z| {
        let xi = (x - a) / len;
        C64::from_polar((-((z - c) / w).powi(2)).exp(), phase * z) * (m as f64 * PI * xi).sin()
            + C64::new(0.1 * (17.0 * xi + 3.0 * z).sin() * (-z * z / 4.0).exp(), 0.0)
    })
}

#[derive(Clone, Debug)]
pub struct TraceReport {
    pub traces: Vec<f64>,
    pub tolerance: f64,
}

impl TraceReport {
    pub fn member(&self) -> bool {
        self.traces.iter().all(|&t| t < self.tolerance)
    }

    /// First power whose trace exceeds the tolerance.
    pub fn first_failure(&self) -> Option<usize> {
        self.traces.iter().position(|&t| t >= self.tolerance)
    }
}

/// Applies `-Δ_h + q` up to `k - 1` times and reports the boundary sup of
/// each power, `k ∈ {1, 2}`.
pub fn domain_trace_check(w: &GridFunction, q: &GridFunction, k: usize) -> Result<TraceReport> {
    if !(1..=2).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    w.ensure_same_grid(q)?;
    let mut traces = vec![w.boundary_sup()];
    let mut cur = w.clone();
    for _ in 1..k {
        cur = schrodinger_operator(&cur, q)?;
        traces.push(cur.boundary_sup());
    }
    Ok(TraceReport {
        traces,
        tolerance: TRACE_TOLERANCE,
    })
}

/// `‖v‖_{H²} / ‖φ‖_{L²}` for `v = (-Δ_D)^{-1} φ`.
pub fn regularity_ratio(phi: &GridFunction) -> Result<f64> {
    let v = solve_dirichlet(phi)?;
    Ok(h_norm(&v, 2)? / phi.l2_norm())
}

/// Errors of a refinement study and the observed orders between levels.
#[derive(Clone, Debug, Default)]
pub struct ConvergenceTable {
    pub spacing: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        (1..self.errors.len())
            .map(|i| (self.errors[i - 1] / self.errors[i]).ln() / (self.spacing[i - 1] / self.spacing[i]).ln())
            .collect()
    }

    pub fn min_order(&self) -> f64 {
        self.orders().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Manufactured solution `v* = sin(πξ) e^{-x_n²}` on `(0, 1) × [-L, L)`,
/// `φ = (π² + 2 - 4x_n²) v*`, solved at each cross-section resolution.
pub fn manufactured_convergence(n_cross: &[usize], half_length: f64, n_axial: usize) -> Result<ConvergenceTable> {
    let mut table = ConvergenceTable::default();
    for &n in n_cross {
        let grid = Arc::new(CylinderGrid::build(0.0, 1.0, n, half_length, n_axial, 1.0, 1)?);
        let exact = |x: f64, z: f64| (PI * x).sin() * (-z * z).exp();
        let phi = GridFunction::from_real_fn(&grid, |x, z| (PI * PI + 2.0 - 4.0 * z * z) * exact(x, z));
        let v = solve_dirichlet(&phi)?;
        let err = &v - &GridFunction::from_real_fn(&grid, exact);
        table.spacing.push(grid.cross().spacing());
        table.errors.push(err.l2_norm());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dirichlet_laplacian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(nx: usize, nn: usize, l: f64) -> Arc<CylinderGrid> {
        Arc::new(CylinderGrid::build(0.0, 1.0, nx, l, nn, 1.0, 16).unwrap())
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = grid(17, 32, 4.0);
        let v = solve_dirichlet(&GridFunction::zeros(&g)).unwrap();
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn inverts_the_dirichlet_laplacian() {
        let g = grid(33, 64, 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut phi = random_source(&g, &mut rng);
        phi.zero_boundary();
        let v = solve_dirichlet(&phi).unwrap();
        assert_eq!(v.boundary_sup(), 0.0);
        let back = &dirichlet_laplacian(&v) * -1.0;
        assert!((&back - &phi).sup_norm() < 1e-9 * phi.sup_norm());
    }

    #[test]
    fn manufactured_solution_second_order() {
        let table = manufactured_convergence(&[17, 33, 65], 8.0, 256).unwrap();
        for o in table.orders() {
            assert!(o >= 1.9, "{:?}", table);
        }
    }

    #[test]
    fn linearity() {
        let g = grid(33, 64, 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p1 = random_source(&g, &mut rng);
        let p2 = random_source(&g, &mut rng);
        let alpha = C64::new(0.7, -1.3);
        let mut combo = p1.scale(alpha);
        combo.axpy(C64::new(1.0, 0.0), &p2);
        let mut expect = solve_dirichlet(&p1).unwrap().scale(alpha);
        expect.axpy(C64::new(1.0, 0.0), &solve_dirichlet(&p2).unwrap());
        let got = solve_dirichlet(&combo).unwrap();
        assert!((&got - &expect).l2_norm() <= 1e-12 * expect.l2_norm());
    }

    #[test]
    fn resolvent_bound_on_random_fields() {
        let g = grid(65, 128, 8.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let phi = random_source(&g, &mut rng);
            let report = resolvent_bound_report(&phi).unwrap();
            assert!(report.passes(), "worst {}", report.worst());
        }
    }

    #[test]
    fn single_fiber_ratio_at_zero_frequency() {
        let g = grid(33, 32, 4.0);
        let phi = GridFunction::from_real_fn(&g, |x, _| x * (1.0 - x));
        let report = resolvent_bound_report(&phi).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].p, 0.0);
        assert!(report.rows[0].ratio <= 1.0 / report.c0 * (1.0 + 1e-12));
    }

    #[test]
    fn ratio_decays_like_inverse_square_frequency() {
        let g = grid(33, 256, 8.0);
        let phi = GridFunction::from_real_fn(&g, |x, z| (PI * x).sin() * (-z * z / 8.0).exp() * (1.0 + (9.0 * z).cos()));
        let report = resolvent_bound_report(&phi).unwrap();
        let far: Vec<_> = report.rows.iter().filter(|r| r.p.abs() > 8.0 && r.p.abs() < 10.0).collect();
        assert!(!far.is_empty());
        for r in far {
            let scaled = r.ratio * r.p * r.p;
            assert!(scaled > 0.8 && scaled < 1.0, "{scaled}");
        }
    }

    #[test]
    fn poincare_constant_close_to_pi_squared() {
        let g = grid(256, 8, 1.0);
        let c0 = g.cross().poincare_constant();
        assert!((c0 - PI * PI).abs() < 1e-3 * PI * PI);
    }

    #[test]
    fn domain_traces() {
        let g = grid(257, 128, 8.0);
        let w = GridFunction::from_real_fn(&g, |x, z| (PI * x).sin() * (-z * z).exp());
        let q = GridFunction::zeros(&g);
        let r1 = domain_trace_check(&w, &q, 1).unwrap();
        assert!(r1.member());
        assert!(r1.traces[0] < 1e-15);
        let r2 = domain_trace_check(&w, &q, 2).unwrap();
        assert!(r2.member(), "{:?}", r2.traces);

        let one = GridFunction::from_real_fn(&g, |_, _| 1.0);
        let bad = domain_trace_check(&one, &q, 1).unwrap();
        assert_eq!(bad.first_failure(), Some(0));
        assert!(domain_trace_check(&w, &q, 3).is_err());
    }

    #[test]
    fn regularity_ratio_stable_under_refinement() {
        let ratios: Vec<f64> = [33, 65]
            .iter()
            .map(|&n| {
                let g = grid(n, 128, 8.0);
                let phi = GridFunction::from_real_fn(&g, |x, z| x * (1.0 - x) * (-z * z).exp());
                regularity_ratio(&phi).unwrap()
            })
            .collect();
        assert!((ratios[0] - ratios[1]).abs() < 0.05 * ratios[1], "{ratios:?}");
    }
}
