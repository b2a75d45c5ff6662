use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;

use super::crank_nicolson::CrankNicolson;
use super::source::{build_source, BoundaryData};
use super::trace::{normal_derivative, sigma_norm};
use crate::admissible::{check_decay_class, AdmissiblePair, PerturbationParams};
use crate::elliptic::ConvergenceTable;
use crate::geometry::h_norm;
use crate::{CylinderGrid, Error, GridFunction, Result, Side, Subboundary, C64};

/// Fewest time steps accepted by [`solve_direct`].
pub const MIN_TIME_STEPS: usize = 16;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// `γ*`: sides on which `∂_ν u'` is recorded.
    pub observed: Subboundary,
    /// Keep `(u, u')` every `stride` steps (and at the last step).
    pub snapshot_stride: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            observed: Subboundary::new([Side::Right]),
            snapshot_stride: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub u: GridFunction,
    pub du: GridFunction,
}

#[derive(Clone, Debug, Default)]
pub struct DirectDiagnostics {
    /// `max_m ‖u^m - u₀‖₀`.
    pub max_deviation: f64,
    pub u0_norm: f64,
    pub sup_u: f64,
    pub sup_du: f64,
    /// `(max_m ‖u^m‖₂ + max_m ‖u'^m‖₀) / ‖u₀‖₃`, with `u_b` contributions
    /// measured in closed form and the decaying rest on the grid.
    pub regularity_ratio: f64,
    pub max_iterations: usize,
    pub contraction: f64,
}

/// Output of [`solve_direct`].
#[derive(Clone, Debug)]
pub struct DirectSolution {
    grid: Arc<CylinderGrid>,
    observed: Subboundary,
    pub snapshots: Vec<Snapshot>,
    /// Per observed side: `∂_ν u'(t_m, x_n)`, rows `m = 0..=N_t`.
    pub neumann: Vec<(Side, Array2<C64>)>,
    /// `∫₀ᵀ |u'|² dt` at every node (trapezoid rule).
    pub derivative_energy: Array2<f64>,
    pub final_u: GridFunction,
    pub diagnostics: DirectDiagnostics,
}

impl DirectSolution {
    pub fn grid(&self) -> &Arc<CylinderGrid> {
        &self.grid
    }

    pub fn observed(&self) -> &Subboundary {
        &self.observed
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn neumann(&self, side: Side) -> Result<&Array2<C64>> {
        self.neumann
            .iter()
            .find(|(s, _)| *s == side)
            .map(|(_, a)| a)
            .ok_or(Error::SideNotObserved(side))
    }

    /// `‖∂_ν u'‖_{L²(Σ*)}`.
    pub fn observation_norm(&self) -> f64 {
        sigma_norm(self.neumann.iter().map(|(_, a)| a), self.grid.time_step(), self.grid.axial().spacing())
    }

    /// `‖∂_ν u₁' - ∂_ν u₂'‖_{L²(Σ*)}` against a run on the same grid and `γ*`.
    pub fn observation_distance(&self, other: &DirectSolution) -> Result<f64> {
        if *self.grid != *other.grid || self.observed != other.observed {
            return Err(Error::GridMismatch("observations on different grids or subboundaries".into()));
        }
        let diffs: Vec<Array2<C64>> = self
            .neumann
            .iter()
            .zip(&other.neumann)
            .map(|((_, a), (_, b))| a - b)
            .collect();
        Ok(sigma_norm(diffs.iter(), self.grid.time_step(), self.grid.axial().spacing()))
    }

    /// Writes `t,side,x_n,re,im` rows of the Neumann history.
    pub fn write_neumann_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "side", "x_n", "re", "im"])?;
        let times = self.grid.times();
        let zs = self.grid.axial().nodes();
        for (side, tr) in &self.neumann {
            for ((m, j), z) in tr.indexed_iter() {
                w.write_record([
                    format!("{:.17e}", times[m]),
                    side.label().to_string(),
                    format!("{:.17e}", zs[j]),
                    format!("{:.17e}", z.re),
                    format!("{:.17e}", z.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves `-iu' - Δu + qu = 0`, `u(0) = u₀`, `u = g` on the lateral boundary,
/// through `u = v + G₀` with `-iv' - Δv + qv = f`, `v(0) = 0`, `v|∂Ω = 0`.
///
/// `u'` comes from the equation, `u' = -iHv + if - i(-Δ+q₀)u₀` on the
/// interior and `g'` on the boundary rows.
pub fn solve_direct(
    pair: &AdmissiblePair,
    q: &GridFunction,
    pp: &PerturbationParams,
    opts: &SolveOptions,
) -> Result<DirectSolution> {
    let grid = Arc::clone(pair.grid());
    if grid.n_steps() < MIN_TIME_STEPS {
        return Err(Error::param(
            "n_steps",
            format!("need at least {MIN_TIME_STEPS} time steps, got {}", grid.n_steps()),
        ));
    }
    if opts.observed.is_empty() {
        return Err(Error::param("observed", "γ* must contain at least one side"));
    }
    let decay = check_decay_class(q, pair.q0(), pp)?;
    if !decay.pass {
        return Err(Error::Admissibility {
            i: decay.worst_node.0,
            j: decay.worst_node.1,
            reason: format!(
                "q - q₀ leaves the decay class (slack {:.3e}, boundary trace {:.3e})",
                decay.envelope_slack, decay.boundary_trace
            ),
        });
    }
    let dt = grid.time_step();
    let n_t = grid.n_steps();
    let times = grid.times();
    let cn = CrankNicolson::new(q, dt)?;
    let f = build_source(q, pair)?;
    let lift = BoundaryData::new(pair).lift;
    let r = pair.residual();
    let nx = grid.cross().len();
    let (_, nn) = grid.shape();

    let profile = *pair.profile();
    let background = GridFunction::from_real_fn(&grid, |_, z| profile.u(z));
    let u0_norm3 = profile.sobolev_norm(&grid, 3) + h_norm(pair.correction(), 3)?;
    let ub_norm2 = profile.sobolev_norm(&grid, 2);

    let mut neumann: Vec<(Side, Array2<C64>)> = opts
        .observed
        .sides()
        .iter()
        .map(|&s| (s, Array2::zeros((n_t + 1, nn))))
        .collect();
    let mut energy = Array2::<f64>::zeros(grid.shape());
    let mut snapshots = Vec::new();
    let mut diag = DirectDiagnostics {
        u0_norm: pair.u0().l2_norm(),
        contraction: cn.contraction(),
        ..Default::default()
    };
    let mut max_u_h2 = 0.0f64;
    let mut max_du_l2 = 0.0f64;

    let mut v = GridFunction::zeros(&grid);
    let mut v_prev: Option<GridFunction> = None;
    let minus_i = C64::new(0.0, -1.0);
    let mut u_last = pair.u0().clone();
    for m in 0..=n_t {
        let t = times[m];
        // u' = -iHv + i f(t) - i r; boundary rows: g' = -i r.
        let mut du = cn.apply_hamiltonian(&v).scale(minus_i);
        du.axpy(C64::new(0.0, 1.0), &f.eval(t));
        du.axpy(minus_i, r);
        for i in [0, nx - 1] {
            for j in 0..nn {
                du.values_mut()[[i, j]] = minus_i * r.values()[[i, j]];
            }
        }
        let mut u = lift.eval(t);
        u.axpy(C64::new(1.0, 0.0), &v);

        let wt = if m == 0 || m == n_t { 0.5 * dt } else { dt };
        ndarray::Zip::from(&mut energy)
            .and(du.values())
            .for_each(|e, z| *e += wt * z.norm_sqr());
        for (side, hist) in neumann.iter_mut() {
            hist.row_mut(m).assign(&normal_derivative(&du, *side));
        }
        diag.max_deviation = diag.max_deviation.max((&u - pair.u0()).l2_norm());
        diag.sup_u = diag.sup_u.max(u.sup_norm());
        diag.sup_du = diag.sup_du.max(du.sup_norm());
        max_u_h2 = max_u_h2.max(ub_norm2 + h_norm(&(&u - &background), 2)?);
        max_du_l2 = max_du_l2.max(du.l2_norm());
        if let Some(stride) = opts.snapshot_stride {
            if m % stride.max(1) == 0 || m == n_t {
                snapshots.push(Snapshot {
                    step: m,
                    time: t,
                    u: u.clone(),
                    du: du.clone(),
                });
            }
        }
        if m == n_t {
            u_last = u;
            break;
        }
        let f_mid = f.eval(t + 0.5 * dt);
        let guess = v_prev.as_ref().map(|p| {
            let mut g = v.scale(C64::new(2.0, 0.0));
            g.axpy(C64::new(-1.0, 0.0), p);
            g
        });
        let (next, stats) = cn.step(&v, &f_mid, guess.as_ref())?;
        diag.max_iterations = diag.max_iterations.max(stats.iterations);
        v_prev = Some(std::mem::replace(&mut v, next));
    }
    diag.regularity_ratio = (max_u_h2 + max_du_l2) / u0_norm3;
    log::debug!(
        "direct solve: {} steps, max fixed-point iterations {}, deviation {:.3e}",
        n_t,
        diag.max_iterations,
        diag.max_deviation
    );
    Ok(DirectSolution {
        grid,
        observed: opts.observed.clone(),
        snapshots,
        neumann,
        derivative_energy: energy,
        final_u: u_last,
        diagnostics: diag,
    })
}

/// Homogenized problem with a manufactured solution
/// `v* = sin(πξ) e^{-x_n²} φ(t)`, `φ(t) = sin 3t + i t²`, potential
/// `q = ½ + x' + (1 + x_n²)^{-1}` and the continuous source. Space and time
/// are refined together (`Δt ∝ h`); the error is `max_m ‖v^m - v*(t_m)‖₀`.
pub fn manufactured_convergence(levels: &[(usize, usize)], half_length: f64, n_axial: usize) -> Result<ConvergenceTable> {
    let phi = |t: f64| C64::new((3.0 * t).sin(), t * t);
    let dphi = |t: f64| C64::new(3.0 * (3.0 * t).cos(), 2.0 * t);
    let mut table = ConvergenceTable::default();
    for &(n_cross, n_steps) in levels {
        let grid = Arc::new(CylinderGrid::build(0.0, 1.0, n_cross, half_length, n_axial, 1.0, n_steps)?);
        let shape = GridFunction::from_real_fn(&grid, |x, z| (PI * x).sin() * (-z * z).exp());
        let q = GridFunction::from_real_fn(&grid, |x, z| 0.5 + x + 1.0 / (1.0 + z * z));
        // (-Δ + q) shape in closed form.
        let h_shape = GridFunction::from_real_fn(&grid, |x, z| {
            (PI * PI + 2.0 - 4.0 * z * z + 0.5 + x + 1.0 / (1.0 + z * z)) * (PI * x).sin() * (-z * z).exp()
        });
        let source = |t: f64| {
            let mut f = shape.scale(C64::new(0.0, -1.0) * dphi(t));
            f.axpy(phi(t), &h_shape);
            f
        };
        let dt = grid.time_step();
        let cn = CrankNicolson::new(&q, dt)?;
        let mut v = GridFunction::zeros(&grid);
        let mut err = 0.0f64;
        for m in 0..n_steps {
            let t = m as f64 * dt;
            let (next, _) = cn.step(&v, &source(t + 0.5 * dt), None)?;
            v = next;
            err = err.max((&v - &shape.scale(phi(t + dt))).l2_norm());
        }
        table.spacing.push(grid.cross().spacing());
        table.errors.push(err);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissible::{build_pair, make_perturbation, FactoryParams, InteriorChoice, PerturbationShape};

    fn pp() -> PerturbationParams {
        PerturbationParams::new(1.0, 1.0, 2.0, 1.0, PerturbationShape::default()).unwrap()
    }

    fn grid(nx: usize, nn: usize, l: f64, nt: usize) -> Arc<CylinderGrid> {
        Arc::new(CylinderGrid::build(0.0, 1.0, nx, l, nn, 1.0, nt).unwrap())
    }

    #[test]
    fn stationary_configuration_is_exact() {
        let g = grid(64, 128, 12.0, 32);
        let pair = build_pair(&FactoryParams::background(1.0, 1.0, 0.1, 0.3), &g).unwrap();
        let sol = solve_direct(&pair, pair.q0(), &pp(), &SolveOptions::default()).unwrap();
        assert!(sol.diagnostics.max_deviation <= 1e-10 * sol.diagnostics.u0_norm);
        assert_eq!(sol.diagnostics.sup_du, 0.0);
        assert_eq!(sol.observation_norm(), 0.0);
    }

    #[test]
    fn refuses_short_time_grids() {
        let g = grid(64, 64, 12.0, 8);
        let pair = build_pair(&FactoryParams::background(1.0, 1.0, 0.1, 0.3), &g).unwrap();
        assert!(solve_direct(&pair, pair.q0(), &pp(), &SolveOptions::default()).is_err());
    }

    #[test]
    fn perturbed_run_matches_boundary_data_and_time_differences() {
        let g = grid(64, 128, 12.0, 64);
        let fp = FactoryParams {
            interior: InteriorChoice::Gaussian { u_amp: 0.3, q_amp: 0.2, width: 1.5 },
            ..FactoryParams::background(1.0, 1.0, 0.1, 0.3)
        };
        let pair = build_pair(&fp, &g).unwrap();
        let rho = make_perturbation(&pp(), &g, 0.2).unwrap();
        let q = pair.q0() + &rho;
        let opts = SolveOptions {
            snapshot_stride: Some(1),
            ..Default::default()
        };
        let sol = solve_direct(&pair, &q, &pp(), &opts).unwrap();
        assert_eq!(sol.snapshots.len(), 65);
        assert_eq!((&sol.snapshots[0].u - pair.u0()).sup_norm(), 0.0);
        let lift = BoundaryData::new(&pair).lift;
        for s in &sol.snapshots {
            let gt = lift.eval(s.time);
            assert_eq!(s.u.boundary_trace(Side::Left), gt.boundary_trace(Side::Left));
            assert_eq!(s.u.boundary_trace(Side::Right), gt.boundary_trace(Side::Right));
        }
        assert!(sol.diagnostics.regularity_ratio.is_finite());
        assert!(sol.observation_norm() > 0.0);
    }

    #[test]
    fn time_differences_match_equation_derivative() {
        let smooth = PerturbationParams::new(
            1.0,
            1.0,
            2.0,
            1.0,
            PerturbationShape {
                cross_power: 4,
                axial_frequency: 0.0,
            },
        )
        .unwrap();
        let worst: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&nt| {
                let g = Arc::new(CylinderGrid::build(0.0, 1.0, 64, 12.0, 64, 0.25, nt).unwrap());
                let pair = build_pair(&FactoryParams::background(1.0, 1.0, 0.1, 0.3), &g).unwrap();
                let rho = make_perturbation(&smooth, &g, 0.2).unwrap();
                let q = pair.q0() + &rho;
                let opts = SolveOptions {
                    snapshot_stride: Some(1),
                    ..Default::default()
                };
                let sol = solve_direct(&pair, &q, &smooth, &opts).unwrap();
                let dt = g.time_step();
                let scale = sol.snapshots.iter().map(|s| s.du.l2_norm()).fold(0.0, f64::max);
                (1..nt)
                    .map(|m| {
                        let cd = (&sol.snapshots[m + 1].u - &sol.snapshots[m - 1].u).scale(C64::new(0.5 / dt, 0.0));
                        (&cd - &sol.snapshots[m].du).l2_norm() / scale
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(worst[2] < 1e-2, "{worst:?}");
        assert!(worst[1] / worst[2] > 3.0, "{worst:?}");
    }

    #[test]
    fn time_error_second_order_with_discrete_source() {
        // Source built from the discrete operator: only the time integration
        // error remains.
        let g = grid(17, 32, 5.0, 16);
        let q = GridFunction::from_real_fn(&g, |x, z| 1.0 + x - (-z * z).exp());
        let shape = GridFunction::from_real_fn(&g, |x, z| (PI * x).sin() * (-z * z).exp());
        let phi = |t: f64| C64::new((2.0 * t).sin(), t * t * t);
        let dphi = |t: f64| C64::new(2.0 * (2.0 * t).cos(), 3.0 * t * t);
        let errs: Vec<f64> = [16usize, 32, 64]
            .iter()
            .map(|&nt| {
                let dt = 1.0 / nt as f64;
                let cn = CrankNicolson::new(&q, dt).unwrap();
                let h_shape = cn.apply_hamiltonian(&shape);
                let mut v = GridFunction::zeros(&g);
                for m in 0..nt {
                    let t = (m as f64 + 0.5) * dt;
                    let mut f = shape.scale(C64::new(0.0, -1.0) * dphi(t));
                    f.axpy(phi(t), &h_shape);
                    v = cn.step(&v, &f, None).unwrap().0;
                }
                (&v - &shape.scale(phi(1.0))).l2_norm()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn joint_refinement_second_order() {
        let table = manufactured_convergence(&[(17, 16), (33, 32), (65, 64)], 6.0, 64).unwrap();
        assert!(table.min_order() >= 1.9, "{table:?}");
    }
}
