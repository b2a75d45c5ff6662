use std::io::Write;

use rayon::prelude::*;

use super::recipe::{parameter_recipe, Recipe, StabilityParams};
use crate::admissible::{make_perturbation, AdmissiblePair, PerturbationParams};
use crate::schrodinger::{solve_direct, DirectSolution, SolveOptions};
use crate::{Error, GridFunction, Result};

/// Settings of [`stability_sweep`].
#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub amplitudes: Vec<f64>,
    /// Compare `q₀ ± amp·ρ₀` instead of `q₀ + amp·ρ₀` against `q₀`.
    pub two_sided: bool,
    pub solve: SolveOptions,
    /// Constant `C` used in the `s` recipe.
    pub recipe_constant: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityRow {
    pub amplitude: f64,
    /// `‖ρ‖₀`.
    pub rho_norm: f64,
    /// `‖∂_ν u₁' - ∂_ν u₂'‖²_{Σ*}`.
    pub mu: f64,
    pub observation: f64,
    pub recipe: Recipe,
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub theta: f64,
    pub mu_delta: f64,
    pub rows: Vec<StabilityRow>,
    /// `max ‖ρ‖ / ‖∂_ν u₁' - ∂_ν u₂'‖^θ`.
    pub c_fit: f64,
    /// Least-squares slope of `log ‖ρ‖` against the log observation over
    /// rows with `μ < μ_δ`.
    pub slope: f64,
    /// Same fit restricted to the middle decade of amplitudes.
    pub linear_slope: f64,
    /// `max/min - 1` of `μ / amp²` over the middle decade.
    pub quadratic_deviation: f64,
    pub mu_monotone: bool,
}

impl StabilityReport {
    /// `‖ρ‖ ≤ C_fit ‖·‖^θ` on every row, with a finite `C_fit`.
    pub fn holder_holds(&self) -> bool {
        self.c_fit.is_finite()
            && self
                .rows
                .iter()
                .all(|r| r.rho_norm <= self.c_fit * r.observation.powf(self.theta) * (1.0 + 1e-12))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "amplitude",
            "rho_norm",
            "mu",
            "observation_norm",
            "log10_rho_norm",
            "log10_observation_norm",
            "branch",
            "y",
            "s",
        ])?;
        for r in &self.rows {
            let (branch, y, s) = match r.recipe {
                Recipe::Small { y, s } => ("small", format!("{y:.17e}"), format!("{s:.17e}")),
                Recipe::LargeData => ("large", String::new(), String::new()),
            };
            out.write_record([
                format!("{:.17e}", r.amplitude),
                format!("{:.17e}", r.rho_norm),
                format!("{:.17e}", r.mu),
                format!("{:.17e}", r.observation),
                format!("{:.17e}", r.rho_norm.log10()),
                format!("{:.17e}", r.observation.log10()),
                branch.to_string(),
                y,
                s,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One perturbed pair of runs.
#[derive(Clone, Debug)]
pub struct PerturbedRuns {
    pub rho: GridFunction,
    pub q1: GridFunction,
    pub q2: GridFunction,
    pub sol1: DirectSolution,
    pub sol2: DirectSolution,
}

/// `q₁ = q₀ + amp·ρ₀` and `q₂ = q₀` (or `q₀ - amp·ρ₀` when two-sided).
pub fn perturbed_runs(
    pair: &AdmissiblePair,
    pp: &PerturbationParams,
    amplitude: f64,
    two_sided: bool,
    opts: &SolveOptions,
) -> Result<PerturbedRuns> {
    let rho0 = make_perturbation(pp, pair.grid(), amplitude)?;
    let q1 = pair.q0() + &rho0;
    let q2 = if two_sided { pair.q0() - &rho0 } else { pair.q0().clone() };
    let sol1 = solve_direct(pair, &q1, pp, opts)?;
    let sol2 = solve_direct(pair, &q2, pp, opts)?;
    Ok(PerturbedRuns {
        rho: &q1 - &q2,
        q1,
        q2,
        sol1,
        sol2,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Rows whose amplitude lies in the decade centred (geometrically) in the
/// sweep.
fn middle_decade(rows: &[StabilityRow]) -> Vec<StabilityRow> {
    let lo = rows.first().map_or(1.0, |r| r.amplitude);
    let hi = rows.last().map_or(1.0, |r| r.amplitude);
    let centre = (lo * hi).sqrt();
    let (a, b) = (centre / 10f64.sqrt(), centre * 10f64.sqrt());
    rows.iter()
        .filter(|r| r.amplitude >= a * (1.0 - 1e-9) && r.amplitude <= b * (1.0 + 1e-9))
        .copied()
        .collect()
}

/// Hölder-stability experiment over a list of amplitudes spanning at least
/// three decades.
pub fn stability_sweep(
    pair: &AdmissiblePair,
    pp: &PerturbationParams,
    sp: &StabilityParams,
    opts: &SweepOptions,
) -> Result<StabilityReport> {
    let mut amps: Vec<f64> = opts.amplitudes.iter().copied().filter(|&a| a != 0.0).collect();
    amps.sort_by(f64::total_cmp);
    amps.dedup();
    if amps.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::param("amplitudes", "amplitudes must be positive"));
    }
    if amps.len() < 3 || amps[amps.len() - 1] / amps[0] < 1e3 * (1.0 - 1e-9) {
        return Err(Error::param("amplitudes", "need at least three amplitudes spanning three decades"));
    }
    // One-sided runs share the reference solve.
    let reference = if opts.two_sided {
        None
    } else {
        Some(solve_direct(pair, pair.q0(), pp, &opts.solve)?)
    };
    let rows: Vec<StabilityRow> = amps
        .par_iter()
        .map(|&amp| -> Result<StabilityRow> {
            let rho0 = make_perturbation(pp, pair.grid(), amp)?;
            let q1 = pair.q0() + &rho0;
            let sol1 = solve_direct(pair, &q1, pp, &opts.solve)?;
            let (obs, rho_norm) = match &reference {
                Some(sol2) => (sol1.observation_distance(sol2)?, rho0.l2_norm()),
                None => {
                    let q2 = pair.q0() - &rho0;
                    let sol2 = solve_direct(pair, &q2, pp, &opts.solve)?;
                    (sol1.observation_distance(&sol2)?, (&q1 - &q2).l2_norm())
                }
            };
            if !(obs > 0.0) {
                return Err(Error::param("amplitude", format!("observation vanishes at amplitude {amp}")));
            }
            let mu = obs * obs;
            Ok(StabilityRow {
                amplitude: amp,
                rho_norm,
                mu,
                observation: obs,
                recipe: parameter_recipe(mu, sp, opts.recipe_constant)?,
            })
        })
        .collect::<Result<_>>()?;

    let theta = sp.theta();
    let mu_delta = sp.mu_delta();
    let c_fit = rows
        .iter()
        .map(|r| r.rho_norm / r.observation.powf(theta))
        .fold(0.0, f64::max);
    let mu_monotone = rows.windows(2).all(|p| p[1].mu > p[0].mu);
    if !mu_monotone {
        log::warn!("μ is not increasing with the amplitude; the sweep left the linear regime");
    }
    let log_pts = |rs: &[StabilityRow]| -> Vec<(f64, f64)> {
        rs.iter()
            .filter(|r| r.mu < mu_delta)
            .map(|r| (r.observation.ln(), r.rho_norm.ln()))
            .collect()
    };
    let all = log_pts(&rows);
    let mid_rows = middle_decade(&rows);
    let mid = log_pts(&mid_rows);
    let slope = if all.len() >= 2 { least_squares_slope(&all) } else { f64::NAN };
    let linear_slope = if mid.len() >= 2 { least_squares_slope(&mid) } else { f64::NAN };
    let k: Vec<f64> = mid_rows.iter().map(|r| r.mu / (r.amplitude * r.amplitude)).collect();
    let quadratic_deviation = if k.len() >= 2 {
        let max = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = k.iter().copied().fold(f64::INFINITY, f64::min);
        max / min - 1.0
    } else {
        f64::NAN
    };
    Ok(StabilityReport {
        theta,
        mu_delta,
        rows,
        c_fit,
        slope,
        linear_slope,
        quadratic_deviation,
        mu_monotone,
    })
}
