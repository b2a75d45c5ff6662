use std::io::Write;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::Manifest;
use super::{Command, Output, RunConfig, RunError, Validated};
use crate::admissible::{build_pair, make_perturbation, AdmissiblePair};
use crate::carleman::{
    bump_field, carleman_ratio_study, check_assumption, conjugation_residual, quadratic_candidate, RatioStudyParams,
    SpaceTimeGrid, WeightSpec,
};
use crate::elliptic::{manufactured_convergence, random_source, resolvent_bound_report};
use crate::inverse::{lemma_inv_from_runs, perturbed_runs, stability_sweep, LemmaTable, SweepOptions};
use crate::schrodinger::{solve_direct, SolveOptions};
use crate::{AxialGrid, CrossSection, Error};

type Step<T> = Result<T, RunError>;

fn at<T>(stage: &'static str, r: crate::Result<T>) -> Step<T> {
    r.map_err(|source| RunError::Numeric { stage, source })
}

fn key_values<W: Write>(writer: W, rows: &[(&str, f64)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["quantity", "value"])?;
    for (k, v) in rows {
        w.write_record([k.to_string(), format!("{v:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub(super) fn dispatch(cmd: Command, cfg: &RunConfig, v: &Validated, out: &mut Output, m: &mut Manifest) -> Step<()> {
    match cmd {
        Command::Direct => direct(cfg, v, out, m),
        Command::Elliptic => elliptic(cfg, v, out, m),
        Command::Carleman => carleman(cfg, v, out, m),
        Command::LemmaInv => lemma_inv(cfg, v, out, m),
        Command::Stability => stability(cfg, v, out, m),
        Command::Factory => factory(v, out, m),
    }
}

fn solve_options(v: &Validated) -> SolveOptions {
    SolveOptions {
        observed: v.observed.clone(),
        snapshot_stride: None,
    }
}

fn pair(v: &Validated) -> Step<AdmissiblePair> {
    at("factory", build_pair(&v.factory, &v.grid))
}

fn weight(cfg: &RunConfig, cross: &CrossSection) -> Step<(WeightSpec, crate::Subboundary)> {
    let c = &cfg.carleman;
    let (beta, gamma) = at("assumption", quadratic_candidate(c.x0, cross))?;
    let ws = at(
        "weight",
        WeightSpec::new(Arc::new(beta), cross, c.r, c.lambda, cfg.geometry.horizon),
    )?;
    Ok((ws, gamma))
}

fn factory(v: &Validated, out: &mut Output, m: &mut Manifest) -> Step<()> {
    let pair = pair(v)?;
    let r = pair.report().clone();
    out.csv("pair.csv", |f| pair.write_csv(f))?;
    out.csv("admissibility.csv", |f| {
        key_values(
            f,
            &[
                ("lower_bound_ratio", r.lower_bound_ratio),
                ("boundary_trace_nested", r.boundary_trace_nested),
                ("boundary_trace", r.boundary_trace),
                ("collar_residual", r.collar_residual),
                ("collar_nodes", r.collar_nodes as f64),
            ],
        )
    })?;
    m.set("upsilon0", pair.upsilon0());
    m.set("lower_bound_ratio", r.lower_bound_ratio);
    m.set("boundary_trace", r.boundary_trace);
    m.set("collar_residual", r.collar_residual);
    m.set("stationary", pair.is_stationary());
    m.set("admissible", r.passes());
    if !r.passes() {
        return Err(RunError::Numeric {
            stage: "admissibility",
            source: Error::Admissibility {
                i: r.lower_bound_node.0,
                j: r.lower_bound_node.1,
                reason: "pair fails the admissibility report".into(),
            },
        });
    }
    Ok(())
}

fn direct(cfg: &RunConfig, v: &Validated, out: &mut Output, m: &mut Manifest) -> Step<()> {
    let pair = pair(v)?;
    let rho = at(
        "perturbation",
        make_perturbation(&v.perturbation, &v.grid, cfg.perturbation.direct_amplitude),
    )?;
    let q = pair.q0() + &rho;
    let sol = at("solve", solve_direct(&pair, &q, &v.perturbation, &solve_options(v)))?;
    let d = &sol.diagnostics;
    let rel = if d.u0_norm > 0.0 { d.max_deviation / d.u0_norm } else { d.max_deviation };
    out.csv("direct_diagnostics.csv", |f| {
        key_values(
            f,
            &[
                ("max_deviation", d.max_deviation),
                ("relative_deviation", rel),
                ("u0_norm", d.u0_norm),
                ("sup_u", d.sup_u),
                ("sup_du", d.sup_du),
                ("regularity_ratio", d.regularity_ratio),
                ("max_iterations", d.max_iterations as f64),
                ("contraction", d.contraction),
                ("observation_norm", sol.observation_norm()),
            ],
        )
    })?;
    out.csv("neumann.csv", |f| sol.write_neumann_csv(f))?;
    out.csv("final_u.csv", |f| sol.final_u.write_csv(f))?;
    m.set("amplitude", cfg.perturbation.direct_amplitude);
    m.set("max_deviation", d.max_deviation);
    m.set("relative_deviation", rel);
    m.set("regularity_ratio", d.regularity_ratio);
    m.set("observation_norm", sol.observation_norm());
    Ok(())
}

fn elliptic(cfg: &RunConfig, v: &Validated, out: &mut Output, m: &mut Manifest) -> Step<()> {
    let g = &cfg.geometry;
    let table = at(
        "manufactured",
        manufactured_convergence(&cfg.elliptic.levels, g.half_length, g.n_axial),
    )?;
    let orders = table.orders();
    out.csv("elliptic_convergence.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["spacing", "l2_error", "observed_order"])?;
        for (k, (h, e)) in table.spacing.iter().zip(&table.errors).enumerate() {
            let o = if k == 0 { String::new() } else { format!("{:.17e}", orders[k - 1]) };
            w.write_record([format!("{h:.17e}"), format!("{e:.17e}"), o])?;
        }
        w.flush()?;
        Ok(())
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reports = Vec::with_capacity(cfg.elliptic.samples);
    for _ in 0..cfg.elliptic.samples {
        let phi = random_source(&v.grid, &mut rng);
        reports.push(at("resolvent", resolvent_bound_report(&phi))?);
    }
    out.csv("resolvent.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["sample", "p", "ratio", "bound"])?;
        for (k, r) in reports.iter().enumerate() {
            for row in &r.rows {
                w.write_record([
                    k.to_string(),
                    format!("{:.17e}", row.p),
                    format!("{:.17e}", row.ratio),
                    format!("{:.17e}", row.bound),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let c0 = v.grid.cross().poincare_constant();
    let worst = reports.iter().map(|r| r.worst()).fold(0.0, f64::max);
    m.set("min_order", table.min_order());
    m.set("c0", c0);
    m.set("resolvent_worst", worst);
    m.set("resolvent_passes", reports.iter().all(|r| r.passes()));
    Ok(())
}

fn carleman(cfg: &RunConfig, v: &Validated, out: &mut Output, m: &mut Manifest) -> Step<()> {
    let c = &cfg.carleman;
    let grid = &v.spacetime;
    let (ws, gamma) = weight(cfg, grid.cross())?;
    let report = check_assumption(ws.beta_tilde(), &gamma, grid.cross());
    out.text("assumption.txt", &format!("{report}\n"))?;
    m.set("c0", report.c0);
    m.set("eps_hess", report.eps_hess);
    m.set("lambda1", report.lambda1);
    m.set("assumption_passes", report.passes());
    m.set(
        "gamma_star",
        toml::Value::Array(gamma.sides().iter().map(|s| s.label().into()).collect()),
    );
    if !report.passes() {
        return Err(RunError::Numeric {
            stage: "assumption",
            source: Error::Candidate("weight fails the pseudoconvexity conditions".into()),
        });
    }

    // Conjugation residual on a smooth bump over three dyadic levels.
    let mut levels = Vec::new();
    let (mut nx, mut nt) = (c.n_cross, c.n_time);
    for _ in 0..3 {
        let g = Arc::new(at(
            "conjugation",
            SpaceTimeGrid::new(
                at("conjugation", CrossSection::new(cfg.geometry.a, cfg.geometry.b, nx))?,
                at("conjugation", AxialGrid::new(c.half_length, c.n_axial))?,
                cfg.geometry.horizon,
                nt,
            ),
        )?);
        let ws_l = weight(cfg, g.cross())?.0;
        let w = bump_field(&g);
        let res = c
            .conjugation_s
            .iter()
            .map(|&s| at("conjugation", conjugation_residual(&w, &ws_l, s)))
            .collect::<Step<Vec<f64>>>()?;
        levels.push((nx, nt, res));
        nx = 2 * nx - 1;
        nt *= 2;
    }
    let mut min_factor = f64::INFINITY;
    for p in levels.windows(2) {
        for (a, b) in p[0].2.iter().zip(&p[1].2) {
            if *b > 0.0 {
                min_factor = min_factor.min(a / b);
            }
        }
    }
    out.csv("conjugation.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["s", "n_cross", "n_time", "residual"])?;
        for (nx, nt, res) in &levels {
            for (s, r) in c.conjugation_s.iter().zip(res) {
                w.write_record([format!("{s:.17e}"), nx.to_string(), nt.to_string(), format!("{r:.17e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    m.set("conjugation_min_factor", min_factor);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = RatioStudyParams {
        samples: c.samples,
        calibration_range: (c.calibration_min, c.calibration_max),
        calibration_points: c.calibration_points,
        sweep_points: c.sweep_points,
        decades: c.decades,
        seed: rng.next_u64(),
    };
    let table = at("ratio", carleman_ratio_study(&ws, &gamma, grid, &params))?;
    out.csv("carleman_ratio.csv", |f| table.write_csv(f))?;
    out.csv("carleman_calibration.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["s", "max_ratio", "mean_ratio"])?;
        for r in &table.calibration {
            w.write_record([r.s, r.max_ratio, r.mean_ratio].map(|x| format!("{x:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    })?;
    m.set("s0", table.s0);
    m.set("max_ratio", table.rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max));
    m.set("ratios_finite", table.all_finite());
    m.set("upper_half_nonincreasing", table.upper_half_nonincreasing(0.05));
    Ok(())
}

fn lemma_table(cfg: &RunConfig, v: &Validated, pair: &AdmissiblePair) -> Step<LemmaTable> {
    let (ws, _) = weight(cfg, v.grid.cross())?;
    let runs = at(
        "solve",
        perturbed_runs(
            pair,
            &v.perturbation,
            cfg.perturbation.lemma_amplitude,
            cfg.inverse.two_sided,
            &solve_options(v),
        ),
    )?;
    at(
        "lemma",
        lemma_inv_from_runs(&runs.rho, pair.u0(), &runs.sol1, &runs.sol2, &ws, &cfg.lemma_s_values()),
    )
}

fn lemma_inv(cfg: &RunConfig, v: &Validated, out: &mut Output, m: &mut Manifest) -> Step<()> {
    let pair = pair(v)?;
    let table = lemma_table(cfg, v, &pair)?;
    out.csv("lemma_inv.csv", |f| table.write_csv(f))?;
    m.set("amplitude", cfg.perturbation.lemma_amplitude);
    m.set("max_ratio", table.max_ratio());
    m.set("ratios_finite", table.all_finite());
    m.set("upper_half_nonincreasing", table.upper_half_nonincreasing(0.05));
    Ok(())
}

fn stability(cfg: &RunConfig, v: &Validated, out: &mut Output, m: &mut Manifest) -> Step<()> {
    let sp = &v.stability;
    m.set("a", sp.a());
    m.set("b", sp.b());
    m.set("d", sp.d());
    m.set("eps", sp.eps());
    m.set("delta", sp.delta());
    m.set("theta", sp.theta());
    m.set("mu_delta", sp.mu_delta());
    let pair = pair(v)?;
    let recipe_constant = match cfg.inverse.recipe_constant {
        Some(c) => {
            m.set("recipe_constant_source", "config");
            c
        }
        None => {
            let c = lemma_table(cfg, v, &pair)?.max_ratio();
            if !(c > 0.0 && c.is_finite()) {
                return Err(RunError::Numeric {
                    stage: "lemma",
                    source: Error::param("recipe_constant", format!("fitted constant is {c}")),
                });
            }
            m.set("recipe_constant_source", "lemma-inv");
            c
        }
    };
    m.set("recipe_constant", recipe_constant);
    let opts = SweepOptions {
        amplitudes: cfg.perturbation.amplitudes.clone(),
        two_sided: cfg.inverse.two_sided,
        solve: solve_options(v),
        recipe_constant,
    };
    let report = at("sweep", stability_sweep(&pair, &v.perturbation, sp, &opts))?;
    out.csv("stability.csv", |f| report.write_csv(f))?;
    m.set("c_fit", report.c_fit);
    m.set("slope", report.slope);
    m.set("linear_slope", report.linear_slope);
    m.set("quadratic_deviation", report.quadratic_deviation);
    m.set("mu_monotone", report.mu_monotone);
    m.set("holder_holds", report.holder_holds());
    Ok(())
}
