use std::io::Write;

use ndarray::Array2;

use crate::carleman::WeightSpec;
use crate::schrodinger::{sigma_norm, DirectSolution};
use crate::{Error, GridFunction, Result, Side, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaRow {
    pub s: f64,
    /// `‖e^{-sη(0)} ρu₀‖²`.
    pub lhs: f64,
    /// `s^{-3/2}‖e^{-sη(0)} ρu₂'‖²_Q + s^{-1/2}‖e^{-sη(0)} ∂_ν v‖²_{Σ*}`.
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LemmaTable {
    pub rows: Vec<LemmaRow>,
}

impl LemmaTable {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.ratio.is_finite())
    }

    /// Whether the ratio is flat or decreasing, up to the relative tolerance
    /// `tol`, over the upper half of the sweep.
    pub fn upper_half_nonincreasing(&self, tol: f64) -> bool {
        let start = self.rows.len() / 2;
        self.rows[start..].windows(2).all(|p| p[1].ratio <= p[0].ratio * (1.0 + tol))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["s", "lhs", "rhs", "ratio"])?;
        for r in &self.rows {
            out.write_record([r.s, r.lhs, r.rhs, r.ratio].map(|x| format!("{x:.17e}")))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Evaluates both sides of the weighted inequality with `η(0, ·)` frozen at
/// `t = 0`. `du2_energy` holds `∫₀ᵀ |u₂'|² dt` per node and `dnu_v` the
/// histories of `∂_ν v` on `γ*`. All terms carry the common factor
/// `e^{2s min η(0)}`, which cancels in the ratio.
pub fn lemma_inv_check(
    rho: &GridFunction,
    u0: &GridFunction,
    du2_energy: &Array2<f64>,
    dnu_v: &[(Side, Array2<C64>)],
    dt: f64,
    ws: &WeightSpec,
    s_values: &[f64],
) -> Result<LemmaTable> {
    rho.ensure_same_grid(u0)?;
    let grid = rho.grid();
    if du2_energy.dim() != grid.shape() {
        return Err(Error::GridMismatch("energy density has the wrong shape".into()));
    }
    if let Some(&s) = s_values.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::param("s", format!("must be positive, got {s}")));
    }
    let cross = grid.cross();
    let eta: Vec<f64> = cross.nodes().iter().map(|&x| ws.eta(0.0, x)).collect::<Result<_>>()?;
    let eta_min = eta.iter().copied().fold(f64::INFINITY, f64::min);
    let wx = cross.quadrature_weights();
    let hn = grid.axial().spacing();

    // Per cross-section node: ∫|ρu₀|² dx_n and ∫|ρ|² ∫|u₂'|² dt dx_n.
    let r = rho.values();
    let u = u0.values();
    let mut mass = vec![0.0; cross.len()];
    let mut source = vec![0.0; cross.len()];
    for i in 0..cross.len() {
        for j in 0..grid.axial().len() {
            let rr = r[[i, j]].norm_sqr();
            mass[i] += rr * u[[i, j]].norm_sqr() * hn * wx[i];
            source[i] += rr * du2_energy[[i, j]] * hn * wx[i];
        }
    }
    let boundary: Vec<(usize, f64)> = dnu_v
        .iter()
        .map(|(side, hist)| (cross.boundary_index(*side), sigma_norm([hist], dt, hn).powi(2)))
        .collect();

    let rows = s_values
        .iter()
        .map(|&s| {
            let w = |i: usize| (-2.0 * s * (eta[i] - eta_min)).exp();
            let lhs: f64 = mass.iter().enumerate().map(|(i, m)| w(i) * m).sum();
            let q: f64 = source.iter().enumerate().map(|(i, m)| w(i) * m).sum();
            let b: f64 = boundary.iter().map(|&(i, n2)| w(i) * n2).sum();
            let rhs = s.powf(-1.5) * q + s.powf(-0.5) * b;
            let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
            LemmaRow { s, lhs, rhs, ratio }
        })
        .collect();
    Ok(LemmaTable { rows })
}

/// [`lemma_inv_check`] on a pair of direct runs, `sol2` being the run with
/// potential `q₂` and `ρ = q₁ - q₂`.
pub fn lemma_inv_from_runs(
    rho: &GridFunction,
    u0: &GridFunction,
    sol1: &DirectSolution,
    sol2: &DirectSolution,
    ws: &WeightSpec,
    s_values: &[f64],
) -> Result<LemmaTable> {
    if *sol1.grid() != *sol2.grid() || sol1.observed() != sol2.observed() {
        return Err(Error::GridMismatch("runs differ in grid or observed sides".into()));
    }
    let diffs: Vec<(Side, Array2<C64>)> = sol1
        .neumann
        .iter()
        .zip(&sol2.neumann)
        .map(|((s, a), (_, b))| (*s, a - b))
        .collect();
    lemma_inv_check(rho, u0, &sol2.derivative_energy, &diffs, sol1.grid().time_step(), ws, s_values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissible::{build_pair, make_perturbation, FactoryParams, PerturbationParams, PerturbationShape};
    use crate::carleman::quadratic_candidate;
    use crate::schrodinger::{solve_direct, SolveOptions};
    use crate::CylinderGrid;
    use std::sync::Arc;

    fn setup(amp: f64) -> (GridFunction, GridFunction, DirectSolution, DirectSolution, WeightSpec) {
        let g = Arc::new(CylinderGrid::build(0.0, 1.0, 64, 10.0, 128, 1.0, 64).unwrap());
        let pp = PerturbationParams::new(1.0, 1.0, 2.0, 1.0, PerturbationShape::default()).unwrap();
        let pair = build_pair(&FactoryParams::background(1.0, 1.0, 0.1, 0.3), &g).unwrap();
        let rho = make_perturbation(&pp, &g, amp).unwrap();
        let q1 = pair.q0() + &rho;
        let s1 = solve_direct(&pair, &q1, &pp, &SolveOptions::default()).unwrap();
        let s2 = solve_direct(&pair, pair.q0(), &pp, &SolveOptions::default()).unwrap();
        let (beta, _) = quadratic_candidate(-1.0, g.cross()).unwrap();
        let ws = WeightSpec::new(Arc::new(beta), g.cross(), 2.0, 0.1, 1.0).unwrap();
        (rho, pair.u0().clone(), s1, s2, ws)
    }

    fn sweep() -> Vec<f64> {
        (0..9).map(|k| 10f64.powf(k as f64 / 4.0)).collect()
    }

    #[test]
    fn zero_perturbation_gives_zero_sides() {
        let (rho, u0, s1, s2, ws) = setup(0.0);
        let t = lemma_inv_from_runs(&rho, &u0, &s1, &s2, &ws, &sweep()).unwrap();
        assert!(t.rows.iter().all(|r| r.lhs == 0.0 && r.rhs == 0.0 && r.ratio == 0.0));
    }

    #[test]
    fn bump_ratio_finite_and_not_increasing() {
        let (rho, u0, s1, s2, ws) = setup(1e-3);
        let t = lemma_inv_from_runs(&rho, &u0, &s1, &s2, &ws, &sweep()).unwrap();
        assert!(t.all_finite() && t.max_ratio() > 0.0);
        assert!(t.upper_half_nonincreasing(0.05));
    }

    #[test]
    fn rejects_nonpositive_s() {
        let (rho, u0, s1, s2, ws) = setup(1e-3);
        assert!(lemma_inv_from_runs(&rho, &u0, &s1, &s2, &ws, &[0.0]).is_err());
    }
}
