use std::io::Write;
use std::sync::Arc;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::spacetime::{cross_centered_second, cross_first_difference, time_difference, SpaceTimeField, SpaceTimeGrid, Stencils, WeightTable};
use super::assumption::check_assumption;
use super::weights::WeightSpec;
use crate::{Error, Result, Subboundary, C64};

/// Settings of [`carleman_ratio_study`].
#[derive(Clone, Debug)]
pub struct RatioStudyParams {
    pub samples: usize,
    /// Log-spaced pre-sweep `[lo, hi]` used to locate `s₀`.
    pub calibration_range: (f64, f64),
    pub calibration_points: usize,
    /// Points of the main sweep over `[s₀, 10^decades s₀]`.
    pub sweep_points: usize,
    pub decades: f64,
    pub seed: u64,
}

impl Default for RatioStudyParams {
    fn default() -> Self {
        Self {
            samples: 20,
            calibration_range: (1.0, 100.0),
            calibration_points: 9,
            sweep_points: 9,
            decades: 1.0,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioRow {
    pub s: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct RatioTable {
    pub s0: f64,
    pub calibration: Vec<RatioRow>,
    pub rows: Vec<RatioRow>,
}

impl RatioTable {
    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.max_ratio.is_finite() && r.mean_ratio.is_finite())
    }

    /// Whether the per-`s` maximum is non-increasing, up to the relative
    /// tolerance `tol`, over the upper half of the sweep.
    pub fn upper_half_nonincreasing(&self, tol: f64) -> bool {
        let start = self.rows.len() / 2;
        self.rows[start..].windows(2).all(|p| p[1].max_ratio <= p[0].max_ratio * (1.0 + tol))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["s", "max_ratio", "mean_ratio"])?;
        for r in &self.rows {
            out.write_record([r.s.to_string(), r.max_ratio.to_string(), r.mean_ratio.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Random test field `b(t) e^{iωt} P(x') g(x_n)`: `P` vanishes at both
/// endpoints, `g` is a Gaussian, `b` a `cos⁸` bump inside `(-0.9T, 0.9T)`.
pub fn random_test_field(grid: &Arc<SpaceTimeGrid>, rng: &mut impl Rng) -> SpaceTimeField {
    let t = grid.horizon();
    let cross = grid.cross();
    let (a, b) = (cross.a(), cross.b());
    let centre = rng.gen_range(-0.2..0.2) * t;
    let half = rng.gen_range(0.5 * t..(0.9 * t - centre.abs()));
    let omega = rng.gen_range(-5.0..5.0);
    let coef: Vec<C64> = (0..3).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let l = grid.axial().half_length();
    let z0 = rng.gen_range(-0.25..0.25) * l;
    let width = rng.gen_range(0.5..1.5);
    SpaceTimeField::from_fn(grid, |tm, x, z| {
        let u = (tm - centre) / half;
        if u.abs() >= 1.0 {
            return C64::new(0.0, 0.0);
        }
        let bump = (0.5 * std::f64::consts::PI * u).cos().powi(8);
        let xi = (x - a) / (b - a);
        let poly = (x - a) * (b - x) * (coef[0] + coef[1] * xi + coef[2] * xi * xi);
        let gauss = (-((z - z0) / width).powi(2)).exp();
        poly * C64::from_polar(bump * gauss, omega * tm)
    })
}

/// Both sides of the Carleman inequality for one field and one `s`, scaled
/// by the common factor `e^{2s min η}`.
#[derive(Clone, Copy, Debug)]
pub struct CarlemanSides {
    pub lhs: f64,
    pub rhs: f64,
}

impl CarlemanSides {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// Per-field data that do not depend on `s`.
struct Prepared {
    w: Array3<C64>,
    st: Stencils,
    /// `Lw = -i∂_t w - Δw`.
    lw: Array3<C64>,
    /// `|∂_ν w|²` per observed side, indexed `[m, j]`.
    normal: Vec<(usize, f64, ndarray::Array2<f64>)>,
}

fn prepare(w: &SpaceTimeField, ws: &WeightSpec, gamma: &Subboundary) -> Prepared {
    let g = w.grid();
    let st = Stencils::of(w);
    let i = C64::i();
    let lw = Array3::from_shape_fn(w.values().dim(), |idx| -i * st.dt[idx] - st.dxx[idx] - st.dzz[idx]);
    let cross = g.cross();
    let h = cross.spacing();
    let nx = cross.len();
    let v = w.values();
    let (nt, _, nn) = g.shape();
    let normal = gamma
        .sides()
        .iter()
        .map(|&side| {
            let (i0, i1, i2) = match side {
                crate::Side::Left => (0, 1, 2),
                crate::Side::Right => (nx - 1, nx - 2, nx - 3),
            };
            let dn = ndarray::Array2::from_shape_fn((nt, nn), |(m, j)| {
                ((v[[m, i0, j]] * 3.0 - v[[m, i1, j]] * 4.0 + v[[m, i2, j]]) / (2.0 * h)).norm_sqr()
            });
            (i0, ws.normal_derivative(cross, side), dn)
        })
        .collect();
    Prepared {
        w: v.clone(),
        st,
        lw,
        normal,
    }
}

fn sides_for(p: &Prepared, tab: &WeightTable, grid: &SpaceTimeGrid, s: f64) -> CarlemanSides {
    let (nt, nx, nn) = grid.shape();
    let eta0 = tab.min_eta();
    let decay = ndarray::Array2::from_shape_fn((nt, nx), |(m, i)| (-s * (tab.eta[[m, i]] - eta0)).exp());
    let phi_w = Array3::from_shape_fn((nt, nx, nn), |(m, i, j)| p.w[[m, i, j]] * decay[[m, i]]);
    let dt = grid.time_step();
    let h = grid.cross().spacing();
    let phi_t = time_difference(&phi_w, dt);
    let phi_x = cross_first_difference(&phi_w, h);
    let phi_xx = cross_centered_second(&phi_w, h);
    let i = C64::i();
    let (mut grad, mut mass, mut m1, mut m2, mut lw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for m in 1..nt - 1 {
        for k in 1..nx - 1 {
            let d = decay[[m, k]];
            let (ex, exx, et) = (tab.eta_x[[m, k]], tab.eta_xx[[m, k]], tab.eta_t[[m, k]]);
            for j in 0..nn {
                let f = phi_w[[m, k, j]];
                grad += (p.st.dx[[m, k, j]] * d).norm_sqr();
                mass += f.norm_sqr();
                let a = i * phi_t[[m, k, j]] + phi_xx[[m, k, j]] + p.st.dzz[[m, k, j]] * d + f * (s * s * ex * ex);
                let b = i * (s * et) * f + phi_x[[m, k, j]] * (2.0 * s * ex) + f * (s * exx);
                m1 += a.norm_sqr();
                m2 += b.norm_sqr();
                lw += (p.lw[[m, k, j]] * d).norm_sqr();
            }
        }
    }
    let mut boundary = 0.0;
    for (i0, dnu_beta, dn) in &p.normal {
        for m in 1..nt - 1 {
            let wt = decay[[m, *i0]].powi(2) * tab.phi[[m, *i0]] * dnu_beta;
            boundary += wt * dn.row(m).sum();
        }
    }
    let cell = grid.cell();
    let face = dt * grid.axial().spacing();
    CarlemanSides {
        lhs: (s * grad + s.powi(3) * mass + m1 + m2) * cell,
        rhs: s * boundary * face + lw * cell,
    }
}

/// Evaluates both sides of the Carleman inequality for `w` at each `s`.
pub fn carleman_sides(w: &SpaceTimeField, ws: &WeightSpec, gamma: &Subboundary, s_values: &[f64]) -> Result<Vec<CarlemanSides>> {
    w.check_support()?;
    if w.values().iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::param("w", "the zero field gives 0/0"));
    }
    let tab = WeightTable::new(ws, w.grid())?;
    let p = prepare(w, ws, gamma);
    Ok(s_values.iter().map(|&s| sides_for(&p, &tab, w.grid(), s)).collect())
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn summarize(s_values: &[f64], per_sample: &[Vec<f64>]) -> Vec<RatioRow> {
    s_values
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let r: Vec<f64> = per_sample.iter().map(|v| v[k]).collect();
            RatioRow {
                s,
                max_ratio: r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_ratio: r.iter().sum::<f64>() / r.len() as f64,
            }
        })
        .collect()
}

/// Ratio `LHS / RHS` of the Carleman inequality over random test fields.
/// `s₀` is the argmax of the per-`s` maximum over a calibration pre-sweep;
/// the reported sweep spans `[s₀, 10^decades s₀]`.
pub fn carleman_ratio_study(
    ws: &WeightSpec,
    gamma: &Subboundary,
    grid: &Arc<SpaceTimeGrid>,
    params: &RatioStudyParams,
) -> Result<RatioTable> {
    let report = check_assumption(ws.beta_tilde(), gamma, grid.cross());
    if !report.passes() {
        return Err(Error::Candidate(format!("weight fails the pseudoconvexity conditions\n{report}")));
    }
    if params.samples == 0 || params.sweep_points < 2 || params.calibration_points < 2 {
        return Err(Error::param("samples", "need at least one sample and two sweep points"));
    }
    let (lo, hi) = params.calibration_range;
    if !(lo > 0.0 && hi > lo && params.decades > 0.0) {
        return Err(Error::param("calibration_range", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    let tab = WeightTable::new(ws, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fields: Vec<SpaceTimeField> = (0..params.samples).map(|_| random_test_field(grid, &mut rng)).collect();
    let prepared: Vec<Prepared> = fields.par_iter().map(|w| prepare(w, ws, gamma)).collect();
    let ratios = |s_values: &[f64]| -> Vec<Vec<f64>> {
        prepared
            .par_iter()
            .map(|p| s_values.iter().map(|&s| sides_for(p, &tab, grid, s).ratio()).collect())
            .collect()
    };
    let cal_s = logspace(lo, hi, params.calibration_points);
    let calibration = summarize(&cal_s, &ratios(&cal_s));
    let s0 = calibration
        .iter()
        .fold((lo, f64::NEG_INFINITY), |acc, r| if r.max_ratio > acc.1 { (r.s, r.max_ratio) } else { acc })
        .0;
    let sweep = logspace(s0, s0 * 10f64.powf(params.decades), params.sweep_points);
    let rows = summarize(&sweep, &ratios(&sweep));
    Ok(RatioTable { s0, calibration, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::weights::quadratic_candidate;
    use crate::{AxialGrid, CrossSection};

    fn setup(nt: usize, nx: usize) -> (Arc<SpaceTimeGrid>, WeightSpec, Subboundary) {
        let cross = CrossSection::new(0.0, 1.0, nx).unwrap();
        let (b, gamma) = quadratic_candidate(-1.0, &cross).unwrap();
        let ws = WeightSpec::new(Arc::new(b), &cross, 2.0, 0.1, 1.0).unwrap();
        let grid = Arc::new(SpaceTimeGrid::new(cross, AxialGrid::new(6.0, 32).unwrap(), 1.0, nt).unwrap());
        (grid, ws, gamma)
    }

    #[test]
    fn zero_field_excluded() {
        let (grid, ws, gamma) = setup(16, 17);
        assert!(carleman_sides(&SpaceTimeField::zeros(&grid), &ws, &gamma, &[1.0]).is_err());
    }

    #[test]
    fn ratios_finite_and_decreasing() {
        let (grid, ws, gamma) = setup(48, 33);
        let params = RatioStudyParams {
            samples: 6,
            ..Default::default()
        };
        let table = carleman_ratio_study(&ws, &gamma, &grid, &params).unwrap();
        assert!(table.all_finite());
        assert!(table.rows.iter().all(|r| r.max_ratio > 0.0 && r.mean_ratio <= r.max_ratio));
        assert!(table.upper_half_nonincreasing(0.05), "{:?}", table.rows);
        assert!((table.rows.last().unwrap().s / table.s0 - 10.0).abs() < 1e-9);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + params.sweep_points);
    }

    #[test]
    fn rejects_uncertified_weight() {
        let (grid, ws, _) = setup(16, 17);
        let wrong = Subboundary::new([crate::Side::Left]);
        assert!(matches!(
            carleman_ratio_study(&ws, &wrong, &grid, &RatioStudyParams::default()),
            Err(Error::Candidate(_))
        ));
    }

    #[test]
    fn same_seed_same_table() {
        let (grid, ws, gamma) = setup(16, 17);
        let params = RatioStudyParams {
            samples: 3,
            ..Default::default()
        };
        let a = carleman_ratio_study(&ws, &gamma, &grid, &params).unwrap();
        let b = carleman_ratio_study(&ws, &gamma, &grid, &params).unwrap();
        assert_eq!(a.rows, b.rows);
    }
}
