use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{s, Array2, Array3, Axis};

use super::weights::WeightSpec;
use crate::geometry::{apply_symbol, forward_rows, inverse_rows};
use crate::{AxialGrid, CrossSection, CylinderGrid, Error, Result, C64};

/// Symmetric time grid `t_m = -T + 2Tm/M`, `m = 0..=M`, over the spatial
/// cylinder grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    space: Arc<CylinderGrid>,
    n_intervals: usize,
}

impl SpaceTimeGrid {
    pub fn new(cross: CrossSection, axial: AxialGrid, horizon: f64, n_intervals: usize) -> Result<Self> {
        if n_intervals < 4 || n_intervals % 2 != 0 {
            return Err(Error::param("n_intervals", format!("need an even count >= 4, got {n_intervals}")));
        }
        Ok(Self {
            space: Arc::new(CylinderGrid::new(cross, axial, horizon, n_intervals)?),
            n_intervals,
        })
    }

    pub fn space(&self) -> &Arc<CylinderGrid> {
        &self.space
    }

    pub fn cross(&self) -> &CrossSection {
        self.space.cross()
    }

    pub fn axial(&self) -> &AxialGrid {
        self.space.axial()
    }

    pub fn horizon(&self) -> f64 {
        self.space.horizon()
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn time_step(&self) -> f64 {
        2.0 * self.horizon() / self.n_intervals as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let t = self.horizon();
        let dt = self.time_step();
        (0..=self.n_intervals).map(|m| -t + m as f64 * dt).collect()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_intervals + 1, self.cross().len(), self.axial().len())
    }

    /// `Δt · h' · h_n` for the interior quadratures.
    pub(crate) fn cell(&self) -> f64 {
        self.time_step() * self.cross().spacing() * self.axial().spacing()
    }
}

/// Complex field on a [`SpaceTimeGrid`], indexed `[m, i, j]`.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: Arc<SpaceTimeGrid>,
    values: Array3<C64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &Arc<SpaceTimeGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: Array3::zeros(grid.shape()),
        }
    }

    pub fn from_fn(grid: &Arc<SpaceTimeGrid>, mut f: impl FnMut(f64, f64, f64) -> C64) -> Self {
        let times = grid.times();
        let xs = grid.cross().nodes();
        let zs = grid.axial().nodes();
        let values = Array3::from_shape_fn(grid.shape(), |(m, i, j)| f(times[m], xs[i], zs[j]));
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_values(grid: &Arc<SpaceTimeGrid>, values: Array3<C64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "values have shape {:?}, grid expects {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &Array3<C64> {
        &self.values
    }

    /// Rejects fields that are nonzero on `t = ±T` or on the lateral boundary.
    pub fn check_support(&self) -> Result<()> {
        let last = self.grid.n_intervals;
        let zero = |z: &C64| *z == C64::new(0.0, 0.0);
        if !self.values.index_axis(Axis(0), 0).iter().all(zero) || !self.values.index_axis(Axis(0), last).iter().all(zero) {
            return Err(Error::SupportTouchesHorizon);
        }
        let nx = self.grid.cross().len();
        for i in [0, nx - 1] {
            if !self.values.index_axis(Axis(1), i).iter().all(zero) {
                return Err(Error::param("w", "field must vanish on the lateral boundary"));
            }
        }
        Ok(())
    }
}

/// Stencil derivatives of a field: centered in `t` and `x'` on interior
/// slices and rows, spectral in `x_n`; zero elsewhere.
#[derive(Clone, Debug)]
pub(crate) struct Stencils {
    pub dt: Array3<C64>,
    pub dx: Array3<C64>,
    pub dxx: Array3<C64>,
    pub dzz: Array3<C64>,
}

pub(crate) fn time_difference(v: &Array3<C64>, dt: f64) -> Array3<C64> {
    let nt = v.len_of(Axis(0));
    let mut out = Array3::zeros(v.dim());
    let diff = (&v.slice(s![2.., .., ..]) - &v.slice(s![..nt - 2, .., ..])) * C64::new(0.5 / dt, 0.0);
    out.slice_mut(s![1..nt - 1, .., ..]).assign(&diff);
    out
}

pub(crate) fn cross_first_difference(v: &Array3<C64>, h: f64) -> Array3<C64> {
    let nx = v.len_of(Axis(1));
    let mut out = Array3::zeros(v.dim());
    let diff = (&v.slice(s![.., 2.., ..]) - &v.slice(s![.., ..nx - 2, ..])) * C64::new(0.5 / h, 0.0);
    out.slice_mut(s![.., 1..nx - 1, ..]).assign(&diff);
    out
}

pub(crate) fn cross_centered_second(v: &Array3<C64>, h: f64) -> Array3<C64> {
    let nx = v.len_of(Axis(1));
    let mut out = Array3::zeros(v.dim());
    let diff = (&v.slice(s![.., 2.., ..]) - &(&v.slice(s![.., 1..nx - 1, ..]) * C64::new(2.0, 0.0))
        + v.slice(s![.., ..nx - 2, ..]))
        * C64::new(1.0 / (h * h), 0.0);
    out.slice_mut(s![.., 1..nx - 1, ..]).assign(&diff);
    out
}

pub(crate) fn axial_second(v: &Array3<C64>, axial: &AxialGrid) -> Array3<C64> {
    let mut out = v.clone();
    for mut slice in out.outer_iter_mut() {
        let mut buf: Array2<C64> = slice.to_owned();
        forward_rows(axial, &mut buf);
        apply_symbol(axial, &mut buf, |_, p| C64::new(-p * p, 0.0));
        inverse_rows(axial, &mut buf);
        slice.assign(&buf);
    }
    out
}

impl Stencils {
    pub fn of(w: &SpaceTimeField) -> Self {
        let g = w.grid();
        let h = g.cross().spacing();
        let v = w.values();
        Self {
            dt: time_difference(v, g.time_step()),
            dx: cross_first_difference(v, h),
            dxx: cross_centered_second(v, h),
            dzz: axial_second(v, g.axial()),
        }
    }
}

/// Nodal weight tables on interior slices `1..M` (rows `0` and `M` hold
/// `+∞` for `η` and zero for the derivatives).
#[derive(Clone, Debug)]
pub(crate) struct WeightTable {
    pub eta: Array2<f64>,
    pub eta_x: Array2<f64>,
    pub eta_xx: Array2<f64>,
    pub eta_t: Array2<f64>,
    pub phi: Array2<f64>,
}

impl WeightTable {
    pub fn new(ws: &WeightSpec, grid: &SpaceTimeGrid) -> Result<Self> {
        if (ws.horizon() - grid.horizon()).abs() > 1e-12 * grid.horizon() {
            return Err(Error::GridMismatch(format!(
                "weight horizon {} differs from grid horizon {}",
                ws.horizon(),
                grid.horizon()
            )));
        }
        let times = grid.times();
        let xs = grid.cross().nodes();
        let shape = (times.len(), xs.len());
        let mut tab = Self {
            eta: Array2::from_elem(shape, f64::INFINITY),
            eta_x: Array2::zeros(shape),
            eta_xx: Array2::zeros(shape),
            eta_t: Array2::zeros(shape),
            phi: Array2::zeros(shape),
        };
        for m in 1..times.len() - 1 {
            for (i, &x) in xs.iter().enumerate() {
                let t = times[m];
                let (phi, eta) = ws.weights(t, x)?;
                tab.eta[[m, i]] = eta;
                tab.phi[[m, i]] = phi;
                tab.eta_x[[m, i]] = ws.eta_x(t, x)?;
                tab.eta_xx[[m, i]] = ws.eta_xx(t, x)?;
                tab.eta_t[[m, i]] = ws.eta_t(t, x)?;
            }
        }
        Ok(tab)
    }

    pub fn min_eta(&self) -> f64 {
        self.eta.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `e^{s(a-b)} z`, zero when `z` vanishes (also for `a = +∞`).
fn shifted(s: f64, a: f64, b: f64, z: C64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        z
    } else {
        z * (s * (a - b)).exp()
    }
}

/// Smooth field `cos⁸(πt / 1.8T) ξ(1-ξ) e^{-x_n²} e^{2it}` supported in
/// `|t| < 0.9T`, `ξ` the unit cross-section coordinate.
pub fn bump_field(grid: &Arc<SpaceTimeGrid>) -> SpaceTimeField {
    let tau = 0.9 * grid.horizon();
    let (a, len) = (grid.cross().a(), grid.cross().length());
    SpaceTimeField::from_fn(grid, |t, x, z| {
        let b = if t.abs() >= tau { 0.0 } else { (0.5 * PI * t / tau).cos().powi(8) };
        let xi = (x - a) / len;
        C64::from_polar(b * xi * (1.0 - xi) * (-z * z).exp(), 2.0 * t)
    })
}

/// `‖e^{-sη} L(e^{sη} w) + (M₁ + M₂) w‖` over interior slices and rows, with
/// `L = -i∂_t - Δ`, `M₁ = i∂_t + Δ + s²|∇η|²` and
/// `M₂ = isη' + 2s∇η·∇ + sΔη`, all derivatives by the stencils of the grid.
/// The conjugated operator is evaluated through exponent differences so that
/// `e^{sη}` is never formed.
pub fn conjugation_residual(w: &SpaceTimeField, ws: &WeightSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::param("s", format!("must be nonnegative, got {s}")));
    }
    w.check_support()?;
    let g = w.grid();
    let tab = WeightTable::new(ws, g)?;
    let st = Stencils::of(w);
    let v = w.values();
    let (nt, nx, nn) = g.shape();
    let dt = g.time_step();
    let h = g.cross().spacing();
    let i = C64::i();
    let mut acc = 0.0;
    for m in 1..nt - 1 {
        for k in 1..nx - 1 {
            let e = tab.eta[[m, k]];
            let (ex, exx, et) = (tab.eta_x[[m, k]], tab.eta_xx[[m, k]], tab.eta_t[[m, k]]);
            for j in 0..nn {
                let conj_t = (shifted(s, tab.eta[[m + 1, k]], e, v[[m + 1, k, j]])
                    - shifted(s, tab.eta[[m - 1, k]], e, v[[m - 1, k, j]]))
                    / (2.0 * dt);
                let conj_xx = (shifted(s, tab.eta[[m, k + 1]], e, v[[m, k + 1, j]]) - v[[m, k, j]] * 2.0
                    + shifted(s, tab.eta[[m, k - 1]], e, v[[m, k - 1, j]]))
                    / (h * h);
                let conj = -i * conj_t - conj_xx - st.dzz[[m, k, j]];
                let w0 = v[[m, k, j]];
                let m1 = i * st.dt[[m, k, j]] + st.dxx[[m, k, j]] + st.dzz[[m, k, j]] + w0 * (s * s * ex * ex);
                let m2 = i * (s * et) * w0 + st.dx[[m, k, j]] * (2.0 * s * ex) + w0 * (s * exx);
                acc += (conj + m1 + m2).norm_sqr();
            }
        }
    }
    Ok((acc * g.cell()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::weights::quadratic_candidate;

    fn grid(nt: usize, nx: usize) -> Arc<SpaceTimeGrid> {
        Arc::new(
            SpaceTimeGrid::new(CrossSection::new(0.0, 1.0, nx).unwrap(), AxialGrid::new(6.0, 32).unwrap(), 1.0, nt).unwrap(),
        )
    }

    fn weights() -> WeightSpec {
        let cross = CrossSection::new(0.0, 1.0, 17).unwrap();
        let (b, _) = quadratic_candidate(-1.0, &cross).unwrap();
        WeightSpec::new(Arc::new(b), &cross, 2.0, 0.1, 1.0).unwrap()
    }

    fn smooth(g: &Arc<SpaceTimeGrid>) -> SpaceTimeField {
        bump_field(g)
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let g = grid(16, 17);
        let r = conjugation_residual(&SpaceTimeField::zeros(&g), &weights(), 3.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn identity_is_exact_at_s_zero() {
        let g = grid(32, 17);
        let r = conjugation_residual(&smooth(&g), &weights(), 0.0).unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn residual_second_order() {
        for s in [1.0, 5.0] {
            let res: Vec<f64> = [(32, 17), (64, 33), (128, 65)]
                .iter()
                .map(|&(nt, nx)| conjugation_residual(&smooth(&grid(nt, nx)), &weights(), s).unwrap())
                .collect();
            for p in res.windows(2) {
                assert!(p[0] / p[1] >= 3.5, "s = {s}: {res:?}");
            }
        }
    }

    #[test]
    fn rejects_support_on_horizon() {
        let g = grid(16, 17);
        let w = SpaceTimeField::from_fn(&g, |_, x, z| C64::new(x * (1.0 - x) * (-z * z).exp(), 0.0));
        assert!(matches!(conjugation_residual(&w, &weights(), 1.0), Err(Error::SupportTouchesHorizon)));
    }

    #[test]
    fn stencils_on_polynomials() {
        let g = grid(8, 9);
        let w = SpaceTimeField::from_fn(&g, |t, x, _| C64::new(t * t * x * x, 0.0));
        let st = Stencils::of(&w);
        let ts = g.times();
        let xs = g.cross().nodes();
        for m in 1..8 {
            for i in 1..8 {
                assert!((st.dt[[m, i, 0]].re - 2.0 * ts[m] * xs[i] * xs[i]).abs() < 1e-13);
                assert!((st.dx[[m, i, 0]].re - 2.0 * xs[i] * ts[m] * ts[m]).abs() < 1e-13);
                assert!((st.dxx[[m, i, 0]].re - 2.0 * ts[m] * ts[m]).abs() < 1e-12);
                assert!(st.dzz[[m, i, 0]].norm() < 1e-12);
            }
        }
    }
}
