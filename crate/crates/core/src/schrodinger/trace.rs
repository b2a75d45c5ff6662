use ndarray::{Array1, Array2};

use crate::{Error, GridFunction, Result, Side, Subboundary, C64};

/// Outward normal derivative on the boundary fiber `side`, by the one-sided
/// second-order difference `(3w₀ - 4w₁ + w₂) / 2h` taken into the domain.
pub fn neumann_trace(w: &GridFunction, side: Side, observed: &Subboundary) -> Result<Array1<C64>> {
    if !observed.contains(side) {
        return Err(Error::SideNotObserved(side));
    }
    Ok(normal_derivative(w, side))
}

pub(crate) fn normal_derivative(w: &GridFunction, side: Side) -> Array1<C64> {
    let cross = w.grid().cross();
    let h = cross.spacing();
    let n = cross.len();
    let (i0, i1, i2) = match side {
        Side::Left => (0, 1, 2),
        Side::Right => (n - 1, n - 2, n - 3),
    };
    let v = w.values();
    let scale = 1.0 / (2.0 * h);
    Array1::from_shape_fn(v.ncols(), |j| (v[[i0, j]] * 3.0 - v[[i1, j]] * 4.0 + v[[i2, j]]) * scale)
}

/// `L²(Σ*)` norm of per-side trace histories (rows = time levels `0..=N_t`,
/// columns = axial nodes): trapezoid in `t`, rectangle rule in `x_n`.
pub fn sigma_norm<'a>(traces: impl IntoIterator<Item = &'a Array2<C64>>, dt: f64, hn: f64) -> f64 {
    let mut acc = 0.0;
    for tr in traces {
        let nt = tr.nrows();
        for (m, row) in tr.outer_iter().enumerate() {
            let wt = if m == 0 || m + 1 == nt { 0.5 * dt } else { dt };
            acc += wt * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    (acc * hn).sqrt()
}
