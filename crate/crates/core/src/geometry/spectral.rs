//! Axial Fourier transform and the differential stencils built on it:
//! spectral differentiation in `x_n`, second-order differences in `x'`.

use std::sync::Arc;

use ndarray::Array2;

use super::{AxialGrid, CylinderGrid, GridFunction};
use crate::{Result, C64};

/// A field transformed along the axis: rows still index `x'`, columns index
/// the frequencies of [`AxialGrid::frequencies`].
#[derive(Clone, Debug)]
pub struct AxialSpectrum {
    grid: Arc<CylinderGrid>,
    values: Array2<C64>,
}

impl AxialSpectrum {
    pub fn grid(&self) -> &Arc<CylinderGrid> {
        &self.grid
    }

    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<C64> {
        &mut self.values
    }

    /// Same quadrature as [`GridFunction::l2_norm`]; Parseval makes the two
    /// agree.
    pub fn l2_norm(&self) -> f64 {
        let wx = self.grid.cross().quadrature_weights();
        let hn = self.grid.axial().spacing();
        let mut acc = 0.0;
        for (i, row) in self.values.outer_iter().enumerate() {
            acc += wx[i] * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        (acc * hn).sqrt()
    }

    /// Inverse transform back to physical space.
    pub fn inverse(&self) -> GridFunction {
        let mut values = self.values.clone();
        inverse_rows(self.grid.axial(), &mut values);
        GridFunction::from_values_unchecked(&self.grid, values)
    }
}

/// Unitary DFT of every row in place (`1/√N` normalization).
pub(crate) fn forward_rows(axial: &AxialGrid, values: &mut Array2<C64>) {
    transform_rows(axial, values, true);
}

pub(crate) fn inverse_rows(axial: &AxialGrid, values: &mut Array2<C64>) {
    transform_rows(axial, values, false);
}

fn transform_rows(axial: &AxialGrid, values: &mut Array2<C64>, forward: bool) {
    let plan = if forward {
        axial.forward_plan()
    } else {
        axial.inverse_plan()
    };
    let scale = 1.0 / (axial.len() as f64).sqrt();
    let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for mut row in values.rows_mut() {
        match row.as_slice_mut() {
            Some(slice) => plan.process_with_scratch(slice, &mut scratch),
            None => {
                let mut buf = row.to_vec();
                plan.process_with_scratch(&mut buf, &mut scratch);
                row.assign(&ndarray::ArrayView1::from(&buf));
            }
        }
        row.mapv_inplace(|z| z * scale);
    }
}

/// Partial Fourier transform in `x_n`.
pub fn axial_fourier(w: &GridFunction) -> AxialSpectrum {
    let mut values = w.values().clone();
    forward_rows(w.grid().axial(), &mut values);
    AxialSpectrum {
        grid: Arc::clone(w.grid()),
        values,
    }
}

/// Multiplies every frequency column by `symbol(p)` in place.
pub(crate) fn apply_symbol(axial: &AxialGrid, values: &mut Array2<C64>, symbol: impl Fn(usize, f64) -> C64) {
    let freqs = axial.frequencies();
    for mut row in values.rows_mut() {
        for (k, z) in row.iter_mut().enumerate() {
            *z *= symbol(k, freqs[k]);
        }
    }
}

/// Spectral `∂_{x_n}^order w`; odd orders drop the Nyquist mode.
pub fn axial_derivative(w: &GridFunction, order: u32) -> GridFunction {
    let axial = w.grid().axial();
    let nyq = axial.nyquist_index();
    let mut values = w.values().clone();
    forward_rows(axial, &mut values);
    apply_symbol(axial, &mut values, |k, p| {
        if order % 2 == 1 && k == nyq {
            C64::new(0.0, 0.0)
        } else {
            C64::new(0.0, p).powu(order)
        }
    });
    inverse_rows(axial, &mut values);
    GridFunction::from_values_unchecked(w.grid(), values)
}

/// One-sided second-derivative stencil at a boundary node, exact for
/// polynomials of degree five.
const BOUNDARY_D2: [f64; 6] = [
    15.0 / 4.0,
    -77.0 / 6.0,
    107.0 / 6.0,
    -13.0,
    61.0 / 12.0,
    -5.0 / 6.0,
];

/// `∂²_{x'}` by centered differences on interior rows and the six-point
/// one-sided stencil on the two boundary rows.
pub(crate) fn cross_second_difference(values: &Array2<C64>, h: f64) -> Array2<C64> {
    let n = values.nrows();
    let inv_h2 = 1.0 / (h * h);
    let mut out = Array2::zeros(values.dim());
    for i in 1..n - 1 {
        let (lo, mid, hi) = (values.row(i - 1), values.row(i), values.row(i + 1));
        let mut row = out.row_mut(i);
        for j in 0..row.len() {
            row[j] = (lo[j] - mid[j] * 2.0 + hi[j]) * inv_h2;
        }
    }
    for (bnd, step) in [(0usize, 1isize), (n - 1, -1)] {
        let ncol = values.ncols();
        for j in 0..ncol {
            let mut acc = C64::new(0.0, 0.0);
            for (m, c) in BOUNDARY_D2.iter().enumerate() {
                let i = (bnd as isize + step * m as isize) as usize;
                acc += values[[i, j]] * *c;
            }
            out[[bnd, j]] = acc * inv_h2;
        }
    }
    out
}

/// Discrete Laplacian at every node: centered differences in `x'` (one-sided
/// on the boundary rows) plus spectral `∂²_{x_n}`.
pub fn laplacian(w: &GridFunction) -> GridFunction {
    let grid = w.grid();
    let mut out = cross_second_difference(w.values(), grid.cross().spacing());
    out += &axial_derivative(w, 2).into_values();
    GridFunction::from_values_unchecked(grid, out)
}

/// Dirichlet Laplacian: the interior rows of [`laplacian`], boundary rows set
/// to zero. Assumes `w` vanishes on the boundary rows.
pub fn dirichlet_laplacian(w: &GridFunction) -> GridFunction {
    let grid = w.grid();
    let axial = grid.axial();
    let mut spec = w.values().clone();
    forward_rows(axial, &mut spec);
    apply_symbol(axial, &mut spec, |_, p| C64::new(-p * p, 0.0));
    inverse_rows(axial, &mut spec);
    let n = spec.nrows();
    let inv_h2 = 1.0 / grid.cross().spacing().powi(2);
    let v = w.values();
    let mut out = Array2::zeros(v.dim());
    for i in 1..n - 1 {
        let mut row = out.row_mut(i);
        for j in 0..row.len() {
            row[j] = (v[[i - 1, j]] - v[[i, j]] * 2.0 + v[[i + 1, j]]) * inv_h2 + spec[[i, j]];
        }
    }
    GridFunction::from_values_unchecked(grid, out)
}

/// `(-Δ_h + q) w` with the full [`laplacian`].
pub fn schrodinger_operator(w: &GridFunction, q: &GridFunction) -> Result<GridFunction> {
    w.ensure_same_grid(q)?;
    let lap = laplacian(w);
    Ok(&q.pointwise(w) - &lap)
}

/// Forward difference of the given order along `x'`, rows `0..n-order`.
pub(crate) fn cross_forward_difference(values: &Array2<C64>, h: f64, order: usize) -> Array2<C64> {
    let mut cur = values.clone();
    for _ in 0..order {
        let n = cur.nrows();
        let next = (&cur.slice(ndarray::s![1..n, ..]) - &cur.slice(ndarray::s![0..n - 1, ..])) / C64::new(h, 0.0);
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;
    use std::f64::consts::PI;

    fn grid(nx: usize, nn: usize, l: f64) -> Arc<CylinderGrid> {
        Arc::new(CylinderGrid::build(0.0, 1.0, nx, l, nn, 1.0, 16).unwrap())
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = grid(9, 16, 4.0);
        let s = axial_fourier(&GridFunction::zeros(&g));
        assert!(s.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn pure_mode_occupies_one_frequency_column() {
        let g = grid(9, 32, 4.0);
        let k0 = 3;
        let p0 = g.axial().frequencies()[k0];
        let w = GridFunction::from_fn(&g, |x, z| C64::from_polar(1.0, p0 * z) * (PI * x).sin());
        let s = axial_fourier(&w);
        for (k, col) in s.values().axis_iter(Axis(1)).enumerate() {
            let m = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if k == k0 {
                assert!(m > 0.1);
            } else {
                assert!(m < 1e-12, "k={k}: {m}");
            }
        }
    }

    #[test]
    fn derivative_of_gaussian_is_spectrally_accurate() {
        let g = grid(9, 128, 8.0);
        let w = GridFunction::from_real_fn(&g, |_, z| (-z * z).exp());
        let d1 = axial_derivative(&w, 1);
        let d2 = axial_derivative(&w, 2);
        for (j, &z) in g.axial().nodes().iter().enumerate() {
            let e = (-z * z).exp();
            assert!((d1.values()[[3, j]].re + 2.0 * z * e).abs() < 1e-10);
            assert!((d2.values()[[3, j]].re - (4.0 * z * z - 2.0) * e).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_stencil_exact_on_quintics() {
        let g = grid(12, 8, 1.0);
        let w = GridFunction::from_real_fn(&g, |x, _| x.powi(5) - 2.0 * x.powi(3) + x);
        let d2 = cross_second_difference(w.values(), g.cross().spacing());
        // f'' = 20x³ - 12x: 0 at x = 0, 8 at x = 1.
        assert!(d2[[0, 0]].norm() < 1e-9);
        assert!((d2[[11, 0]].re - 8.0).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_laplacian_is_symmetric() {
        let g = grid(17, 32, 5.0);
        let bump = |x: f64, z: f64, c: f64| (x * (1.0 - x)) * (-(z - c) * (z - c)).exp();
        let u = GridFunction::from_fn(&g, |x, z| C64::new(bump(x, z, 0.3), x * bump(x, z, -0.2)));
        let w = GridFunction::from_fn(&g, |x, z| C64::new(x * x * bump(x, z, 1.0), bump(x, z, 0.0)));
        let a = u.inner(&dirichlet_laplacian(&w));
        let b = dirichlet_laplacian(&u).inner(&w);
        assert!((a - b).norm() < 1e-11 * a.norm());
    }
}
