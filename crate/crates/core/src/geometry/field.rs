use std::io::Write;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use ndarray::{Array1, Array2, Zip};

use super::{CylinderGrid, Side};
use crate::{Error, Result, C64};

/// Complex field sampled on every node of a [`CylinderGrid`]; rows index the
/// cross-section node `x'_i`, columns the axial node `x_{n,j}`.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<CylinderGrid>,
    values: Array2<C64>,
}

impl GridFunction {
    pub fn zeros(grid: &Arc<CylinderGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn from_values(grid: &Arc<CylinderGrid>, values: Array2<C64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "values of shape {:?} on a grid of shape {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::param("values", "non-finite entry"));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<CylinderGrid>, values: Array2<C64>) -> Self {
        debug_assert_eq!(values.dim(), grid.shape());
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_fn(grid: &Arc<CylinderGrid>, mut f: impl FnMut(f64, f64) -> C64) -> Self {
        let xs = grid.cross().nodes();
        let zs = grid.axial().nodes();
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(xs[i], zs[j]));
        Self::from_values_unchecked(grid, values)
    }

    pub fn from_real_fn(grid: &Arc<CylinderGrid>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, |x, z| C64::new(f(x, z), 0.0))
    }

    pub fn grid(&self) -> &Arc<CylinderGrid> {
        &self.grid
    }

    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<C64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<C64> {
        self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid.shape(),
                other.grid.shape()
            )))
        }
    }

    /// Discrete `L²(Ω)` inner product `Σ w_i h_n conj(u) v` (trapezoid in x').
    pub fn inner(&self, other: &GridFunction) -> C64 {
        let wx = self.grid.cross().quadrature_weights();
        let hn = self.grid.axial().spacing();
        let mut acc = C64::new(0.0, 0.0);
        for (i, (ra, rb)) in self.values.outer_iter().zip(other.values.outer_iter()).enumerate() {
            let row: C64 = ra.iter().zip(rb.iter()).map(|(a, b)| a.conj() * b).sum();
            acc += row * wx[i];
        }
        acc * hn
    }

    /// Discrete `L²(Ω)` norm.
    pub fn l2_norm(&self) -> f64 {
        let wx = self.grid.cross().quadrature_weights();
        let hn = self.grid.axial().spacing();
        let mut acc = 0.0;
        for (i, row) in self.values.outer_iter().enumerate() {
            acc += wx[i] * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        (acc * hn).sqrt()
    }

    /// Maximum modulus over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part in modulus, zero for real-valued fields.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        Self::from_values_unchecked(&self.grid, self.values.mapv(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_values_unchecked(&self.grid, self.values.mapv(|z| z * s))
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &GridFunction) {
        Zip::from(&mut self.values)
            .and(&other.values)
            .for_each(|a, &b| *a += s * b);
    }

    /// Pointwise product.
    pub fn pointwise(&self, other: &GridFunction) -> Self {
        Self::from_values_unchecked(&self.grid, &self.values * &other.values)
    }

    /// Values on the boundary fiber `{x' = endpoint(side)} × [-L, L)`.
    pub fn boundary_trace(&self, side: Side) -> Array1<C64> {
        let i = self.grid.cross().boundary_index(side);
        self.values.row(i).to_owned()
    }

    /// Sets both boundary rows to zero.
    pub fn zero_boundary(&mut self) {
        let n = self.values.nrows();
        self.values.row_mut(0).fill(C64::new(0.0, 0.0));
        self.values.row_mut(n - 1).fill(C64::new(0.0, 0.0));
    }

    /// Largest modulus on the two boundary rows.
    pub fn boundary_sup(&self) -> f64 {
        let n = self.values.nrows();
        self.values
            .row(0)
            .iter()
            .chain(self.values.row(n - 1).iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Writes `x_prime,x_n,re,im` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x_prime", "x_n", "re", "im"])?;
        let xs = self.grid.cross().nodes();
        let zs = self.grid.axial().nodes();
        for ((i, j), z) in self.values.indexed_iter() {
            w.write_record([
                format!("{:.17e}", xs[i]),
                format!("{:.17e}", zs[j]),
                format!("{:.17e}", z.re),
                format!("{:.17e}", z.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl<'a> Add<&'a GridFunction> for &'a GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &'a GridFunction) -> GridFunction {
        GridFunction::from_values_unchecked(&self.grid, &self.values + &rhs.values)
    }
}

impl<'a> Sub<&'a GridFunction> for &'a GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &'a GridFunction) -> GridFunction {
        GridFunction::from_values_unchecked(&self.grid, &self.values - &rhs.values)
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: f64) -> GridFunction {
        GridFunction::from_values_unchecked(&self.grid, self.values.mapv(|z| z * rhs))
    }
}

impl Mul<C64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: C64) -> GridFunction {
        self.scale(rhs)
    }
}
