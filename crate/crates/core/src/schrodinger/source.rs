use crate::admissible::AdmissiblePair;
use crate::{GridFunction, Result, C64};

/// `F(t) = constant + t · slope`, exact in time.
#[derive(Clone, Debug)]
pub struct TimeAffine {
    pub constant: GridFunction,
    pub slope: GridFunction,
}

impl TimeAffine {
    pub fn eval(&self, t: f64) -> GridFunction {
        let mut out = self.constant.clone();
        out.axpy(C64::new(t, 0.0), &self.slope);
        out
    }

    /// `dF/dt`.
    pub fn derivative(&self) -> &GridFunction {
        &self.slope
    }

    pub fn is_constant(&self) -> bool {
        self.slope.sup_norm() == 0.0
    }
}

/// Lifting `G₀(t) = u₀ + i t (Δ - q₀) u₀` of the boundary data; its trace on
/// the boundary rows is `g`.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub lift: TimeAffine,
}

impl BoundaryData {
    pub fn new(pair: &AdmissiblePair) -> Self {
        Self {
            lift: TimeAffine {
                constant: pair.u0().clone(),
                slope: pair.residual().scale(C64::new(0.0, -1.0)),
            },
        }
    }

    /// `g(t, ·)` on both boundary rows, stacked as `[left; right]`.
    pub fn trace(&self, t: f64) -> [ndarray::Array1<C64>; 2] {
        let g = self.lift.eval(t);
        [g.boundary_trace(crate::Side::Left), g.boundary_trace(crate::Side::Right)]
    }
}

/// Source `f = iG₀' + (Δ - q)G₀` of the homogenized problem, assembled from
/// parts: with `ρ = q - q₀`, `r = (-Δ+q₀)u₀`, `r₂ = (-Δ+q₀)²u₀`,
/// `f(t) = -ρu₀ + i t (ρ r + r₂)`.
pub fn build_source(q: &GridFunction, pair: &AdmissiblePair) -> Result<TimeAffine> {
    q.ensure_same_grid(pair.q0())?;
    let rho = q - pair.q0();
    let constant = rho.pointwise(pair.u0()).scale(C64::new(-1.0, 0.0));
    let mut slope = rho.pointwise(pair.residual());
    slope.axpy(C64::new(1.0, 0.0), pair.residual2());
    let slope = slope.scale(C64::new(0.0, 1.0));
    Ok(TimeAffine { constant, slope })
}
