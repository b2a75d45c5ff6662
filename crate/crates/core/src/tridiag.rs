//! Tridiagonal kernels: a factored Thomas solver for the fiber problems and a
//! Sturm-sequence bisection for the lowest eigenvalue of a symmetric
//! tridiagonal matrix.

use crate::{Error, Result, C64};

/// LU factorization (no pivoting) of a tridiagonal matrix with constant
/// sub-, main and super-diagonal, stored so that repeated solves against
/// different right-hand sides cost `O(m)`.
#[derive(Clone, Debug)]
pub struct TridiagonalFactor {
    sub: C64,
    /// Modified super-diagonal `c'_j`.
    upper: Vec<C64>,
    /// Reciprocal of the modified pivots.
    inv_pivot: Vec<C64>,
}

impl TridiagonalFactor {
    /// Factor the `m × m` Toeplitz tridiagonal matrix `tridiag(sub, diag, sup)`.
    pub fn toeplitz(m: usize, sub: C64, diag: C64, sup: C64) -> Result<Self> {
        if m == 0 {
            return Err(Error::LinearSolve("empty tridiagonal system".into()));
        }
        let mut upper = Vec::with_capacity(m);
        let mut inv_pivot = Vec::with_capacity(m);
        let mut prev_upper = C64::new(0.0, 0.0);
        for j in 0..m {
            let pivot = if j == 0 { diag } else { diag - sub * prev_upper };
            if !(pivot.norm() > f64::MIN_POSITIVE) || !pivot.is_finite() {
                return Err(Error::LinearSolve(format!(
                    "zero pivot at row {j} (diag = {diag}, off = {sub})"
                )));
            }
            let inv = pivot.inv();
            prev_upper = sup * inv;
            upper.push(prev_upper);
            inv_pivot.push(inv);
        }
        Ok(Self {
            sub,
            upper,
            inv_pivot,
        })
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// Overwrite `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [C64]) {
        let m = self.len();
        debug_assert_eq!(rhs.len(), m);
        rhs[0] *= self.inv_pivot[0];
        for j in 1..m {
            rhs[j] = (rhs[j] - self.sub * rhs[j - 1]) * self.inv_pivot[j];
        }
        for j in (0..m - 1).rev() {
            rhs[j] = rhs[j] - self.upper[j] * rhs[j + 1];
        }
    }
}

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal
/// matrix with diagonal `diag` and off-diagonal `off` (Sturm count).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for j in 0..diag.len() {
        let b2 = if j == 0 { 0.0 } else { off[j - 1] * off[j - 1] };
        d = diag[j] - x - if j == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = f64::EPSILON * (diag[j].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by bisection on the
/// Sturm count, converged to a few ulps of the Gershgorin interval width.
pub fn symmetric_tridiagonal_min_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    assert!(!diag.is_empty() && off.len() + 1 == diag.len());
    let radius = |j: usize| -> f64 {
        let left = if j > 0 { off[j - 1].abs() } else { 0.0 };
        let right = if j < off.len() { off[j].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..diag.len())
        .map(|j| diag[j] - radius(j))
        .fold(f64::INFINITY, f64::min);
    let mut hi = (0..diag.len())
        .map(|j| diag[j] + radius(j))
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_product() {
        let m = 9;
        let sub = C64::new(-1.0, 0.3);
        let diag = C64::new(4.0, -1.0);
        let sup = C64::new(-0.5, 0.2);
        let factor = TridiagonalFactor::toeplitz(m, sub, diag, sup).unwrap();
        let x: Vec<C64> = (0..m)
            .map(|j| C64::new((j as f64).sin(), (j as f64 * 0.7).cos()))
            .collect();
        let mut b = vec![C64::new(0.0, 0.0); m];
        for j in 0..m {
            b[j] = diag * x[j];
            if j > 0 {
                b[j] += sub * x[j - 1];
            }
            if j + 1 < m {
                b[j] += sup * x[j + 1];
            }
        }
        factor.solve_in_place(&mut b);
        for j in 0..m {
            assert!((b[j] - x[j]).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let z = C64::new(0.0, 0.0);
        assert!(TridiagonalFactor::toeplitz(3, z, z, z).is_err());
    }

    #[test]
    fn min_eigenvalue_of_second_difference() {
        // tridiag(-1, 2, -1) of size m has eigenvalues 4 sin²(kπ / (2(m+1))).
        for m in [1usize, 2, 7, 40] {
            let diag = vec![2.0; m];
            let off = vec![-1.0; m - 1];
            let lam = symmetric_tridiagonal_min_eigenvalue(&diag, &off);
            let exact = 4.0 * (std::f64::consts::PI / (2.0 * (m as f64 + 1.0))).sin().powi(2);
            assert!((lam - exact).abs() < 1e-13, "m={m}: {lam} vs {exact}");
        }
    }
}
