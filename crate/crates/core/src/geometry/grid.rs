use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::tridiag::symmetric_tridiagonal_min_eigenvalue;
use crate::{Error, Result};

/// One endpoint of the interval cross-section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    /// `x' = a`, outward normal `-1`.
    Left,
    /// `x' = b`, outward normal `+1`.
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    /// Outward unit normal of `ω` at this endpoint.
    pub fn normal(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// A subset `γ*` of the two endpoints of `ω`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subboundary {
    sides: Vec<Side>,
}

impl Subboundary {
    pub fn new(sides: impl IntoIterator<Item = Side>) -> Self {
        let mut sides: Vec<Side> = sides.into_iter().collect();
        sides.sort();
        sides.dedup();
        Self { sides }
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn contains(&self, side: Side) -> bool {
        self.sides.contains(&side)
    }

    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }

    /// Endpoints of `∂ω` outside this subboundary.
    pub fn complement(&self) -> Vec<Side> {
        Side::BOTH
            .into_iter()
            .filter(|s| !self.contains(*s))
            .collect()
    }
}

/// Uniform discretization of the interval `ω = (a, b)`, boundary nodes
/// included: `x'_i = a + i h`, `i = 0..n`, `h = (b - a) / (n - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSection {
    a: f64,
    b: f64,
    h: f64,
    nodes: Vec<f64>,
}

impl CrossSection {
    pub const MIN_NODES: usize = 8;

    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::param("cross_section", format!("need a < b, got ({a}, {b})")));
        }
        if n < Self::MIN_NODES {
            return Err(Error::param(
                "n_cross",
                format!("mesh too coarse: {n} nodes, at least {} required", Self::MIN_NODES),
            ));
        }
        let h = (b - a) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        nodes[n - 1] = b;
        Ok(Self { a, b, h, nodes })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of interior (unknown) nodes of a Dirichlet problem.
    pub fn interior_len(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn endpoint(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.a,
            Side::Right => self.b,
        }
    }

    pub fn boundary_index(&self, side: Side) -> usize {
        match side {
            Side::Left => 0,
            Side::Right => self.nodes.len() - 1,
        }
    }

    /// Normalized coordinate `(x' - a) / (b - a)` of node `i`.
    pub fn unit_coordinate(&self, i: usize) -> f64 {
        if i + 1 == self.nodes.len() {
            1.0
        } else {
            i as f64 / (self.nodes.len() - 1) as f64
        }
    }

    /// Trapezoid weights of the nodes.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * self.h } else { self.h })
            .collect()
    }

    /// Discrete Poincaré constant `c₀(ω)`: the smallest eigenvalue of the
    /// second-difference Dirichlet Laplacian on the interior nodes.
    pub fn poincare_constant(&self) -> f64 {
        let m = self.interior_len();
        let inv_h2 = 1.0 / (self.h * self.h);
        let diag = vec![2.0 * inv_h2; m];
        let off = vec![-inv_h2; m - 1];
        symmetric_tridiagonal_min_eigenvalue(&diag, &off)
    }
}

/// Free function form of [`CrossSection::poincare_constant`].
pub fn poincare_constant(cs: &CrossSection) -> f64 {
    cs.poincare_constant()
}

/// Periodic uniform grid on the truncated axis `[-L, L)` together with its
/// exact discrete Fourier dual.
#[derive(Clone)]
pub struct AxialGrid {
    half_length: f64,
    h: f64,
    nodes: Vec<f64>,
    freqs: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for AxialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AxialGrid")
            .field("half_length", &self.half_length)
            .field("n", &self.nodes.len())
            .finish()
    }
}

impl PartialEq for AxialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.half_length == other.half_length && self.nodes.len() == other.nodes.len()
    }
}

impl AxialGrid {
    pub const MIN_NODES: usize = 8;

    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::param("half_length", format!("must be positive, got {half_length}")));
        }
        if n < Self::MIN_NODES || n % 2 != 0 {
            return Err(Error::param(
                "n_axial",
                format!("need an even node count >= {}, got {n}", Self::MIN_NODES),
            ));
        }
        let h = 2.0 * half_length / n as f64;
        let nodes = (0..n).map(|j| -half_length + j as f64 * h).collect();
        let dp = PI / half_length;
        let freqs = (0..n)
            .map(|k| {
                let k = k as i64;
                let kk = if k <= n as i64 / 2 { k } else { k - n as i64 };
                kk as f64 * dp
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            half_length,
            h,
            nodes,
            freqs,
            forward,
            inverse,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Angular frequencies `p_k = k π / L`, `k` wrapped into `(-n/2, n/2]`.
    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    /// Index of the Nyquist frequency, which odd derivatives annihilate.
    pub fn nyquist_index(&self) -> usize {
        self.nodes.len() / 2
    }

    pub(crate) fn forward_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.forward
    }

    pub(crate) fn inverse_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.inverse
    }
}

/// `⟨y⟩ = (1 + y²)^{1/2}`.
pub fn japanese_bracket(y: f64) -> f64 {
    (1.0 + y * y).sqrt()
}

/// Tensor grid of the truncated cylinder `ω × [-L, L)` plus the time
/// discretization `t_m = m T / N_t` of `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderGrid {
    cross: CrossSection,
    axial: AxialGrid,
    horizon: f64,
    n_steps: usize,
}

impl CylinderGrid {
    pub fn new(cross: CrossSection, axial: AxialGrid, horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", format!("T must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::param("n_steps", "need at least one time step"));
        }
        Ok(Self {
            cross,
            axial,
            horizon,
            n_steps,
        })
    }

    /// Convenience constructor from raw parameters.
    pub fn build(
        a: f64,
        b: f64,
        n_cross: usize,
        half_length: f64,
        n_axial: usize,
        horizon: f64,
        n_steps: usize,
    ) -> Result<Self> {
        Self::new(
            CrossSection::new(a, b, n_cross)?,
            AxialGrid::new(half_length, n_axial)?,
            horizon,
            n_steps,
        )
    }

    pub fn cross(&self) -> &CrossSection {
        &self.cross
    }

    pub fn axial(&self) -> &AxialGrid {
        &self.axial
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn time_step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.time_step();
        (0..=self.n_steps).map(|m| m as f64 * dt).collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.cross.len(), self.axial.len())
    }

    /// Same spatial grid with a different time discretization.
    pub fn with_time(&self, horizon: f64, n_steps: usize) -> Result<Self> {
        Self::new(self.cross.clone(), self.axial.clone(), horizon, n_steps)
    }

    /// Checks that the decay envelope `e^{-b ⟨L⟩^d}` at the truncation
    /// point is below `tol`.
    pub fn check_truncation(&self, b: f64, d: f64, tol: f64) -> Result<()> {
        let envelope = (-b * japanese_bracket(self.axial.half_length).powf(d)).exp();
        if envelope < tol {
            Ok(())
        } else {
            Err(Error::param(
                "half_length",
                format!(
                    "envelope e^(-b<L>^d) = {envelope:.3e} at L = {} exceeds the truncation tolerance {tol:.1e}",
                    self.axial.half_length
                ),
            ))
        }
    }

    /// Smallest half-length meeting the truncation rule for `(b, d, tol)`.
    pub fn minimal_half_length(b: f64, d: f64, tol: f64) -> f64 {
        let bracket = (-tol.ln() / b).powf(1.0 / d);
        (bracket * bracket - 1.0).max(0.0).sqrt()
    }
}
