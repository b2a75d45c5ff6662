//! Admissible data: the background profile `(u_b, q_b)`, blended pairs
//! `(q₀, u₀) = χ·(q_b, u_b) + (1 - χ)·(q_i, u_i)`, and perturbations
//! `q - q₀` in the exponentially decaying class.
//!
//! `u_b` only decays algebraically in `x_n`, so it is never differentiated on
//! the periodic axial grid: every field below is split into the closed-form
//! profile plus a correction that decays fast enough for spectral stencils.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::geometry::{
    axial_derivative, cross_second_difference, japanese_bracket, laplacian, CylinderGrid, GridFunction,
};
use crate::{Error, Result, C64};

/// Tolerance for the boundary trace conditions on unit-scaled data.
pub const TRACE_TOLERANCE: f64 = 1e-8;

/// `u_b(y) = c ⟨y⟩^{-(1+ε)/2}` and `q_b = u_b'' / u_b` in closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackgroundProfile {
    eps: f64,
    c: f64,
}

impl BackgroundProfile {
    pub fn new(eps: f64, c: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param("eps", format!("must be positive, got {eps}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", format!("must be positive, got {c}")));
        }
        Ok(Self { eps, c })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn amplitude(&self) -> f64 {
        self.c
    }

    /// Exponent of `(1 + y²)` in `u_b`.
    fn beta(&self) -> f64 {
        (1.0 + self.eps) / 4.0
    }

    pub fn u(&self, y: f64) -> f64 {
        self.c * (1.0 + y * y).powf(-self.beta())
    }

    pub fn du(&self, y: f64) -> f64 {
        let b = self.beta();
        -2.0 * b * y * self.c * (1.0 + y * y).powf(-b - 1.0)
    }

    pub fn d2u(&self, y: f64) -> f64 {
        let b = self.beta();
        let s = 1.0 + y * y;
        self.c * (-2.0 * b * s.powf(-b - 1.0) + 4.0 * b * (b + 1.0) * y * y * s.powf(-b - 2.0))
    }

    pub fn d3u(&self, y: f64) -> f64 {
        let b = self.beta();
        let s = 1.0 + y * y;
        self.c
            * (12.0 * b * (b + 1.0) * y * s.powf(-b - 2.0)
                - 8.0 * b * (b + 1.0) * (b + 2.0) * y.powi(3) * s.powf(-b - 3.0))
    }

    /// `q_b(y) = α[(α+1)y² - 1] / (1+y²)²` with `α = (1+ε)/2`.
    pub fn q(&self, y: f64) -> f64 {
        let alpha = 0.5 * (1.0 + self.eps);
        alpha * ((alpha + 1.0) * y * y - 1.0) / (1.0 + y * y).powi(2)
    }

    /// Lower bound `c ⟨y⟩^{-(1+ε)/2}`; equals `u` for this profile.
    pub fn lower_bound(&self, y: f64) -> f64 {
        self.c * japanese_bracket(y).powf(-0.5 * (1.0 + self.eps))
    }

    /// `‖u_b‖_{H^k}` on `ω × [-L, L)` by the axial rectangle rule, `k ≤ 3`.
    pub fn sobolev_norm(&self, grid: &CylinderGrid, k: usize) -> f64 {
        let h = grid.axial().spacing();
        let sum: f64 = grid
            .axial()
            .nodes()
            .iter()
            .map(|&y| {
                let ds = [self.u(y), self.du(y), self.d2u(y), self.d3u(y)];
                ds.iter().take(k.min(3) + 1).map(|d| d * d).sum::<f64>()
            })
            .sum();
        (grid.cross().length() * h * sum).sqrt()
    }
}

/// Free function form: the closed-form pair `(u_b, q_b)`.
pub fn background_profile(eps: f64, c: f64) -> Result<BackgroundProfile> {
    BackgroundProfile::new(eps, c)
}

/// Smooth step, flat to all orders at both ends.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Cross-section cutoff: `χ = 1` within `collar` of `∂ω`, `χ = 0` beyond
/// `collar + transition`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub collar: f64,
    pub transition: f64,
}

impl Cutoff {
    pub fn eval(&self, dist_to_boundary: f64) -> f64 {
        1.0 - smoothstep((dist_to_boundary - self.collar) / self.transition)
    }
}

/// Interior data `(u_i, q_i)` of the blended pair.
#[derive(Clone, Debug)]
pub enum InteriorChoice {
    /// `u_i = u_b`, `q_i = q_b`: the pair is `x'`-independent.
    Background,
    /// `u_i = u_b + u_amp sin(πξ) e^{-x_n²/w²}`,
    /// `q_i = q_b + q_amp sin(πξ) e^{-x_n²/w²}`.
    Gaussian { u_amp: f64, q_amp: f64, width: f64 },
    /// Arbitrary grid data; `u_i - u_b` and `q_i - q_b` must decay at `±L`.
    Grid { u_i: GridFunction, q_i: GridFunction },
}

#[derive(Clone, Debug)]
pub struct FactoryParams {
    pub eps: f64,
    pub c: f64,
    pub cutoff: Cutoff,
    pub interior: InteriorChoice,
}

impl FactoryParams {
    pub fn background(eps: f64, c: f64, collar: f64, transition: f64) -> Self {
        Self {
            eps,
            c,
            cutoff: Cutoff { collar, transition },
            interior: InteriorChoice::Background,
        }
    }

    fn validate(&self) -> Result<()> {
        BackgroundProfile::new(self.eps, self.c)?;
        if !(self.cutoff.collar > 0.0) {
            return Err(Error::param("collar_width", "must be positive"));
        }
        if !(self.cutoff.transition > 0.0) {
            return Err(Error::param("transition_width", "must be positive"));
        }
        if let InteriorChoice::Gaussian { u_amp, width, .. } = self.interior {
            if !(u_amp >= 0.0) {
                return Err(Error::param("interior_u_amp", "must be nonnegative so that u_i >= u_b"));
            }
            if !(width > 0.0) {
                return Err(Error::param("interior_width", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Outcome of the admissibility checks of a built pair.
#[derive(Clone, Debug)]
pub struct AdmissibilityReport {
    /// `min u₀ / (υ₀ ⟨x_n⟩^{-(1+ε)/2})` over all nodes.
    pub lower_bound_ratio: f64,
    pub lower_bound_node: (usize, usize),
    /// Boundary sup of `(-Δ_h + q₀)² u₀` by nested stencil application,
    /// before the collar rows are set to their analytic zero.
    pub boundary_trace_nested: f64,
    /// Boundary sup of the same quantity as used by the solver.
    pub boundary_trace: f64,
    /// Sup of the stencil residual `(-Δ_h + q₀) u₀` over collar nodes whose
    /// stencil stays inside the collar.
    pub collar_residual: f64,
    pub collar_nodes: usize,
}

impl AdmissibilityReport {
    pub fn passes(&self) -> bool {
        self.lower_bound_ratio >= 1.0 - 1e-12
            && self.boundary_trace <= TRACE_TOLERANCE
            && self.boundary_trace_nested <= TRACE_TOLERANCE
    }
}

/// A pair `(q₀, u₀)` satisfying the lower bound and boundary trace
/// conditions, with the derived fields the direct solver needs.
#[derive(Clone, Debug)]
pub struct AdmissiblePair {
    grid: Arc<CylinderGrid>,
    profile: BackgroundProfile,
    cutoff: Cutoff,
    chi: Vec<f64>,
    q0: GridFunction,
    u0: GridFunction,
    correction: GridFunction,
    residual: GridFunction,
    residual2: GridFunction,
    report: AdmissibilityReport,
}

impl AdmissiblePair {
    pub fn grid(&self) -> &Arc<CylinderGrid> {
        &self.grid
    }

    pub fn profile(&self) -> &BackgroundProfile {
        &self.profile
    }

    pub fn eps(&self) -> f64 {
        self.profile.eps
    }

    /// Lower-bound constant `υ₀`, equal to `c`.
    pub fn upsilon0(&self) -> f64 {
        self.profile.c
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn cutoff_values(&self) -> &[f64] {
        &self.chi
    }

    pub fn q0(&self) -> &GridFunction {
        &self.q0
    }

    pub fn u0(&self) -> &GridFunction {
        &self.u0
    }

    /// `u₀ - u_b`, which decays fast in `x_n` and vanishes on the collar.
    pub fn correction(&self) -> &GridFunction {
        &self.correction
    }

    /// `(-Δ + q₀) u₀`.
    pub fn residual(&self) -> &GridFunction {
        &self.residual
    }

    /// `(-Δ + q₀)² u₀`.
    pub fn residual2(&self) -> &GridFunction {
        &self.residual2
    }

    pub fn report(&self) -> &AdmissibilityReport {
        &self.report
    }

    /// True when `(-Δ + q₀) u₀ ≡ 0` (stationary configuration).
    pub fn is_stationary(&self) -> bool {
        self.residual.sup_norm() == 0.0
    }

    /// Axial profile `u_b(x_n)` on the grid nodes.
    pub fn background_column(&self) -> Array1<f64> {
        self.grid.axial().nodes().iter().map(|&y| self.profile.u(y)).collect()
    }

    /// Writes `x_prime,x_n,q0,u0` rows.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x_prime", "x_n", "q0", "u0"])?;
        let xs = self.grid.cross().nodes();
        let zs = self.grid.axial().nodes();
        for ((i, j), q) in self.q0.values().indexed_iter() {
            w.write_record([
                format!("{:.17e}", xs[i]),
                format!("{:.17e}", zs[j]),
                format!("{:.17e}", q.re),
                format!("{:.17e}", self.u0.values()[[i, j]].re),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Builds `q₀ = χ q_b + (1-χ) q_i`, `u₀ = χ u_b + (1-χ) u_i` and certifies the
/// lower bound and boundary trace conditions.
pub fn build_pair(fp: &FactoryParams, grid: &Arc<CylinderGrid>) -> Result<AdmissiblePair> {
    fp.validate()?;
    let profile = BackgroundProfile::new(fp.eps, fp.c)?;
    let cross = grid.cross();
    let axial = grid.axial();
    let (nx, nn) = grid.shape();
    let xs = cross.nodes();
    let zs = axial.nodes();
    let chi: Vec<f64> = xs
        .iter()
        .map(|&x| fp.cutoff.eval((x - cross.a()).min(cross.b() - x)))
        .collect();
    // The one-sided boundary stencil reaches six rows in.
    let collar_rows = chi.iter().take_while(|&&c| c == 1.0).count();
    if collar_rows < 7 || chi.iter().rev().take_while(|&&c| c == 1.0).count() < 7 {
        return Err(Error::param(
            "collar_width",
            format!(
                "collar must contain at least 7 cross-section nodes per side (h = {:.3e})",
                cross.spacing()
            ),
        ));
    }

    let ub: Vec<f64> = zs.iter().map(|&y| profile.u(y)).collect();
    let qb: Vec<f64> = zs.iter().map(|&y| profile.q(y)).collect();

    // Interior corrections psi = u_i - u_b, sigma = q_i - q_b.
    let (psi, sigma): (Array2<f64>, Array2<f64>) = match &fp.interior {
        InteriorChoice::Background => (Array2::zeros((nx, nn)), Array2::zeros((nx, nn))),
        InteriorChoice::Gaussian { u_amp, q_amp, width } => {
            let shape = Array2::from_shape_fn((nx, nn), |(i, j)| {
                (PI * cross.unit_coordinate(i)).sin() * (-(zs[j] / width).powi(2)).exp()
            });
            (&shape * *u_amp, &shape * *q_amp)
        }
        InteriorChoice::Grid { u_i, q_i } => {
            if !(Arc::ptr_eq(u_i.grid(), grid) || **u_i.grid() == **grid) || !u_i.same_grid(q_i) {
                return Err(Error::GridMismatch("interior data on a different grid".into()));
            }
            let psi = Array2::from_shape_fn((nx, nn), |(i, j)| u_i.values()[[i, j]].re - ub[j]);
            let sigma = Array2::from_shape_fn((nx, nn), |(i, j)| q_i.values()[[i, j]].re - qb[j]);
            if let Some(((i, j), _)) = psi.indexed_iter().find(|(_, &v)| v < -1e-14 * fp.c) {
                return Err(Error::Admissibility {
                    i,
                    j,
                    reason: format!("u_i = {:.6e} < u_b = {:.6e}", u_i.values()[[i, j]].re, ub[j]),
                });
            }
            let scale = 1.0 + psi.iter().chain(sigma.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..nx {
                for j in [0, nn - 1] {
                    if psi[[i, j]].abs() > 1e-10 * scale || (sigma[[i, j]] * ub[j]).abs() > 1e-10 * scale {
                        return Err(Error::param(
                            "interior",
                            "u_i - u_b and (q_i - q_b) u_b must decay below 1e-10 at x_n = ±L",
                        ));
                    }
                }
            }
            (psi, sigma)
        }
    };

    let mut q0 = Array2::zeros((nx, nn));
    let mut u0 = Array2::zeros((nx, nn));
    let mut corr = Array2::zeros((nx, nn));
    for i in 0..nx {
        let c = chi[i];
        for j in 0..nn {
            let ui = ub[j] + psi[[i, j]];
            let qi = qb[j] + sigma[[i, j]];
            u0[[i, j]] = real(c * ub[j] + (1.0 - c) * ui);
            q0[[i, j]] = real(c * qb[j] + (1.0 - c) * qi);
            corr[[i, j]] = real((1.0 - c) * psi[[i, j]]);
        }
    }
    let q0 = GridFunction::from_values_unchecked(grid, q0);
    let u0 = GridFunction::from_values_unchecked(grid, u0);
    let correction = GridFunction::from_values_unchecked(grid, corr);

    // (-Δ + q₀)u₀ = (1-χ)σ u_b + (-Δ_h + q₀)[(1-χ)ψ]: the closed-form part
    // -u_b'' + q_b u_b vanishes identically.
    let mut residual = &q0.pointwise(&correction) - &laplacian(&correction);
    for i in 0..nx {
        for j in 0..nn {
            residual.values_mut()[[i, j]] += real((1.0 - chi[i]) * sigma[[i, j]] * ub[j]);
        }
    }
    let mut residual2 = &q0.pointwise(&residual) - &laplacian(&residual);
    let nested_trace = residual2.boundary_sup();
    // On the collar both vanish analytically.
    for i in 0..nx {
        if chi[i] == 1.0 {
            residual.values_mut().row_mut(i).fill(real(0.0));
            residual2.values_mut().row_mut(i).fill(real(0.0));
        }
    }

    // Stencil evaluation on the values of u₀, only u_b'' in closed form.
    let nested1 = stencil_residual(&profile, &q0, &u0, &correction);

    let mut lb_ratio = f64::INFINITY;
    let mut lb_node = (0, 0);
    for ((i, j), u) in u0.values().indexed_iter() {
        let r = u.re / profile.lower_bound(zs[j]);
        if r < lb_ratio {
            lb_ratio = r;
            lb_node = (i, j);
        }
    }
    if lb_ratio < 1.0 - 1e-12 {
        return Err(Error::Admissibility {
            i: lb_node.0,
            j: lb_node.1,
            reason: format!("u₀ / (υ₀⟨x_n⟩^(-(1+ε)/2)) = {lb_ratio:.6e} < 1"),
        });
    }

    // Collar nodes whose centered stencil stays in the collar.
    let inner_collar: Vec<usize> = (0..nx)
        .filter(|&i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(nx - 1);
            (lo..=hi).all(|k| chi[k] == 1.0)
        })
        .collect();
    let collar_residual = inner_collar
        .iter()
        .flat_map(|&i| nested1.values().row(i).to_vec())
        .map(|z| z.norm())
        .fold(0.0, f64::max);

    let report = AdmissibilityReport {
        lower_bound_ratio: lb_ratio,
        lower_bound_node: lb_node,
        boundary_trace_nested: nested_trace,
        boundary_trace: residual2.boundary_sup(),
        collar_residual,
        collar_nodes: inner_collar.len() * nn,
    };
    if report.boundary_trace > TRACE_TOLERANCE || report.boundary_trace_nested > TRACE_TOLERANCE {
        return Err(Error::Admissibility {
            i: 0,
            j: 0,
            reason: format!(
                "(-Δ+q₀)²u₀ on ∂Ω = {:.3e} / {:.3e} exceeds {TRACE_TOLERANCE:e}",
                report.boundary_trace, report.boundary_trace_nested
            ),
        });
    }
    Ok(AdmissiblePair {
        grid: Arc::clone(grid),
        profile,
        cutoff: fp.cutoff,
        chi,
        q0,
        u0,
        correction,
        residual,
        residual2,
        report,
    })
}

/// `(-Δ_h + q₀) u₀` with the `x'` stencil applied to the grid values of `u₀`
/// and the axial second derivative split into `u_b''` (closed form) plus the
/// spectral derivative of the decaying correction.
fn stencil_residual(
    profile: &BackgroundProfile,
    q0: &GridFunction,
    u0: &GridFunction,
    correction: &GridFunction,
) -> GridFunction {
    let grid = u0.grid();
    let zs = grid.axial().nodes();
    let mut lap = cross_second_difference(u0.values(), grid.cross().spacing());
    lap += axial_derivative(correction, 2).values();
    for mut row in lap.rows_mut() {
        for (j, z) in row.iter_mut().enumerate() {
            *z += profile.d2u(zs[j]);
        }
    }
    let lap = GridFunction::from_values_unchecked(grid, lap);
    &q0.pointwise(u0) - &lap
}

/// Cross-section and axial shape of `q - q₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationShape {
    /// `s(x') = sin^p(πξ)`; `p ≥ 2` so that `s` and `s'` vanish on `∂ω`.
    pub cross_power: u32,
    /// Optional axial modulation `cos(k x_n)`.
    pub axial_frequency: f64,
}

impl Default for PerturbationShape {
    fn default() -> Self {
        Self {
            cross_power: 2,
            axial_frequency: 0.0,
        }
    }
}

/// Decay class `|q - q₀| ≤ a e^{-b⟨x_n⟩^d}` with `d > 2(1+ε)/3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationParams {
    a: f64,
    b: f64,
    d: f64,
    eps: f64,
    shape: PerturbationShape,
}

impl PerturbationParams {
    pub fn new(a: f64, b: f64, d: f64, eps: f64, shape: PerturbationShape) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::param("a", format!("must be positive, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::param("b", format!("must be positive, got {b}")));
        }
        if !(eps > 0.0) {
            return Err(Error::param("eps", format!("must be positive, got {eps}")));
        }
        let d_min = 2.0 * (1.0 + eps) / 3.0;
        if !(d > d_min && d.is_finite()) {
            return Err(Error::param("d", format!("need d > 2(1+ε)/3 = {d_min:.6}, got {d}")));
        }
        if shape.cross_power < 2 {
            return Err(Error::param("cross_power", "must be at least 2"));
        }
        Ok(Self { a, b, d, eps, shape })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn shape(&self) -> PerturbationShape {
        self.shape
    }

    /// `ln(a e^{-b⟨y⟩^d})`.
    fn log_envelope(&self, y: f64) -> f64 {
        self.a.ln() - self.b * japanese_bracket(y).powf(self.d)
    }
}

/// `ρ₀ = amplitude · sin^p(πξ) cos(k x_n) e^{-b⟨x_n⟩^d}`.
pub fn make_perturbation(pp: &PerturbationParams, grid: &Arc<CylinderGrid>, amplitude: f64) -> Result<GridFunction> {
    if !(amplitude >= 0.0 && amplitude <= pp.a) {
        return Err(Error::param(
            "amplitude",
            format!("envelope violated: amplitude {amplitude} outside [0, a = {}]", pp.a),
        ));
    }
    let cross = grid.cross();
    let nx = cross.len();
    let zs = grid.axial().nodes();
    let shape = pp.shape;
    let values = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        if i == 0 || i == nx - 1 {
            return real(0.0);
        }
        let s = (PI * cross.unit_coordinate(i)).sin().powi(shape.cross_power as i32);
        let z = zs[j];
        real(amplitude * s * (shape.axial_frequency * z).cos() * (-pp.b * japanese_bracket(z).powf(pp.d)).exp())
    });
    let rho = GridFunction::from_values_unchecked(grid, values);
    let zero = GridFunction::zeros(grid);
    let report = check_decay_class(&(&zero + &rho), &zero, pp)?;
    if !report.pass {
        return Err(Error::Admissibility {
            i: report.worst_node.0,
            j: report.worst_node.1,
            reason: "decay envelope violated after scaling".into(),
        });
    }
    Ok(rho)
}

/// Outcome of [`check_decay_class`].
#[derive(Clone, Debug)]
pub struct DecayReport {
    pub pass: bool,
    /// `a - max |q - q₀| e^{b⟨x_n⟩^d}`.
    pub envelope_slack: f64,
    pub worst_node: (usize, usize),
    /// Sup of `|q - q₀|` on the boundary rows (`q = q₀` on `∂Ω`).
    pub boundary_trace: f64,
    /// Max over nodes of stencil derivatives of `q` up to total order 3, a
    /// surrogate for the `W^{4,∞}` bound.
    pub w_surrogate: f64,
}

/// Nodewise check of the decay class and the boundary matching of `q` and
/// `q₀`, plus the derivative surrogate of `q`.
pub fn check_decay_class(q: &GridFunction, q0: &GridFunction, pp: &PerturbationParams) -> Result<DecayReport> {
    q.ensure_same_grid(q0)?;
    let zs = q.grid().axial().nodes();
    let rho = q - q0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_node = (0, 0);
    for ((i, j), z) in rho.values().indexed_iter() {
        // Discount the rounding floor of the subtraction q - q₀.
        let floor = 4.0 * f64::EPSILON * (q.values()[[i, j]].norm() + q0.values()[[i, j]].norm());
        let m = (z.norm() - floor).max(0.0);
        let scaled_log = if m == 0.0 { f64::NEG_INFINITY } else { m.ln() - pp.log_envelope(zs[j]) };
        if scaled_log > worst {
            worst = scaled_log;
            worst_node = (i, j);
        }
    }
    // worst = ln(|ρ| / envelope) at the worst node; slack = a (1 - e^worst).
    let ratio = worst.exp();
    let envelope_slack = pp.a * (1.0 - ratio);
    let boundary_trace = rho.boundary_sup();
    let pass = ratio <= 1.0 + 1e-12 && boundary_trace <= TRACE_TOLERANCE && q.max_imag() == 0.0;
    Ok(DecayReport {
        pass,
        envelope_slack,
        worst_node,
        boundary_trace,
        w_surrogate: derivative_surrogate(q),
    })
}

fn derivative_surrogate(q: &GridFunction) -> f64 {
    let grid = q.grid();
    let hx = grid.cross().spacing();
    let hn = grid.axial().spacing();
    let base: Array2<f64> = q.values().mapv(|z| z.re);
    let mut best = 0.0f64;
    for ax in 0..=3usize {
        let mut cur = base.clone();
        for _ in 0..ax {
            let n = cur.nrows();
            cur = (&cur.slice(ndarray::s![1..n, ..]) - &cur.slice(ndarray::s![0..n - 1, ..])) / hx;
        }
        for an in 0..=(3 - ax) {
            if an > 0 {
                let m = cur.ncols();
                cur = (&cur.slice(ndarray::s![.., 1..m]) - &cur.slice(ndarray::s![.., 0..m - 1])) / hn;
            }
            best = best.max(cur.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, nn: usize, l: f64) -> Arc<CylinderGrid> {
        Arc::new(CylinderGrid::build(0.0, 1.0, nx, l, nn, 1.0, 16).unwrap())
    }

    /// Symbolic-differentiation oracle for `c⟨y⟩^{-1}` (ε = 1):
    /// `u'' / u = (2y² - 1) / (1 + y²)²`.
    fn oracle_qb_eps1(y: f64) -> f64 {
        (2.0 * y * y - 1.0) / (1.0 + y * y).powi(2)
    }

    #[test]
    fn background_potential_values() {
        let p = background_profile(1.0, 1.0).unwrap();
        assert!((p.q(0.0) - oracle_qb_eps1(0.0)).abs() < 1e-15);
        assert!((p.q(0.0) + 1.0).abs() < 1e-15);
        assert!((p.q(1.0) - 0.25).abs() < 1e-15);
        for y in [-3.0, -0.4, 0.7, 5.0] {
            assert!((p.q(y) - oracle_qb_eps1(y)).abs() < 1e-15);
        }
    }

    #[test]
    fn background_derivatives_match_finite_differences() {
        let p = background_profile(0.6, 1.7).unwrap();
        let h = 1e-4;
        for y in [-2.0, -0.3, 0.0, 0.9, 4.0] {
            let fd1 = (p.u(y + h) - p.u(y - h)) / (2.0 * h);
            let fd2 = (p.du(y + h) - p.du(y - h)) / (2.0 * h);
            let fd3 = (p.d2u(y + h) - p.d2u(y - h)) / (2.0 * h);
            assert!((fd1 - p.du(y)).abs() < 1e-7);
            assert!((fd2 - p.d2u(y)).abs() < 1e-7);
            assert!((fd3 - p.d3u(y)).abs() < 1e-7);
            assert!((-p.d2u(y) + p.q(y) * p.u(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_profile_parameters() {
        assert!(background_profile(0.0, 1.0).is_err());
        assert!(background_profile(1.0, -1.0).is_err());
    }

    #[test]
    fn background_pair_is_stationary() {
        let g = grid(64, 128, 12.0);
        let pair = build_pair(&FactoryParams::background(1.0, 1.0, 0.1, 0.3), &g).unwrap();
        assert!(pair.is_stationary());
        assert_eq!(pair.residual2().sup_norm(), 0.0);
        assert!(pair.report().collar_residual < 1e-9, "{}", pair.report().collar_residual);
        assert!(pair.report().lower_bound_ratio >= 1.0 - 1e-14);
    }

    #[test]
    fn gaussian_interior_pair_is_admissible() {
        let g = grid(64, 128, 12.0);
        let fp = FactoryParams {
            interior: InteriorChoice::Gaussian {
                u_amp: 0.5,
                q_amp: 0.3,
                width: 1.5,
            },
            ..FactoryParams::background(1.0, 2.0, 0.1, 0.3)
        };
        let pair = build_pair(&fp, &g).unwrap();
        assert!(!pair.is_stationary());
        assert!(pair.report().passes());
        assert!(pair.report().boundary_trace_nested < 1e-8);
        for ((_, j), u) in pair.u0().values().indexed_iter() {
            let y = g.axial().nodes()[j];
            assert!(u.re >= 2.0 * japanese_bracket(y).powf(-1.0) * (1.0 - 1e-14));
        }
    }

    #[test]
    fn interior_below_background_is_rejected_with_node() {
        let g = grid(32, 32, 8.0);
        let p = background_profile(1.0, 1.0).unwrap();
        let u_i = GridFunction::from_real_fn(&g, |x, z| {
            p.u(z) - if (x - 0.5).abs() < 0.05 && z.abs() < 0.3 { 0.1 } else { 0.0 }
        });
        let q_i = GridFunction::from_real_fn(&g, |_, z| p.q(z));
        let fp = FactoryParams {
            interior: InteriorChoice::Grid { u_i, q_i },
            ..FactoryParams::background(1.0, 1.0, 0.2, 0.1)
        };
        match build_pair(&fp, &g) {
            Err(Error::Admissibility { i, .. }) => assert!((g.cross().nodes()[i] - 0.5).abs() < 0.06),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn narrow_collar_is_rejected() {
        let g = grid(32, 32, 8.0);
        assert!(build_pair(&FactoryParams::background(1.0, 1.0, 0.05, 0.1), &g).is_err());
    }

    #[test]
    fn perturbation_respects_envelope() {
        let g = grid(33, 128, 10.0);
        let pp = PerturbationParams::new(1.0, 1.0, 2.0, 1.0, PerturbationShape::default()).unwrap();
        let rho = make_perturbation(&pp, &g, 0.3).unwrap();
        let zs = g.axial().nodes();
        for ((_, j), z) in rho.values().indexed_iter() {
            let env = (pp.b() * japanese_bracket(zs[j]).powf(pp.d())).exp();
            assert!(z.norm() * env <= 0.3 * (1.0 + 1e-12));
        }
        assert_eq!(rho.boundary_sup(), 0.0);
        // s' vanishes too: first differences at the boundary are O(h²).
        let h = g.cross().spacing();
        let d = (rho.values()[[1, 64]] - rho.values()[[0, 64]]).norm() / h;
        assert!(d < 20.0 * h);
        let zero = make_perturbation(&pp, &g, 0.0).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        assert!(make_perturbation(&pp, &g, 1.5).is_err());
    }

    #[test]
    fn decay_exponent_lower_bound_enforced() {
        // 2(1+ε)/3 = 4/3 for ε = 1.
        assert!(PerturbationParams::new(1.0, 1.0, 1.3, 1.0, PerturbationShape::default()).is_err());
        assert!(PerturbationParams::new(1.0, 1.0, 1.34, 1.0, PerturbationShape::default()).is_ok());
    }

    #[test]
    fn decay_class_reports() {
        let g = grid(33, 128, 10.0);
        let pp = PerturbationParams::new(0.5, 1.0, 2.0, 1.0, PerturbationShape::default()).unwrap();
        let q0 = GridFunction::from_real_fn(&g, |_, z| 1.0 / (1.0 + z * z));
        let same = check_decay_class(&q0, &q0, &pp).unwrap();
        assert!(same.pass);
        assert_eq!(same.envelope_slack, 0.5);

        let rho = make_perturbation(&pp, &g, 0.5).unwrap();
        assert!(check_decay_class(&(&q0 + &rho), &q0, &pp).unwrap().pass);

        let tail = GridFunction::from_real_fn(&g, |x, z| 0.1 * (PI * x).sin().powi(2) / (1.0 + z * z));
        let bad = check_decay_class(&(&q0 + &tail), &q0, &pp).unwrap();
        assert!(!bad.pass);
        // The polynomial tail beats the envelope first at the ends of the axis.
        let y = g.axial().nodes()[bad.worst_node.1];
        assert!(y.abs() > 5.0);
    }
}
