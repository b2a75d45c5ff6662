use std::fmt::Debug;
use std::sync::Arc;

use crate::{CrossSection, Error, Result, Side, Subboundary};

/// Largest exponent `2λK` accepted, to keep `e^{2λK}` representable with
/// room for the time factor.
pub const MAX_EXPONENT: f64 = 700.0;

/// A cross-section weight `β̃: ω̄ → ℝ₊` with its first two derivatives.
pub trait CrossWeight: Debug + Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn gradient(&self, x: f64) -> f64;
    fn hessian(&self, x: f64) -> f64;
}

/// `β̃(x') = (x' - x₀')²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticWeight {
    pub x0: f64,
}

impl CrossWeight for QuadraticWeight {
    fn value(&self, x: f64) -> f64 {
        (x - self.x0).powi(2)
    }

    fn gradient(&self, x: f64) -> f64 {
        2.0 * (x - self.x0)
    }

    fn hessian(&self, _x: f64) -> f64 {
        2.0
    }
}

/// `β̃(x') = slope · x' + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineWeight {
    pub slope: f64,
    pub offset: f64,
}

impl CrossWeight for AffineWeight {
    fn value(&self, x: f64) -> f64 {
        self.slope * x + self.offset
    }

    fn gradient(&self, _x: f64) -> f64 {
        self.slope
    }

    fn hessian(&self, _x: f64) -> f64 {
        0.0
    }
}

/// Quadratic weight centred at `x₀' ∉ ω̄` with the sign-rule subboundary
/// `γ* = {x' ∈ ∂ω : (x' - x₀')·ν ≥ 0}`.
pub fn quadratic_candidate(x0: f64, cross: &CrossSection) -> Result<(QuadraticWeight, Subboundary)> {
    if !x0.is_finite() || (x0 >= cross.a() && x0 <= cross.b()) {
        return Err(Error::Candidate(format!(
            "x0' = {x0} lies in the closed cross-section [{}, {}]",
            cross.a(),
            cross.b()
        )));
    }
    let gamma = Subboundary::new(
        Side::BOTH
            .into_iter()
            .filter(|&s| (cross.endpoint(s) - x0) * s.normal() >= 0.0),
    );
    Ok((QuadraticWeight { x0 }, gamma))
}

/// `‖β̃‖_∞` over `ω̄`, sampled on the nodes and a fine uniform grid.
fn sup_abs(beta: &dyn CrossWeight, cross: &CrossSection) -> f64 {
    let fine = 4096;
    let sampled = (0..=fine).map(|k| cross.a() + cross.length() * k as f64 / fine as f64);
    cross
        .nodes()
        .iter()
        .copied()
        .chain(sampled)
        .map(|x| beta.value(x).abs())
        .fold(0.0, f64::max)
}

/// `β = β̃ + K`, `K = r‖β̃‖_∞`, and the weights
/// `φ = e^{λβ} / ((T+t)(T-t))`, `η = (e^{2λK} - e^{λβ}) / ((T+t)(T-t))`.
#[derive(Clone, Debug)]
pub struct WeightSpec {
    beta: Arc<dyn CrossWeight>,
    r: f64,
    lambda: f64,
    horizon: f64,
    k: f64,
}

impl WeightSpec {
    pub fn new(beta: Arc<dyn CrossWeight>, cross: &CrossSection, r: f64, lambda: f64, horizon: f64) -> Result<Self> {
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::param("r", format!("must exceed 1, got {r}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", format!("T must be positive, got {horizon}")));
        }
        let sup = sup_abs(beta.as_ref(), cross);
        if !(sup > 0.0) {
            return Err(Error::param("beta", "weight vanishes identically"));
        }
        let k = r * sup;
        if 2.0 * lambda * k > MAX_EXPONENT {
            return Err(Error::param(
                "lambda",
                format!("2λK = {:.1} exceeds {MAX_EXPONENT}; e^(2λK) would overflow", 2.0 * lambda * k),
            ));
        }
        Ok(Self {
            beta,
            r,
            lambda,
            horizon,
            k,
        })
    }

    pub fn beta_tilde(&self) -> &dyn CrossWeight {
        self.beta.as_ref()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `K = r‖β̃‖_∞`.
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn beta(&self, x: f64) -> f64 {
        self.beta.value(x) + self.k
    }

    fn denominator(&self, t: f64) -> Result<f64> {
        if !(t.abs() < self.horizon) {
            return Err(Error::WeightDomain { t, horizon: self.horizon });
        }
        Ok((self.horizon + t) * (self.horizon - t))
    }

    /// `(φ, η)` at `(t, x')`.
    pub fn weights(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        let d = self.denominator(t)?;
        let e = (self.lambda * self.beta(x)).exp();
        Ok((e / d, self.numerator(x) / d))
    }

    /// `e^{2λK} - e^{λβ}`, positive since `β < 2K`.
    fn numerator(&self, x: f64) -> f64 {
        (2.0 * self.lambda * self.k).exp() - (self.lambda * self.beta(x)).exp()
    }

    pub fn eta(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.numerator(x) / self.denominator(t)?)
    }

    /// `∂η/∂x'`.
    pub fn eta_x(&self, t: f64, x: f64) -> Result<f64> {
        let d = self.denominator(t)?;
        Ok(-self.lambda * self.beta.gradient(x) * (self.lambda * self.beta(x)).exp() / d)
    }

    /// `∂²η/∂x'² = Δη`.
    pub fn eta_xx(&self, t: f64, x: f64) -> Result<f64> {
        let d = self.denominator(t)?;
        let g = self.beta.gradient(x);
        let l = self.lambda;
        Ok(-(l * self.beta.hessian(x) + l * l * g * g) * (l * self.beta(x)).exp() / d)
    }

    /// `∂η/∂t`.
    pub fn eta_t(&self, t: f64, x: f64) -> Result<f64> {
        let d = self.denominator(t)?;
        Ok(self.numerator(x) * 2.0 * t / (d * d))
    }

    /// `∂_ν β = β̃'·ν` on a boundary side.
    pub fn normal_derivative(&self, cross: &CrossSection, side: Side) -> f64 {
        self.beta.gradient(cross.endpoint(side)) * side.normal()
    }
}
