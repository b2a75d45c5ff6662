use crate::admissible::PerturbationParams;
use crate::geometry::japanese_bracket;
use crate::{Error, Result};

/// `θ = (b - δ) / (2b - δ)`.
pub fn holder_exponent(b: f64, delta: f64) -> f64 {
    (b - delta) / (2.0 * b - delta)
}

/// `μ_δ = e^{-(2b - δ)}`.
pub fn mu_threshold(b: f64, delta: f64) -> f64 {
    (-(2.0 * b - delta)).exp()
}

/// Constants of the stability estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityParams {
    a: f64,
    b: f64,
    d: f64,
    eps: f64,
    upsilon0: f64,
    delta: f64,
}

impl StabilityParams {
    pub fn new(pp: &PerturbationParams, upsilon0: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < pp.b()) {
            return Err(Error::param("delta", format!("need 0 < δ < b = {}, got {delta}", pp.b())));
        }
        if !(upsilon0 > 0.0 && upsilon0.is_finite()) {
            return Err(Error::param("upsilon0", format!("must be positive, got {upsilon0}")));
        }
        Ok(Self {
            a: pp.a(),
            b: pp.b(),
            d: pp.d(),
            eps: pp.eps(),
            upsilon0,
            delta,
        })
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

    pub fn upsilon0(&self) -> f64 {
        self.upsilon0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn theta(&self) -> f64 {
        holder_exponent(self.b, self.delta)
    }

    pub fn mu_delta(&self) -> f64 {
        mu_threshold(self.b, self.delta)
    }
}

/// `y(μ) = ((-ln μ / (2b - δ))^{2/d} - 1)^{1/2}` on `(0, μ_δ]`.
pub fn y_of_mu(mu: f64, sp: &StabilityParams) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", format!("must be positive, got {mu}")));
    }
    let mu_d = sp.mu_delta();
    if mu > mu_d {
        return Err(Error::param("mu", format!("y(μ) is defined for μ <= μ_δ = {mu_d:.6e}, got {mu:.6e}")));
    }
    if mu == mu_d {
        return Ok(0.0);
    }
    let base = -mu.ln() / (2.0 * sp.b - sp.delta);
    Ok((base.powf(2.0 / sp.d) - 1.0).max(0.0).sqrt())
}

/// Choice of `(y, s)` for a data size `μ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Recipe {
    Small { y: f64, s: f64 },
    /// `μ ≥ μ_δ`: the envelope bound applies directly.
    LargeData,
}

/// `s = (υ₀² / 2C)^{-2/3} ⟨y⟩^{2(1+ε)/3}` with `y = y(μ)` for `μ < μ_δ`.
pub fn parameter_recipe(mu: f64, sp: &StabilityParams, c: f64) -> Result<Recipe> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", format!("must be positive, got {mu}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("C", format!("must be positive, got {c}")));
    }
    if mu >= sp.mu_delta() {
        return Ok(Recipe::LargeData);
    }
    let y = y_of_mu(mu, sp)?;
    let s = (sp.upsilon0.powi(2) / (2.0 * c)).powf(-2.0 / 3.0) * japanese_bracket(y).powf(2.0 * (1.0 + sp.eps) / 3.0);
    Ok(Recipe::Small { y, s })
}
