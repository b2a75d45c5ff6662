use std::fmt;

use super::weights::CrossWeight;
use crate::{CrossSection, Side, Subboundary};

/// Certificate for the three conditions on `β̃` and `γ*`, evaluated on the
/// cross-section nodes.
#[derive(Clone, Debug)]
pub struct AssumptionReport {
    /// `min |β̃'|` and its node.
    pub c0: f64,
    pub c0_node: f64,
    pub gamma: Subboundary,
    pub eps_hess: f64,
    pub lambda1: f64,
    pub pass_gradient: bool,
    pub pass_boundary: bool,
    pub pass_convexity: bool,
    /// Unobserved side with `∂_ν β̃ ≥ 0`, if any.
    pub boundary_witness: Option<(Side, f64)>,
    /// Node where `λ(β̃')² + β̃'' < ε` for some sampled `λ > Λ₁`.
    pub convexity_witness: Option<f64>,
}

impl AssumptionReport {
    pub fn passes(&self) -> bool {
        self.pass_gradient && self.pass_boundary && self.pass_convexity
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "pass" } else { "fail" };
        let gamma: Vec<&str> = self.gamma.sides().iter().map(|s| s.label()).collect();
        writeln!(f, "gamma_star = [{}]", gamma.join(", "))?;
        writeln!(f, "gradient: {} (C0 = {:.12e} at x' = {:.6})", flag(self.pass_gradient), self.c0, self.c0_node)?;
        match self.boundary_witness {
            Some((s, d)) => writeln!(f, "boundary: fail (d_nu beta = {d:.6e} on side {})", s.label())?,
            None => writeln!(f, "boundary: pass")?,
        }
        write!(
            f,
            "convexity: {} (eps = {:.12e}, Lambda1 = {:.12e})",
            flag(self.pass_convexity),
            self.eps_hess,
            self.lambda1
        )?;
        if let Some(x) = self.convexity_witness {
            write!(f, " witness x' = {x:.6}")?;
        }
        Ok(())
    }
}

/// Verifies, on the nodes of `cross`:
/// (i) `|β̃'| ≥ C₀ > 0`; (ii) `β̃'·ν < 0` on `∂ω ∖ γ*`;
/// (iii) `λ(β̃')² + β̃'' ≥ ε` for all `λ > Λ₁`.
///
/// For (iii), `ε = min β̃''` and `Λ₁ = 0` when `β̃'' > 0`; otherwise
/// `ε = C₀²` and `Λ₁ = max(0, max (ε - β̃'')/(β̃')²)`.
pub fn check_assumption(beta: &dyn CrossWeight, gamma: &Subboundary, cross: &CrossSection) -> AssumptionReport {
    let nodes = cross.nodes();
    let (c0, c0_node) = nodes
        .iter()
        .map(|&x| (beta.gradient(x).abs(), x))
        .fold((f64::INFINITY, nodes[0]), |acc, p| if p.0 < acc.0 { p } else { acc });
    let pass_gradient = c0 > 0.0 && c0.is_finite();

    let boundary_witness = gamma
        .complement()
        .into_iter()
        .map(|s| (s, beta.gradient(cross.endpoint(s)) * s.normal()))
        .find(|&(_, d)| !(d < 0.0));

    let min_hess = nodes.iter().map(|&x| beta.hessian(x)).fold(f64::INFINITY, f64::min);
    let (eps_hess, lambda1) = if min_hess > 0.0 {
        (min_hess, 0.0)
    } else {
        let eps = c0 * c0;
        let l1 = nodes
            .iter()
            .map(|&x| (eps - beta.hessian(x)) / beta.gradient(x).powi(2))
            .fold(0.0, f64::max);
        (eps, l1)
    };
    let convexity_witness = if pass_gradient && eps_hess > 0.0 {
        let lambdas = [lambda1 + 1e-9, lambda1 + 1e-3, lambda1 + 1.0, lambda1 + 100.0];
        nodes.iter().copied().find(|&x| {
            let g = beta.gradient(x);
            lambdas
                .iter()
                .any(|&l| l * g * g + beta.hessian(x) < eps_hess * (1.0 - 1e-12))
        })
    } else {
        Some(c0_node)
    };
    AssumptionReport {
        c0,
        c0_node,
        gamma: gamma.clone(),
        eps_hess,
        lambda1,
        pass_gradient,
        pass_boundary: boundary_witness.is_none(),
        pass_convexity: convexity_witness.is_none(),
        boundary_witness,
        convexity_witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::weights::{quadratic_candidate, AffineWeight, QuadraticWeight};

    fn unit() -> CrossSection {
        CrossSection::new(0.0, 1.0, 65).unwrap()
    }

    #[test]
    fn quadratic_candidate_certified() {
        let (w, g) = quadratic_candidate(-1.0, &unit()).unwrap();
        let rep = check_assumption(&w, &g, &unit());
        assert!(rep.passes(), "{rep}");
        assert!((rep.c0 - 2.0).abs() <= 1e-12);
        assert_eq!(rep.gamma.sides(), &[Side::Right]);
        assert_eq!(rep.eps_hess, 2.0);
        assert_eq!(rep.lambda1, 0.0);
    }

    #[test]
    fn constant_weight_fails_gradient() {
        let w = AffineWeight { slope: 0.0, offset: 1.0 };
        let rep = check_assumption(&w, &Subboundary::new(Side::BOTH), &unit());
        assert!(!rep.pass_gradient);
        assert!(!rep.passes());
    }

    #[test]
    fn wrong_side_fails_boundary_condition() {
        let w = QuadraticWeight { x0: -1.0 };
        let rep = check_assumption(&w, &Subboundary::new([Side::Left]), &unit());
        assert!(!rep.pass_boundary);
        let (side, d) = rep.boundary_witness.unwrap();
        assert_eq!(side, Side::Right);
        assert!((d - 4.0).abs() < 1e-14);
    }

    #[test]
    fn affine_weight_needs_positive_lambda1() {
        let w = AffineWeight { slope: 0.5, offset: 1.0 };
        let rep = check_assumption(&w, &Subboundary::new([Side::Right]), &unit());
        assert!(rep.passes(), "{rep}");
        assert_eq!(rep.eps_hess, 0.25);
        assert!((rep.lambda1 - 1.0).abs() < 1e-14);
    }
}
