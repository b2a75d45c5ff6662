use std::f64::consts::PI;
use std::sync::Arc;

use super::spectral::{cross_forward_difference, forward_rows};
use super::{CylinderGrid, GridFunction};
use crate::{Error, Result};

/// Highest Sobolev order with a discrete norm.
pub const MAX_SOBOLEV_ORDER: usize = 3;

/// Discrete `H^k(Ω)` norm, `k ≤ 3`.
///
/// All mixed derivatives `∂_{x'}^α ∂_{x_n}^β` with `α + β ≤ k` contribute;
/// `x'` derivatives are forward differences (trapezoid weights for `α = 0`),
/// `x_n` derivatives enter through Parseval as the weight `|p|^{2β}`.
pub fn h_norm(w: &GridFunction, k: usize) -> Result<f64> {
    if k > MAX_SOBOLEV_ORDER {
        return Err(Error::UnsupportedOrder(k));
    }
    let grid = w.grid();
    let cross = grid.cross();
    let axial = grid.axial();
    let mut spec = w.values().clone();
    forward_rows(axial, &mut spec);
    let p2: Vec<f64> = axial.frequencies().iter().map(|p| p * p).collect();
    let trap = cross.quadrature_weights();
    let h = cross.spacing();
    let mut total = 0.0;
    for alpha in 0..=k {
        let diff = cross_forward_difference(&spec, h, alpha);
        for (i, row) in diff.outer_iter().enumerate() {
            let weight = if alpha == 0 { trap[i] } else { h };
            for (kk, z) in row.iter().enumerate() {
                let mut sym = 0.0;
                let mut pw = 1.0;
                for _beta in 0..=(k - alpha) {
                    sym += pw;
                    pw *= p2[kk];
                }
                total += weight * sym * z.norm_sqr();
            }
        }
    }
    Ok((total * axial.spacing()).sqrt())
}

/// A smooth decaying test function of the embedding corpus, expressed in the
/// normalized cross-section coordinate `ξ ∈ [0, 1]` and the axial variable.
#[derive(Clone, Copy, Debug)]
pub struct CorpusFunction {
    pub name: &'static str,
    pub eval: fn(f64, f64) -> f64,
}

/// Fixed corpus used by [`sup_embedding_study`].
pub fn embedding_corpus() -> Vec<CorpusFunction> {
    vec![
        CorpusFunction {
            name: "sin(pi xi) exp(-z^2)",
            eval: |xi, z| (PI * xi).sin() * (-z * z).exp(),
        },
        CorpusFunction {
            name: "xi(1-xi) exp(-z^2/2)",
            eval: |xi, z| xi * (1.0 - xi) * (-0.5 * z * z).exp(),
        },
        CorpusFunction {
            name: "sin(2 pi xi) sech(z)^4",
            eval: |xi, z| (2.0 * PI * xi).sin() / z.cosh().powi(4),
        },
        CorpusFunction {
            name: "xi^2 (1-xi) exp(-(z-1)^2)",
            eval: |xi, z| xi * xi * (1.0 - xi) * (-(z - 1.0) * (z - 1.0)).exp(),
        },
        CorpusFunction {
            name: "cos(pi xi) exp(-2 z^2) (1 + z)",
            eval: |xi, z| (PI * xi).cos() * (-2.0 * z * z).exp() * (1.0 + z),
        },
    ]
}

/// Refinement level of the embedding study.
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingLevel {
    pub n_cross: usize,
    pub n_axial: usize,
}

#[derive(Clone, Debug)]
pub struct EmbeddingRow {
    pub level: usize,
    pub n_cross: usize,
    pub n_axial: usize,
    pub function: &'static str,
    pub sup: f64,
    pub sobolev: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    pub order: usize,
    pub rows: Vec<EmbeddingRow>,
}

impl EmbeddingTable {
    /// Max ratio over the corpus at each level.
    pub fn max_ratio_per_level(&self) -> Vec<f64> {
        let levels = self.rows.iter().map(|r| r.level).max().map_or(0, |m| m + 1);
        let mut out = vec![0.0f64; levels];
        for r in &self.rows {
            out[r.level] = out[r.level].max(r.ratio);
        }
        out
    }

    /// Relative spread `(max - min) / max` of the per-level maxima.
    pub fn level_variation(&self) -> f64 {
        let per = self.max_ratio_per_level();
        let hi = per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = per.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi - lo) / hi
    }
}

/// Ratios `‖h‖_∞ / ‖h‖_{k,Ω}` over the corpus at successive resolutions of
/// the cylinder `(a, b) × [-L, L)`.
pub fn sup_embedding_study(
    k: usize,
    a: f64,
    b: f64,
    half_length: f64,
    levels: &[EmbeddingLevel],
) -> Result<EmbeddingTable> {
    // n = 2: the embedding needs k > n / 2 = 1.
    if k <= 1 {
        return Err(Error::EmbeddingHypothesis(k));
    }
    if k > MAX_SOBOLEV_ORDER {
        return Err(Error::UnsupportedOrder(k));
    }
    let corpus = embedding_corpus();
    let mut rows = Vec::new();
    for (li, level) in levels.iter().enumerate() {
        let grid = Arc::new(CylinderGrid::build(
            a,
            b,
            level.n_cross,
            half_length,
            level.n_axial,
            1.0,
            1,
        )?);
        let len = b - a;
        for f in &corpus {
            let w = GridFunction::from_real_fn(&grid, |x, z| (f.eval)((x - a) / len, z));
            let sobolev = h_norm(&w, k)?;
            if sobolev == 0.0 {
                continue;
            }
            let sup = w.sup_norm();
            rows.push(EmbeddingRow {
                level: li,
                n_cross: level.n_cross,
                n_axial: level.n_axial,
                function: f.name,
                sup,
                sobolev,
                ratio: sup / sobolev,
            });
        }
    }
    Ok(EmbeddingTable { order: k, rows })
}
