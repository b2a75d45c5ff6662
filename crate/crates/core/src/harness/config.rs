use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::admissible::{FactoryParams, InteriorChoice, PerturbationParams, PerturbationShape};
use crate::carleman::SpaceTimeGrid;
use crate::inverse::StabilityParams;
use crate::{AxialGrid, CrossSection, CylinderGrid, Error, Side, Subboundary};

/// Cylinder `(a, b) × [-L, L)` and the time grid of the direct problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub a: f64,
    pub b: f64,
    pub n_cross: usize,
    pub half_length: f64,
    pub n_axial: usize,
    pub horizon: f64,
    pub n_steps: usize,
    /// Bound on the decay envelope at `x_n = ±L`.
    pub truncation_tol: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            n_cross: 64,
            half_length: 10.0,
            n_axial: 128,
            horizon: 1.0,
            n_steps: 64,
            truncation_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteriorKind {
    Background,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmissibleConfig {
    pub eps: f64,
    pub c: f64,
    pub collar: f64,
    pub transition: f64,
    pub interior: InteriorKind,
    /// Used only with `interior = "gaussian"`.
    pub u_amp: f64,
    pub q_amp: f64,
    pub width: f64,
}

impl Default for AdmissibleConfig {
    fn default() -> Self {
        Self {
            eps: 1.0,
            c: 1.0,
            collar: 0.1,
            transition: 0.3,
            interior: InteriorKind::Background,
            u_amp: 0.5,
            q_amp: 0.3,
            width: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub cross_power: u32,
    pub axial_frequency: f64,
    /// Amplitudes of the stability sweep.
    pub amplitudes: Vec<f64>,
    /// Amplitude of the single `direct` run; 0 gives the stationary run.
    pub direct_amplitude: f64,
    pub lemma_amplitude: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            d: 2.0,
            cross_power: 2,
            axial_frequency: 0.0,
            amplitudes: (0..7).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect(),
            direct_amplitude: 0.0,
            lemma_amplitude: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipticConfig {
    /// Cross-section node counts of the manufactured-solution study.
    pub levels: Vec<usize>,
    /// Random right-hand sides for the resolvent check.
    pub samples: usize,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self {
            levels: vec![17, 33, 65],
            samples: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanConfig {
    /// Centre of the quadratic weight `|x' - x₀'|²`.
    pub x0: f64,
    pub r: f64,
    pub lambda: f64,
    /// Space-time grid of the ratio study: `n_cross × n_axial` on
    /// `(a, b) × [-L, L)` and `n_time` intervals of `(-T, T)`.
    pub n_cross: usize,
    pub n_axial: usize,
    pub half_length: f64,
    pub n_time: usize,
    pub samples: usize,
    pub calibration_min: f64,
    pub calibration_max: f64,
    pub calibration_points: usize,
    pub sweep_points: usize,
    pub decades: f64,
    /// `s` values of the conjugation residual.
    pub conjugation_s: Vec<f64>,
    /// Log-spaced `s` sweep of the weighted inequality at `t = 0`.
    pub lemma_s_min: f64,
    pub lemma_s_max: f64,
    pub lemma_s_points: usize,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            x0: -1.0,
            r: 2.0,
            lambda: 0.1,
            n_cross: 33,
            n_axial: 32,
            half_length: 6.0,
            n_time: 48,
            samples: 20,
            calibration_min: 1.0,
            calibration_max: 100.0,
            calibration_points: 9,
            sweep_points: 9,
            decades: 1.0,
            conjugation_s: vec![1.0, 5.0],
            lemma_s_min: 1.0,
            lemma_s_max: 100.0,
            lemma_s_points: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseConfig {
    pub delta: f64,
    /// Sides of `γ*`, `"left"` and/or `"right"`.
    pub observed: Vec<String>,
    pub two_sided: bool,
    /// Constant `C` of the `s` recipe; when absent it is fitted as the
    /// largest ratio of the `lemma-inv` table.
    pub recipe_constant: Option<f64>,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            observed: vec!["right".into()],
            two_sided: false,
            recipe_constant: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "wgstab-out".into() }
    }
}

/// Full run configuration, read from TOML.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub admissible: AdmissibleConfig,
    pub perturbation: PerturbationConfig,
    pub elliptic: EllipticConfig,
    pub carleman: CarlemanConfig,
    pub inverse: InverseConfig,
    pub output: OutputConfig,
}

/// Configuration problem, tagged with the offending key.
#[derive(Debug, thiserror::Error)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }

    fn wrap(block: &str, e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => Self::new(format!("{block}.{name}"), reason),
            other => Self::new(block, other.to_string()),
        }
    }
}

/// Parameters derived from a validated [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Validated {
    pub grid: Arc<CylinderGrid>,
    pub factory: FactoryParams,
    pub perturbation: PerturbationParams,
    pub stability: StabilityParams,
    pub observed: Subboundary,
    pub spacetime: Arc<SpaceTimeGrid>,
}

fn parse_side(s: &str) -> Option<Side> {
    match s {
        "left" => Some(Side::Left),
        "right" => Some(Side::Right),
        _ => None,
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let key = e.span().map_or_else(String::new, |s| {
                text.get(s).unwrap_or_default().trim().to_string()
            });
            ConfigError::new(if key.is_empty() { "config".into() } else { key }, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every block against the preconditions of the modules it
    /// feeds. The weight candidate is left to the `carleman` stage.
    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let g = &self.geometry;
        let grid = CylinderGrid::build(g.a, g.b, g.n_cross, g.half_length, g.n_axial, g.horizon, g.n_steps)
            .map_err(|e| ConfigError::wrap("geometry", e))?;
        positive("geometry.truncation_tol", g.truncation_tol)?;

        let p = &self.perturbation;
        let shape = PerturbationShape {
            cross_power: p.cross_power,
            axial_frequency: p.axial_frequency,
        };
        let perturbation =
            PerturbationParams::new(p.a, p.b, p.d, self.admissible.eps, shape).map_err(|e| ConfigError::wrap("perturbation", e))?;
        grid.check_truncation(p.b, p.d, g.truncation_tol)
            .map_err(|e| ConfigError::wrap("geometry", e))?;
        if p.amplitudes.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(ConfigError::new("perturbation.amplitudes", "amplitudes must be nonnegative"));
        }
        if !(p.direct_amplitude >= 0.0 && p.direct_amplitude.is_finite()) {
            return Err(ConfigError::new("perturbation.direct_amplitude", "must be nonnegative"));
        }
        positive("perturbation.lemma_amplitude", p.lemma_amplitude)?;

        let ad = &self.admissible;
        let factory = FactoryParams {
            interior: match ad.interior {
                InteriorKind::Background => InteriorChoice::Background,
                InteriorKind::Gaussian => InteriorChoice::Gaussian {
                    u_amp: ad.u_amp,
                    q_amp: ad.q_amp,
                    width: ad.width,
                },
            },
            ..FactoryParams::background(ad.eps, ad.c, ad.collar, ad.transition)
        };
        crate::admissible::background_profile(ad.eps, ad.c).map_err(|e| ConfigError::wrap("admissible", e))?;
        positive("admissible.collar", ad.collar)?;
        positive("admissible.transition", ad.transition)?;
        if ad.interior == InteriorKind::Gaussian {
            positive("admissible.width", ad.width)?;
            if !(ad.u_amp >= 0.0) {
                return Err(ConfigError::new("admissible.u_amp", "must be nonnegative"));
            }
        }

        let inv = &self.inverse;
        let stability = StabilityParams::new(&perturbation, ad.c, inv.delta).map_err(|e| ConfigError::wrap("inverse", e))?;
        if let Some(c) = inv.recipe_constant {
            positive("inverse.recipe_constant", c)?;
        }
        let mut sides = Vec::new();
        for s in &inv.observed {
            sides.push(parse_side(s).ok_or_else(|| {
                ConfigError::new("inverse.observed", format!("unknown side `{s}`, expected \"left\" or \"right\""))
            })?);
        }
        if sides.is_empty() {
            return Err(ConfigError::new("inverse.observed", "need at least one side"));
        }

        let c = &self.carleman;
        if !(c.r > 1.0 && c.r.is_finite()) {
            return Err(ConfigError::new("carleman.r", format!("must exceed 1, got {}", c.r)));
        }
        positive("carleman.lambda", c.lambda)?;
        let spacetime = SpaceTimeGrid::new(
            CrossSection::new(g.a, g.b, c.n_cross).map_err(|e| ConfigError::wrap("carleman", e))?,
            AxialGrid::new(c.half_length, c.n_axial).map_err(|e| ConfigError::wrap("carleman", e))?,
            g.horizon,
            c.n_time,
        )
        .map_err(|e| ConfigError::wrap("carleman", e))?;
        if c.samples == 0 {
            return Err(ConfigError::new("carleman.samples", "need at least one sample"));
        }
        positive("carleman.calibration_min", c.calibration_min)?;
        if !(c.calibration_max > c.calibration_min) {
            return Err(ConfigError::new("carleman.calibration_max", "must exceed calibration_min"));
        }
        if c.calibration_points < 2 || c.sweep_points < 2 {
            return Err(ConfigError::new("carleman.sweep_points", "need at least two points"));
        }
        positive("carleman.decades", c.decades)?;
        if c.conjugation_s.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(ConfigError::new("carleman.conjugation_s", "values must be nonnegative"));
        }
        positive("carleman.lemma_s_min", c.lemma_s_min)?;
        if !(c.lemma_s_max >= c.lemma_s_min) || c.lemma_s_points == 0 {
            return Err(ConfigError::new("carleman.lemma_s_max", "need lemma_s_max >= lemma_s_min and lemma_s_points >= 1"));
        }

        if self.elliptic.levels.is_empty() {
            return Err(ConfigError::new("elliptic.levels", "need at least one level"));
        }
        if let Some(&n) = self.elliptic.levels.iter().find(|&&n| n < 3) {
            return Err(ConfigError::new("elliptic.levels", format!("need at least 3 nodes, got {n}")));
        }
        if self.output.dir.is_empty() {
            return Err(ConfigError::new("output.dir", "must not be empty"));
        }

        Ok(Validated {
            grid: Arc::new(grid),
            factory,
            perturbation,
            stability,
            observed: Subboundary::new(sides),
            spacetime: Arc::new(spacetime),
        })
    }

    /// Log-spaced `s` values of the `lemma-inv` sweep.
    pub fn lemma_s_values(&self) -> Vec<f64> {
        let c = &self.carleman;
        if c.lemma_s_points == 1 {
            return vec![c.lemma_s_min];
        }
        let (lo, hi) = (c.lemma_s_min.ln(), c.lemma_s_max.ln());
        (0..c.lemma_s_points)
            .map(|k| (lo + (hi - lo) * k as f64 / (c.lemma_s_points - 1) as f64).exp())
            .collect()
    }
}
