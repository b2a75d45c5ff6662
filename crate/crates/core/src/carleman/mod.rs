//! Pseudoconvex weights `β̃`, the Carleman weights `φ`, `η`, the conjugated
//! operator `e^{-sη} L e^{sη}` with `L = -i∂_t - Δ`, and an empirical study
//! of the Carleman inequality on `(-T, T) × Ω`.

mod assumption;
mod ratio;
mod spacetime;
mod weights;

pub use assumption::{check_assumption, AssumptionReport};
pub use ratio::{carleman_ratio_study, carleman_sides, random_test_field, CarlemanSides, RatioRow, RatioStudyParams, RatioTable};
pub use spacetime::{bump_field, conjugation_residual, SpaceTimeField, SpaceTimeGrid};
pub use weights::{quadratic_candidate, AffineWeight, CrossWeight, QuadraticWeight, WeightSpec, MAX_EXPONENT};
