//! Linearization of the data-to-potential map, time symmetrization, the
//! weighted inequality at `t = 0`, the `(y, s)` recipe and the Hölder
//! stability sweep.

mod lemma;
mod linearize;
mod recipe;
mod sweep;

pub use lemma::{lemma_inv_check, lemma_inv_from_runs, LemmaRow, LemmaTable};
pub use linearize::{linearize, symmetrize, Linearization, SymmetricHistory};
pub use recipe::{holder_exponent, mu_threshold, parameter_recipe, y_of_mu, Recipe, StabilityParams};
pub use sweep::{perturbed_runs, stability_sweep, PerturbedRuns, StabilityReport, StabilityRow, SweepOptions};
