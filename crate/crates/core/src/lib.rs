//! Numerical laboratory for the inverse problem of recovering a scalar
//! potential `q` in the Schrödinger equation `-i u' - Δu + q u = 0` posed on a
//! cylindrical waveguide `Ω = ω × ℝ` from one lateral Neumann observation.
//!
//! The crate is organised along the objects of the stability argument:
//!
//! * [`geometry`]: truncated cylinder grids, grid functions, discrete Sobolev
//!   norms, the partial Fourier transform in the axial variable;
//! * [`admissible`]: the background profile `(u_b, q_b)`, blended admissible
//!   pairs `(q₀, u₀)` and decaying perturbations of the potential;
//! * [`elliptic`]: fibered Dirichlet solver for `-Δ` and resolvent checks;
//! * [`schrodinger`]: Crank–Nicolson solver of the direct problem and Neumann
//!   traces of `u'`;
//! * [`carleman`]: pseudoconvex weights, conjugated operators and empirical
//!   Carleman ratio studies;
//! * [`inverse`]: linearization, time symmetrization, the weighted
//!   inequality behind the stability proof, and the Hölder stability sweep;
//! * [`harness`]: configuration, orchestration and CSV/manifest output.
//!
//! Only interval cross-sections (`n = 2`) are supported.

pub mod admissible;
pub mod carleman;
pub mod elliptic;
mod error;
pub mod geometry;
pub mod harness;
pub mod inverse;
pub mod schrodinger;
pub mod tridiag;

pub use error::{Error, Result};
pub use geometry::{AxialGrid, CrossSection, CylinderGrid, GridFunction, Side, Subboundary};

/// Complex scalar used for every field.
pub type C64 = num_complex::Complex64;
