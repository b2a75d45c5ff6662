//! Truncated cylinder `ω × [-L, L)`, grid functions, axial Fourier analysis
//! and discrete Sobolev norms.

mod field;
mod grid;
mod norms;
mod spectral;

pub use field::GridFunction;
pub use grid::{japanese_bracket, poincare_constant, AxialGrid, CrossSection, CylinderGrid, Side, Subboundary};
pub use norms::{
    embedding_corpus, h_norm, sup_embedding_study, CorpusFunction, EmbeddingLevel, EmbeddingRow, EmbeddingTable,
    MAX_SOBOLEV_ORDER,
};
pub use spectral::{axial_derivative, axial_fourier, dirichlet_laplacian, laplacian, schrodinger_operator, AxialSpectrum};

pub(crate) use spectral::{apply_symbol, cross_second_difference, forward_rows, inverse_rows};
