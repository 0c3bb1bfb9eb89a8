//! Long-time return-probability enhancement of Haar-random states in GOE and
//! GUE random-matrix systems.
//!
//! A non-stationary state `|a⟩` returns to itself, on long-time average, with
//! probability `Σ_n p_n²` (the dilation, or inverse participation ratio, of its
//! eigenbasis weights). Compared with the overlap `Σ_n p_n^a p_n^b` against an
//! independent state `|b⟩`, this is enhanced by `2N/(N+1)` (GUE) or `3N/(N+2)`
//! (GOE). The modules here sample the ensembles, estimate these averages by
//! Monte Carlo on two independent routes, and check them against the closed
//! forms.

pub mod birthmark;
pub mod dynamics;
pub mod ensembles;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod moments;
pub mod sectors;
pub mod spectral;

pub use birthmark::{
    analytic_cross_overlap, analytic_ratio, analytic_self_overlap, dilation, estimate_enhancement,
    long_time_overlap, EnhancementReport, SamplingPath,
};
pub use ensembles::{
    sample_dirichlet, sample_haar_state, sample_matrix, weights_from_state, QuantumState,
    RandomMatrix, SymmetryClass, WeightVector,
};
pub use error::{Error, Result};
pub use estimator::{merge, EstimatorResult, PairedEstimate};
pub use spectral::{decompose, eigen_weights, HamiltonianSpectrum};
