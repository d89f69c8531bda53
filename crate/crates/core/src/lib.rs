//! Non-stationary anisotropic Gaussian random fields on regular lattices.
//!
//! The crate turns spatially varying parameter images `kappa2(s)`, `rho(s)`
//! and `theta(s)` into a sparse SAR operator, draws replicate ensembles from
//! it, generates synthetic `(fields, parameters)` datasets from randomized
//! spatial patterns, estimates parameters with a windowed Gaussian Markov
//! random field likelihood, and scores estimates and emulated ensembles.
//!
//! Module map:
//!
//! - [`sar`]: dispersion tensors, 9-point stencils, the SAR matrix `B` and
//!   the precision `Q = BᵀB`.
//! - [`simulator`]: ensembles from `B y = e`, pixelwise standardization.
//! - [`patterns`]: the eight spatial pattern families and value priors.
//! - [`dataset`]: synthetic dataset generation and the HDF5 container.
//! - [`mle`]: windowed likelihood, multistart fitting, sliding-window maps.
//! - [`analytics`]: image metrics, anchor correlation rows, paired t-tests
//!   and the Whittle correlation.
//! - [`cli`]: the `nsgrf` command-line front end.

pub mod analytics;
pub mod cli;
pub mod container;
pub mod dataset;
pub mod error;
pub mod factor;
pub mod grid;
pub mod mle;
pub mod patterns;
pub mod rng;
pub mod sar;
pub mod simulator;
pub mod sparse;

pub use error::{Error, Result};
pub use grid::{Boundary, Field, GridGeometry};
pub use sar::{
    assemble_sar, dispersion_at, precision, stencil_at, ParamFields, ParamKind, SarSystem,
};
pub use simulator::{simulate_ensemble, solve_sar, standardize_pixelwise, FieldEnsemble};
