//! Coloring and whitening of generalized stochastic processes on a
//! quadrature grid.
//!
//! A process `Z = (1 - Delta)^{N/2} Y` is described by the covariance of `Y`
//! and an order `M` of polynomial growth. [`color_factorize`] writes `Z = L W`
//! with `W` a white noise; [`whiten_factorize`] builds the operator `Lw` with
//! `Lw Z` white.

pub mod error;
pub mod factorization;
pub mod grid;
pub mod gsp;
pub mod hermite;
pub mod kernel;
pub mod kl;
pub mod mc;
pub mod measure;
pub mod operators;

pub use error::{Error, Result};
pub use factorization::{
    build_white_noise, color_factorize, roundtrip_check, whiten_factorize, ColorFactorization,
    DataCoefficients, FactorizationOptions, McErrors, RkhsBasis, RoundtripParams, RoundtripReport,
    WhiteNoiseMetadata, WhiteNoiseModel, Whitening,
};
pub use grid::{build_grid, Grid, QuadratureRule};
pub use gsp::{GespExpansion, RealizationBatch};
pub use hermite::{build_bank, hermite_function, TestFunctionBank};
pub use kernel::{assemble_covariance_matrix, CovarianceKernel, KernelKind};
pub use kl::{nystrom_eigendecompose, KLDecomposition, KlReport};
pub use mc::{compare, empirical_covariance, CoefficientLaw, CovarianceReport, EmpiricalCovariance};
pub use measure::{weighted_inner, WeightedMeasure};
pub use operators::{apply_to_test_function, bessel_potential, weight_multiply, FactoredOperator, Stage};
