//! Spectral solvers for periodic Stokes waves and their stability near the
//! extrema of the wave momentum.

pub mod babenko;
pub mod cli;
pub mod conserved;
pub mod continuation;
pub mod error;
pub mod grid;
pub mod jordan;
pub mod krylov;
pub mod spectrum;
pub mod store;

pub use babenko::{
    babenko_residual, d_eta_dc, linearized_apply, newton_solve, solve_at_steepness, steepness,
    LinearizedOperator, NewtonConfig, StokesWave,
};
pub use error::{Error, Result};
pub use grid::{GridFunction, OperatorSymbolTable};
