//! Path-integral Monte Carlo for a gauge-theoretic model of a stock and the
//! order flow that moves it.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation: model parameters, the action functionals, the coherent-state
//! amplitude in log-polar form, a tensor-grid quadrature oracle for tiny
//! instances, the Metropolis-Hastings driver, and the histogram estimators.
//! File formats, the command line and thread-level parallelism live in the
//! `gauge-cspi` companion crate.
//!
//! Prices are handled as log-prices `x_i = log S_i` with the gauge fixed by
//! `S(0) = 1`, so every path starts at `x_0 = 0`.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod action;
pub mod amplitude;
pub mod engine;
pub mod estimator;
pub mod logc;
pub mod market;
pub mod oracle;
pub mod params;
pub mod rng;

pub use action::{HydroConfig, PathError, PricePath};
pub use amplitude::{boundary_log_factor, full_log_integrand, hamiltonian_entries, propagator_log_amplitude};
pub use engine::{run_baseline, run_simulation, ChainState, RawAccumulators, RunError, RunOptions};
pub use estimator::{
    compare_pdfs, finalize_pdf, gbm_reference_pdf, moments, BinGrid, ComparisonReport, EstimatorError, MomentReport,
    PdfHistogram,
};
pub use logc::{ComplexAccumulator, LogComplex};
pub use oracle::{brute_force_pdf, OracleError};
pub use params::{
    AccumulationMode, ConfigError, ModelConfig, PerturbationTerm, SamplerSettings, ValidatedConfig, Violation,
};
