//! Outcome distributions of a quantum observable sampled along trajectories
//! interrupted by Poisson-timed projective measurements.
//!
//! Three routes to the same statistics:
//! - [`analytic`]: transfer-matrix spectrum plus one Volterra solve per mode,
//!   giving the full distribution (atom + click part) on a grid;
//! - [`montecarlo`]: direct simulation of the protocol;
//! - [`lindblad`]: the averaged state, which fixes the first moment.
//!
//! [`models`] holds closed forms for a monitored qubit and a particle hopping
//! on a chain.

pub mod analytic;
pub mod cli;
pub mod config;
pub mod distribution;
pub mod error;
pub mod lindblad;
pub mod models;
pub mod montecarlo;
pub mod quad;
pub mod spectrum;
pub mod system;
pub mod volterra;

pub use analytic::ExactEngine;
pub use config::RunConfig;
pub use distribution::{Atom, Density, MixedDistribution, XGrid};
pub use error::{Error, Result};
pub use montecarlo::{run_ensemble, EnsembleStats};
pub use spectrum::{spectral_decompose, TransferSpectrum};
pub use system::{MonitoredSystem, StateVector};
pub use volterra::{solve_volterra, ConvolutionKernel, VolterraSolution};
