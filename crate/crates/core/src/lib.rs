//! Numerical laboratory for self-similar blow-up of the axisymmetric
//! Euler–Nernst–Planck–Poisson system without swirl.
//!
//! Fields live on a log-spaced `z` × Gauss–Legendre `θ` grid. The crate
//! provides the background profiles, the nonlocal operator `L_K`, the
//! linearised operators around the profile, solvers for the two spherical
//! elliptic problems, weighted Sobolev norms, and the dynamically rescaled
//! perturbation flow with its modulation laws.

pub mod error;
pub mod params;
pub mod quadrature;
mod diff;
pub mod grid;
pub mod profiles;
pub mod operators;
mod banded;
pub mod elliptic;
pub mod norms;
pub mod testfields;
pub mod config;
pub mod dynamics;
pub mod suite;

pub use config::{parse_config, Config, ModulationMode, PiMode};
pub use dynamics::{run_decay_experiment, ModulationState, RunStatus, SeriesRow, SimulationReport};
pub use error::{Error, Result};
pub use grid::{make_grid, Field, Grid, RadialFunction};
pub use params::{make_parameters, Parameters};
pub use suite::{cmd_coercivity, cmd_verify, CoercivityReport, VerificationSuiteResult};
