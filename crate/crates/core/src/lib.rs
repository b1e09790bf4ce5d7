//! Simulation and pulse optimization for photon generation in a
//! parametrically driven qubit-cavity system in the ultrastrong coupling
//! regime.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod dcrab;
pub mod dynamics;
pub mod error;
pub mod outcome;
pub mod params;
pub mod protocols;
pub mod pulse;
pub mod robustness;
pub mod state;

pub use dynamics::{evolve, photon_expectation, rhs, EvolveOptions, Propagator, Trajectory};
pub use error::{Error, Result};
pub use outcome::{HistoryEntry, OptimizationResult};
pub use params::ModelParams;
pub use protocols::{BangBangConfig, ProtocolWindow};
pub use pulse::{BasisExpansion, Harmonic, NoiseSpec, Parametric, Piecewise, Pulse, Segment};
pub use state::StateVector;
