//! Social-ecological poverty-trap modeling toolkit.
//!
//! A three-state dynamical system couples household assets (k_a), soil
//! fertility (k_s), and innovation resources (k_i). The crate provides:
//!
//! - the vector field, analytic Jacobian, and shock operators ([`model`]),
//! - an adaptive Dormand-Prince 4(5) integrator that respects the
//!   nonnegative octant ([`integrate`]),
//! - multistart equilibrium finding, stability classification, and basins of
//!   attraction ([`equilibria`]),
//! - parameter sweeps, regime classification, and tipping-point refinement
//!   ([`bifurcation`]),
//! - a stylized agricultural-innovation agent-based model ([`abm`]),
//! - inequality/food-security metrics, innovator tercile summaries, and
//!   intervention assessment ([`analysis`]),
//! - TOML configuration, CSV writers, and SVG plots ([`config`], [`csvio`],
//!   [`svg`]).
//!
//! Everything is deterministic for a fixed configuration and seed, at any
//! worker count.

pub mod abm;
pub mod analysis;
pub mod bifurcation;
pub mod config;
pub mod csvio;
pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod model;
pub mod svg;

pub use abm::{DamageScenario, Mechanism, SimOutput, World, WorldConfig};
pub use analysis::{BoxStats, InterventionPlan, TercileReport};
pub use bifurcation::{
    BifurcationBranch, RegimeClass, RegimeReport, RegimeSpan, TippingKind, TippingPoint,
};
pub use config::SimConfig;
pub use equilibria::{
    BasinGrid, BasinSpec, BranchLabel, Equilibrium, EquilibriumClass, SearchBox,
};
pub use error::{Result, TrapError};
pub use integrate::{AttractorRun, IntegrationSettings, Trajectory};
pub use model::{ParameterSet, ShockFractions, StateVector};
