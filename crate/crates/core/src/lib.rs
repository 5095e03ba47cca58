//! Compact-cluster three-antenna absolute gain measurement.
//!
//! The crate is organised bottom-up:
//!
//! - [`units`] and [`model`] hold the shared constants and domain types.
//! - [`ffcrit`] computes far-field distance criteria and phase-error budgets for
//!   a pair of apertures.
//! - [`solver`] is the Friis forward model and the three-antenna gain solution.
//! - [`stats`] reduces repeated distance sweeps to per-frequency gains and
//!   their deviation across measurement points.
//! - [`extrapolate`] is the classical 1/d extrapolation used as a cross-check.
//! - [`linksim`] integrates the coupling between two rectangular apertures and
//!   synthesizes campaigns with ripple and noise.
//! - [`io`] reads and writes trace files, configuration and reports.

pub mod error;
pub mod extrapolate;
pub mod ffcrit;
pub mod io;
pub mod linksim;
pub mod model;
pub mod solver;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
pub use model::{
    AntennaGain, AntennaKind, ApertureAntenna, Campaign, Cluster, FrequencyGrid, GainSolution,
    PairKey, SolutionMethod, SweepTrace,
};
