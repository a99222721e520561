//! Quantum hydrodynamics: Bohmian trajectories, split-operator propagation
//! and a delayed-choice Mach-Zehnder simulation.
//!
//! The crate is organised bottom-up:
//!
//! - [`fields`]: density, phase, velocity, current and quantum potential
//!   extracted from any wave-function sample.
//! - [`analytic`]: closed-form free Gaussian packets, the two-slit
//!   superposition and the effective barrier model.
//! - [`trajectories`]: RK4 streamline integration, ensemble sampling and the
//!   non-crossing / histogram checks.
//! - [`gridprop`]: 2D split-operator propagation over staged potentials with
//!   on-the-fly trajectories.
//! - [`wheeler`]: the Mach-Zehnder open/closed/delayed-choice scenarios.
//! - [`cli`]: configuration and bit-stable output writers used by the
//!   `bohmflow` binary.

pub mod analytic;
pub mod cli;
pub mod fields;
pub mod gridprop;
pub mod trajectories;
pub mod wheeler;

pub use analytic::{AnalyticSuperposition, GaussianPacket};
pub use fields::{NodeThreshold, PhysicalUnits, WaveSample};
