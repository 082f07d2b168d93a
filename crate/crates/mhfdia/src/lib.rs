//! Synthesis and closed-loop simulation of stealthy false-data injection
//! attacks against moving-horizon estimators.
//!
//! The crate is organized around:
//! - [`plant`]: discrete LTI plants and windowed observation operators;
//! - [`estimators`]: moving-horizon least-squares estimation, the residual
//!   bad-data detector, a Luenberger baseline, and a UKF;
//! - [`attack`]: the recursive-feasibility attack generator;
//! - [`baselines`]: reference attack designs for comparison;
//! - [`grid`] / [`vehicle`]: the IEEE 14-bus and wheeled-robot scenarios;
//! - [`harness`]: configuration, deterministic runs, sweeps and export.

pub mod attack;
pub mod baselines;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod plant;
pub mod vehicle;

pub use error::{Error, Result};
