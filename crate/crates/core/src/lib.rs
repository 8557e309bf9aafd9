//! Exact stroboscopic simulation of a damped mechanical resonator driven by
//! periodic optical-spring kicks.
//!
//! The resonator state is a zero-mean Gaussian described by its second
//! moments. Free evolution between kicks is solved with a matrix exponential;
//! each kick is a linear map on the moments. The stationary state follows
//! from a 3×3 linear solve.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod expm;
pub mod metrics;
pub mod moments;
pub mod pulse;
pub mod runner;

pub use error::{Error, Result};
pub use metrics::StateMetrics;
pub use moments::{CycleMap, DriftModel, KickMap, MechanicalParams, MomentVector, Propagator};
