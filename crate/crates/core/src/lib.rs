//! Two-class priority queueing-inventory process under a base-stock,
//! lost-sales policy with flexible admission control.
//!
//! Modules follow the workflow: [`model`] defines the rates, [`solver`]
//! truncates and solves the chain, [`analysis`] checks the equilibrium flow
//! identities on any solution, [`lyapunov`] evaluates the drift certificate,
//! [`simulator`] samples trajectories of the untruncated process and
//! [`instant`] gives the zero-service-time inventory distribution.

// `!(x > 0.0)` is used on purpose so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod instant;
pub mod io;
pub mod kv;
pub mod model;
pub mod numeric;
pub mod lyapunov;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
pub use model::{ModelParams, ParamAxis, State, Transition, TransitionKind};
