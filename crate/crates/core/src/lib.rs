//! Numerical laboratory for concentrated steady vortex rings.
//!
//! The meridional half plane `{(x1, x2) : x1 > 0}` carries the potential vorticity
//! `zeta` and the Stokes stream function `psi`, linked by the weighted elliptic
//! operator `L psi = -(1/x1) div((1/x1) grad psi)`. The crate provides the building
//! blocks used to construct steady rings and to check them against their thin-core
//! asymptotics:
//!
//! * [`ground_state`]: the radial Lane–Emden profile on the unit disc.
//! * [`green`]: the axisymmetric Green function and its expansions.
//! * [`fields`]: grids, weighted functionals, rearrangement classes.
//! * [`operator`]: discretisation and fast inversion of `L`.
//! * [`steady`]: steady ring solver and structural diagnostics.
//! * [`asymptotics`]: ring-parameter system and approximate solutions.
//! * [`variational`]: energy maximisation over a rearrangement class.
//! * [`evolution`]: transport dynamics and conservation monitors.
//! * [`acceptance`]: the acceptance suite shared by the CLI and the test target.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod asymptotics;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod green;
pub mod ground_state;
pub mod io;
pub mod operator;
pub mod special;
pub mod steady;
pub mod variational;

pub use error::{Error, Result};
