//! Joint BS boresight steering and IRS panel orientation for an
//! IRS-assisted multi-user MIMO uplink.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod manifold;
pub mod mu_solver;
pub mod rng;
pub mod su_solver;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
