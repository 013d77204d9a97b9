//! Exact and certified bipartite entanglement for transverse-field Ising
//! chains.
//!
//! The chain has an even number `N` of sites and is always cut into the first
//! and second half. [`model`] builds couplings and Hamiltonians, [`states`]
//! evaluates log-negativity exactly, [`witness`] and [`sdp`] produce lower
//! bounds from a few expectation values, [`dynamics`] integrates noisy field
//! ramps and [`mpo`] bounds operator compression errors.

pub mod basis;
pub mod cli;
pub mod dynamics;
pub mod eig;
pub mod error;
pub mod model;
pub mod mpo;
pub mod sdp;
pub mod states;
pub mod witness;

pub use error::{Error, Result};
