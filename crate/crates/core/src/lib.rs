//! Information diffusion on interconnected multilayer networks.
//!
//! The crate covers the numerical side of the model end to end:
//!
//! * [`multinet`] assembles the supra-Laplacian of a multilayer network from
//!   per-layer adjacency, inter-layer couplings and diffusion constants.
//! * [`dynamics`] predicts future node states with the matrix-exponential
//!   drift `exp(-L·Δt)·X`, simulates the Ornstein–Uhlenbeck open system and
//!   fits diffusion constants to observed snapshots.
//! * [`laplearn`] learns the vectorized operator `Λ̂` from a trajectory.
//! * [`kalman`] refines predictions when a subset of node states is observed.
//! * [`evalharness`] generates synthetic scenarios and runs the three-way
//!   predictor comparison.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the CLI
//! live in the `supradiff` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod evalharness;
pub mod kalman;
pub mod laplearn;
pub mod linalg;
pub mod multinet;
pub mod rng;

pub use error::{Error, Result};
pub use nalgebra;
