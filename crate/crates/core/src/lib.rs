//! Hierarchical distribution-system state estimation.
//!
//! Two estimation layers cooperate over a radial distribution network:
//!
//! * a weighted-least-squares branch-current estimator over the
//!   medium-voltage primary feeder ([`wls`]), and
//! * one actor-critic module per service transformer that estimates the
//!   states of the attached low-voltage circuit ([`ac`]).
//!
//! The [`coordinator`] closes the loop: transformer voltages flow down,
//! net power injections and their variances flow back up, each timestep,
//! until the boundary stabilizes. [`powerflow`] provides the radial
//! sweep used by both layers and the ground-truth oracle used by
//! [`scenario`] to synthesize benchmark data.
//!
//! The crate is `no_std` (with `alloc`); file formats, persistence and
//! the command-line front end live in the companion `dsse-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ac;
pub mod coordinator;
pub mod linalg;
pub mod model;
pub mod netgen;
pub mod neural;
pub mod powerflow;
pub mod rng;
pub mod scenario;
pub mod wls;

pub use num_complex::Complex64;
