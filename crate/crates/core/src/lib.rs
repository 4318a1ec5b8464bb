//! Physics-informed neural networks trained with Sobolev-cubature losses.
//!
//! Derivatives of the network are taken by polynomial differentiation of its
//! samples on Gauss-Legendre grids instead of automatic differentiation.
//! A forward-mode Taylor-jet path provides the automatic-differentiation
//! baseline.

pub mod bench;
pub mod config;
pub mod diff;
pub mod error;
pub mod grid;
pub mod jet;
pub mod losses;
pub mod nn;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod runner;
pub mod sobolev;

pub use error::{Error, Result};
