//! Exact free-fermion simulation of digitized quantum annealing and QAOA on
//! the frustrated Ising ring, with analytic gradients and the optimizers
//! built on them.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, the command line
//! and thread pools live in the companion `fring` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bottleneck;
pub mod ed;
pub mod error;
pub mod gradients;
pub mod model;
pub mod nambu;
pub mod observables;
pub mod optimize;
pub mod propagate;

pub use error::{Error, Result};
pub use model::{CouplingVector, RingModel};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
