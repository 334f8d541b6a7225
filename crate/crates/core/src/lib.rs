//! Numerical core for the quantum action of local polynomial potentials.
//!
//! The crate is `no_std` (with `alloc`). It covers:
//!
//! * [`model`]: polynomial potentials, action specifications and the
//!   mass/potential/time scale transformation.
//! * [`propagator`]: finite-difference Hamiltonians, their low-lying spectra and
//!   Euclidean transition amplitudes `<x_f| exp(-H T / hbar) |x_i>`.
//! * [`trajectory`]: Euclidean two-point boundary-value solutions, action
//!   quadrature and a fourth-order symplectic real-time integrator.
//! * [`qfit`]: global fits of quantum-action parameters to amplitude tables.
//! * [`asymptotics`]: the large-time relations between the quantum potential,
//!   the ground state, the WKB form and the hydrogen radial sector.
//! * [`chaos`]: Poincaré sections of classical and quantum actions.
//!
//! IO, file formats and the command line live in the companion `qaction` crate.
#![no_std]
// `num_traits::Float` supplies the float methods without std; with std linked
// the inherent methods win and the trait imports look unused.
#![cfg_attr(any(feature = "std", test), allow(unused_imports))]
// NaN-rejecting `!(x > 0.0)` checks are intentional; index loops mirror the
// formulas they implement.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod asymptotics;
pub mod chaos;
mod error;
pub mod linalg;
pub mod model;
pub mod optimize;
mod par;
pub mod propagator;
pub mod qfit;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{ActionSpec, PolynomialPotential, ScaleTransform};
