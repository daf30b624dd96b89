//! Spectral toolkit for the 2D stochastic Navier-Stokes equations with
//! additive colored noise.
//!
//! Everything is represented in the eigenbasis of the Stokes operator: a
//! velocity field is a coefficient sequence ([`SpectralField`]), the operator
//! itself is a diagonal [`Spectrum`], the nonlinearity is a sparse table of
//! trilinear structure constants ([`TriadTable`]), and the noise is a
//! per-mode coloring driving an exactly sampled Ornstein-Uhlenbeck
//! convolution. On top of that sit the Galerkin solver for the shifted
//! velocity equation, the derivative flow, and the Monte Carlo estimators
//! for the Markov semigroup (ergodic averages, mixing proxies, gradient
//! estimation via the probabilistic integration-by-parts formula).
//!
//! The crate is `no_std` (with `alloc`); all floating-point transcendentals
//! go through `libm`, which also keeps results bit-identical across hosts.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub(crate) mod fx;

pub mod basis;
pub mod ergodic;
pub mod error;
pub mod noise;
pub mod rng;
pub mod solver;
pub mod spectrum;
pub mod stats;

pub use basis::{BasisMode, Parity, TriadTable};

pub use ergodic::{Dynamics, MCConfig, Observable};

pub use error::Error;

pub use noise::{Coloring, ColoringSpec, PathSample, SeedRecord};

pub use rng::{CounterRng, NoiseStream};

pub use solver::{Cutoff, Integrator, SolverConfig};

pub use spectrum::{Backend, SpectralField, Spectrum};
