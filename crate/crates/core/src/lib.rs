//! Periodic orbits, scaling transformations and spectral oscillations.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: Hamiltonians `p²/2m + Σ λⱼVⱼ(x)`, symplectic integration
//!   with specular walls, and the square-root time reparametrization.
//! - [`orbits`]: 1D periodic orbits by turning-point quadrature, closed orbits
//!   found by integration, rectangle billiard catalogs, and the `dS/dE = T`
//!   check.
//! - [`scaling`]: coupling, homogeneous and mixed scaling of orbits, the
//!   characteristic length, the virial identity and coupling transmutation.
//! - [`qspec`]: closed-form spectra and a finite-difference Sturm solver.
//! - [`oscillations`]: oscillatory density of states in a scaled variable and
//!   its recurrence (Fourier) spectrum.
//! - [`config`] and [`export`]: JSON system descriptions and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod orbits;
pub mod oscillations;
pub mod qspec;
pub mod scaling;

pub use error::{Error, Result};
