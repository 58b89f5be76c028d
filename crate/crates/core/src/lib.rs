//! Numerical toolkit for causality, invisible domains, convex cores,
//! cosmological time and the bounded Euler cocycle in anti-de Sitter space
//! and its conformal boundary, the Einstein universe.

pub mod achronal;
pub mod ambient;
pub mod cli;
pub mod convex;
pub mod cosmo;
pub mod domain;
pub mod error;
pub mod euler;
pub mod nnls;
pub mod reps;
pub mod sphere;
pub mod symspace;

pub use ambient::{AmbientVector, CylPoint, Isometry};
pub use error::{Error, Result};
