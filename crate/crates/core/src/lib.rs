//! Finite-element discretisation of the 2-D Helmholtz equation with impedance
//! boundary conditions, and domain-decomposition preconditioners built from the
//! corresponding problem with added absorption.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: structured triangulations of rectangles, coarse layouts, wave-speed fields
//! - [`sparse`] and [`assembly`]: complex CSR matrices and P1 assembly of `A_eps`, `D_k`
//!   and local impedance matrices
//! - [`decomposition`]: overlapping subdomains, RAS weights and the coarse interpolation `R0`
//! - [`factor`] and [`precond`]: banded direct solves and the Schwarz family
//!   (AS1, AS, RAS1, HRAS, ImpRAS1, ImpHRAS), optionally with nested inner Krylov solves
//! - [`krylov`]: full GMRES (standard, weighted, flexible)
//! - [`analysis`]: dense field-of-values estimates and GMRES envelope checks
//! - [`harness`]: experiment presets, result tables and the `helmdd` CLI driver

pub mod analysis;
pub mod assembly;
pub mod decomposition;
pub mod error;
pub mod factor;
pub mod harness;
pub mod krylov;
pub mod mesh;
pub mod operator;
pub mod precond;
pub mod sparse;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
