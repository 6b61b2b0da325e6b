//! Continuous-variable distributed phase sensing with one nonclassical and
//! one coherent input.
//!
//! The crate is split along the physics:
//!
//! - [`states`]: single-mode input catalog, moments, spectral decompositions
//!   and mixed-state Fisher information primitives.
//! - [`network`]: weight vectors, optimal linear networks and their
//!   realization as nearest-neighbour mixer meshes.
//! - [`qfim`]: the analytic quantum Fisher information matrix, its exact
//!   inverse along the target weights and the resulting sensitivity bounds.
//! - [`focksim`]: a truncated Fock-space simulator used as an independent
//!   brute-force oracle, including photon-counting Fisher information.
//! - [`protocols`]: two-step estimation of nonlinear functions of the phases.
//!
//! Linear networks follow one convention everywhere: an input creation
//! operator `a_k†` is mapped to `Σ_j U_jk a_j†`, so coherent amplitudes
//! transform as `β = U α`.

pub mod error;
pub mod focksim;
pub mod linalg;
pub mod network;
pub mod protocols;
pub mod qfim;
pub mod serde_complex;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64;
