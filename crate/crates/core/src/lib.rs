//! Closed-form heat kernels of `-div(A∇) + ⟨Bx,x⟩ (+ lower-order terms)` for
//! commuting `A`, `B`, the Hamiltonian geodesics, energy and action behind
//! them, the matrix Riccati solutions they induce, and an independent
//! numerical verification harness.

// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hamiltonics;
pub mod instances;
pub mod kernels;
pub mod quadrature;
pub mod riccati;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::{
    build_spectral, matrix_function, scalar_branch, singular_times, BranchFunction, OperatorSpec,
    SingularSet, SpectralData, SymPosDefMatrix,
};
