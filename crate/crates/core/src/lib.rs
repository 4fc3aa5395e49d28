//! Exact solutions of multi-mode boson Hamiltonians
//!
//! ```text
//! H = Σ w_i N_i + Σ_{i≤j} w_ij N_i N_j
//!   + g (a_1^†k_1 … a_r^†k_r a_{r+1}^k_{r+1} … a_{r+s}^k_{r+s} + h.c.)
//! ```
//!
//! The pipeline splits the Fock space into finite invariant sectors
//! ([`fock`]), builds the Hamiltonian block of each sector in the Fock and
//! monomial bases ([`hamiltonian`]), rewrites it as a single-variable
//! differential operator with an invariant polynomial subspace ([`diffop`]),
//! and solves the functional Bethe ansatz equations for the roots of the
//! eigenpolynomials ([`bethe`]). Exact diagonalization of the same block is
//! the oracle every stage is checked against.

pub mod bethe;
pub mod dd;
pub mod diffop;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod models;
pub mod poly;
pub mod polyalg;
pub mod roots;
pub mod scalar;

pub use error::{Error, Result};
pub use fock::{ModeLabel, ModelSpec, Sector};
pub use poly::Polynomial;
pub use scalar::{rational, Rational, Scalar};
