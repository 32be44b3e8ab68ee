//! Non-Hermitian spectral analysis of open quantum systems.
//!
//! The crate is organised bottom-up: [`linalg`] provides the dense complex
//! eigensolver and c-normalization, [`two_level`] the closed-form 2×2 physics,
//! [`sweep`] parameter continuation and exceptional-point search,
//! [`open_system`] the energy-dependent effective Hamiltonian and the
//! resonance-trapping toy model, and [`scattering`] the S-matrix.

pub mod linalg;
pub mod open_system;
pub mod scattering;
pub mod sweep;
pub mod two_level;

pub use linalg::{C64, ComplexMatrix, EigenSystem, LinalgError, Symmetry};
