//! Fluctuation statistics of polynomial linear statistics Tr p(H_L) for the
//! Anderson model H = Δ + X on Z^d, truncated to the cube Λ_L^d = [−L, L]^d.
//!
//! - [`walks`] enumerates the lattice strings whose path counts p^k(β) give
//!   the coefficients of Tr H_L^k as a polynomial in the potential.
//! - [`variance`] turns those counts and the potential's exact moments into
//!   the limiting variance σ(p)² and classifies the zero-variance polynomials.
//! - [`hamiltonian`] and [`fluctuations`] sample finite boxes and check the
//!   Gaussian limit by Monte Carlo.

pub mod budget;
pub mod error;
pub mod fluctuations;
pub mod hamiltonian;
pub mod lattice;
pub mod moments;
pub mod reference_table;
pub mod variance;
pub mod walks;

pub use budget::Budget;
pub use error::{Error, Result};
pub use lattice::{LatticePoint, MultiIndex};
pub use moments::{MomentModel, Rational, SupportClass};
