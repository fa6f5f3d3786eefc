//! Gelfand-Zetlin integrable structure on T*GL(N).
//!
//! * [`poisson`]: exact polynomial Poisson algebra on `u`, `ũ`, `g` with a
//!   canonical-coordinates finite-difference oracle.
//! * [`classical`]: commuting minor families and their verification.
//! * [`quantum`]: PBW arithmetic in `U(gl_N) ⊗ U(gl_N)`, quantum determinants and
//!   the differential-operator realization.
//! * [`orbit`]: coadjoint orbits, Gelfand-Zetlin charts and the Kirillov-Kostant
//!   bracket.
//! * [`tower`]: action-angle variables, Abel maps and Hamiltonian flows.

pub mod classical;
pub mod error;
pub mod numeric;
pub mod orbit;
pub mod poisson;
pub mod quantum;
pub mod tower;

pub use error::{GzError, Result};
