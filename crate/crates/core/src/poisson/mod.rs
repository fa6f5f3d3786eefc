//! Exact Poisson algebra of T*GL(N) and its canonical-coordinate oracle.

pub mod bracket;
pub mod canonical;
pub mod poly;
pub mod relations;

pub use bracket::{bracket, generator_bracket};
pub use canonical::{canonical_bracket, evaluate, CMatrix, CanonicalPoint, PointValues};
pub use poly::{rat, GenKind, Generator, Monomial, PoissonPoly, Var};
