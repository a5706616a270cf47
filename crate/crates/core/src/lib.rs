//! Exact certification engine and protocol simulator for tripartite
//! orthogonal product-state sets that exhibit nonlocality without
//! entanglement.
//!
//! Linear algebra is generic over [`arith::Field`]; everything that certifies
//! or simulates runs over arbitrary-precision rationals through the aliases
//! below.

pub mod arith;
pub mod error;
pub mod families;
pub mod hilbert;
pub mod opm;
pub mod protocol;
pub mod search;

pub use error::{Error, Result};

pub type Rational = num_rational::BigRational;
pub type RationalMatrix = arith::Matrix<Rational>;
pub type Ket = hilbert::CompositeKet<Rational>;
pub type Local = hilbert::LocalKet<Rational>;
pub type Product = hilbert::ProductState<Rational>;
pub type States = hilbert::StateSet<Rational>;
