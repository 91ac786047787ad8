//! Integral Apollonian gaskets: exact Descartes arithmetic, curvature
//! enumeration, congruence quotients, binary quadratic forms, circle-method
//! sums and finite-quotient spectra.

pub mod arith;
pub mod congruence;
pub mod descartes;
pub mod error;
pub mod expsums;
pub mod forms;
pub mod frozen;
pub mod orbit;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};

/// Machine-integer Descartes quadruple.
pub type Quadruple = descartes::Quadruple<i64>;
/// Arbitrary-precision Descartes quadruple.
pub type BigQuadruple = descartes::Quadruple<num_bigint::BigInt>;
/// Integer 4×4 matrix acting on quadruples.
pub type ApolloMatrix = descartes::Mat4<i64>;
/// Rational 4×4 matrix, the codomain of the spin maps.
pub type RationalMatrix = descartes::Mat4<num_rational::BigRational>;
/// Shifted binary quadratic form with machine-integer coefficients.
pub type Form = forms::ShiftedForm<i64>;
