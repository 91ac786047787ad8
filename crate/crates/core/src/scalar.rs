//! Scalar and ring abstractions shared by the exact types.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact integer scalar: `i64`, `i128` or `BigInt`.
///
/// Fixed-width impls report overflow instead of wrapping; promote to
/// `BigInt` via [`Scalar::to_bigint`] when a result does not fit.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + Ord
    + Hash
    + Send
    + Sync
    + Integer
    + Signed
    + FromPrimitive
    + ToPrimitive
    + CheckedAdd
    + CheckedSub
    + CheckedMul
    + 'static
{
    fn to_bigint(&self) -> BigInt;

    fn from_bigint(v: &BigInt) -> Option<Self>;

    fn of(v: i64) -> Self {
        Self::from_i64(v).expect("i64 fits every scalar")
    }
}

impl Scalar for i64 {
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn from_bigint(v: &BigInt) -> Option<Self> {
        v.to_i64()
    }
}

impl Scalar for i128 {
    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn from_bigint(v: &BigInt) -> Option<Self> {
        v.to_i128()
    }
}

impl Scalar for BigInt {
    fn to_bigint(&self) -> BigInt {
        self.clone()
    }
    fn from_bigint(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
}

/// A commutative ring with checked operations.
pub trait Ring: Clone + Debug + PartialEq + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn checked_add(&self, rhs: &Self) -> Option<Self>;
    fn checked_sub(&self, rhs: &Self) -> Option<Self>;
    fn checked_mul(&self, rhs: &Self) -> Option<Self>;
    fn checked_neg(&self) -> Option<Self> {
        Self::zero().checked_sub(self)
    }
}

impl<T: Scalar> Ring for T {
    fn zero() -> Self {
        <T as Zero>::zero()
    }
    fn one() -> Self {
        <T as One>::one()
    }
    fn checked_add(&self, rhs: &Self) -> Option<Self> {
        CheckedAdd::checked_add(self, rhs)
    }
    fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        CheckedSub::checked_sub(self, rhs)
    }
    fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        CheckedMul::checked_mul(self, rhs)
    }
}

impl Ring for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn checked_add(&self, rhs: &Self) -> Option<Self> {
        Some(self + rhs)
    }
    fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        Some(self - rhs)
    }
    fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        Some(self * rhs)
    }
}

pub(crate) fn add<R: Ring>(a: &R, b: &R, ctx: &'static str) -> Result<R> {
    a.checked_add(b).ok_or(Error::Overflow(ctx))
}

pub(crate) fn sub<R: Ring>(a: &R, b: &R, ctx: &'static str) -> Result<R> {
    a.checked_sub(b).ok_or(Error::Overflow(ctx))
}

pub(crate) fn mul<R: Ring>(a: &R, b: &R, ctx: &'static str) -> Result<R> {
    a.checked_mul(b).ok_or(Error::Overflow(ctx))
}

/// Checked sum of a slice.
pub(crate) fn sum<R: Ring>(xs: &[R], ctx: &'static str) -> Result<R> {
    xs.iter().try_fold(R::zero(), |acc, x| add(&acc, x, ctx))
}
