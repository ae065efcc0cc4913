use std::fmt::Debug;

use num_complex::Complex64;

use crate::qscalar::Exact;

/// Coefficient field for polynomials in the generators.
///
/// `Ring` carries whatever is needed to realize `s^e`: nothing for exact
/// coefficients, the numeric value of `s` otherwise.
pub trait Coeff: Clone + PartialEq + Debug + Send + Sync + 'static {
    type Ring: Clone + PartialEq + Debug + Send + Sync;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    fn s_pow(e: i32, ring: &Self::Ring) -> Self;
    fn from_exact(e: &Exact, ring: &Self::Ring) -> Self;
    /// Size used when pruning numerically vanishing coefficients.
    fn magnitude(&self, s: f64) -> f64;
    fn to_complex(&self, s: f64) -> Complex64;

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExactRing;

impl Coeff for Exact {
    type Ring = ExactRing;

    fn zero() -> Self {
        Exact::zero()
    }
    fn one() -> Self {
        Exact::one()
    }
    fn is_zero(&self) -> bool {
        Exact::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn s_pow(e: i32, _: &ExactRing) -> Self {
        Exact::s_pow(e)
    }
    fn from_exact(e: &Exact, _: &ExactRing) -> Self {
        e.clone()
    }
    fn magnitude(&self, s: f64) -> f64 {
        self.eval(s).abs()
    }
    fn to_complex(&self, s: f64) -> Complex64 {
        Complex64::new(self.eval(s), 0.0)
    }
}

impl Coeff for f64 {
    type Ring = f64;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        *self
    }
    fn s_pow(e: i32, s: &f64) -> Self {
        s.powi(e)
    }
    fn from_exact(e: &Exact, s: &f64) -> Self {
        e.eval(*s)
    }
    fn magnitude(&self, _: f64) -> f64 {
        self.abs()
    }
    fn to_complex(&self, _: f64) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
}

impl Coeff for Complex64 {
    type Ring = f64;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn s_pow(e: i32, s: &f64) -> Self {
        Complex64::new(s.powi(e), 0.0)
    }
    fn from_exact(e: &Exact, s: &f64) -> Self {
        Complex64::new(e.eval(*s), 0.0)
    }
    fn magnitude(&self, _: f64) -> f64 {
        self.norm()
    }
    fn to_complex(&self, _: f64) -> Complex64 {
        *self
    }
}
