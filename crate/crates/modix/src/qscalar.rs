//! q-integers and exact Laurent polynomials in `s = q^{1/2}`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Exec;

/// Working context: deformation parameter, precision and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QContext {
    pub q: f64,
    pub s: f64,
    /// Requested bits of floating precision. Matrix numerics run in f64.
    pub precision: u32,
    pub svd_threshold: f64,
    pub residual_tol: f64,
    pub sup_grid: usize,
    pub exec: Exec,
}

impl QContext {
    pub fn new(q: f64) -> Result<Self> {
        Self::with_precision(q, 106)
    }

    pub fn with_precision(q: f64, precision: u32) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidConfig(format!("q must lie in (0,1), got {q}")));
        }
        if precision < 53 {
            return Err(Error::InvalidConfig(format!(
                "precision must be at least 53 bits, got {precision}"
            )));
        }
        Ok(Self {
            q,
            s: q.sqrt(),
            precision,
            svd_threshold: 1e-7,
            residual_tol: 1e-10,
            sup_grid: 1000,
            exec: Exec::default(),
        })
    }

    pub fn qpow(&self, e: f64) -> f64 {
        self.q.powf(e)
    }
}

/// `[z]_q = (q^z - q^{-z}) / (q - q^{-1})`.
pub fn qint(z: f64, ctx: &QContext) -> f64 {
    qint_base(z, ctx.q)
}

/// q-integer at an arbitrary base, e.g. `[z]_{q^{1/2}}`.
pub fn qint_base(z: f64, base: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    (base.powf(z) - base.powf(-z)) / (base - 1.0 / base)
}

/// Laurent polynomial in `s` with rational coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Exact {
    terms: BTreeMap<i32, BigRational>,
}

impl Exact {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::s_pow(0)
    }

    pub fn int(v: i64) -> Self {
        Self::monomial(0, BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::monomial(0, BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// `s^e`; in particular `q^k = s^{2k}`.
    pub fn s_pow(e: i32) -> Self {
        Self::monomial(e, BigRational::one())
    }

    pub fn monomial(e: i32, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e, c);
        }
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &BigRational)> {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    pub fn coeff(&self, e: i32) -> BigRational {
        self.terms.get(&e).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Multiply by `s^e`.
    pub fn shift(&self, e: i32) -> Self {
        Self {
            terms: self.terms.iter().map(|(k, c)| (k + e, c.clone())).collect(),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c.to_f64().unwrap_or(f64::NAN) * s.powi(*e))
            .sum()
    }

    fn add_term(&mut self, e: i32, c: &BigRational) {
        let slot = self.terms.entry(e).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }
}

/// Substitute `s = q^{1/2}`.
pub fn exact_eval(e: &Exact, ctx: &QContext) -> f64 {
    e.eval(ctx.s)
}

impl Add for &Exact {
    type Output = Exact;
    fn add(self, rhs: &Exact) -> Exact {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, c);
        }
        out
    }
}

impl Sub for &Exact {
    type Output = Exact;
    fn sub(self, rhs: &Exact) -> Exact {
        self + &(-rhs)
    }
}

impl Neg for &Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        Exact {
            terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect(),
        }
    }
}

impl Mul for &Exact {
    type Output = Exact;
    fn mul(self, rhs: &Exact) -> Exact {
        let mut out = Exact::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                out.add_term(e1 + e2, &(c1 * c2));
            }
        }
        out
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Exact {
            type Output = Exact;
            fn $m(self, rhs: Exact) -> Exact { (&self).$m(&rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for Exact {
    type Output = Exact;
    fn neg(self) -> Exact {
        -&self
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() { "-" } else if i > 0 { "+" } else { "" };
            let a = c.abs();
            write!(f, "{sign}")?;
            match (*e, a.is_one()) {
                (0, _) => write!(f, "{a}")?,
                (e, true) => write!(f, "s^{e}")?,
                (e, false) => write!(f, "{a}*s^{e}")?,
            }
        }
        Ok(())
    }
}
