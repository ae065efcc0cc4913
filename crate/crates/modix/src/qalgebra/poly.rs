use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use super::coeff::{Coeff, ExactRing};
use super::monomial::{Gen, Monomial};
use crate::qscalar::Exact;

/// Element of the coordinate algebra in PBW normal form.
#[derive(Clone, PartialEq)]
pub struct Poly<C: Coeff> {
    ring: C::Ring,
    terms: BTreeMap<Monomial, C>,
}

/// Exact polynomial with Laurent-in-`s` rational coefficients.
pub type NCPoly = Poly<Exact>;
pub type NumPoly = Poly<f64>;
pub type CPoly = Poly<Complex64>;

impl NCPoly {
    pub fn exact_gen(g: Gen) -> Self {
        Poly::gen(g, &ExactRing)
    }

    pub fn exact_one() -> Self {
        Poly::one(&ExactRing)
    }

    pub fn exact_scalar(c: Exact) -> Self {
        Poly::scalar(c, &ExactRing)
    }

    /// Product of generators in the given order.
    pub fn word(gens: &[Gen]) -> Self {
        Poly::from_word(gens, &ExactRing)
    }

    pub fn to_numeric(&self, s: f64) -> NumPoly {
        self.map_coeffs(&s, |c| c.eval(s))
    }
}

impl<C: Coeff> Poly<C> {
    pub fn zero(ring: &C::Ring) -> Self {
        Self { ring: ring.clone(), terms: BTreeMap::new() }
    }

    pub fn one(ring: &C::Ring) -> Self {
        Self::monomial(Monomial::ONE, C::one(), ring)
    }

    pub fn scalar(c: C, ring: &C::Ring) -> Self {
        Self::monomial(Monomial::ONE, c, ring)
    }

    pub fn gen(g: Gen, ring: &C::Ring) -> Self {
        Self::monomial(Monomial::gen(g), C::one(), ring)
    }

    pub fn monomial(m: Monomial, c: C, ring: &C::Ring) -> Self {
        let mut p = Self::zero(ring);
        p.add_term(m, c);
        p
    }

    pub fn from_word(gens: &[Gen], ring: &C::Ring) -> Self {
        let mut p = Self::one(ring);
        for g in gens {
            p = p.times_gen(*g);
        }
        p
    }

    pub fn ring(&self) -> &C::Ring {
        &self.ring
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(slot) => {
                *slot = slot.add(&c);
                if slot.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_same(|_, c| c.neg())
    }

    pub fn scale(&self, k: &C) -> Self {
        self.map_same(|_, c| c.mul(k))
    }

    fn map_same(&self, f: impl Fn(&Monomial, &C) -> C) -> Self {
        let mut out = Self::zero(&self.ring);
        for (m, c) in &self.terms {
            out.add_term(*m, f(m, c));
        }
        out
    }

    pub fn map_coeffs<D: Coeff>(&self, ring: &D::Ring, f: impl Fn(&C) -> D) -> Poly<D> {
        let mut out = Poly::zero(ring);
        for (m, c) in &self.terms {
            out.add_term(*m, f(c));
        }
        out
    }

    /// Right multiplication by a generator.
    pub fn times_gen(&self, g: Gen) -> Self {
        let mut out = Self::zero(&self.ring);
        for (m, c) in &self.terms {
            for (e, mm) in m.times_gen(g) {
                out.add_term(mm, c.mul(&C::s_pow(e, &self.ring)));
            }
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(&self.ring);
        for (my, cy) in &o.terms {
            let word = my.word();
            let mut part = self.scale(cy);
            for g in &word {
                part = part.times_gen(*g);
            }
            for (m, c) in part.terms {
                out.add_term(m, c);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::one(&self.ring), |acc, _| acc.mul(self))
    }

    /// Involution: `a* = d`, `b* = -q c`, `c* = -q^{-1} b`, antimultiplicative.
    pub fn star(&self) -> Self {
        let r = &self.ring;
        let star_gen = |g: Gen| -> Self {
            match g {
                Gen::A => Self::gen(Gen::D, r),
                Gen::D => Self::gen(Gen::A, r),
                Gen::B => Self::gen(Gen::C, r).scale(&C::s_pow(2, r).neg()),
                Gen::C => Self::gen(Gen::B, r).scale(&C::s_pow(-2, r).neg()),
            }
        };
        let mut out = Self::zero(r);
        for (m, c) in &self.terms {
            let mut p = Self::scalar(c.conj(), r);
            for g in m.word().iter().rev() {
                p = p.mul(&star_gen(*g));
            }
            out = out.add(&p);
        }
        out
    }

    /// `sigma_z` at `z = i*y`: multiplies a monomial by `q^{y wt} = s^{y wt2}`.
    pub fn sigma_imag(&self, y: i32) -> Self {
        let r = self.ring.clone();
        self.map_same(|m, c| c.mul(&C::s_pow(y * m.wt2(), &r)))
    }

    /// m-weight analogue: multiplies a monomial by `s^{y wtl2}`.
    pub fn sigma_m_imag(&self, y: i32) -> Self {
        let r = self.ring.clone();
        self.map_same(|m, c| c.mul(&C::s_pow(y * m.wtl2(), &r)))
    }

    /// `sigma_z` for complex `z`: multiplies a monomial by `q^{-i z wt}`.
    pub fn sigma(&self, z: Complex64, s: f64) -> CPoly {
        let lnq = 2.0 * s.ln();
        let mut out = Poly::zero(&s);
        for (m, c) in &self.terms {
            let f = (Complex64::new(0.0, -1.0) * z * (m.wt2() as f64 / 2.0) * lnq).exp();
            out.add_term(*m, c.to_complex(s) * f);
        }
        out
    }

    /// Remove the coefficient of the empty monomial.
    pub fn drop_scalar(&self) -> Self {
        let mut out = self.clone();
        out.terms.remove(&Monomial::ONE);
        out
    }

    pub fn scalar_part(&self) -> C {
        self.coeff(&Monomial::ONE)
    }

    /// Homogeneous n-weight (doubled), if any.
    pub fn homogeneous_wt2(&self) -> Option<i32> {
        let mut it = self.terms.keys().map(Monomial::wt2);
        let first = it.next()?;
        it.all(|w| w == first).then_some(first)
    }

    pub fn homogeneous_wtl2(&self) -> Option<i32> {
        let mut it = self.terms.keys().map(Monomial::wtl2);
        let first = it.next()?;
        it.all(|w| w == first).then_some(first)
    }

    /// Drop coefficients below `tol` in magnitude.
    pub fn prune(&self, tol: f64, s: f64) -> Self {
        let mut out = self.clone();
        out.terms.retain(|_, c| c.magnitude(s) > tol);
        out
    }

    pub fn max_coeff(&self, s: f64) -> f64 {
        self.terms.values().map(|c| c.magnitude(s)).fold(0.0, f64::max)
    }
}

impl<C: Coeff> fmt::Debug for Poly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(m, c)| format!("({c:?})*{m}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}
