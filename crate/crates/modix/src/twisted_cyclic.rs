//! Twisted cyclic chains over the coordinate algebra, reduced by `B = C`.
//!
//! A chain is stored fully expanded into tensors of PBW monomials. The
//! operators act on the unreduced tensor algebra, where `b_sigma^2 = 0` and
//! `(1 - lambda) b' = b_sigma (1 - lambda)` hold on the nose; [`Chain::reduce`]
//! drops every tensor with a scalar slot.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::qalgebra::{Coeff, Monomial, Poly, PolyMatrix};

/// Diagonal automorphism `s^{y w}` where `w` is the doubled n- or m-weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Twist {
    pub weight: Weight,
    pub y: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    N,
    M,
}

impl Twist {
    pub const IDENTITY: Twist = Twist { weight: Weight::N, y: 0 };

    /// `sigma_{iy}` for the n-weight flow; `sigma_i` is `y = 1`.
    pub fn sigma_imag(y: i32) -> Self {
        Self { weight: Weight::N, y }
    }

    /// `sigma^F_{iy}` defined by the m-weight; scales by `q^{-2 y w}`.
    pub fn podles_imag(y: i32) -> Self {
        Self { weight: Weight::M, y: -2 * y }
    }

    pub fn exponent(&self, m: &Monomial) -> i32 {
        self.y
            * match self.weight {
                Weight::N => m.wt2(),
                Weight::M => m.wtl2(),
            }
    }

    pub fn apply<C: Coeff>(&self, x: &Poly<C>) -> Poly<C> {
        match self.weight {
            Weight::N => x.sigma_imag(self.y),
            Weight::M => x.sigma_m_imag(self.y),
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct Chain<C: Coeff> {
    degree: usize,
    ring: C::Ring,
    terms: BTreeMap<Vec<Monomial>, C>,
}

impl<C: Coeff> fmt::Debug for Chain<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chain[{}](", self.degree)?;
        for (i, (t, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let slots: Vec<String> = t.iter().map(|m| m.to_string()).collect();
            write!(f, "({c:?}) {}", slots.join("⊗"))?;
        }
        write!(f, ")")
    }
}

fn expand<C: Coeff>(coeff: C, slots: &[Poly<C>], out: &mut BTreeMap<Vec<Monomial>, C>) {
    fn rec<C: Coeff>(c: C, slots: &[Poly<C>], prefix: &mut Vec<Monomial>, out: &mut BTreeMap<Vec<Monomial>, C>) {
        match slots.split_first() {
            None => add_into(out, prefix.clone(), c),
            Some((head, rest)) => {
                for (m, k) in head.terms() {
                    prefix.push(*m);
                    rec(c.mul(k), rest, prefix, out);
                    prefix.pop();
                }
            }
        }
    }
    rec(coeff, slots, &mut Vec::with_capacity(slots.len()), out);
}

fn add_into<C: Coeff>(out: &mut BTreeMap<Vec<Monomial>, C>, key: Vec<Monomial>, c: C) {
    if c.is_zero() {
        return;
    }
    match out.get_mut(&key) {
        Some(slot) => {
            *slot = slot.add(&c);
            if slot.is_zero() {
                out.remove(&key);
            }
        }
        None => {
            out.insert(key, c);
        }
    }
}

impl<C: Coeff> Chain<C> {
    pub fn zero(degree: usize, ring: &C::Ring) -> Self {
        Self { degree, ring: ring.clone(), terms: BTreeMap::new() }
    }

    /// `coeff * x_0 ⊗ ... ⊗ x_n`, degree `n = slots.len() - 1`.
    pub fn tensor(coeff: C, slots: &[Poly<C>]) -> Result<Self> {
        let Some(first) = slots.first() else {
            return Err(Error::SizeMismatch("a chain needs at least one slot".into()));
        };
        let mut ch = Self::zero(slots.len() - 1, first.ring());
        expand(coeff, slots, &mut ch.terms);
        Ok(ch)
    }

    pub fn from_monomials(coeff: C, slots: &[Monomial], ring: &C::Ring) -> Self {
        let mut ch = Self::zero(slots.len() - 1, ring);
        add_into(&mut ch.terms, slots.to_vec(), coeff);
        ch
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ring(&self) -> &C::Ring {
        &self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Monomial>, &C)> {
        self.terms.iter()
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        if self.degree != o.degree {
            return Err(Error::SizeMismatch(format!("degrees {} and {}", self.degree, o.degree)));
        }
        let mut out = self.clone();
        for (k, c) in &o.terms {
            add_into(&mut out.terms, k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(&C::one().neg()))
    }

    pub fn scale(&self, k: &C) -> Self {
        let mut out = Self::zero(self.degree, &self.ring);
        for (t, c) in &self.terms {
            add_into(&mut out.terms, t.clone(), c.mul(k));
        }
        out
    }

    /// Drop tensors with a scalar slot (the quotient `A / C` in each slot).
    pub fn reduce(&self) -> Self {
        let mut out = self.clone();
        out.terms.retain(|t, _| t.iter().all(|m| !m.is_one()));
        out
    }

    fn sign(n: usize) -> C {
        if n % 2 == 0 {
            C::one()
        } else {
            C::one().neg()
        }
    }

    fn twist_factor(&self, sigma: &Twist, m: &Monomial) -> C {
        C::s_pow(sigma.exponent(m), &self.ring)
    }

    fn mono_product(&self, x: &Monomial, y: &Monomial) -> Poly<C> {
        Poly::monomial(*x, C::one(), &self.ring).mul(&Poly::monomial(*y, C::one(), &self.ring))
    }

    /// Insert `c * (prefix ⊗ p ⊗ suffix)` into `out`.
    fn push_with_poly(&self, out: &mut BTreeMap<Vec<Monomial>, C>, c: &C, prefix: &[Monomial], p: &Poly<C>, suffix: &[Monomial]) {
        for (m, k) in p.terms() {
            let mut key = Vec::with_capacity(prefix.len() + 1 + suffix.len());
            key.extend_from_slice(prefix);
            key.push(*m);
            key.extend_from_slice(suffix);
            add_into(out, key, c.mul(k));
        }
    }

    /// `lambda(a_0 ⊗ ... ⊗ a_n) = (-1)^n sigma(a_n) ⊗ a_0 ⊗ ... ⊗ a_{n-1}`.
    pub fn lambda(&self, sigma: &Twist) -> Self {
        let n = self.degree;
        let mut out = Self::zero(n, &self.ring);
        for (t, c) in &self.terms {
            let last = t[n];
            let mut key = Vec::with_capacity(n + 1);
            key.push(last);
            key.extend_from_slice(&t[..n]);
            let k = c.mul(&Self::sign(n)).mul(&self.twist_factor(sigma, &last));
            add_into(&mut out.terms, key, k);
        }
        out
    }

    /// Apply `sigma` in every slot.
    pub fn sigma_all(&self, sigma: &Twist) -> Self {
        let mut out = Self::zero(self.degree, &self.ring);
        for (t, c) in &self.terms {
            let e: i32 = t.iter().map(|m| sigma.exponent(m)).sum();
            add_into(&mut out.terms, t.clone(), c.mul(&C::s_pow(e, &self.ring)));
        }
        out
    }

    /// Bar boundary `b'`.
    pub fn b_prime(&self) -> Result<Self> {
        let n = self.degree;
        if n == 0 {
            return Err(Error::DegreeZero);
        }
        let mut out = Self::zero(n - 1, &self.ring);
        for (t, c) in &self.terms {
            for i in 0..n {
                let p = self.mono_product(&t[i], &t[i + 1]);
                let k = c.mul(&Self::sign(i));
                self.push_with_poly(&mut out.terms, &k, &t[..i], &p, &t[i + 2..]);
            }
        }
        Ok(out)
    }

    /// Twisted Hochschild boundary `b_sigma = b' + (-1)^n sigma(a_n) a_0 ⊗ ...`.
    pub fn twisted_b(&self, sigma: &Twist) -> Result<Self> {
        let n = self.degree;
        let mut out = self.b_prime()?;
        for (t, c) in &self.terms {
            let k = c.mul(&Self::sign(n)).mul(&self.twist_factor(sigma, &t[n]));
            let p = self.mono_product(&t[n], &t[0]);
            self.push_with_poly(&mut out.terms, &k, &[], &p, &t[1..n]);
        }
        Ok(out)
    }

    /// `b_sigma` followed by the reduction.
    pub fn twisted_b_reduced(&self, sigma: &Twist) -> Result<Self> {
        Ok(self.twisted_b(sigma)?.reduce())
    }

    pub fn map_coeffs<D: Coeff>(&self, ring: &D::Ring, f: impl Fn(&C) -> D) -> Chain<D> {
        let mut out = Chain::zero(self.degree, ring);
        for (t, c) in &self.terms {
            add_into(&mut out.terms, t.clone(), f(c));
        }
        out
    }
}

/// Formal sum of tensors of polynomial matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixChain<C: Coeff> {
    pub degree: usize,
    pub terms: Vec<(C, Vec<PolyMatrix<C>>)>,
}

impl<C: Coeff> MatrixChain<C> {
    pub fn tensor(coeff: C, slots: Vec<PolyMatrix<C>>) -> Result<Self> {
        let k = slots.first().map(|m| m.k).ok_or_else(|| Error::SizeMismatch("empty tensor".into()))?;
        if slots.iter().any(|m| m.k != k) {
            return Err(Error::SizeMismatch("matrix sizes differ".into()));
        }
        Ok(Self { degree: slots.len() - 1, terms: vec![(coeff, slots)] })
    }

    pub fn add(mut self, o: MatrixChain<C>) -> Result<Self> {
        if self.degree != o.degree {
            return Err(Error::SizeMismatch("degrees differ".into()));
        }
        self.terms.extend(o.terms);
        Ok(self)
    }

    fn size(&self) -> usize {
        self.terms.first().map(|(_, s)| s[0].k).unwrap_or(0)
    }

    pub fn lambda(&self, sigma: &Twist) -> Self {
        let n = self.degree;
        let sign = if n % 2 == 0 { C::one() } else { C::one().neg() };
        let terms = self
            .terms
            .iter()
            .map(|(c, s)| {
                let mut out = Vec::with_capacity(n + 1);
                out.push(s[n].map(|p| sigma.apply(p)));
                out.extend(s[..n].iter().cloned());
                (c.mul(&sign), out)
            })
            .collect();
        Self { degree: n, terms }
    }

    pub fn twisted_b(&self, sigma: &Twist) -> Result<Self> {
        let n = self.degree;
        if n == 0 {
            return Err(Error::DegreeZero);
        }
        let mut terms = Vec::new();
        for (c, s) in &self.terms {
            for i in 0..n {
                let mut out = Vec::with_capacity(n);
                out.extend(s[..i].iter().cloned());
                out.push(s[i].mul(&s[i + 1])?);
                out.extend(s[i + 2..].iter().cloned());
                let sign = if i % 2 == 0 { C::one() } else { C::one().neg() };
                terms.push((c.mul(&sign), out));
            }
            let mut out = Vec::with_capacity(n);
            out.push(s[n].map(|p| sigma.apply(p)).mul(&s[0])?);
            out.extend(s[1..n].iter().cloned());
            let sign = if n % 2 == 0 { C::one() } else { C::one().neg() };
            terms.push((c.mul(&sign), out));
        }
        Ok(Self { degree: n - 1, terms })
    }
}

/// Generalized trace: sum over index cycles of entrywise tensors.
pub fn gen_trace<C: Coeff>(mc: &MatrixChain<C>, ring: &C::Ring) -> Result<Chain<C>> {
    let k = mc.size();
    let n = mc.degree;
    let mut out = Chain::zero(n, ring);
    for (c, slots) in &mc.terms {
        if slots.len() != n + 1 || slots.iter().any(|m| m.k != k) {
            return Err(Error::SizeMismatch("ragged matrix chain".into()));
        }
        let mut idx = vec![0usize; n + 1];
        'cycles: loop {
            let entries: Vec<Poly<C>> = (0..=n).map(|j| slots[j].get(idx[j], idx[(j + 1) % (n + 1)]).clone()).collect();
            if entries.iter().all(|p| !p.is_zero()) {
                expand(c.clone(), &entries, &mut out.terms);
            }
            let mut pos = 0;
            loop {
                if pos > n {
                    break 'cycles;
                }
                idx[pos] += 1;
                if idx[pos] < k {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
    Ok(out)
}

type Evaluator<'a> = dyn Fn(&[Monomial]) -> f64 + Sync + Send + 'a;

/// Linear functional on degree-`n` chains given on monomial tensors.
pub struct Cochain<'a> {
    pub degree: usize,
    pub twist: Twist,
    pub s: f64,
    eval: Box<Evaluator<'a>>,
}

impl<'a> Cochain<'a> {
    pub fn new(degree: usize, twist: Twist, s: f64, eval: impl Fn(&[Monomial]) -> f64 + Sync + Send + 'a) -> Self {
        Self { degree, twist, s, eval: Box::new(eval) }
    }

    pub fn zero(degree: usize, twist: Twist, s: f64) -> Self {
        Self::new(degree, twist, s, |_| 0.0)
    }

    pub fn on_monomials(&self, t: &[Monomial]) -> f64 {
        (self.eval)(t)
    }

    pub fn evaluate<C: Coeff>(&self, ch: &Chain<C>) -> Result<f64> {
        if ch.degree() != self.degree {
            return Err(Error::SizeMismatch(format!("cochain degree {} on chain degree {}", self.degree, ch.degree())));
        }
        Ok(ch.terms().map(|(t, c)| c.to_complex(self.s).re * (self.eval)(t)).sum())
    }

    /// `c -> c ∘ b_sigma`.
    pub fn coboundary(self) -> Cochain<'a> {
        let s = self.s;
        let twist = self.twist;
        let degree = self.degree + 1;
        Cochain::new(degree, twist, s, move |t| {
            let ch = Chain::<f64>::from_monomials(1.0, t, &s);
            let bd = ch.twisted_b(&twist).expect("degree >= 1");
            bd.terms().map(|(t, c)| c * (self.eval)(t)).sum()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalgebra::{ExactRing, Gen, NCMatrix, NCPoly};
    use crate::qscalar::Exact;

    fn g(x: Gen) -> NCPoly {
        NCPoly::exact_gen(x)
    }

    #[test]
    fn lambda_examples() {
        let sig = Twist::sigma_imag(1);
        let (x, y) = (g(Gen::A).add(&g(Gen::B)), NCPoly::word(&[Gen::C, Gen::D]));
        let ch = Chain::tensor(Exact::one(), &[x.clone(), y.clone()]).unwrap();
        let want = Chain::tensor(-Exact::one(), &[y.sigma_imag(1), x.clone()]).unwrap();
        assert_eq!(ch.lambda(&sig), want);
        let twice = Chain::tensor(Exact::one(), &[x.sigma_imag(1), y.sigma_imag(1)]).unwrap();
        assert_eq!(ch.lambda(&sig).lambda(&sig), twice);
        let z = g(Gen::D);
        let ch3 = Chain::tensor(Exact::one(), &[x, y, z]).unwrap();
        let cubed = ch3.lambda(&sig).lambda(&sig).lambda(&sig);
        assert_eq!(cubed, ch3.sigma_all(&sig));
    }

    #[test]
    fn boundary_examples() {
        let sig = Twist::sigma_imag(1);
        let (x, y, z) = (g(Gen::A), g(Gen::B).add(&g(Gen::D)), NCPoly::word(&[Gen::C, Gen::A]));
        let ch = Chain::tensor(Exact::one(), &[x.clone(), y.clone()]).unwrap();
        let bp = ch.b_prime().unwrap();
        assert_eq!(bp, Chain::tensor(Exact::one(), &[x.mul(&y)]).unwrap());
        let ch3 = Chain::tensor(Exact::one(), &[x.clone(), y.clone(), z.clone()]).unwrap();
        let want = Chain::tensor(Exact::one(), &[x.mul(&y), z.clone()])
            .unwrap()
            .sub(&Chain::tensor(Exact::one(), &[x.clone(), y.mul(&z)]).unwrap())
            .unwrap();
        assert_eq!(ch3.b_prime().unwrap(), want);
        let one = NCPoly::exact_one();
        let ones = Chain::tensor(Exact::one(), &[one.clone(), one.clone()]).unwrap();
        assert_eq!(ones.b_prime().unwrap(), Chain::tensor(Exact::one(), &[one]).unwrap());
        let tb = ch.twisted_b(&sig).unwrap();
        let want = Chain::tensor(Exact::one(), &[x.mul(&y).sub(&y.sigma_imag(1).mul(&x))]).unwrap();
        assert_eq!(tb, want);
        let single = Chain::tensor(Exact::one(), &[x]).unwrap();
        assert_eq!(single.b_prime(), Err(Error::DegreeZero));
    }

    #[test]
    fn gen_trace_examples() {
        let u = NCMatrix::fundamental();
        let u1 = NCMatrix::new(1, vec![g(Gen::A)]).unwrap();
        let u2 = NCMatrix::new(1, vec![g(Gen::B)]).unwrap();
        let mc = MatrixChain::tensor(Exact::one(), vec![u1, u2]).unwrap();
        let tr = gen_trace(&mc, &ExactRing).unwrap();
        assert_eq!(tr, Chain::tensor(Exact::one(), &[g(Gen::A), g(Gen::B)]).unwrap());

        let mc = MatrixChain::tensor(Exact::one(), vec![u.clone(), u.star()]).unwrap();
        let tr = gen_trace(&mc, &ExactRing).unwrap();
        let mut want = Chain::zero(1, &ExactRing);
        for i in 0..2 {
            for j in 0..2 {
                let t = Chain::tensor(Exact::one(), &[u.get(i, j).clone(), u.get(i, j).star()]).unwrap();
                want = want.add(&t).unwrap();
            }
        }
        assert_eq!(tr, want);

        let diag = NCMatrix::new(2, vec![g(Gen::A), NCPoly::zero(&ExactRing), NCPoly::zero(&ExactRing), g(Gen::D)]).unwrap();
        let mc = MatrixChain::tensor(Exact::one(), vec![diag.clone(), diag]).unwrap();
        let tr = gen_trace(&mc, &ExactRing).unwrap();
        let want = Chain::tensor(Exact::one(), &[g(Gen::A), g(Gen::A)])
            .unwrap()
            .add(&Chain::tensor(Exact::one(), &[g(Gen::D), g(Gen::D)]).unwrap())
            .unwrap();
        assert_eq!(tr, want);
    }

    #[test]
    fn reduction_drops_scalar_slots() {
        let x = g(Gen::A).add(&NCPoly::exact_scalar(Exact::int(3)));
        let ch = Chain::tensor(Exact::one(), &[x, g(Gen::B)]).unwrap();
        let red = ch.reduce();
        assert_eq!(red, Chain::tensor(Exact::one(), &[g(Gen::A), g(Gen::B)]).unwrap());
        assert_eq!(red.reduce(), red);
    }

    #[test]
    fn cochain_basics() {
        let s = 0.5f64.sqrt();
        let sig = Twist::sigma_imag(1);
        let c = Cochain::new(0, sig, s, |t| t[0].degree() as f64);
        let ch = Chain::tensor(Exact::int(2), &[NCPoly::word(&[Gen::A, Gen::B])]).unwrap();
        assert!((c.evaluate(&ch).unwrap() - 4.0).abs() < 1e-15);
        let z = Cochain::zero(1, sig, s).coboundary();
        let ch3 = Chain::tensor(Exact::one(), &[g(Gen::A), g(Gen::B), g(Gen::C)]).unwrap();
        assert_eq!(z.evaluate(&ch3).unwrap(), 0.0);
        assert!(c.evaluate(&ch3).is_err());
    }
}
