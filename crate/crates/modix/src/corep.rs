//! Truncated operators on the corepresentation basis `xi^l_{mn}`.
//!
//! Labels are doubled (`l2 = 2l` etc.). A truncation keeps `l2 <= cutoff`;
//! an operator of degree `d` is exact on the interior columns
//! `l2 <= cutoff - d`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qalgebra::{Coeff, Gen, Monomial, Poly};
use crate::qscalar::{qint, QContext};
use crate::sparse::{self, Sp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisVector {
    pub l2: i32,
    pub m2: i32,
    pub n2: i32,
}

impl BasisVector {
    pub fn new(l2: i32, m2: i32, n2: i32) -> Option<Self> {
        let ok = l2 >= 0
            && m2.abs() <= l2
            && n2.abs() <= l2
            && (l2 - m2).rem_euclid(2) == 0
            && (l2 - n2).rem_euclid(2) == 0;
        ok.then_some(Self { l2, m2, n2 })
    }

    pub fn l(&self) -> f64 {
        self.l2 as f64 / 2.0
    }
    pub fn m(&self) -> f64 {
        self.m2 as f64 / 2.0
    }
    pub fn n(&self) -> f64 {
        self.n2 as f64 / 2.0
    }

    pub fn shifted(&self, dl: i32, dm: i32, dn: i32) -> Option<Self> {
        Self::new(self.l2 + dl, self.m2 + dm, self.n2 + dn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    All,
    /// `n2 = +1`
    NPlus,
    /// `n2 = -1`
    NMinus,
}

impl Sector {
    fn admits(self, v: &BasisVector) -> bool {
        match self {
            Sector::All => true,
            Sector::NPlus => v.n2 == 1,
            Sector::NMinus => v.n2 == -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncBasis {
    pub cutoff: i32,
    pub sector: Sector,
    vecs: Vec<BasisVector>,
    index: HashMap<BasisVector, usize>,
}

pub fn build_basis(cutoff: i32, sector: Sector) -> Result<TruncBasis> {
    if cutoff < 0 {
        return Err(Error::InvalidConfig(format!("negative cutoff {cutoff}")));
    }
    let mut vecs = Vec::new();
    for l2 in 0..=cutoff {
        for m2 in (-l2..=l2).step_by(2) {
            for n2 in (-l2..=l2).step_by(2) {
                let v = BasisVector { l2, m2, n2 };
                if sector.admits(&v) {
                    vecs.push(v);
                }
            }
        }
    }
    let index = vecs.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    Ok(TruncBasis { cutoff, sector, vecs, index })
}

impl TruncBasis {
    pub fn dim(&self) -> usize {
        self.vecs.len()
    }

    pub fn vectors(&self) -> &[BasisVector] {
        &self.vecs
    }

    pub fn get(&self, i: usize) -> BasisVector {
        self.vecs[i]
    }

    pub fn index_of(&self, v: &BasisVector) -> Option<usize> {
        self.index.get(v).copied()
    }

    /// Columns whose image under a degree-`deg` operator stays inside.
    pub fn interior_mask(&self, deg: u32) -> Vec<bool> {
        self.vecs.iter().map(|v| v.l2 + deg as i32 <= self.cutoff).collect()
    }

    fn op_from_rule(&self, rule: impl Fn(&BasisVector) -> Vec<(Option<BasisVector>, f64)>) -> Sp {
        let n = self.dim();
        let mut trips = Vec::new();
        for (j, v) in self.vecs.iter().enumerate() {
            for (t, c) in rule(v) {
                if let Some(i) = t.and_then(|t| self.index_of(&t)) {
                    trips.push((i, j, c));
                }
            }
        }
        sparse::from_triplets(n, n, trips)
    }
}

/// Matrix of an operator on a truncated basis.
#[derive(Debug, Clone)]
pub struct TruncOp {
    pub basis: Arc<TruncBasis>,
    pub mat: Sp,
    pub diagonal: bool,
    pub selfadjoint: bool,
    /// Number of levels the operator can move a vector; sets the interior.
    pub deg: u32,
}

impl TruncOp {
    pub fn new(basis: Arc<TruncBasis>, mat: Sp, deg: u32, tol: f64) -> Self {
        let diagonal = mat.iter().all(|(v, (i, j))| i == j || v.abs() <= tol);
        let diff = sparse::sub(&mat, &sparse::transpose(&mat));
        let selfadjoint = sparse::max_abs(&diff) <= tol;
        Self { basis, mat, diagonal, selfadjoint, deg }
    }

    pub fn interior_mask(&self) -> Vec<bool> {
        self.basis.interior_mask(self.deg)
    }

    /// Largest entry of `self - other` on interior columns of both.
    pub fn interior_residual(&self, other: &TruncOp) -> f64 {
        let mask = self.basis.interior_mask(self.deg.max(other.deg));
        sparse::max_abs_masked(&sparse::sub(&self.mat, &other.mat), &mask)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        sparse::matvec(&self.mat, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EFK {
    E,
    F,
    K,
    KInv,
}

pub fn op_efk(which: EFK, basis: &Arc<TruncBasis>, ctx: &QContext) -> TruncOp {
    let qi = |z: f64| qint(z, ctx);
    let mat = basis.op_from_rule(|v| {
        let (l, n) = (v.l(), v.n());
        match which {
            EFK::E => vec![(v.shifted(0, 0, 2), (qi(l - n) * qi(l + n + 1.0)).max(0.0).sqrt())],
            EFK::F => vec![(v.shifted(0, 0, -2), (qi(l + n) * qi(l - n + 1.0)).max(0.0).sqrt())],
            EFK::K => vec![(Some(*v), ctx.q.powf(n))],
            EFK::KInv => vec![(Some(*v), ctx.q.powf(-n))],
        }
    });
    TruncOp::new(basis.clone(), mat, 0, ctx.residual_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepKind {
    Pi,
    Rho,
}

fn ratio_sqrt(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        (num / den).max(0.0).sqrt()
    }
}

/// Matrices of `a` and `c` in the GNS representation.
///
/// The overall sign of `c` is chosen so that `pi(c)` and `rho(c)` agree
/// asymptotically; negating `b` and `c` together is an automorphism.
fn pi_ac(basis: &TruncBasis, ctx: &QContext) -> (Sp, Sp) {
    let q = ctx.q;
    let qi = |z: f64| qint(z, ctx);
    let a = basis.op_from_rule(|v| {
        let (l, m, n) = (v.l(), v.m(), v.n());
        let ap = q.powf((2.0 * l + m + n + 1.0) / 2.0)
            * ratio_sqrt(qi(l - m + 1.0) * qi(l - n + 1.0), qi(2.0 * l + 1.0) * qi(2.0 * l + 2.0));
        let am = q.powf((-2.0 * l + m + n - 1.0) / 2.0)
            * ratio_sqrt(qi(l + m) * qi(l + n), qi(2.0 * l) * qi(2.0 * l + 1.0));
        vec![(v.shifted(1, -1, -1), ap), (v.shifted(-1, -1, -1), am)]
    });
    let c = basis.op_from_rule(|v| {
        let (l, m, n) = (v.l(), v.m(), v.n());
        let gp = q.powf((m + n - 1.0) / 2.0)
            * ratio_sqrt(qi(l + m + 1.0) * qi(l - n + 1.0), qi(2.0 * l + 1.0) * qi(2.0 * l + 2.0));
        let gm = q.powf((m + n - 1.0) / 2.0)
            * ratio_sqrt(qi(l - m) * qi(l + n), qi(2.0 * l) * qi(2.0 * l + 1.0));
        vec![(v.shifted(1, 1, -1), -gp), (v.shifted(-1, 1, -1), gm)]
    });
    (a, c)
}

fn rho_gens(basis: &TruncBasis, ctx: &QContext) -> [Sp; 4] {
    let q = ctx.q;
    let a = basis.op_from_rule(|v| {
        vec![(v.shifted(-1, -1, -1), (1.0 - q.powf(v.l() * 2.0 + v.m() * 2.0)).max(0.0).sqrt())]
    });
    let b = basis.op_from_rule(|v| vec![(v.shifted(1, -1, 1), -q.powf(v.l() + v.m() + 1.0))]);
    let c = basis.op_from_rule(|v| vec![(v.shifted(-1, 1, -1), q.powf(v.l() + v.m()))]);
    let d = basis.op_from_rule(|v| {
        vec![(v.shifted(1, 1, 1), (1.0 - q.powf(2.0 * v.l() + 2.0 * v.m() + 2.0)).max(0.0).sqrt())]
    });
    [a, b, c, d]
}

/// A representation of the generators on a truncated basis, with a cache of
/// monomial matrices.
pub struct Representation {
    pub kind: RepKind,
    pub basis: Arc<TruncBasis>,
    pub s: f64,
    gens: [Sp; 4],
    cache: Mutex<HashMap<Monomial, Arc<Sp>>>,
}

impl std::fmt::Debug for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Representation({:?}, cutoff {})", self.kind, self.basis.cutoff)
    }
}

impl Representation {
    pub fn new(kind: RepKind, basis: Arc<TruncBasis>, ctx: &QContext) -> Self {
        let gens = match kind {
            RepKind::Pi => {
                let (a, c) = pi_ac(&basis, ctx);
                let b = sparse::scale(&sparse::transpose(&c), -ctx.q);
                let d = sparse::transpose(&a);
                [a, b, c, d]
            }
            RepKind::Rho => rho_gens(&basis, ctx),
        };
        Self { kind, basis, s: ctx.s, gens, cache: Mutex::new(HashMap::new()) }
    }

    pub fn pi(cutoff: i32, ctx: &QContext) -> Result<Self> {
        Ok(Self::new(RepKind::Pi, Arc::new(build_basis(cutoff, Sector::All)?), ctx))
    }

    pub fn rho(cutoff: i32, ctx: &QContext) -> Result<Self> {
        Ok(Self::new(RepKind::Rho, Arc::new(build_basis(cutoff, Sector::All)?), ctx))
    }

    pub fn gen(&self, g: Gen) -> &Sp {
        &self.gens[g as usize]
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn monomial(&self, m: &Monomial) -> Arc<Sp> {
        if let Some(hit) = self.cache.lock().unwrap().get(m) {
            return hit.clone();
        }
        let word = m.word();
        let mat = match word.split_last() {
            None => sparse::identity(self.dim()),
            Some((last, rest)) => {
                let prefix = Monomial::from_normal_word(rest).expect("prefix of a normal word");
                sparse::mul(&self.monomial(&prefix), self.gen(*last))
            }
        };
        let mat = Arc::new(mat);
        self.cache.lock().unwrap().insert(*m, mat.clone());
        mat
    }

    /// Matrix of a real-coefficient polynomial.
    pub fn matrix<C: Coeff>(&self, x: &Poly<C>) -> Sp {
        let n = self.dim();
        let mut acc = sparse::zero(n, n);
        for (m, c) in x.terms() {
            let k = c.to_complex(self.s).re;
            acc = sparse::add(&acc, &sparse::scale(&self.monomial(m), k));
        }
        acc
    }

    pub fn apply<C: Coeff>(&self, x: &Poly<C>, tol: f64) -> TruncOp {
        TruncOp::new(self.basis.clone(), self.matrix(x), x.degree(), tol)
    }

    /// `x` applied to the vector `v`, monomial by monomial.
    pub fn apply_to_vec<C: Coeff>(&self, x: &Poly<C>, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (m, c) in x.terms() {
            let mut w = v.to_vec();
            for g in m.word().iter().rev() {
                w = sparse::matvec(self.gen(*g), &w);
            }
            let k = c.to_complex(self.s).re;
            for (o, x) in out.iter_mut().zip(w) {
                *o += k * x;
            }
        }
        out
    }

    /// Residuals of the defining relations and of unitarity on interior
    /// columns (degree-2 interior).
    pub fn relation_residuals(&self, q: f64) -> Vec<(&'static str, f64)> {
        let [a, b, c, d] = &self.gens;
        let mask = self.basis.interior_mask(2);
        let n = self.dim();
        let id = sparse::identity(n);
        let m = sparse::mul;
        let lin = |x: &Sp, y: &Sp, k: f64| sparse::sub(x, &sparse::scale(y, k));
        let res = |x: Sp| sparse::max_abs_masked(&x, &mask);
        let bt = sparse::transpose(b);
        let ct = sparse::transpose(c);
        let at = sparse::transpose(a);
        let dt = sparse::transpose(d);
        vec![
            ("ab-qba", res(lin(&m(a, b), &m(b, a), q))),
            ("ac-qca", res(lin(&m(a, c), &m(c, a), q))),
            ("bd-qdb", res(lin(&m(b, d), &m(d, b), q))),
            ("cd-qdc", res(lin(&m(c, d), &m(d, c), q))),
            ("bc-cb", res(lin(&m(b, c), &m(c, b), 1.0))),
            ("ad-qbc-1", res(sparse::sub(&lin(&m(a, d), &m(b, c), q), &id))),
            ("da-bc/q-1", res(sparse::sub(&lin(&m(d, a), &m(b, c), 1.0 / q), &id))),
            ("a*-d", res(sparse::sub(&at, d))),
            ("b*+qc", res(sparse::add(&bt, &sparse::scale(c, q)))),
            ("c*+b/q", res(sparse::add(&ct, &sparse::scale(b, 1.0 / q)))),
            ("d*-a", res(sparse::sub(&dt, a))),
        ]
    }

    /// `||pi(u)^* pi(u) - 1||` and `||pi(u) pi(u)^* - 1||` for `u = [[a,b],[c,d]]`
    /// on interior columns.
    pub fn unitarity_residual(&self) -> f64 {
        let [a, b, c, d] = &self.gens;
        let t = sparse::transpose;
        let m = sparse::mul;
        let mask = self.basis.interior_mask(2);
        let n = self.dim();
        let id = sparse::identity(n);
        let z = sparse::zero(n, n);
        let u = sparse::block2(a, b, c, d);
        let ut = t(&u);
        let id2 = sparse::block2(&id, &z, &z, &id);
        let mask2: Vec<bool> = mask.iter().chain(mask.iter()).copied().collect();
        let r1 = sparse::max_abs_masked(&sparse::sub(&m(&ut, &u), &id2), &mask2);
        let r2 = sparse::max_abs_masked(&sparse::sub(&m(&u, &ut), &id2), &mask2);
        r1.max(r2)
    }

    /// Compare the matrix of `sigma_z(x)` with `K^{-iz} pi(x) K^{iz}` on
    /// interior columns.
    pub fn intertwining_residual<C: Coeff>(&self, x: &Poly<C>, z: Complex64, q: f64) -> f64 {
        let lnq = q.ln();
        let mi = Complex64::new(0.0, -1.0);
        let mask = self.basis.interior_mask(x.degree());
        let mut diff: HashMap<(usize, usize), Complex64> = HashMap::new();
        for (mono, c) in x.terms() {
            let c = c.to_complex(self.s);
            let f = (mi * z * (mono.wt2() as f64 / 2.0) * lnq).exp();
            for (v, (i, j)) in self.monomial(mono).iter() {
                if !mask[j] {
                    continue;
                }
                let dn = (self.basis.get(i).n2 - self.basis.get(j).n2) as f64 / 2.0;
                let g = (mi * z * dn * lnq).exp();
                *diff.entry((i, j)).or_default() += c * *v * (f - g);
            }
        }
        diff.values().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Haar state by vacuum expectation.
#[derive(Debug)]
pub struct Haar {
    rep: Representation,
}

impl Haar {
    pub fn new(max_degree: u32, ctx: &QContext) -> Result<Self> {
        Ok(Self { rep: Representation::pi(2 * max_degree as i32, ctx)? })
    }

    pub fn eval<C: Coeff>(&self, x: &Poly<C>) -> Result<f64> {
        let need = 2 * x.degree() as i32;
        if need > self.rep.basis.cutoff {
            return Err(Error::InsufficientCutoff { need, have: self.rep.basis.cutoff });
        }
        let mut vac = vec![0.0; self.rep.dim()];
        vac[0] = 1.0;
        Ok(self.rep.apply_to_vec(x, &vac)[0])
    }
}

/// `<xi^0_{00}, pi(x) xi^0_{00}>` at a cutoff of twice the degree of `x`.
pub fn haar<C: Coeff>(x: &Poly<C>, ctx: &QContext) -> Result<f64> {
    Haar::new(x.degree(), ctx)?.eval(x)
}

/// Per-level contributions `sum |((pi(g) - rho(g)) K^{-1})_{ij}|` over columns
/// `j` at level `l2`, for interior levels. Bounds the trace norm level by level.
pub fn decay_profile(g: Gen, cutoff: i32, ctx: &QContext) -> Result<Vec<f64>> {
    let pi = Representation::pi(cutoff, ctx)?;
    let rho = Representation::new(RepKind::Rho, pi.basis.clone(), ctx);
    let kinv = op_efk(EFK::KInv, &pi.basis, ctx);
    let diff = sparse::mul(&sparse::sub(pi.gen(g), rho.gen(g)), &kinv.mat);
    let mut levels = vec![0.0; cutoff as usize];
    for (v, (_, j)) in diff.iter() {
        let l2 = pi.basis.get(j).l2;
        if l2 < cutoff {
            levels[l2 as usize] += v.abs();
        }
    }
    Ok(levels)
}

/// Ratios `profile[l2 + 2] / profile[l2]`, i.e. per unit step in `l`.
pub fn decay_ratios(profile: &[f64]) -> Vec<(i32, f64)> {
    (0..profile.len().saturating_sub(2))
        .filter(|&i| profile[i] > 0.0)
        .map(|i| (i as i32, profile[i + 2] / profile[i]))
        .collect()
}
