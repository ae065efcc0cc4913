//! Phases of truncated operators, Chern characters of modular Fredholm
//! modules and of modular unitaries, and the twisted Toeplitz index.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::corep::Representation;
use crate::error::{Error, Result};
use crate::kernel::{self, LowModeConfig};
use crate::parallel;
use crate::qalgebra::{Coeff, Monomial, Poly, PolyMatrix};
use crate::qscalar::QContext;
use crate::sparse::{self, Sp};
use crate::twisted_cyclic::{gen_trace, Chain, MatrixChain, Twist};

/// Sparse vector as `(index, value)` pairs.
pub type SpVec = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct Phase {
    pub f: Sp,
    pub p: Sp,
    /// Orthonormal basis of the range of `p`, one vector per eigenvector.
    pub range_p: Vec<SpVec>,
    /// Eigenvalues below the threshold, sent to `+1`.
    pub zero_modes: usize,
}

pub(crate) fn union_find_groups(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Spectral data of one connected block of a sparse symmetric matrix.
#[derive(Debug, Clone)]
pub struct BlockEigen {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Columns are eigenvectors, rows follow `indices`.
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of every connected block of `d`.
pub fn block_eigen(d: &Sp) -> Vec<BlockEigen> {
    union_find_groups(d.rows(), d.iter().map(|(_, (i, j))| (i, j)))
        .into_iter()
        .map(|g| {
            let k = g.len();
            let eig = SymmetricEigen::new(DMatrix::from_fn(k, k, |a, b| sparse::entry(d, g[a], g[b])));
            BlockEigen { indices: g, values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
        })
        .collect()
}

/// `F = sign(D)` and `P = (F + 1)/2`, block by block.
pub fn phase(d: &Sp, ctx: &QContext) -> Result<Phase> {
    let n = d.rows();
    let asym = sparse::max_abs(&sparse::sub(d, &sparse::transpose(d)));
    if asym > ctx.residual_tol * sparse::max_abs(d).max(1.0) {
        return Err(Error::NotSelfAdjoint(asym));
    }
    let groups = union_find_groups(n, d.iter().map(|(_, (i, j))| (i, j)));
    let mut f_trips = Vec::new();
    let mut p_trips = Vec::new();
    let mut range_p = Vec::new();
    let mut zero_modes = 0;
    for g in groups {
        let k = g.len();
        let block = DMatrix::from_fn(k, k, |a, b| sparse::entry(d, g[a], g[b]));
        let eig = SymmetricEigen::new(block);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut signs = vec![0.0; k];
        for &e in &order {
            let lam = eig.eigenvalues[e];
            signs[e] = if lam.abs() < ctx.svd_threshold {
                zero_modes += 1;
                1.0
            } else {
                lam.signum()
            };
        }
        for a in 0..k {
            for b in 0..k {
                let mut fv = 0.0;
                let mut pv = 0.0;
                for e in 0..k {
                    let w = eig.eigenvectors[(a, e)] * eig.eigenvectors[(b, e)];
                    fv += signs[e] * w;
                    if signs[e] > 0.0 {
                        pv += w;
                    }
                }
                if fv.abs() > 1e-15 {
                    f_trips.push((g[a], g[b], fv));
                }
                if pv.abs() > 1e-15 {
                    p_trips.push((g[a], g[b], pv));
                }
            }
        }
        for &e in order.iter().filter(|&&e| signs[e] > 0.0) {
            let v: SpVec = (0..k)
                .map(|a| (g[a], eig.eigenvectors[(a, e)]))
                .filter(|(_, x)| x.abs() > 1e-15)
                .collect();
            range_p.push(v);
        }
    }
    Ok(Phase {
        f: sparse::from_triplets(n, n, f_trips),
        p: sparse::from_triplets(n, n, p_trips),
        range_p,
        zero_modes,
    })
}

/// Placement of one module basis vector: copy tag and index in the basis of
/// the underlying representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub copy: u8,
    pub index: usize,
}

pub struct ModuleSpec {
    pub rep: Arc<Representation>,
    pub slots: Vec<Slot>,
    pub d: Sp,
    pub delta: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub twist: Twist,
}

/// Truncated modular Fredholm module. The algebra acts through `rep` on each
/// copy independently.
pub struct FredholmModule {
    pub rep: Arc<Representation>,
    pub slots: Vec<Slot>,
    pub d: Sp,
    pub phase: Phase,
    pub delta: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub twist: Twist,
    pub levels: Vec<i32>,
    pub cutoff: i32,
    inverse: Vec<Vec<(u8, usize)>>,
    cache: Mutex<HashMap<Monomial, Arc<Sp>>>,
}

impl std::fmt::Debug for FredholmModule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FredholmModule(dim {}, cutoff {}, even {})", self.dim(), self.cutoff, self.gamma.is_some())
    }
}

impl FredholmModule {
    pub fn new(spec: ModuleSpec, ctx: &QContext) -> Result<Self> {
        let ModuleSpec { rep, slots, d, delta, gamma, twist } = spec;
        let n = slots.len();
        if d.rows() != n || delta.len() != n || gamma.as_ref().is_some_and(|g| g.len() != n) {
            return Err(Error::SizeMismatch("module data lengths".into()));
        }
        let phase = phase(&d, ctx)?;
        let f = &phase.f;
        let f2 = sparse::sub(&sparse::mul(f, f), &sparse::identity(n));
        let r = sparse::max_abs(&f2);
        if r > ctx.residual_tol {
            return Err(Error::NotUnitary(r));
        }
        let comm = sparse::sub(&sparse::mul_diag_right(f, &delta), &sparse::mul_diag_left(&delta, f));
        let r = sparse::max_abs(&comm);
        if r > ctx.residual_tol * delta.iter().fold(1.0f64, |a, b| a.max(*b)) {
            return Err(Error::Disagreement(format!("F does not commute with the weight ({r:e})")));
        }
        if let Some(g) = &gamma {
            let anti = sparse::add(&sparse::mul_diag_right(f, g), &sparse::mul_diag_left(g, f));
            let r = sparse::max_abs(&anti);
            if r > ctx.residual_tol {
                return Err(Error::Disagreement(format!("grading does not anticommute with F ({r:e})")));
            }
        }
        let mut inverse = vec![Vec::new(); rep.dim()];
        for (i, s) in slots.iter().enumerate() {
            inverse[s.index].push((s.copy, i));
        }
        let levels = slots.iter().map(|s| rep.basis.get(s.index).l2).collect();
        let cutoff = rep.basis.cutoff;
        Ok(Self { rep, slots, d, phase, delta, gamma, twist, levels, cutoff, inverse, cache: Mutex::new(HashMap::new()) })
    }

    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn is_even(&self) -> bool {
        self.gamma.is_some()
    }

    /// Place an operator on the underlying basis into every copy.
    pub fn lift(&self, x: &Sp) -> Sp {
        let n = self.dim();
        let mut trips = Vec::with_capacity(x.nnz() * 2);
        for (v, (r, c)) in x.iter() {
            for &(copy, j) in &self.inverse[c] {
                for &(copy_r, i) in &self.inverse[r] {
                    if copy_r == copy {
                        trips.push((i, j, *v));
                    }
                }
            }
        }
        sparse::from_triplets(n, n, trips)
    }

    /// Matrix of `x` on the module space.
    pub fn matrix<C: Coeff>(&self, x: &Poly<C>) -> Sp {
        self.lift(&self.rep.matrix(x))
    }

    /// `[F, x]` for a monomial, cached.
    pub fn commutator(&self, m: &Monomial) -> Arc<Sp> {
        if let Some(hit) = self.cache.lock().unwrap().get(m) {
            return hit.clone();
        }
        let x = self.lift(&self.rep.monomial(m));
        let f = &self.phase.f;
        let c = Arc::new(sparse::sub(&sparse::mul(f, &x), &sparse::mul(&x, f)));
        self.cache.lock().unwrap().insert(*m, c.clone());
        c
    }

    pub fn poly_commutator<C: Coeff>(&self, x: &Poly<C>) -> Sp {
        let n = self.dim();
        let mut acc = sparse::zero(n, n);
        for (m, c) in x.terms() {
            if m.is_one() {
                continue;
            }
            let k = c.to_complex(self.rep.s).re;
            acc = sparse::add(&acc, &sparse::scale(&self.commutator(m), k));
        }
        acc
    }

    fn check_parity(&self, degree: usize) -> Result<()> {
        let even = degree % 2 == 0;
        if even != self.is_even() {
            let module = if self.is_even() { "even" } else { "odd" };
            return Err(Error::Parity { module, degree });
        }
        Ok(())
    }
}

/// A truncated trace with its per-level contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSum {
    /// Sum of the evaluated levels.
    pub value: f64,
    pub tail_estimate: f64,
    /// Limit estimate from epsilon acceleration of the full-step partial sums.
    pub extrapolated: f64,
    pub extrapolation_error: f64,
    /// Contribution of each level `l2 = 0, 1, ...` that is evaluated exactly.
    pub levels: Vec<f64>,
}

impl LevelSum {
    pub fn from_levels(mut levels: Vec<f64>, factor: f64) -> Self {
        levels.iter_mut().for_each(|x| *x *= factor);
        let mut out = Self { value: 0.0, tail_estimate: 0.0, extrapolated: 0.0, extrapolation_error: 0.0, levels };
        out.refresh();
        out
    }

    pub fn zero(len: usize) -> Self {
        Self::from_levels(vec![0.0; len], 1.0)
    }

    pub fn refresh(&mut self) {
        self.value = self.levels.iter().sum();
        self.tail_estimate = geometric_tail(&self.levels);
        let (e, err) = epsilon_limit(&self.levels);
        self.extrapolated = e;
        self.extrapolation_error = err;
    }

    pub fn add(&mut self, o: &LevelSum, k: f64) {
        if self.levels.len() < o.levels.len() {
            self.levels.resize(o.levels.len(), 0.0);
        }
        for (a, b) in self.levels.iter_mut().zip(&o.levels) {
            *a += k * b;
        }
        self.refresh();
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.levels.iter_mut().for_each(|x| *x *= k);
        self.refresh();
        self
    }

    pub fn truncated(mut self, len: usize) -> Self {
        self.levels.truncate(len);
        self.refresh();
        self
    }
}

/// Tail of a level series from the full-step ratio of its last four levels.
pub fn geometric_tail(levels: &[f64]) -> f64 {
    let n = levels.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let last = (levels[n - 1] + levels[n - 2]).abs();
    let prev = (levels[n - 3] + levels[n - 4]).abs();
    if last == 0.0 {
        return 0.0;
    }
    let r = last / prev;
    if !(r < 1.0) {
        return f64::INFINITY;
    }
    last * r / (1.0 - r)
}

/// Wynn epsilon on the partial sums taken at full steps in `l` (at most seven
/// of them, ending at the last level). Returns the estimate and the change
/// from the previous even column.
pub fn epsilon_limit(levels: &[f64]) -> (f64, f64) {
    let n = levels.len();
    let total: f64 = levels.iter().sum();
    if n < 6 {
        return (total, f64::INFINITY);
    }
    let m = (n / 2).min(7);
    let mut col: Vec<f64> = (0..m).rev().map(|j| levels[..n - 2 * j].iter().sum()).collect();
    let scale = col.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let mut prev = vec![0.0; m + 1];
    let mut best = total;
    let mut err = (col[m - 1] - col[m - 2]).abs();
    let mut order = 0;
    while col.len() > 1 {
        let mut next = Vec::with_capacity(col.len() - 1);
        for i in 0..col.len() - 1 {
            let d = col[i + 1] - col[i];
            if d.abs() <= 1e-14 * scale {
                return (best, if order == 0 { 0.0 } else { err });
            }
            next.push(prev[i + 1] + 1.0 / d);
        }
        prev = col;
        col = next;
        order += 1;
        if order % 2 == 0 {
            let e = *col.last().expect("nonempty");
            err = (e - best).abs();
            best = e;
        }
    }
    (best, err)
}

fn selection(n: usize, cols: &[usize]) -> Sp {
    sparse::from_triplets(n, cols.len(), cols.iter().enumerate().map(|(t, &j)| (j, t, 1.0)))
}

/// Level sums of `diag(w gamma F c_0 ... c_n)` over columns with
/// `level + reach <= cutoff`.
fn level_trace(f: &Sp, w: &[f64], gamma: Option<&[f64]>, levels: &[i32], cutoff: i32, reach: i32, comms: &[&Sp]) -> Vec<f64> {
    let n = f.rows();
    let top = cutoff - reach;
    if top < 0 {
        return Vec::new();
    }
    let cols: Vec<usize> = (0..n).filter(|&j| levels[j] <= top).collect();
    let mut x = selection(n, &cols);
    for c in comms.iter().rev() {
        x = sparse::mul(c, &x);
    }
    x = sparse::mul(f, &x);
    let mut out = vec![0.0; top as usize + 1];
    for (t, &j) in cols.iter().enumerate() {
        let v = sparse::entry(&x, j, t);
        if v != 0.0 {
            let g = gamma.map_or(1.0, |g| g[j]);
            out[levels[j] as usize] += w[j] * g * v;
        }
    }
    out
}

/// `1/2 phi(gamma F [F, x_0] ... [F, x_n])` on one tensor of polynomials.
pub fn chern_eval_tensor<C: Coeff>(fm: &FredholmModule, coeff: f64, slots: &[Poly<C>]) -> Result<LevelSum> {
    let degree = slots.len().checked_sub(1).ok_or(Error::DegreeZero)?;
    fm.check_parity(degree)?;
    let reach: i32 = slots.iter().map(|s| s.degree() as i32).sum();
    if reach > fm.cutoff {
        return Err(Error::InsufficientCutoff { need: reach, have: fm.cutoff });
    }
    if slots.iter().any(|s| s.drop_scalar().is_zero()) {
        return Ok(LevelSum::zero((fm.cutoff - reach) as usize + 1));
    }
    let comms: Vec<Sp> = slots.iter().map(|s| fm.poly_commutator(s)).collect();
    let refs: Vec<&Sp> = comms.iter().collect();
    let levels = level_trace(&fm.phase.f, &fm.delta, fm.gamma.as_deref(), &fm.levels, fm.cutoff, reach, &refs);
    Ok(LevelSum::from_levels(levels, 0.5 * coeff))
}

/// Linear extension of the Chern cochain over a chain of monomial tensors.
pub fn chern_eval<C: Coeff>(fm: &FredholmModule, ch: &Chain<C>) -> Result<LevelSum> {
    fm.check_parity(ch.degree())?;
    let s = fm.rep.s;
    let terms: Vec<(&Vec<Monomial>, f64)> = ch.terms().map(|(t, c)| (t, c.to_complex(s).re)).collect();
    let reach_max = terms.iter().map(|(t, _)| t.iter().map(|m| m.degree() as i32).sum::<i32>()).max().unwrap_or(0);
    if reach_max > fm.cutoff {
        return Err(Error::InsufficientCutoff { need: reach_max, have: fm.cutoff });
    }
    let parts = parallel::map(parallel::Exec::default(), terms, |(t, _)| {
        if t.iter().any(|m| m.is_one()) {
            return None;
        }
        let comms: Vec<Arc<Sp>> = t.iter().map(|m| fm.commutator(m)).collect();
        let refs: Vec<&Sp> = comms.iter().map(|c| c.as_ref()).collect();
        let reach = t.iter().map(|m| m.degree() as i32).sum::<i32>();
        let mut lv = level_trace(&fm.phase.f, &fm.delta, fm.gamma.as_deref(), &fm.levels, fm.cutoff, reach, &refs);
        lv.truncate((fm.cutoff - reach_max) as usize + 1);
        Some(LevelSum::from_levels(lv, 0.5))
    });
    let mut total = LevelSum::zero((fm.cutoff - reach_max) as usize + 1);
    for (p, (_, c)) in parts.iter().zip(ch.terms()) {
        if let Some(p) = p {
            total.add(p, c.to_complex(s).re);
        }
    }
    Ok(total)
}

/// The lifted module `F ⊗ 1_k` evaluated directly on a matrix chain.
pub fn chern_eval_matrix<C: Coeff>(fm: &FredholmModule, mc: &MatrixChain<C>) -> Result<LevelSum> {
    fm.check_parity(mc.degree)?;
    let k = mc.terms.first().map(|(_, s)| s[0].k).unwrap_or(1);
    let n = fm.dim();
    let f = block_diag_repeat(&fm.phase.f, k);
    let w: Vec<f64> = (0..k).flat_map(|_| fm.delta.iter().copied()).collect();
    let gamma: Option<Vec<f64>> = fm.gamma.as_ref().map(|g| (0..k).flat_map(|_| g.iter().copied()).collect());
    let levels: Vec<i32> = (0..k).flat_map(|_| fm.levels.iter().copied()).collect();
    let reach_max = mc.terms.iter().map(|(_, s)| s.iter().map(|m| m.degree() as i32).sum::<i32>()).max().unwrap_or(0);
    if reach_max > fm.cutoff {
        return Err(Error::InsufficientCutoff { need: reach_max, have: fm.cutoff });
    }
    let s = fm.rep.s;
    let mut total = LevelSum::zero((fm.cutoff - reach_max) as usize + 1);
    for (c, slots) in &mc.terms {
        let comms: Vec<Sp> = slots
            .iter()
            .map(|m| {
                let x = block_matrix(fm, m, n);
                sparse::sub(&sparse::mul(&f, &x), &sparse::mul(&x, &f))
            })
            .collect();
        let refs: Vec<&Sp> = comms.iter().collect();
        let mut lv = level_trace(&f, &w, gamma.as_deref(), &levels, fm.cutoff, reach_max, &refs);
        lv.truncate((fm.cutoff - reach_max) as usize + 1);
        total.add(&LevelSum::from_levels(lv, 0.5), c.to_complex(s).re);
    }
    Ok(total)
}

fn block_diag_repeat(a: &Sp, k: usize) -> Sp {
    let n = a.rows();
    sparse::from_triplets(
        n * k,
        n * k,
        (0..k).flat_map(|b| a.iter().map(move |(v, (i, j))| (b * n + i, b * n + j, *v))),
    )
}

/// Module matrix of a polynomial matrix on `C^k ⊗ H`.
fn block_matrix<C: Coeff>(fm: &FredholmModule, u: &PolyMatrix<C>, n: usize) -> Sp {
    let k = u.k;
    let mut trips = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let e = u.get(i, j);
            if e.is_zero() {
                continue;
            }
            let m = fm.matrix(e);
            trips.extend(m.iter().map(|(v, (r, c))| (i * n + r, j * n + c, *v)));
        }
    }
    sparse::from_triplets(n * k, n * k, trips)
}

fn unitarity_defect<C: Coeff>(u: &PolyMatrix<C>, s: f64) -> Result<f64> {
    let one = PolyMatrix::identity(u.k, u.get(0, 0).ring());
    let a = u.star().mul(u)?;
    let b = u.mul(&u.star())?;
    let mut worst = 0.0f64;
    for i in 0..u.k {
        for j in 0..u.k {
            worst = worst.max(a.get(i, j).sub(one.get(i, j)).max_coeff(s));
            worst = worst.max(b.get(i, j).sub(one.get(i, j)).max_coeff(s));
        }
    }
    Ok(worst)
}

/// `TR(u ⊗ u* ⊗ ... ⊗ u ⊗ u*)` with `2n` factors, reduced.
pub fn unitary_chern<C: Coeff>(u: &PolyMatrix<C>, n: usize, s: f64, tol: f64) -> Result<Chain<C>> {
    if n == 0 {
        return Err(Error::DegreeZero);
    }
    let r = unitarity_defect(u, s)?;
    if r > tol {
        return Err(Error::NotUnitary(r));
    }
    let us = u.star();
    let slots: Vec<PolyMatrix<C>> = (0..2 * n).map(|i| if i % 2 == 0 { u.clone() } else { us.clone() }).collect();
    let mc = MatrixChain::tensor(C::one(), slots)?;
    Ok(gen_trace(&mc, u.get(0, 0).ring())?.reduce())
}

/// `<Ch_{2n-1}(u), Ch^{2n-1}(F)>`, evaluated slot-wise on polynomial entries.
pub fn chern_pairing<C: Coeff>(fm: &FredholmModule, u: &PolyMatrix<C>, n: usize) -> Result<LevelSum> {
    let k = u.k;
    let us = u.star();
    let len = 2 * n;
    let reach = len as i32 * u.degree() as i32;
    if reach > fm.cutoff {
        return Err(Error::InsufficientCutoff { need: reach, have: fm.cutoff });
    }
    let mut cycles = Vec::new();
    let mut idx = vec![0usize; len];
    'outer: loop {
        let slots: Vec<Poly<C>> = (0..len)
            .map(|p| {
                let m = if p % 2 == 0 { u } else { &us };
                m.get(idx[p], idx[(p + 1) % len]).clone()
            })
            .collect();
        if slots.iter().all(|s| !s.drop_scalar().is_zero()) {
            cycles.push(slots);
        }
        let mut pos = 0;
        loop {
            if pos == len {
                break 'outer;
            }
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
    let parts = parallel::try_map(parallel::Exec::default(), cycles, |slots| chern_eval_tensor(fm, 1.0, &slots))?;
    let len = (fm.cutoff - reach) as usize + 1;
    let mut total = LevelSum::zero(len);
    for p in parts {
        total.add(&p.truncated(len), 1.0);
    }
    Ok(total)
}

/// `g_z = diag(q^{i z e_k})` for a right-modular unitary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularGroup {
    pub q: f64,
    pub exponents: Vec<f64>,
}

impl ModularGroup {
    pub fn at(&self, z: Complex64) -> Vec<Complex64> {
        let lnq = self.q.ln();
        self.exponents.iter().map(|e| (Complex64::i() * z * e * lnq).exp()).collect()
    }

    /// `g_{-i}`, positive.
    pub fn g_minus_i(&self) -> Vec<f64> {
        self.exponents.iter().map(|e| self.q.powf(*e)).collect()
    }
}

fn gz<C: Coeff>(u: &PolyMatrix<C>, z: Complex64, s: f64, tol: f64) -> Result<Vec<Complex64>> {
    let uc = u.sigma(Complex64::new(0.0, 0.0), s);
    let g = uc.star().mul(&u.sigma(z, s))?;
    g.is_scalar_diagonal(tol, s).map_err(|(row, col, p)| Error::NotModular { row, col, detail: format!("{p:?}") })
}

/// Verify right modularity: `u* sigma_z(u)` is a scalar diagonal group.
pub fn modular_check<C: Coeff>(u: &PolyMatrix<C>, s: f64, tol: f64) -> Result<ModularGroup> {
    let q = s * s;
    let g = gz(u, Complex64::new(0.0, -1.0), s, tol)?;
    let mut exponents = Vec::with_capacity(g.len());
    for (k, v) in g.iter().enumerate() {
        if v.im.abs() > tol || v.re <= 0.0 {
            return Err(Error::NotModular { row: k, col: k, detail: format!("g_(-i) entry {v} is not positive") });
        }
        exponents.push(v.re.ln() / q.ln());
    }
    let group = ModularGroup { q, exponents };
    for z in [Complex64::new(1.0, 0.0), Complex64::new(0.3, -0.7), Complex64::new(0.0, 0.5)] {
        let got = gz(u, z, s, tol)?;
        for (k, (a, b)) in got.iter().zip(group.at(z)).enumerate() {
            if (a - b).norm() > tol * (1.0 + b.norm()) {
                return Err(Error::NotModular { row: k, col: k, detail: format!("g_z at z={z} is {a}, not a one-parameter group") });
            }
        }
    }
    Ok(group)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub q: f64,
    pub unitary: String,
    pub cutoff: i32,
    pub svd_threshold: f64,
    /// Kernel dimensions of `PuP + 1 - P` and `Pu*P + 1 - P`.
    pub kernel_dims: [usize; 2],
    pub psi_trace: f64,
    pub phi_trace: f64,
    pub index_numeric: f64,
    pub index_closed: Option<f64>,
    pub abs_err: Option<f64>,
    pub stable: bool,
    /// Largest singular value classified as zero.
    pub sigma_zero_max: f64,
    /// `||W V - V (V* W V)||` for the kernel bases `V` and their weights `W`.
    pub centralizer_residual: f64,
    pub components: usize,
}

impl IndexReport {
    pub fn with_closed(mut self, closed: f64) -> Self {
        self.index_closed = Some(closed);
        self.abs_err = Some((self.index_numeric - closed).abs());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
struct KernelSide {
    dim: usize,
    trace: f64,
    sigma_zero_max: f64,
    centralizer_residual: f64,
    components: usize,
}

/// Kernel of `P x P + 1 - P` for the block operator `x` on `C^k ⊗ H`, restricted
/// to columns at levels `<= col_cutoff`.
fn kernel_side(fm: &FredholmModule, x: &Sp, k: usize, col_cutoff: i32, weights: &[f64], ctx: &QContext) -> Result<KernelSide> {
    let n = fm.dim();
    let big = n * k;
    let mut y_trips = Vec::new();
    let mut levels = Vec::new();
    let mut cols = Vec::new();
    let mut count = 0;
    for c in 0..k {
        for v in &fm.phase.range_p {
            let lvl = v.iter().map(|(i, _)| fm.levels[*i]).max().unwrap_or(0);
            y_trips.extend(v.iter().map(|(i, a)| (c * n + i, count, *a)));
            if lvl <= col_cutoff {
                cols.push(count);
                levels.push(lvl);
            }
            count += 1;
        }
    }
    let y = sparse::from_triplets(big, count, y_trips);
    let yc = sparse::mul(&y, &selection(count, &cols));
    let m = sparse::mul(&sparse::transpose(&y), &sparse::mul(x, &yc));
    let g = sparse::mul(&sparse::transpose(&m), &m);
    let diag = sparse::diagonal(&g);
    let sigma_max = diag.iter().fold(0.0f64, |a, b| a.max(*b)).sqrt();
    let thr = ctx.svd_threshold * sigma_max.max(f64::MIN_POSITIVE);
    let comps = kernel::components(&g, &levels, ctx.exec)?;
    let ncomp = comps.len();
    let items: Vec<(usize, kernel::Component)> = comps.into_iter().enumerate().collect();
    let found = parallel::try_map(ctx.exec, items, |(ci, comp)| {
        let cfg = LowModeConfig { tau_zero: thr * thr, gap: 1e3, extra: 4, max_iter: 40, seed: ci as u64 };
        let lm = kernel::low_modes(&comp.matrix, &cfg)?;
        if !lm.gap_ok {
            let zero = lm.values.last().copied().unwrap_or(0.0).sqrt();
            return Err(Error::NoGap { threshold: thr, zero, nonzero: zero * 1e3 });
        }
        Ok((comp.columns, lm))
    })?;
    let yct = sparse::transpose(&yc);
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut sigma_zero_max = 0.0f64;
    for (columns, lm) in &found {
        for (t, val) in lm.values.iter().enumerate() {
            sigma_zero_max = sigma_zero_max.max(val.sqrt());
            let mut v = vec![0.0; big];
            for (a, &col) in columns.iter().enumerate() {
                let coef = lm.vectors[(a, t)];
                if let Some(row) = yct.outer_view(col) {
                    for (i, yv) in row.iter() {
                        v[i] += coef * yv;
                    }
                }
            }
            vectors.push(v);
        }
    }
    let trace = vectors.iter().map(|v| v.iter().zip(weights).map(|(a, w)| w * a * a).sum::<f64>()).sum();
    let dim = vectors.len();
    let mut centralizer_residual = 0.0;
    if dim > 0 {
        let vm = DMatrix::from_fn(big, dim, |i, j| vectors[j][i]);
        let wv = DMatrix::from_fn(big, dim, |i, j| weights[i] * vectors[j][i]);
        let h = vm.transpose() * &wv;
        centralizer_residual = (&wv - &vm * h).norm();
    }
    Ok(KernelSide { dim, trace, sigma_zero_max, centralizer_residual, components: ncomp })
}

/// `psi(K_{PuP}) - phi(K_{Pu*P})` at column cutoff `cutoff`.
pub fn toeplitz_index<C: Coeff>(fm: &FredholmModule, u: &PolyMatrix<C>, cutoff: i32, label: &str, ctx: &QContext) -> Result<IndexReport> {
    let deg = u.degree() as i32;
    if cutoff < 0 {
        return Err(Error::InvalidConfig(format!("negative cutoff {cutoff}")));
    }
    if fm.cutoff < cutoff + deg {
        return Err(Error::InsufficientCutoff { need: cutoff + deg, have: fm.cutoff });
    }
    if fm.is_even() {
        return Err(Error::Parity { module: "even", degree: 1 });
    }
    let group = modular_check(u, ctx.s, 1e-9)?;
    let n = fm.dim();
    let k = u.k;
    let x = block_matrix(fm, u, n);
    let xs = sparse::transpose(&x);
    let g = group.g_minus_i();
    let psi_w: Vec<f64> = (0..k).flat_map(|c| {
        let gc = g[c];
        fm.delta.iter().map(move |d| gc * d)
    }).collect();
    let phi_w: Vec<f64> = (0..k).flat_map(|_| fm.delta.iter().copied()).collect();
    let run = |l: i32| -> Result<(KernelSide, KernelSide)> {
        Ok((kernel_side(fm, &x, k, l, &psi_w, ctx)?, kernel_side(fm, &xs, k, l, &phi_w, ctx)?))
    };
    let (a, b) = run(cutoff)?;
    let (a0, b0) = run((cutoff - 10).max(0))?;
    let close = |s: &KernelSide, t: &KernelSide| s.dim == t.dim && (s.trace - t.trace).abs() <= 1e-6 * (1.0 + s.trace.abs());
    let stable = close(&a, &a0) && close(&b, &b0);
    Ok(IndexReport {
        q: ctx.q,
        unitary: label.to_string(),
        cutoff,
        svd_threshold: ctx.svd_threshold,
        kernel_dims: [a.dim, b.dim],
        psi_trace: a.trace,
        phi_trace: b.trace,
        index_numeric: a.trace - b.trace,
        index_closed: None,
        abs_err: None,
        stable,
        sigma_zero_max: a.sigma_zero_max.max(b.sigma_zero_max),
        centralizer_residual: a.centralizer_residual.max(b.centralizer_residual),
        components: a.components + b.components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalgebra::{ExactRing, Gen, NCMatrix, NCPoly};

    fn ctx() -> QContext {
        QContext::new(0.5).unwrap()
    }

    #[test]
    fn phase_examples() {
        let d = sparse::diag(&[1.0, -2.0]);
        let ph = phase(&d, &ctx()).unwrap();
        assert_eq!(sparse::diagonal(&ph.f), vec![1.0, -1.0]);
        let d = sparse::from_triplets(3, 3, [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, -1.0), (2, 2, 0.0)]);
        let ph = phase(&d, &ctx()).unwrap();
        assert_eq!(ph.zero_modes, 1);
        let f2 = sparse::sub(&sparse::mul(&ph.f, &ph.f), &sparse::identity(3));
        assert!(sparse::max_abs(&f2) < 1e-12);
        let p2 = sparse::sub(&sparse::mul(&ph.p, &ph.p), &ph.p);
        assert!(sparse::max_abs(&p2) < 1e-12);
        let pf = sparse::sub(&sparse::scale(&sparse::add(&ph.f, &sparse::identity(3)), 0.5), &ph.p);
        assert!(sparse::max_abs(&pf) < 1e-12);
        assert_eq!(ph.range_p.len(), 2);
        let asym = sparse::from_triplets(2, 2, [(0, 1, 1.0)]);
        assert!(matches!(phase(&asym, &ctx()), Err(Error::NotSelfAdjoint(_))));
    }

    #[test]
    fn modular_group_of_fundamental() {
        let c = ctx();
        let u = NCMatrix::fundamental();
        let g = modular_check(&u, c.s, 1e-12).unwrap();
        assert!((g.exponents[0] - 0.5).abs() < 1e-12);
        assert!((g.exponents[1] + 0.5).abs() < 1e-12);
        let gmi = g.g_minus_i();
        assert!((gmi[0] - c.q.sqrt()).abs() < 1e-12 && (gmi[1] - 1.0 / c.q.sqrt()).abs() < 1e-12);
        for v in g.at(Complex64::new(0.0, 0.0)) {
            assert!((v - 1.0).norm() < 1e-15);
        }
        let bad = NCMatrix::new(1, vec![NCPoly::exact_gen(Gen::A)]).unwrap();
        assert!(matches!(modular_check(&bad, c.s, 1e-12), Err(Error::NotModular { .. })));
    }

    #[test]
    fn unitary_chern_examples() {
        let s = ctx().s;
        let one = NCMatrix::exact_identity(1);
        assert!(unitary_chern(&one, 1, s, 1e-12).unwrap().is_zero());
        let u = NCMatrix::fundamental();
        let ch = unitary_chern(&u, 1, s, 1e-12).unwrap();
        assert_eq!(ch.degree(), 1);
        let mut want = Chain::zero(1, &ExactRing);
        for i in 0..2 {
            for j in 0..2 {
                let t = Chain::tensor(crate::qscalar::Exact::one(), &[u.get(i, j).clone(), u.get(i, j).star()]).unwrap();
                want = want.add(&t).unwrap();
            }
        }
        assert_eq!(ch, want.reduce());
        assert_eq!(unitary_chern(&u, 2, s, 1e-12).unwrap().degree(), 3);
        let bad = NCMatrix::new(1, vec![NCPoly::exact_gen(Gen::A)]).unwrap();
        assert!(matches!(unitary_chern(&bad, 1, s, 1e-12), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn geometric_tail_examples() {
        let lv: Vec<f64> = (0..10).map(|i| 0.5f64.powi(i)).collect();
        let tail = geometric_tail(&lv);
        let exact: f64 = (10..200).map(|i| 0.5f64.powi(i)).sum();
        assert!((tail - exact).abs() < 1e-12);
        assert_eq!(geometric_tail(&[1.0, 1.0, 1.0, 1.0]), f64::INFINITY);
    }
}
