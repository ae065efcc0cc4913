//! The modular spectral triple over quantum SU(2) on two copies of the Haar
//! GNS space, its auxiliary operators `T` and `R`, the cocycles that compute
//! its Chern character, corepresentation unitaries and the index experiments.
//!
//! The two-copy space is laid out as `top = i`, `bottom = N + i` for basis
//! index `i` of the single copy.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chern_index::{self, block_eigen, chern_eval_tensor, chern_pairing, geometric_tail, FredholmModule, IndexReport, LevelSum, ModuleSpec, Slot};
use crate::corep::{op_efk, RepKind, Representation, TruncBasis, EFK};
use crate::error::{Error, Result};
use crate::parallel;
use crate::qalgebra::{Gen, Monomial, NCMatrix, NumMatrix, NumPoly, Poly};
use crate::qscalar::{qint_base, QContext};
use crate::sparse::{self, Sp};
use crate::twisted_cyclic::Twist;

pub const MAX_SPIN2: u32 = 4;

/// `C = q^{1/2}/(1-q^{1/2})^2 + q^{3/2}/(1-q^{3/2})^2`.
pub fn local_constant(q: f64) -> f64 {
    let h = q.sqrt();
    let t = q.powf(1.5);
    h / (1.0 - h).powi(2) + t / (1.0 - t).powi(2)
}

/// Closed form of `Tr(R)`.
pub fn trace_r_closed(q: f64) -> f64 {
    local_constant(q) / (1.0 / q - q)
}

/// `C/2 ((2l+1) - [2l+1]_{q^{1/2}})`.
pub fn closed_index(l2: u32, q: f64) -> f64 {
    let d = l2 as f64 + 1.0;
    0.5 * local_constant(q) * (d - qint_base(d, q.sqrt()))
}

/// The q-Dirac operator on two copies of a single-copy basis.
pub fn build_dq(ctx: &QContext, basis: &Arc<TruncBasis>) -> Sp {
    let q = ctx.q;
    let n = basis.dim();
    let e = op_efk(EFK::E, basis, ctx).mat;
    let f = op_efk(EFK::F, basis, ctx).mat;
    let kinv = op_efk(EFK::KInv, basis, ctx).mat;
    let id = sparse::identity(n);
    let k2 = sparse::mul(&kinv, &kinv);
    let den = q - 1.0 / q;
    let tl = sparse::scale(&sparse::sub(&sparse::scale(&k2, 1.0 / q), &id), 1.0 / den);
    let br = sparse::scale(&sparse::sub(&id, &sparse::scale(&k2, q)), 1.0 / den);
    let tr = sparse::scale(&sparse::mul(&f, &kinv), q.sqrt());
    let bl = sparse::scale(&sparse::mul(&e, &kinv), 1.0 / q.sqrt());
    sparse::block2(&tl, &tr, &bl, &br)
}

/// Two-copy weights `K^{-1} q^{-1/2}` and `K^{-1} q^{1/2}`.
pub fn build_delta(ctx: &QContext, basis: &TruncBasis) -> Vec<f64> {
    let q = ctx.q;
    let top = basis.vectors().iter().map(|v| q.powf(-v.n() - 0.5));
    let bottom = basis.vectors().iter().map(|v| q.powf(-v.n() + 0.5));
    top.chain(bottom).collect()
}

/// Diagonals of `T = q^{l+1/2}` and `R = (T^2 K^{-2})(1 - T^2)^{-1} T` on one copy.
pub fn op_t_r(ctx: &QContext, basis: &TruncBasis) -> (Vec<f64>, Vec<f64>) {
    let q = ctx.q;
    let t: Vec<f64> = basis.vectors().iter().map(|v| q.powf(v.l() + 0.5)).collect();
    let r = basis
        .vectors()
        .iter()
        .zip(&t)
        .map(|(v, t)| t * t * q.powf(-2.0 * v.n()) / (1.0 - t * t) * t)
        .collect();
    (t, r)
}

/// Partial sums of `Tr(R)` by level.
pub fn trace_r(ctx: &QContext, cutoff: i32) -> Result<LevelSum> {
    let basis = crate::corep::build_basis(cutoff, crate::corep::Sector::All)?;
    let (_, r) = op_t_r(ctx, &basis);
    let mut levels = vec![0.0; cutoff as usize + 1];
    for (v, x) in basis.vectors().iter().zip(&r) {
        levels[v.l2 as usize] += x;
    }
    Ok(LevelSum::from_levels(levels, 1.0))
}

pub struct SUq2Triple {
    pub ctx: QContext,
    pub fm: FredholmModule,
    pub rho: Representation,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    /// Residual of `F = (q^{-1}-q) D_q (1-T^2)^{-1} T Delta^{-1}`.
    pub phase_identity_residual: f64,
}

impl std::fmt::Debug for SUq2Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SUq2Triple(q {}, cutoff {})", self.ctx.q, self.cutoff())
    }
}

impl SUq2Triple {
    pub fn new(ctx: &QContext, cutoff: i32) -> Result<Self> {
        let pi = Arc::new(Representation::pi(cutoff, ctx)?);
        let basis = pi.basis.clone();
        let n = basis.dim();
        let dq = build_dq(ctx, &basis);
        let delta = build_delta(ctx, &basis);
        let slots = (0..2u8).flat_map(|copy| (0..n).map(move |index| Slot { copy, index })).collect();
        let fm = FredholmModule::new(
            ModuleSpec { rep: pi, slots, d: dq, delta, gamma: None, twist: Twist::sigma_imag(1) },
            ctx,
        )?;
        let rho = Representation::new(RepKind::Rho, basis.clone(), ctx);
        let (t, r) = op_t_r(ctx, &basis);
        let mut triple = Self { ctx: ctx.clone(), fm, rho, t, r, phase_identity_residual: 0.0 };
        triple.phase_identity_residual = triple.phase_identity();
        if triple.phase_identity_residual > 1e-8 {
            return Err(Error::Disagreement(format!(
                "phase of D_q differs from (q^-1-q) D_q (1-T^2)^-1 T Delta^-1 by {:e}",
                triple.phase_identity_residual
            )));
        }
        Ok(triple)
    }

    pub fn cutoff(&self) -> i32 {
        self.fm.cutoff
    }

    pub fn dq(&self) -> &Sp {
        &self.fm.d
    }

    pub fn delta(&self) -> &[f64] {
        &self.fm.delta
    }

    pub fn f(&self) -> &Sp {
        &self.fm.phase.f
    }

    fn phase_identity(&self) -> f64 {
        let q = self.ctx.q;
        let t2: Vec<f64> = self.t.iter().chain(&self.t).copied().collect();
        let w: Vec<f64> = t2.iter().zip(self.delta()).map(|(t, d)| (1.0 / q - q) * t / (1.0 - t * t) / d).collect();
        let alt = sparse::mul_diag_right(self.dq(), &w);
        sparse::max_abs(&sparse::sub(&alt, self.f()))
    }

    fn levels_single(&self) -> Vec<i32> {
        self.fm.rep.basis.vectors().iter().map(|v| v.l2).collect()
    }

    fn diag_levels(&self, prod: &Sp, w: &[f64], levels: &[i32], top: i32) -> Vec<f64> {
        let mut out = vec![0.0; top.max(-1) as usize + 1];
        if top < 0 {
            return out;
        }
        for (j, (wj, lj)) in w.iter().zip(levels).enumerate() {
            if *lj <= top {
                out[*lj as usize] += wj * sparse::entry(prod, j, j);
            }
        }
        out
    }

    fn need(&self, deg: u32) -> Result<i32> {
        let top = self.cutoff() - deg as i32;
        if top < 3 {
            return Err(Error::InsufficientCutoff { need: deg as i32 + 3, have: self.cutoff() });
        }
        Ok(top)
    }

    /// `Ch^1(x, y) = 1/2 Tr(Delta F [F, pi(x)] [F, pi(y)])`.
    pub fn chern1(&self, x: &NumPoly, y: &NumPoly) -> Result<LevelSum> {
        chern_eval_tensor(&self.fm, 1.0, &[x.clone(), y.clone()])
    }

    /// `Lambda(x, y) = C h(x y - sigma_i(y) x)`.
    pub fn local_cocycle(&self, x: &NumPoly, y: &NumPoly) -> Result<f64> {
        local_cocycle(x, y, &self.ctx)
    }

    fn trace_r_levels(&self, m: &Sp, top: i32) -> LevelSum {
        LevelSum::from_levels(self.diag_levels(m, &self.r, &self.levels_single(), top), 1.0)
    }

    fn gamma_levels(&self, pi: &Sp, rho: &Sp, top: i32) -> LevelSum {
        let prod = sparse::mul(&self.fm.lift(&sparse::sub(pi, rho)), self.f());
        LevelSum::from_levels(self.diag_levels(&prod, self.delta(), &self.fm.levels, top), 1.0)
    }

    /// `Tr(R rho(x))` on one copy.
    pub fn trace_rho_r(&self, x: &NumPoly) -> Result<LevelSum> {
        let top = self.need(x.degree())?;
        Ok(self.trace_r_levels(&self.rho.matrix(x), top))
    }

    /// `Gamma(x) = Tr(Delta (pi(x) - rho(x)) F)`.
    pub fn gamma_cochain(&self, x: &NumPoly) -> Result<LevelSum> {
        let top = self.need(x.degree())?;
        Ok(self.gamma_levels(&self.fm.rep.matrix(x), &self.rho.matrix(x), top))
    }

    /// `Gamma(b_sigma(x ⊗ y))` with both representations applied factorwise.
    pub fn gamma_twisted_b(&self, x: &NumPoly, y: &NumPoly) -> Result<LevelSum> {
        let top = self.need(x.degree() + y.degree())?;
        let (pb, rb) = self.twisted_b_ops(x, y);
        Ok(self.gamma_levels(&pb, &rb, top))
    }

    /// `rho(x) rho(y) - rho(sigma_i(y)) rho(x)` and the same for `pi`.
    fn twisted_b_ops(&self, x: &NumPoly, y: &NumPoly) -> (Sp, Sp) {
        let sy = y.sigma_imag(1);
        let op = |r: &Representation| {
            let (rx, ry, rs) = (r.matrix(x), r.matrix(y), r.matrix(&sy));
            sparse::sub(&sparse::mul(&rx, &ry), &sparse::mul(&rs, &rx))
        };
        (op(&self.fm.rep), op(&self.rho))
    }

    /// `alpha(x, y)` in the two-copy form and in the local form
    /// `(q^{-1} - q) Tr(rho(b_sigma(x, y)) R)`, with `rho` applied to each
    /// factor of `b_sigma(x ⊗ y)`.
    pub fn alpha_cocycle(&self, x: &NumPoly, y: &NumPoly) -> Result<AlphaForms> {
        let q = self.ctx.q;
        let top = self.need(x.degree() + y.degree())?;
        let f = self.f();
        let rx = self.fm.lift(&self.rho.matrix(x));
        let ry = self.fm.lift(&self.rho.matrix(y));
        let cx = sparse::sub(&sparse::mul(f, &rx), &sparse::mul(&rx, f));
        let cy = sparse::sub(&sparse::mul(f, &ry), &sparse::mul(&ry, f));
        let prod = sparse::mul(f, &sparse::mul(&cx, &cy));
        let two_copy = LevelSum::from_levels(self.diag_levels(&prod, self.delta(), &self.fm.levels, top), 0.5);
        let (_, rb) = self.twisted_b_ops(x, y);
        let local = self.trace_r_levels(&rb, top).scaled(1.0 / q - q);
        let normal_form = self.trace_r_levels(&self.rho.matrix(&twisted_b1(x, y)), top).scaled(1.0 / q - q);
        let difference = (two_copy.extrapolated - local.extrapolated).abs();
        Ok(AlphaForms { two_copy, local, normal_form, difference })
    }

    /// `Xi(z) = (q^{-1} - q) Tr(rho(z) R) - C h(z) - Gamma(z)` on an element.
    pub fn xi(&self, z: &NumPoly) -> Result<LevelSum> {
        let q = self.ctx.q;
        let top = self.need(z.degree())?;
        let (pz, rz) = (self.fm.rep.matrix(z), self.rho.matrix(z));
        Ok(self.xi_levels(&pz, &rz, crate::corep::haar(z, &self.ctx)?, top, q))
    }

    fn xi_levels(&self, pz: &Sp, rz: &Sp, h: f64, top: i32, q: f64) -> LevelSum {
        let mut out = self.trace_r_levels(rz, top).scaled(1.0 / q - q);
        out.add(&self.gamma_levels(pz, rz, top), -1.0);
        if let Some(first) = out.levels.first_mut() {
            *first -= local_constant(q) * h;
        }
        out.refresh();
        out
    }

    /// `Xi(b_sigma(x ⊗ y))` with both representations applied factorwise.
    pub fn xi_twisted_b(&self, x: &NumPoly, y: &NumPoly) -> Result<LevelSum> {
        let q = self.ctx.q;
        let top = self.need(x.degree() + y.degree())?;
        let (pb, rb) = self.twisted_b_ops(x, y);
        let h = crate::corep::haar(&twisted_b1(x, y), &self.ctx)?;
        Ok(self.xi_levels(&pb, &rb, h, top, q))
    }

    /// `Ch^1(x, y) - Lambda(x, y) - Xi(b_sigma(x ⊗ y))`.
    pub fn transgression(&self, x: &NumPoly, y: &NumPoly) -> Result<Transgression> {
        let ch = self.chern1(x, y)?;
        let lam = self.local_cocycle(x, y)?;
        let xi = self.xi_twisted_b(x, y)?;
        let xi_nf = self.xi(&twisted_b1(x, y))?;
        let residual = ch.extrapolated - lam - xi.extrapolated;
        Ok(Transgression {
            chern: ch.extrapolated,
            local: lam,
            xi: xi.extrapolated,
            residual,
            partial_residual: ch.value - lam - xi.value,
            normal_form_residual: ch.extrapolated - lam - xi_nf.extrapolated,
            tail_estimate: ch.tail_estimate + xi.tail_estimate,
            extrapolation_error: ch.extrapolation_error + xi.extrapolation_error,
        })
    }

    /// Transgression residuals over a list of pairs, in input order.
    pub fn transgression_scan(&self, pairs: &[(NumPoly, NumPoly)]) -> Result<Vec<Transgression>> {
        parallel::try_map(self.ctx.exec, pairs.iter().collect(), |(x, y)| self.transgression(x, y))
    }

    /// `1/2 <Ch_1(u), Ch^1>`.
    pub fn half_pairing(&self, u: &NumMatrix) -> Result<LevelSum> {
        Ok(chern_pairing(&self.fm, u, 1)?.scaled(0.5))
    }

    /// Index of `P u^l P` at column cutoff `cutoff`, with the closed form.
    pub fn index(&self, l2: u32, cutoff: i32) -> Result<IndexReport> {
        let u = corep_unitary(l2, &self.ctx)?;
        let label = format!("u^{}", spin_label(l2));
        Ok(chern_index::toeplitz_index(&self.fm, &u, cutoff, &label, &self.ctx)?.with_closed(closed_index(l2, self.ctx.q)))
    }

    /// `||D_q pi(x) - pi(theta(x)) D_q||` on interior columns, `theta = sigma_{-2i}`.
    pub fn twisted_commutator_norm(&self, x: &NumPoly, modulus: bool) -> f64 {
        let d = if modulus { abs_operator(self.dq()) } else { self.dq().clone() };
        let px = self.fm.matrix(x);
        let pt = self.fm.matrix(&x.sigma_imag(-2));
        let c = sparse::sub(&sparse::mul(&d, &px), &sparse::mul(&pt, &d));
        let mask: Vec<bool> = self.fm.levels.iter().map(|l| l + x.degree() as i32 <= self.cutoff()).collect();
        sparse::op_norm_masked(&c, &mask, 200)
    }
}

pub fn spin_label(l2: u32) -> String {
    if l2 % 2 == 0 {
        format!("{}", l2 / 2)
    } else {
        format!("{l2}/2")
    }
}

/// `x y - sigma_i(y) x`.
pub fn twisted_b1(x: &NumPoly, y: &NumPoly) -> NumPoly {
    x.mul(y).sub(&y.sigma_imag(1).mul(x))
}

/// `C h(x y - sigma_i(y) x)`.
pub fn local_cocycle(x: &NumPoly, y: &NumPoly, ctx: &QContext) -> Result<f64> {
    let z = twisted_b1(x, y);
    Ok(local_constant(ctx.q) * crate::corep::haar(&z, ctx)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaForms {
    pub two_copy: LevelSum,
    pub local: LevelSum,
    /// Local form with `rho` applied to the normal form of `b_sigma(x, y)`.
    pub normal_form: LevelSum,
    /// Difference of the extrapolated two-copy and local forms.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transgression {
    pub chern: f64,
    pub local: f64,
    pub xi: f64,
    /// From extrapolated traces.
    pub residual: f64,
    /// From the truncated sums.
    pub partial_residual: f64,
    /// With `Xi` evaluated on the normal form of `b_sigma(x, y)`.
    pub normal_form_residual: f64,
    pub tail_estimate: f64,
    pub extrapolation_error: f64,
}

/// `|D|` from the block eigendecomposition.
pub fn abs_operator(d: &Sp) -> Sp {
    let mut trips = Vec::new();
    for b in block_eigen(d) {
        let k = b.indices.len();
        for i in 0..k {
            for j in 0..k {
                let v: f64 = (0..k).map(|e| b.values[e].abs() * b.vectors[(i, e)] * b.vectors[(j, e)]).sum();
                trips.push((b.indices[i], b.indices[j], v));
            }
        }
    }
    sparse::from_triplets(d.rows(), d.cols(), trips)
}

/// Level terms of `Tr(W f(|D|))` for a block-diagonal `D` and diagonal weight `W`.
pub fn weighted_spectral_levels(d: &Sp, w: &[f64], levels: &[i32], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let top = levels.iter().copied().max().unwrap_or(0);
    let mut out = vec![0.0; top as usize + 1];
    for b in block_eigen(d) {
        for e in 0..b.values.len() {
            let fe = f(b.values[e].abs());
            for (a, &i) in b.indices.iter().enumerate() {
                let v = b.vectors[(a, e)];
                out[levels[i] as usize] += fe * w[i] * v * v;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub p: f64,
    pub cutoff: i32,
    /// Term per level `l2`.
    pub levels: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// `(l2, levels[l2 + 2] / levels[l2])` over occupied levels, one full step in `l`.
    pub ratios: Vec<(i32, f64)>,
    pub tail_estimate: f64,
}

impl SummabilityReport {
    pub fn from_levels(p: f64, cutoff: i32, levels: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let partial_sums = levels
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        let ratios = (0..levels.len().saturating_sub(2))
            .filter(|&i| levels[i] != 0.0 && levels[i + 2] != 0.0)
            .map(|i| (i as i32, levels[i + 2] / levels[i]))
            .collect();
        let tail_estimate = geometric_tail(&levels);
        Self { p, cutoff, levels, partial_sums, ratios, tail_estimate }
    }
}

/// Level terms of `Tr(Delta (1 + |D_q|)^{-p})`.
pub fn summability_scan(p: f64, ctx: &QContext, cutoff: i32) -> Result<SummabilityReport> {
    if p < 1.0 {
        return Err(Error::InvalidConfig(format!("summability exponent {p} < 1")));
    }
    let basis = Arc::new(crate::corep::build_basis(cutoff, crate::corep::Sector::All)?);
    let dq = build_dq(ctx, &basis);
    let delta = build_delta(ctx, &basis);
    let levels: Vec<i32> = basis.vectors().iter().chain(basis.vectors()).map(|v| v.l2).collect();
    let lv = weighted_spectral_levels(&dq, &delta, &levels, |x| (1.0 + x).powf(-p));
    Ok(SummabilityReport::from_levels(p, cutoff, lv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzScan {
    pub generator: char,
    pub cutoffs: Vec<i32>,
    /// `|| |D_q| pi(g) - pi(sigma_{-2i}(g)) |D_q| ||` per cutoff.
    pub norms: Vec<f64>,
    /// `|| D_q pi(g) - pi(sigma_{-2i}(g)) D_q ||` per cutoff.
    pub twisted_norms: Vec<f64>,
}

pub fn lipschitz_scan(ctx: &QContext, cutoffs: &[i32]) -> Result<Vec<LipschitzScan>> {
    let triples: Vec<SUq2Triple> = cutoffs.iter().map(|&l| SUq2Triple::new(ctx, l)).collect::<Result<_>>()?;
    Ok(Gen::ALL
        .iter()
        .map(|&g| {
            let x = Poly::gen(g, &ctx.s);
            LipschitzScan {
                generator: g.symbol(),
                cutoffs: cutoffs.to_vec(),
                norms: triples.iter().map(|t| t.twisted_commutator_norm(&x, true)).collect(),
                twisted_norms: triples.iter().map(|t| t.twisted_commutator_norm(&x, false)).collect(),
            }
        })
        .collect())
}

fn kron(u: &NumMatrix, v: &NumMatrix) -> NumMatrix {
    let (k, m) = (u.k, v.k);
    let entries = (0..k * m * k * m)
        .map(|rc| {
            let (r, c) = (rc / (k * m), rc % (k * m));
            u.get(r / m, c / m).mul(v.get(r % m, c % m))
        })
        .collect();
    NumMatrix::new(k * m, entries).expect("square")
}

/// Largest coefficient of `u* u - 1` and `u u* - 1`, relative to the largest
/// coefficient among the summands of the products.
fn unitarity_residual(u: &NumMatrix, s: f64) -> f64 {
    let us = u.star();
    let mut worst = 0.0f64;
    for (x, y) in [(&us, u), (u, &us)] {
        for i in 0..u.k {
            for j in 0..u.k {
                let mut acc = if i == j { Poly::one(&s).neg() } else { NumPoly::zero(&s) };
                let mut scale = 1.0f64;
                for r in 0..u.k {
                    let t = x.get(i, r).mul(y.get(r, j));
                    scale = scale.max(t.max_coeff(s));
                    acc = acc.add(&t);
                }
                worst = worst.max(acc.max_coeff(s) / scale);
            }
        }
    }
    worst
}

/// Null space of the intertwining equation `W V = V v` over monomial coefficients.
fn intertwiner(w: &NumMatrix, v: &NumMatrix) -> Result<DMatrix<f64>> {
    let (kw, kv) = (w.k, v.k);
    let nunk = kw * kv;
    let mut rows: std::collections::BTreeMap<(usize, usize, Monomial), Vec<f64>> = Default::default();
    for r in 0..kw {
        for c in 0..kv {
            for t in 0..kw {
                for (m, coef) in w.get(r, t).terms() {
                    rows.entry((r, c, *m)).or_insert_with(|| vec![0.0; nunk])[t * kv + c] += coef;
                }
            }
            for t in 0..kv {
                for (m, coef) in v.get(t, c).terms() {
                    rows.entry((r, c, *m)).or_insert_with(|| vec![0.0; nunk])[r * kv + t] -= coef;
                }
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), nunk, |i, j| rows.values().nth(i).unwrap()[j]);
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let scale = svd.singular_values.iter().fold(0.0f64, |x, y| x.max(*y));
    let mut null: Vec<usize> = (0..vt.nrows()).filter(|&i| svd.singular_values[i] <= 1e-9 * scale.max(1.0)).collect();
    let rank_rows = vt.nrows();
    null.extend(rank_rows..nunk);
    if null.len() != 1 || null[0] >= rank_rows {
        return Err(Error::RankDeficient(null.len()));
    }
    let mut vec = vt.row(null[0]).transpose();
    let gram = a.transpose() * &a;
    for _ in 0..3 {
        let m = &gram + &vec * vec.transpose();
        let Some(step) = m.lu().solve(&(&gram * &vec)) else { break };
        vec -= step;
        vec /= vec.norm();
    }
    Ok(DMatrix::from_fn(kw, kv, |i, j| vec[i * kv + j]))
}

/// Corepresentation unitary of spin `l2/2`, built by splitting off
/// `u^{l-1/2}` from `u^l ⊗ u^{1/2}`.
pub fn corep_unitary(l2: u32, ctx: &QContext) -> Result<NumMatrix> {
    corep_unitary_max(l2, MAX_SPIN2, ctx)
}

pub fn corep_unitary_max(l2: u32, max_spin2: u32, ctx: &QContext) -> Result<NumMatrix> {
    if l2 > max_spin2 {
        return Err(Error::InvalidConfig(format!("spin 2l = {l2} exceeds the maximum {max_spin2}")));
    }
    let s = ctx.s;
    let half = NCMatrix::fundamental().to_numeric(s);
    let mut chain = vec![NumMatrix::identity(1, &s), half.clone()];
    for next in 2..=l2 as usize {
        let w = kron(&chain[next - 1], &half);
        let low = &chain[next - 2];
        let v = intertwiner(&w, low)?;
        let norm = (v.transpose() * &v)[(0, 0)].sqrt();
        let v = v / norm;
        let kw = w.k;
        let proj = DMatrix::identity(kw, kw) - &v * v.transpose();
        let exps_prev: Vec<f64> = (0..chain[next - 1].k).map(|i| (next as f64 - 1.0) / 2.0 - i as f64).collect();
        let weight = |idx: usize| exps_prev[idx / 2] + if idx % 2 == 0 { 0.5 } else { -0.5 };
        let top = next as f64 / 2.0;
        let mut y = DMatrix::zeros(kw, next + 1);
        for col in 0..=next {
            let wt = top - col as f64;
            let members: Vec<usize> = (0..kw).filter(|&i| (weight(i) - wt).abs() < 1e-9).collect();
            let sub = DMatrix::from_fn(members.len(), members.len(), |a, b| proj[(members[a], members[b])]);
            let eig = SymmetricEigen::new(sub);
            let best = (0..members.len()).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
            if (eig.eigenvalues[best] - 1.0).abs() > 1e-8 {
                return Err(Error::RankDeficient(members.len()));
            }
            let mut vec: Vec<f64> = (0..members.len()).map(|a| eig.eigenvectors[(a, best)]).collect();
            if let Some(first) = vec.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    vec.iter_mut().for_each(|x| *x = -*x);
                }
            }
            for (a, &i) in members.iter().enumerate() {
                y[(i, col)] = vec[a];
            }
        }
        let k = next + 1;
        let entries = (0..k * k)
            .map(|ij| {
                let (i, j) = (ij / k, ij % k);
                let mut acc = NumPoly::zero(&s);
                for r in 0..kw {
                    if y[(r, i)] == 0.0 {
                        continue;
                    }
                    for t in 0..kw {
                        if y[(t, j)] == 0.0 {
                            continue;
                        }
                        acc = acc.add(&w.get(r, t).scale(&(y[(r, i)] * y[(t, j)])));
                    }
                }
                acc.prune(1e-13, s)
            })
            .collect();
        chain.push(NumMatrix::new(k, entries)?);
    }
    let u = chain.swap_remove(l2 as usize);
    let res = unitarity_residual(&u, s);
    if res > 1e-10 {
        return Err(Error::NotUnitary(res));
    }
    let g = chern_index::modular_check(&u, s, 1e-9)?;
    for (i, e) in g.exponents.iter().enumerate() {
        let want = l2 as f64 / 2.0 - i as f64;
        if (e - want).abs() > 1e-9 {
            return Err(Error::NotModular { row: i, col: i, detail: format!("exponent {e}, expected {want}") });
        }
    }
    Ok(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub index: IndexReport,
    /// Extrapolated `1/2 <Ch_1(u), Ch^1>`.
    pub half_pairing: f64,
    pub half_pairing_partial: f64,
    pub pairing_tail: f64,
    pub pairing_extrapolation_error: f64,
    pub index_vs_pairing: f64,
}

/// Index, half pairing and closed form for each spin.
pub fn run_experiment(spins2: &[u32], ctx: &QContext, cutoff: i32) -> Result<Vec<ExperimentReport>> {
    if spins2.is_empty() {
        return Ok(Vec::new());
    }
    let reach = 2 * spins2.iter().copied().max().unwrap_or(0) as i32;
    let triple = SUq2Triple::new(ctx, cutoff + reach)?;
    parallel::try_map(ctx.exec, spins2.to_vec(), |l2| {
        let index = triple.index(l2, cutoff)?;
        let u = corep_unitary(l2, ctx)?;
        let pairing = if l2 == 0 {
            LevelSum::zero(8)
        } else {
            triple.half_pairing(&u)?
        };
        let index_vs_pairing = (index.index_numeric - pairing.extrapolated).abs();
        Ok(ExperimentReport {
            index,
            half_pairing: pairing.extrapolated,
            half_pairing_partial: pairing.value,
            pairing_tail: pairing.tail_estimate,
            pairing_extrapolation_error: pairing.extrapolation_error,
            index_vs_pairing,
        })
    })
}
