//! The even modular spectral triple over the standard Podleś sphere, realized
//! on the `n = ±1/2` sectors of the Haar GNS space.

use std::sync::Arc;

use crate::chern_index::{chern_eval, chern_eval_tensor, FredholmModule, LevelSum, ModuleSpec, Slot};
use crate::corep::{build_basis, op_efk, Representation, Sector, TruncBasis, EFK};
use crate::error::{Error, Result};
use crate::qalgebra::{Gen, NumPoly, Poly};
use crate::qscalar::QContext;
use crate::sparse::{self, Sp};
use crate::suq2_triple::{weighted_spectral_levels, SummabilityReport};
use crate::twisted_cyclic::{Chain, Twist};

/// `A = 1 - d a`.
pub fn gen_a(s: f64) -> NumPoly {
    Poly::one(&s).sub(&Poly::gen(Gen::D, &s).mul(&Poly::gen(Gen::A, &s)))
}

/// `B = d c`.
pub fn gen_b(s: f64) -> NumPoly {
    Poly::gen(Gen::D, &s).mul(&Poly::gen(Gen::C, &s))
}

/// Whether `x` lies in the subalgebra generated by `A`, `B`, `B*`.
pub fn in_subalgebra(x: &NumPoly) -> bool {
    x.is_zero() || x.homogeneous_wt2() == Some(0)
}

fn check_subalgebra(x: &NumPoly) -> Result<()> {
    if in_subalgebra(x) {
        Ok(())
    } else {
        Err(Error::OutsideSubalgebra(format!("{x:?}")))
    }
}

/// Slots of `H_+ ⊕ H_-` inside a basis: copy 0 for `n2 = 1`, copy 1 for `n2 = -1`.
fn sector_slots(basis: &TruncBasis) -> Vec<Slot> {
    let pick = |n2: i32, copy: u8| {
        basis
            .vectors()
            .iter()
            .enumerate()
            .filter(move |(_, v)| v.n2 == n2)
            .map(move |(index, _)| Slot { copy, index })
    };
    pick(1, 0).chain(pick(-1, 1)).collect()
}

/// `D = [[0, E], [F, 0]]` on the slots.
fn build_d(ctx: &QContext, basis: &Arc<TruncBasis>, slots: &[Slot]) -> Sp {
    let e = op_efk(EFK::E, basis, ctx).mat;
    let f = op_efk(EFK::F, basis, ctx).mat;
    let mut pos = vec![usize::MAX; basis.dim()];
    for (i, s) in slots.iter().enumerate() {
        pos[s.index] = i;
    }
    let n = slots.len();
    let mut trips = Vec::new();
    for (op, from, to) in [(&e, -1, 1), (&f, 1, -1)] {
        for (v, (r, c)) in op.iter() {
            if basis.get(c).n2 == from && basis.get(r).n2 == to && pos[r] != usize::MAX && pos[c] != usize::MAX {
                trips.push((pos[r], pos[c], *v));
            }
        }
    }
    sparse::from_triplets(n, n, trips)
}

fn weights(ctx: &QContext, basis: &TruncBasis, slots: &[Slot]) -> (Vec<f64>, Vec<f64>) {
    let delta = slots.iter().map(|s| ctx.q.powi(basis.get(s.index).m2)).collect();
    let gamma = slots.iter().map(|s| if s.copy == 0 { 1.0 } else { -1.0 }).collect();
    (delta, gamma)
}

pub struct PodlesTriple {
    pub ctx: QContext,
    pub fm: FredholmModule,
}

impl std::fmt::Debug for PodlesTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PodlesTriple(q {}, cutoff {}, dim {})", self.ctx.q, self.fm.cutoff, self.fm.dim())
    }
}

impl PodlesTriple {
    pub fn new(ctx: &QContext, cutoff: i32) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::InvalidConfig(format!("Podleś cutoff {cutoff} < 1")));
        }
        let rep = Arc::new(Representation::pi(cutoff, ctx)?);
        let basis = rep.basis.clone();
        let slots = sector_slots(&basis);
        let d = build_d(ctx, &basis, &slots);
        let (delta, gamma) = weights(ctx, &basis, &slots);
        let fm = FredholmModule::new(
            ModuleSpec { rep, slots, d, delta, gamma: Some(gamma), twist: Twist::podles_imag(1) },
            ctx,
        )?;
        Ok(Self { ctx: ctx.clone(), fm })
    }

    pub fn d(&self) -> &Sp {
        &self.fm.d
    }

    pub fn gamma(&self) -> &[f64] {
        self.fm.gamma.as_deref().expect("even module")
    }

    /// Matrix of a sphere element on `H_+ ⊕ H_-`.
    pub fn matrix(&self, x: &NumPoly) -> Result<Sp> {
        check_subalgebra(x)?;
        Ok(self.fm.matrix(x))
    }

    /// `Ch^2(x0, x1, x2) = 1/2 Tr(Delta_R gamma F [F, x0] [F, x1] [F, x2])`.
    pub fn chern2(&self, x0: &NumPoly, x1: &NumPoly, x2: &NumPoly) -> Result<LevelSum> {
        for x in [x0, x1, x2] {
            check_subalgebra(x)?;
        }
        chern_eval_tensor(&self.fm, 1.0, &[x0.clone(), x1.clone(), x2.clone()])
    }

    /// The degree-2 cochain on a chain of sphere elements.
    pub fn chern2_chain(&self, ch: &Chain<f64>) -> Result<LevelSum> {
        for (t, _) in ch.terms() {
            for m in t {
                if m.wt2() != 0 {
                    return Err(Error::OutsideSubalgebra(format!("{m:?}")));
                }
            }
        }
        chern_eval(&self.fm, ch)
    }
}

/// Level terms of `Tr(Delta_R |D|^{-p})` over `H_+ ⊕ H_-`.
pub fn podles_summability(p: f64, ctx: &QContext, cutoff: i32) -> Result<SummabilityReport> {
    if p < 1.0 {
        return Err(Error::InvalidConfig(format!("summability exponent {p} < 1")));
    }
    let all = Arc::new(build_basis(cutoff, Sector::All)?);
    let slots = sector_slots(&all);
    let d = build_d(ctx, &all, &slots);
    let (delta, _) = weights(ctx, &all, &slots);
    let levels: Vec<i32> = slots.iter().map(|s| all.get(s.index).l2).collect();
    let lv = weighted_spectral_levels(&d, &delta, &levels, |x| x.powf(-p));
    Ok(SummabilityReport::from_levels(p, cutoff, lv))
}
