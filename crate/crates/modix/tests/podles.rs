use std::sync::OnceLock;

use modix::error::Error;
use modix::podles_triple::*;
use modix::qalgebra::{Gen, NumPoly, Poly};
use modix::qscalar::QContext;
use modix::sparse::{self, Sp};
use modix::twisted_cyclic::{Chain, Twist};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ctx() -> QContext {
    QContext::new(0.5).unwrap()
}

fn triple() -> &'static PodlesTriple {
    static T: OnceLock<PodlesTriple> = OnceLock::new();
    T.get_or_init(|| PodlesTriple::new(&ctx(), 30).unwrap())
}

fn sphere_gens(s: f64) -> [NumPoly; 3] {
    [gen_a(s), gen_b(s), gen_b(s).star()]
}

fn random_sphere(rng: &mut ChaCha8Rng, max_len: usize) -> NumPoly {
    let gens = sphere_gens(ctx().s);
    let len = rng.gen_range(0..=max_len);
    let mut x: NumPoly = Poly::one(&ctx().s);
    for _ in 0..len {
        x = x.mul(&gens[rng.gen_range(0..3)]);
    }
    x.scale(&rng.gen_range(-1.5..1.5))
}

fn interior_max(t: &PodlesTriple, m: &Sp, deg: i32) -> f64 {
    let mut worst = 0.0f64;
    for (v, (_, c)) in m.iter() {
        if t.fm.levels[c] + deg <= t.fm.cutoff {
            worst = worst.max(v.abs());
        }
    }
    worst
}

#[test]
fn sphere_relations_on_interior_columns() {
    let c = ctx();
    let t = triple();
    let [a, b, bs] = sphere_gens(c.s).map(|x| t.matrix(&x).unwrap());
    let q2 = c.q * c.q;
    let ab = sparse::sub(&sparse::mul(&a, &b), &sparse::scale(&sparse::mul(&b, &a), q2));
    assert!(interior_max(t, &ab, 4) < 1e-10);
    let lhs = sparse::mul(&bs, &b);
    let rhs = sparse::sub(&a, &sparse::scale(&sparse::mul(&a, &a), q2));
    assert!(interior_max(t, &sparse::sub(&lhs, &rhs), 4) < 1e-10);
    assert!(interior_max(t, &sparse::sub(&bs, &sparse::transpose(&b)), 2) < 1e-12);
}

#[test]
fn grading_commutes_with_the_sphere() {
    let t = triple();
    let g = t.gamma();
    for x in sphere_gens(ctx().s) {
        let m = t.matrix(&x).unwrap();
        let comm = sparse::sub(&sparse::mul_diag_left(g, &m), &sparse::mul_diag_right(&m, g));
        assert_eq!(sparse::max_abs(&comm), 0.0);
    }
}

#[test]
fn dirac_maps_between_the_sectors() {
    let t = triple();
    let g = t.gamma();
    for (v, (r, c)) in t.d().iter() {
        if *v != 0.0 {
            assert_eq!(g[r], -g[c]);
        }
    }
    let d = t.d();
    assert!(sparse::max_abs(&sparse::sub(d, &sparse::transpose(d))) < 1e-12);
}

#[test]
fn modular_flow_is_the_m_weight_scaling() {
    let c = ctx();
    let t = triple();
    let delta = &t.fm.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x = random_sphere(&mut rng, 3);
        let time: f64 = rng.gen_range(-2.0..2.0);
        let m = t.matrix(&x).unwrap();
        let mut expect = std::collections::HashMap::new();
        for (mono, k) in x.terms() {
            let phase = Complex64::new(0.0, time * mono.wtl2() as f64 * c.q.ln()).exp();
            for (v, (r, col)) in t.fm.matrix(&Poly::monomial(*mono, *k, &c.s)).iter() {
                *expect.entry((r, col)).or_insert(Complex64::new(0.0, 0.0)) += phase * v;
            }
        }
        let mut worst = 0.0f64;
        for (v, (r, col)) in m.iter() {
            let flow = Complex64::new(0.0, time * (delta[r] / delta[col]).ln()).exp() * v;
            let e = expect.get(&(r, col)).copied().unwrap_or_default();
            worst = worst.max((flow - e).norm());
        }
        assert!(worst < 1e-12, "{worst}");
        let sx = t.fm.matrix(&Twist::podles_imag(1).apply(&x));
        let conj = sparse::mul_diag_right(&sparse::mul_diag_left(&delta.iter().map(|d| 1.0 / d).collect::<Vec<_>>(), &m), delta);
        let scale = sparse::max_abs(&m).max(1.0);
        assert!(interior_max(t, &sparse::sub(&sx, &conj), x.degree() as i32) < 1e-12 * scale);
    }
}

#[test]
fn summability_examples() {
    let c = ctx();
    let p3 = podles_summability(3.0, &c, 60).unwrap();
    let p4 = podles_summability(4.0, &c, 60).unwrap();
    let p2 = podles_summability(2.0, &c, 60).unwrap();
    assert!(p3.levels.iter().all(|x| *x >= 0.0));
    let last = p3.ratios.last().unwrap().1;
    assert!((last - c.q).abs() < 0.05, "{:?}", p3.ratios);
    assert!(p3.tail_estimate < 1e-6);
    assert!(p3.partial_sums.last() > p4.partial_sums.last());
    let occupied: Vec<f64> = p2.levels.iter().take(31).copied().filter(|x| *x > 0.0).collect();
    assert!(occupied.iter().all(|x| *x > 1e-3));
    let tail = &occupied[occupied.len() - 3..];
    assert!((tail[0] - tail[2]).abs() < 0.05 * tail[2], "{occupied:?}");
    assert!(matches!(podles_summability(0.5, &c, 10), Err(Error::InvalidConfig(_))));
}

#[test]
fn chern_of_scalars_vanishes() {
    let t = triple();
    let one: NumPoly = Poly::one(&ctx().s);
    assert_eq!(t.chern2(&one, &one, &one).unwrap().value, 0.0);
}

#[test]
fn cyclic_rotation_of_the_generators() {
    let c = ctx();
    let t = triple();
    let [a, b, bs] = sphere_gens(c.s);
    let x = t.chern2(&a, &b, &bs).unwrap().extrapolated;
    let y = t.chern2(&b, &bs, &a).unwrap().extrapolated;
    let z = t.chern2(&bs, &a, &b).unwrap().extrapolated;
    assert!(x.abs() > 0.1);
    assert!((x - y).abs() < 1e-10 * x.abs());
    assert!((x - c.q * c.q * z).abs() < 1e-10 * x.abs());
}

#[test]
fn cutoff_must_be_positive() {
    assert!(matches!(PodlesTriple::new(&ctx(), 0), Err(Error::InvalidConfig(_))));
}

#[test]
fn chain_entries_must_lie_in_the_sphere() {
    let c = ctx();
    let a: NumPoly = Poly::gen(Gen::A, &c.s);
    let one: NumPoly = Poly::one(&c.s);
    let ch = Chain::tensor(1.0, &[a, one.clone(), one]).unwrap();
    assert!(matches!(triple().chern2_chain(&ch), Err(Error::OutsideSubalgebra(_))));
}

#[test]
fn cocycle_vanishes_on_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let t = triple();
    for _ in 0..4 {
        let slots: Vec<NumPoly> = (0..4).map(|_| random_sphere(&mut rng, 2)).collect();
        let b = Chain::tensor(1.0, &slots).unwrap().twisted_b(&Twist::podles_imag(1)).unwrap().reduce();
        let v = t.chern2_chain(&b).unwrap();
        let scale = 1.0 + v.levels.iter().map(|x| x.abs()).sum::<f64>();
        assert!(v.extrapolated.abs() < 1e-8 * scale, "{v:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn twisted_cyclicity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = triple();
        let slots: Vec<NumPoly> = (0..3).map(|_| random_sphere(&mut rng, 2)).collect();
        let ch = Chain::tensor(1.0, &slots).unwrap().reduce();
        let a = t.chern2_chain(&ch).unwrap();
        let b = t.chern2_chain(&ch.lambda(&Twist::podles_imag(1))).unwrap();
        prop_assert!((a.extrapolated - b.extrapolated).abs() < 1e-8 * (1.0 + a.extrapolated.abs()), "{:?} {:?}", a, b);
    }
}
