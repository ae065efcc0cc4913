use std::sync::OnceLock;

use modix::chern_index::{modular_check, unitary_chern};
use modix::corep::{BasisVector, Representation};
use modix::qalgebra::{Gen, NumMatrix, NumPoly, Poly};
use modix::qscalar::{qint_base, QContext};
use modix::sparse;
use modix::suq2_triple::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ctx() -> QContext {
    QContext::new(0.5).unwrap()
}

fn triple() -> &'static SUq2Triple {
    static T: OnceLock<SUq2Triple> = OnceLock::new();
    T.get_or_init(|| SUq2Triple::new(&ctx(), 40).unwrap())
}

fn g(x: Gen) -> NumPoly {
    Poly::gen(x, &ctx().s)
}

fn random_word(rng: &mut ChaCha8Rng, max_len: usize) -> NumPoly {
    let len = rng.gen_range(1..=max_len);
    let w: Vec<Gen> = (0..len).map(|_| Gen::ALL[rng.gen_range(0..4)]).collect();
    Poly::from_word(&w, &ctx().s)
}

fn vacuum_expectation(x: &NumPoly) -> f64 {
    let rep = Representation::pi(2 * x.degree() as i32 + 2, &ctx()).unwrap();
    let vac = rep.basis.index_of(&BasisVector::new(0, 0, 0).unwrap()).unwrap();
    let mut total = 0.0;
    for (m, c) in x.terms() {
        let mut op = sparse::identity(rep.dim());
        for gen in m.word() {
            op = sparse::mul(&op, rep.gen(gen));
        }
        total += c * sparse::entry(&op, vac, vac);
    }
    total
}

#[test]
fn dirac_operator_examples() {
    let c = ctx();
    let q = c.q;
    let t = SUq2Triple::new(&c, 30).unwrap();
    let d = t.dq();
    let asym = sparse::max_abs(&sparse::sub(d, &sparse::transpose(d)));
    assert!(asym <= 1e-12 * sparse::max_abs(d), "{asym}");
    assert!((sparse::entry(d, 0, 0) - (1.0 / q - 1.0) / (q - 1.0 / q)).abs() < 1e-14);
    let commutator = sparse::sub(&sparse::mul_diag_right(d, t.delta()), &sparse::mul_diag_left(t.delta(), d));
    assert_eq!(sparse::max_abs(&commutator), 0.0);
    assert!(t.phase_identity_residual < 1e-8);
}

#[test]
fn weights_on_the_two_copies() {
    let t = triple();
    let q = ctx().q;
    let n = t.fm.rep.dim();
    for (i, v) in t.fm.rep.basis.vectors().iter().enumerate().step_by(37) {
        let nn = v.n();
        assert!((t.delta()[i] - q.powf(-nn - 0.5)).abs() < 1e-12 * t.delta()[i]);
        assert!((t.delta()[n + i] - q.powf(-nn + 0.5)).abs() < 1e-12 * t.delta()[n + i]);
    }
}

#[test]
fn t_and_r_examples() {
    let c = ctx();
    let q = c.q;
    let t = triple();
    assert!((t.t[0] - q.sqrt()).abs() < 1e-15);
    assert!((t.r[0] - q / (1.0 - q) * q.sqrt()).abs() < 1e-15);
    for (i, v) in t.fm.rep.basis.vectors().iter().enumerate().step_by(53) {
        let (l, nn) = (v.l(), v.n());
        let expect = q.powf(2.0 * l + 1.0 - 2.0 * nn) / (1.0 - q.powf(2.0 * l + 1.0)) * q.powf(l + 0.5);
        assert!((t.r[i] - expect).abs() < 1e-12 * expect);
        assert!(t.r[i] > 0.0);
    }
    let tr = trace_r(&c, 80).unwrap();
    let sq = q.sqrt();
    let closed = (sq / (1.0 - sq).powi(2) + q * sq / (1.0 - q * sq).powi(2)) / (1.0 / q - q);
    assert!((tr.value - closed).abs() < 1e-8, "{} {closed}", tr.value);
    assert!((trace_r_closed(q) - closed).abs() < 1e-14);
}

#[test]
fn closed_index_examples() {
    let q = 0.5f64;
    assert_eq!(closed_index(0, q), 0.0);
    let big_c = local_constant(q);
    let sq = q.sqrt();
    let bracket = |n: f64| (sq.powf(n) - sq.powf(-n)) / (sq - 1.0 / sq);
    assert!((closed_index(1, q) - big_c / 2.0 * (2.0 - bracket(2.0))).abs() < 1e-13);
    assert!((closed_index(1, q) + 0.55133).abs() < 1e-4);
    assert!((closed_index(2, q) - big_c / 2.0 * (3.0 - bracket(3.0))).abs() < 1e-13);
    assert!((qint_base(3.0, sq) - bracket(3.0)).abs() < 1e-13);
}

#[test]
fn corepresentation_unitaries() {
    let c = ctx();
    let s = c.s;
    assert_eq!(corep_unitary(0, &c).unwrap(), NumMatrix::identity(1, &s));
    let u = corep_unitary(1, &c).unwrap();
    assert_eq!(u.get(0, 0), &g(Gen::A));
    assert_eq!(u.get(1, 1), &g(Gen::D));
    let rep = Representation::pi(14, &c).unwrap();
    let mask = rep.basis.interior_mask(8);
    for l2 in [1, 2, 3, 4] {
        let u = corep_unitary(l2, &c).unwrap();
        let k = u.k;
        assert_eq!(k, l2 as usize + 1);
        assert_eq!(u.degree(), l2);
        let mats: Vec<Vec<sparse::Sp>> = (0..k).map(|i| (0..k).map(|j| rep.matrix(u.get(i, j))).collect()).collect();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let mut acc = if i == j { sparse::scale(&sparse::identity(rep.dim()), -1.0) } else { sparse::zero(rep.dim(), rep.dim()) };
                for r in 0..k {
                    acc = sparse::add(&acc, &sparse::mul(&sparse::transpose(&mats[r][i]), &mats[r][j]));
                }
                for (v, (_, col)) in acc.iter() {
                    if mask[col] {
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        assert!(worst < 1e-10, "spin2 {l2}: {worst}");
        let m = modular_check(&u, s, 1e-9).unwrap();
        let z = Complex64::new(0.3, 0.0);
        for (i, v) in m.at(z).iter().enumerate() {
            let l = l2 as f64 / 2.0;
            let expect = Complex64::new(0.0, (l - i as f64) * z.re * c.q.ln()).exp();
            assert!((v - expect).norm() < 1e-10, "{v} {expect}");
        }
    }
    assert!(corep_unitary(5, &c).is_err());
}

#[test]
fn local_cocycle_examples() {
    let c = ctx();
    let one: NumPoly = Poly::one(&c.s);
    for x in Gen::ALL {
        assert_eq!(local_cocycle(&one, &g(x), &c).unwrap(), 0.0);
    }
    let (a, d) = (g(Gen::A), g(Gen::D));
    let oracle = local_constant(c.q) * vacuum_expectation(&twisted_b1(&a, &d));
    assert!((local_cocycle(&a, &d, &c).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn local_pairing_gives_the_closed_form() {
    let c = ctx();
    for l2 in [1, 2] {
        let u = corep_unitary(l2, &c).unwrap();
        let ch = unitary_chern(&u, 1, c.s, 1e-10).unwrap();
        let mut total = 0.0;
        for (t, k) in ch.terms() {
            let x = Poly::monomial(t[0], 1.0, &c.s);
            let y = Poly::monomial(t[1], 1.0, &c.s);
            total += k * local_cocycle(&x, &y, &c).unwrap();
        }
        assert!((total - 2.0 * closed_index(l2, c.q)).abs() < 1e-10, "{total}");
    }
}

#[test]
fn gamma_examples() {
    let c = ctx();
    let t = triple();
    let one: NumPoly = Poly::one(&c.s);
    assert_eq!(t.gamma_cochain(&one).unwrap().value, 0.0);
    let ga = t.gamma_cochain(&g(Gen::A)).unwrap();
    assert!(ga.value.is_finite() && ga.tail_estimate <= 1e-8);
    let ad = g(Gen::A).mul(&g(Gen::D));
    let gad = t.gamma_cochain(&ad).unwrap();
    let late: f64 = gad.levels[30..].iter().map(|x| x.abs()).sum();
    assert!(gad.value.is_finite() && late < 1e-9, "{gad:?}");
}

#[test]
fn gamma_coboundary() {
    let t = triple();
    for x in Gen::ALL {
        for y in Gen::ALL {
            let (x, y) = (g(x), g(y));
            let alpha = t.alpha_cocycle(&x, &y).unwrap();
            let ch = t.chern1(&x, &y).unwrap();
            let gb = t.gamma_twisted_b(&x, &y).unwrap();
            let lhs = alpha.two_copy.extrapolated - ch.extrapolated;
            assert!((gb.extrapolated - lhs).abs() < 1e-7, "{x:?} {y:?}: {} {lhs}", gb.extrapolated);
        }
    }
}

#[test]
fn alpha_examples() {
    let c = ctx();
    let t = triple();
    let one: NumPoly = Poly::one(&c.s);
    let a11 = t.alpha_cocycle(&one, &one).unwrap();
    assert_eq!(a11.two_copy.value, 0.0);
    assert_eq!(a11.local.value, 0.0);
    let ad = t.alpha_cocycle(&g(Gen::A), &g(Gen::D)).unwrap();
    assert!(ad.difference < 1e-8, "{ad:?}");
    assert!(ad.two_copy.extrapolated.abs() > 1e-3);
}

#[test]
fn experiment_on_no_spins_is_empty() {
    assert!(run_experiment(&[], &ctx(), 40).unwrap().is_empty());
}

#[test]
fn index_matches_half_pairing() {
    let reports = run_experiment(&[1], &ctx(), 30).unwrap();
    let r = &reports[0];
    assert!((r.index.index_numeric + 1.0).abs() < 1e-12);
    assert!(r.index.stable);
    assert!(r.index_vs_pairing < 1e-4, "{r:?}");
    assert_eq!(run_experiment(&[1], &ctx(), 30).unwrap(), reports);
}

#[test]
fn summability_series() {
    let c = ctx();
    let rep = summability_scan(1.0, &c, 60).unwrap();
    assert!(rep.levels.iter().all(|t| *t > 0.0));
    assert!(rep.partial_sums.windows(2).all(|w| w[1] > w[0]));
    let tail: Vec<f64> = rep.ratios.iter().rev().take(20).map(|r| r.1).collect();
    assert!(tail.windows(2).all(|w| w[0] < w[1]));
    assert!((tail[0] - c.q).abs() < 0.05, "{tail:?}");
    assert!(summability_scan(0.5, &c, 10).is_err());
}

#[test]
fn lipschitz_norms_plateau() {
    let scans = lipschitz_scan(&ctx(), &[20, 30, 40]).unwrap();
    assert_eq!(scans.len(), 4);
    for s in scans {
        for w in [&s.norms, &s.twisted_norms] {
            let (lo, hi) = w.iter().fold((f64::MAX, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
            assert!(hi > 0.0 && (hi - lo) / hi < 1e-3, "{s:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn twisted_trace_invariance(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = triple();
        let x = random_word(&mut rng, 4).add(&random_word(&mut rng, 4).scale(&0.7));
        let lhs = t.trace_rho_r(&x.sigma_imag(1)).unwrap();
        let rhs = t.trace_rho_r(&x).unwrap();
        prop_assert!((lhs.extrapolated - rhs.extrapolated).abs() < 1e-9 * (1.0 + rhs.extrapolated.abs()));
    }

    #[test]
    fn transgression(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = triple();
        let x = random_word(&mut rng, 2);
        let y = random_word(&mut rng, 2);
        let r = t.transgression(&x, &y).unwrap();
        prop_assert!(r.residual.abs() < 1e-6, "{:?}", r);
    }

    #[test]
    fn twisted_commutators_are_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_word(&mut rng, 3);
        let small = SUq2Triple::new(&ctx(), 16).unwrap();
        let a = small.twisted_commutator_norm(&x, false);
        let b = triple().twisted_commutator_norm(&x, false);
        prop_assert!(a.is_finite() && b < 1.01 * a.max(1e-12) + 1e-9, "{} {}", a, b);
    }
}
