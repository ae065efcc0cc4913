use modix::qalgebra::{normal_form, ExactRing, Gen, NCPoly, Strategy};
use modix::qscalar::{exact_eval, qint, Exact, QContext};
use modix::sample::{random_poly, random_word};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn rewriting_is_confluent_on_random_words() {
    let mut r = rng(7);
    for _ in 0..200 {
        let w = random_word(&mut r, 8);
        let left = normal_form(Exact::one(), &w, Strategy::Leftmost, &ExactRing);
        let right = normal_form(Exact::one(), &w, Strategy::Rightmost, &ExactRing);
        assert_eq!(left, right, "word {w:?}");
        assert_eq!(left, NCPoly::word(&w));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn star_is_an_antimultiplicative_involution(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_poly(&mut r, 4, 3);
        let y = random_poly(&mut r, 4, 3);
        prop_assert_eq!(x.star().star(), x.clone());
        prop_assert_eq!(x.mul(&y).star(), y.star().mul(&x.star()));
    }

    #[test]
    fn multiplication_is_associative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, y, z) = (random_poly(&mut r, 3, 2), random_poly(&mut r, 3, 2), random_poly(&mut r, 3, 2));
        prop_assert_eq!(x.mul(&y).mul(&z), x.mul(&y.mul(&z)));
    }

    #[test]
    fn sigma_commutes_with_star_up_to_conjugation(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let s = 0.7f64.sqrt();
        let z = Complex64::new(re, im);
        let x = random_poly(&mut rng(seed), 4, 3).to_numeric(s);
        let lhs = x.star().sigma(z, s).star();
        let rhs = x.sigma(z.conj(), s);
        prop_assert!(lhs.sub(&rhs).max_coeff(s) < 1e-10 * (1.0 + rhs.max_coeff(s)));
    }

    #[test]
    fn sigma_is_multiplicative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, y) = (random_poly(&mut r, 3, 2), random_poly(&mut r, 3, 2));
        prop_assert_eq!(x.mul(&y).sigma_imag(1), x.sigma_imag(1).mul(&y.sigma_imag(1)));
        prop_assert_eq!(x.mul(&y).sigma_m_imag(-2), x.sigma_m_imag(-2).mul(&y.sigma_m_imag(-2)));
    }

    #[test]
    fn weights_are_additive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (u, v) = (random_word(&mut r, 5), random_word(&mut r, 5));
        let w2 = |w: &[Gen]| w.iter().map(|g| g.wt2()).sum::<i32>();
        let p = NCPoly::word(&u).mul(&NCPoly::word(&v));
        if !p.is_zero() {
            prop_assert_eq!(p.homogeneous_wt2(), Some(w2(&u) + w2(&v)));
        }
    }

    #[test]
    fn qint_is_odd(z in -20.0f64..20.0, q in 0.05f64..0.95) {
        let ctx = QContext::new(q).unwrap();
        prop_assert!((qint(-z, &ctx) + qint(z, &ctx)).abs() < 1e-12 * (1.0 + qint(z, &ctx).abs()));
    }

    #[test]
    fn exact_eval_is_a_ring_map(a in -5i64..5, b in -5i64..5, e in -6i32..6, f in -6i32..6, q in 0.1f64..0.9) {
        let ctx = QContext::new(q).unwrap();
        let x = &Exact::int(a) * &Exact::s_pow(e) + Exact::ratio(1, 3);
        let y = &Exact::int(b) * &Exact::s_pow(f) - Exact::one();
        let (vx, vy) = (exact_eval(&x, &ctx), exact_eval(&y, &ctx));
        let tol = 1e-12 * (1.0 + vx.abs()) * (1.0 + vy.abs());
        prop_assert!((exact_eval(&(&x * &y), &ctx) - vx * vy).abs() < tol);
        prop_assert!((exact_eval(&(&x + &y), &ctx) - vx - vy).abs() < tol);
    }
}
