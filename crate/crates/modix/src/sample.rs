//! Seeded random elements for property checks and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::podles_triple::{gen_a, gen_b};
use crate::qalgebra::{Gen, NCPoly, NumPoly, Poly};
use crate::qscalar::Exact;

pub fn random_word<R: Rng>(rng: &mut R, max_len: usize) -> Vec<Gen> {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| Gen::ALL[rng.gen_range(0..4)]).collect()
}

/// Sum of up to `terms` words of length `<= max_len` with small coefficients `k s^e`.
pub fn random_poly<R: Rng>(rng: &mut R, max_len: usize, terms: usize) -> NCPoly {
    let mut p = NCPoly::zero(&crate::qalgebra::ExactRing);
    for _ in 0..rng.gen_range(1..=terms) {
        let k = rng.gen_range(-3i64..=3);
        let e = rng.gen_range(-2i32..=2);
        let c = &Exact::int(k) * &Exact::s_pow(e);
        p = p.add(&NCPoly::word(&random_word(rng, max_len)).scale(&c));
    }
    p
}

/// `count` pairs of generator words of length `<= max_len`, seeded.
pub fn word_pairs(seed: u64, count: usize, max_len: usize, s: f64) -> Vec<(NumPoly, NumPoly)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = Poly::from_word(&random_word(&mut rng, max_len), &s);
            let y = Poly::from_word(&random_word(&mut rng, max_len), &s);
            (x, y)
        })
        .collect()
}

/// Products of up to `max_len` sphere generators `A, B, B*` with a random scale.
pub fn sphere_element<R: Rng>(rng: &mut R, max_len: usize, s: f64) -> NumPoly {
    let gens = [gen_a(s), gen_b(s), gen_b(s).star()];
    let mut x = Poly::one(&s);
    for _ in 0..rng.gen_range(0..=max_len) {
        x = x.mul(&gens[rng.gen_range(0..3)]);
    }
    x.scale(&rng.gen_range(-1.5..1.5))
}

/// `count` seeded slot lists of `slots` sphere elements each.
pub fn sphere_chains(seed: u64, count: usize, slots: usize, max_len: usize, s: f64) -> Vec<Vec<NumPoly>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..slots).map(|_| sphere_element(&mut rng, max_len, s)).collect()).collect()
}
