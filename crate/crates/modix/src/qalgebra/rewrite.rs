use super::coeff::Coeff;
use super::monomial::{Gen, Monomial};
use super::poly::Poly;

const STEP_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Leftmost,
    Rightmost,
}

/// Right-hand side of the rewrite rule for an adjacent pair, as
/// (s-exponent, replacement word) terms.
fn rule(x: Gen, y: Gen) -> Option<&'static [(i32, &'static [Gen])]> {
    use Gen::*;
    Some(match (x, y) {
        (B, A) => &[(-2, &[A, B])],
        (C, A) => &[(-2, &[A, C])],
        (C, B) => &[(0, &[B, C])],
        (B, D) => &[(2, &[D, B])],
        (C, D) => &[(2, &[D, C])],
        (A, D) => &[(0, &[]), (2, &[B, C])],
        (D, A) => &[(0, &[]), (-2, &[B, C])],
        _ => return None,
    })
}

fn redex(word: &[Gen], strategy: Strategy) -> Option<usize> {
    let pairs = 0..word.len().saturating_sub(1);
    let hit = |&i: &usize| rule(word[i], word[i + 1]).is_some();
    match strategy {
        Strategy::Leftmost => pairs.clone().find(hit),
        Strategy::Rightmost => pairs.rev().find(hit),
    }
}

/// Rewrite `coeff * word` to PBW normal form.
///
/// Panics if the step guard trips, which would mean the rewrite system
/// failed to terminate.
pub fn normal_form<C: Coeff>(coeff: C, word: &[Gen], strategy: Strategy, ring: &C::Ring) -> Poly<C> {
    let mut out = Poly::zero(ring);
    let mut work: Vec<(C, Vec<Gen>)> = vec![(coeff, word.to_vec())];
    let mut steps = 0usize;
    while let Some((c, w)) = work.pop() {
        steps += 1;
        assert!(steps < STEP_LIMIT, "rewrite system did not terminate");
        match redex(&w, strategy) {
            None => {
                let m = Monomial::from_normal_word(&w).expect("irreducible word is normal");
                out.add_term(m, c);
            }
            Some(i) => {
                for (e, rep) in rule(w[i], w[i + 1]).unwrap() {
                    let mut nw = Vec::with_capacity(w.len());
                    nw.extend_from_slice(&w[..i]);
                    nw.extend_from_slice(rep);
                    nw.extend_from_slice(&w[i + 2..]);
                    work.push((c.mul(&C::s_pow(*e, ring)), nw));
                }
            }
        }
    }
    out
}
