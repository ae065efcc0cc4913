//! The coordinate *-algebra of quantum SU(2).
//!
//! Elements are kept in the PBW normal form `a^k b^m c^n`, `d^k b^m c^n`
//! (`k >= 1`). Products are computed from closed formulas for right
//! multiplication by a generator; [`normal_form`] rewrites arbitrary words
//! with the seven commutation rules and serves as an independent route.
//!
//! Weights: the n-weight sends `a, c` to `-1/2` and `b, d` to `+1/2`; the
//! m-weight sends `a, b` to `-1/2` and `c, d` to `+1/2`. Both are stored
//! doubled. `sigma_z` multiplies a monomial of n-weight `w` by `q^{-izw}`.

mod coeff;
mod matrix;
mod monomial;
mod poly;
mod rewrite;

pub use coeff::{Coeff, ExactRing};
pub use matrix::{CPolyMatrix, PolyMatrix};
pub use monomial::{Branch, Gen, Monomial};
pub use poly::{CPoly, NCPoly, NumPoly, Poly};
pub use rewrite::{normal_form, Strategy};

pub type NCMatrix = PolyMatrix<crate::qscalar::Exact>;
pub type NumMatrix = PolyMatrix<f64>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qscalar::Exact;
    use Gen::*;

    fn nf(w: &[Gen]) -> NCPoly {
        normal_form(Exact::one(), w, Strategy::Leftmost, &ExactRing)
    }

    fn mono(m: Monomial, c: Exact) -> NCPoly {
        Poly::monomial(m, c, &ExactRing)
    }

    #[test]
    fn rewrite_examples() {
        assert_eq!(nf(&[B, A]), mono(Monomial::a(1, 1, 0), Exact::s_pow(-2)));
        let ad = NCPoly::exact_one().add(&mono(Monomial::a(0, 1, 1), Exact::s_pow(2)));
        assert_eq!(nf(&[A, D]), ad);
        let da = NCPoly::exact_one().add(&mono(Monomial::a(0, 1, 1), Exact::s_pow(-2)));
        assert_eq!(nf(&[D, A]), da);
        assert_eq!(nf(&[C, B]), mono(Monomial::a(0, 1, 1), Exact::one()));
    }

    #[test]
    fn mul_examples() {
        let x = NCPoly::word(&[A, B, D]);
        assert_eq!(NCPoly::exact_one().mul(&x), x);
        assert_eq!(NCPoly::word(&[A, D]), nf(&[A, D]));
        assert_eq!(NCPoly::word(&[B, A]), nf(&[B, A]));
    }

    #[test]
    fn star_examples() {
        assert_eq!(NCPoly::exact_gen(A).star(), NCPoly::exact_gen(D));
        assert_eq!(
            NCPoly::exact_gen(B).star(),
            mono(Monomial::gen(C), -Exact::s_pow(2))
        );
        let ab = NCPoly::word(&[A, B]).star();
        let expected = NCPoly::word(&[D, C]).scale(&-Exact::s_pow(4));
        assert_eq!(ab, expected);
    }

    #[test]
    fn sigma_examples() {
        let a = NCPoly::exact_gen(A);
        assert_eq!(a.sigma_imag(1), a.scale(&Exact::s_pow(-1)));
        assert_eq!(a.sigma_imag(-2), a.scale(&Exact::s_pow(2)));
        assert_eq!(NCPoly::exact_one().sigma_imag(5), NCPoly::exact_one());
    }

    #[test]
    fn drop_scalar_examples() {
        assert!(NCPoly::exact_one().drop_scalar().is_zero());
        let x = NCPoly::exact_gen(A).add(&NCPoly::exact_scalar(Exact::int(2)));
        assert_eq!(x.drop_scalar(), NCPoly::exact_gen(A));
    }

    #[test]
    fn relations_hold() {
        let q = NCPoly::exact_scalar(Exact::s_pow(2));
        let qi = NCPoly::exact_scalar(Exact::s_pow(-2));
        let w = NCPoly::word;
        assert_eq!(w(&[A, B]), q.mul(&w(&[B, A])));
        assert_eq!(w(&[A, C]), q.mul(&w(&[C, A])));
        assert_eq!(w(&[B, D]), q.mul(&w(&[D, B])));
        assert_eq!(w(&[C, D]), q.mul(&w(&[D, C])));
        assert_eq!(w(&[B, C]), w(&[C, B]));
        assert_eq!(w(&[A, D]).sub(&q.mul(&w(&[B, C]))), NCPoly::exact_one());
        assert_eq!(w(&[D, A]).sub(&qi.mul(&w(&[B, C]))), NCPoly::exact_one());
    }

    #[test]
    fn fundamental_is_unitary() {
        let u = NCMatrix::fundamental();
        let id = NCMatrix::exact_identity(2);
        assert_eq!(u.star().mul(&u).unwrap(), id);
        assert_eq!(u.mul(&u.star()).unwrap(), id);
    }
}
