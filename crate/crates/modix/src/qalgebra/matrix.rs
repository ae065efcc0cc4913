use num_complex::Complex64;

use super::coeff::{Coeff, ExactRing};
use super::monomial::Gen;
use super::poly::{CPoly, NCPoly, Poly};
use crate::error::{Error, Result};

/// Square matrix with polynomial entries, row-major.
#[derive(Clone, PartialEq, Debug)]
pub struct PolyMatrix<C: Coeff> {
    pub k: usize,
    pub entries: Vec<Poly<C>>,
}

impl<C: Coeff> PolyMatrix<C> {
    pub fn new(k: usize, entries: Vec<Poly<C>>) -> Result<Self> {
        if entries.len() != k * k {
            return Err(Error::SizeMismatch(format!("{} entries for a {k}x{k} matrix", entries.len())));
        }
        Ok(Self { k, entries })
    }

    pub fn identity(k: usize, ring: &C::Ring) -> Self {
        let entries = (0..k * k)
            .map(|i| if i / k == i % k { Poly::one(ring) } else { Poly::zero(ring) })
            .collect();
        Self { k, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly<C> {
        &self.entries[i * self.k + j]
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        if self.k != o.k {
            return Err(Error::SizeMismatch(format!("{} vs {}", self.k, o.k)));
        }
        let k = self.k;
        let ring = self.entries[0].ring().clone();
        let entries = (0..k * k)
            .map(|ij| {
                let (i, j) = (ij / k, ij % k);
                (0..k).fold(Poly::zero(&ring), |acc, l| acc.add(&self.get(i, l).mul(o.get(l, j))))
            })
            .collect();
        Ok(Self { k, entries })
    }

    /// Entrywise star of the transpose.
    pub fn star(&self) -> Self {
        let k = self.k;
        let entries = (0..k * k).map(|ij| self.get(ij % k, ij / k).star()).collect();
        Self { k, entries }
    }

    pub fn map(&self, f: impl Fn(&Poly<C>) -> Poly<C>) -> Self {
        Self { k: self.k, entries: self.entries.iter().map(f).collect() }
    }

    pub fn sigma_imag(&self, y: i32) -> Self {
        self.map(|p| p.sigma_imag(y))
    }

    pub fn sigma(&self, z: Complex64, s: f64) -> PolyMatrix<Complex64> {
        PolyMatrix { k: self.k, entries: self.entries.iter().map(|p| p.sigma(z, s)).collect() }
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(Poly::degree).max().unwrap_or(0)
    }
}

impl PolyMatrix<crate::qscalar::Exact> {
    /// The fundamental unitary `[[a, b], [c, d]]`.
    pub fn fundamental() -> Self {
        let entries = [Gen::A, Gen::B, Gen::C, Gen::D].iter().map(|g| NCPoly::exact_gen(*g)).collect();
        Self { k: 2, entries }
    }

    pub fn to_numeric(&self, s: f64) -> PolyMatrix<f64> {
        PolyMatrix { k: self.k, entries: self.entries.iter().map(|p| p.to_numeric(s)).collect() }
    }

    pub fn exact_identity(k: usize) -> Self {
        Self::identity(k, &ExactRing)
    }
}

pub type CPolyMatrix = PolyMatrix<Complex64>;

impl CPolyMatrix {
    pub fn is_scalar_diagonal(&self, tol: f64, s: f64) -> std::result::Result<Vec<Complex64>, (usize, usize, CPoly)> {
        let k = self.k;
        let mut diag = Vec::with_capacity(k);
        for i in 0..k {
            for j in 0..k {
                let p = self.get(i, j).prune(tol, s);
                let ok = if i == j {
                    p.terms().all(|(m, _)| m.is_one())
                } else {
                    p.is_zero()
                };
                if !ok {
                    return Err((i, j, p));
                }
            }
            diag.push(self.get(i, i).scalar_part());
        }
        Ok(diag)
    }
}
