//! Thin helpers over `sprs` CSR matrices.

use sprs::{CsMat, TriMat};

pub type Sp = CsMat<f64>;

pub fn from_triplets(rows: usize, cols: usize, trips: impl IntoIterator<Item = (usize, usize, f64)>) -> Sp {
    let mut t = TriMat::new((rows, cols));
    for (i, j, v) in trips {
        if v != 0.0 {
            t.add_triplet(i, j, v);
        }
    }
    t.to_csr()
}

pub fn identity(n: usize) -> Sp {
    CsMat::eye(n)
}

pub fn zero(rows: usize, cols: usize) -> Sp {
    CsMat::zero((rows, cols))
}

pub fn diag(v: &[f64]) -> Sp {
    from_triplets(v.len(), v.len(), v.iter().enumerate().map(|(i, x)| (i, i, *x)))
}

pub fn transpose(a: &Sp) -> Sp {
    a.transpose_view().to_csr()
}

pub fn scale(a: &Sp, k: f64) -> Sp {
    a.map(|v| v * k)
}

pub fn add(a: &Sp, b: &Sp) -> Sp {
    a + b
}

pub fn sub(a: &Sp, b: &Sp) -> Sp {
    a - b
}

pub fn mul(a: &Sp, b: &Sp) -> Sp {
    a * b
}

/// `a * diag(d)`.
pub fn mul_diag_right(a: &Sp, d: &[f64]) -> Sp {
    let mut out = a.clone();
    for (_, mut row) in out.outer_iterator_mut().enumerate() {
        for (j, v) in row.iter_mut() {
            *v *= d[j];
        }
    }
    out
}

/// `diag(d) * a`.
pub fn mul_diag_left(d: &[f64], a: &Sp) -> Sp {
    let mut out = a.clone();
    for (i, mut row) in out.outer_iterator_mut().enumerate() {
        for (_, v) in row.iter_mut() {
            *v *= d[i];
        }
    }
    out
}

pub fn entry(a: &Sp, i: usize, j: usize) -> f64 {
    a.get(i, j).copied().unwrap_or(0.0)
}

/// Largest absolute entry among columns where `mask` holds.
pub fn max_abs_masked(a: &Sp, mask: &[bool]) -> f64 {
    a.iter()
        .filter(|(_, (_, j))| mask[*j])
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &Sp) -> f64 {
    a.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max)
}

pub fn diagonal(a: &Sp) -> Vec<f64> {
    let n = a.rows().min(a.cols());
    (0..n).map(|i| entry(a, i, i)).collect()
}

pub fn matvec(a: &Sp, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    for (i, row) in a.outer_iterator().enumerate() {
        y[i] = row.iter().map(|(j, v)| v * x[j]).sum();
    }
    y
}

/// Operator norm of `a` restricted to the columns in `mask`, by power iteration.
pub fn op_norm_masked(a: &Sp, mask: &[bool], iters: usize) -> f64 {
    let at = transpose(a);
    let mut x: Vec<f64> = mask.iter().enumerate().map(|(i, m)| if *m { 1.0 + (i % 7) as f64 * 0.1 } else { 0.0 }).collect();
    let mut norm = 0.0;
    for _ in 0..iters {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = matvec(a, &x);
        norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = matvec(&at, &y);
        for (v, m) in x.iter_mut().zip(mask) {
            if !m {
                *v = 0.0;
            }
        }
    }
    norm
}

/// Block matrix `[[a, b], [c, d]]`.
pub fn block2(a: &Sp, b: &Sp, c: &Sp, d: &Sp) -> Sp {
    let (r1, c1) = (a.rows(), a.cols());
    let mut trips = Vec::with_capacity(a.nnz() + b.nnz() + c.nnz() + d.nnz());
    for (blk, ro, co) in [(a, 0, 0), (b, 0, c1), (c, r1, 0), (d, r1, c1)] {
        trips.extend(blk.iter().map(|(v, (i, j))| (i + ro, j + co, *v)));
    }
    from_triplets(r1 + c.rows(), c1 + b.cols(), trips)
}

pub fn block_diag(a: &Sp, b: &Sp) -> Sp {
    block2(a, &zero(a.rows(), b.cols()), &zero(b.rows(), a.cols()), b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_and_transpose() {
        let a = from_triplets(2, 2, [(0, 1, 2.0), (1, 0, 3.0)]);
        let t = transpose(&a);
        assert_eq!(entry(&t, 1, 0), 2.0);
        let bd = block_diag(&a, &identity(1));
        assert_eq!(bd.rows(), 3);
        assert_eq!(entry(&bd, 2, 2), 1.0);
        assert_eq!(matvec(&a, &[1.0, 1.0]), vec![2.0, 3.0]);
        assert_eq!(entry(&mul_diag_left(&[2.0, 5.0], &a), 1, 0), 15.0);
        assert_eq!(entry(&mul_diag_right(&a, &[2.0, 5.0]), 0, 1), 10.0);
    }
}
