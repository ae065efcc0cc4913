//! Low modes of sparse positive semidefinite Gram matrices.
//!
//! A Gram matrix whose rows and columns carry a level label, with couplings
//! only between nearby levels, splits into connected components; each
//! component is block tridiagonal once levels are grouped into chunks as wide
//! as the coupling range. Eigenvalue counts below a threshold come from the
//! inertia of a block LDL^T factorization, and the low eigenvectors from
//! inverse subspace iteration on a block Cholesky factor.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::parallel::{self, Exec};
use crate::sparse::Sp;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiag {
    pub diag: Vec<DMatrix<f64>>,
    /// `off[k]` couples block `k` (rows) with block `k + 1` (columns).
    pub off: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct BlockCholesky {
    l: Vec<DMatrix<f64>>,
    w: Vec<DMatrix<f64>>,
}

impl BlockTridiag {
    pub fn new(diag: Vec<DMatrix<f64>>, off: Vec<DMatrix<f64>>) -> Result<Self> {
        if off.len() + 1 != diag.len().max(1) {
            return Err(Error::SizeMismatch(format!("{} diagonal and {} off-diagonal blocks", diag.len(), off.len())));
        }
        for (k, b) in off.iter().enumerate() {
            if b.nrows() != diag[k].nrows() || b.ncols() != diag[k + 1].nrows() {
                return Err(Error::SizeMismatch(format!("off-diagonal block {k}")));
            }
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.iter().map(|d| d.nrows()).sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.diag.len() + 1);
        let mut acc = 0;
        out.push(0);
        for d in &self.diag {
            acc += d.nrows();
            out.push(acc);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let off = self.offsets();
        let mut out = DMatrix::zeros(n, n);
        for (k, d) in self.diag.iter().enumerate() {
            out.view_mut((off[k], off[k]), d.shape()).copy_from(d);
        }
        for (k, b) in self.off.iter().enumerate() {
            out.view_mut((off[k], off[k + 1]), b.shape()).copy_from(b);
            out.view_mut((off[k + 1], off[k]), (b.ncols(), b.nrows())).copy_from(&b.transpose());
        }
        out
    }

    pub fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let off = self.offsets();
        let p = x.ncols();
        let mut y = DMatrix::zeros(x.nrows(), p);
        for (k, d) in self.diag.iter().enumerate() {
            let xs = x.rows(off[k], d.nrows());
            let mut ys = y.rows_mut(off[k], d.nrows());
            ys += d * xs;
        }
        for (k, b) in self.off.iter().enumerate() {
            let (r0, c0) = (off[k], off[k + 1]);
            let upper = b * x.rows(c0, b.ncols());
            let lower = b.transpose() * x.rows(r0, b.nrows());
            let mut yr = y.rows_mut(r0, b.nrows());
            yr += upper;
            let mut yc = y.rows_mut(c0, b.ncols());
            yc += lower;
        }
        y
    }

    /// Number of eigenvalues strictly below `tau`, by Sylvester's law of inertia.
    pub fn count_below(&self, tau: f64) -> usize {
        let mut shift = tau;
        for attempt in 0..8 {
            if let Some(c) = self.try_count(shift) {
                return c;
            }
            shift = tau * (1.0 + 1e-9 * (attempt + 1) as f64) + f64::MIN_POSITIVE;
        }
        self.try_count(shift).unwrap_or(0)
    }

    fn try_count(&self, tau: f64) -> Option<usize> {
        let mut count = 0;
        let mut s: Option<DMatrix<f64>> = None;
        for k in 0..self.diag.len() {
            let mut a = self.diag[k].clone();
            for i in 0..a.nrows() {
                a[(i, i)] -= tau;
            }
            if let Some(prev) = s.take() {
                let b = &self.off[k - 1];
                let x = prev.lu().solve(b)?;
                a -= b.transpose() * x;
                a = (&a + a.transpose()) * 0.5;
            }
            let ev = a.clone().symmetric_eigenvalues();
            if ev.iter().any(|v| *v == 0.0) {
                return None;
            }
            count += ev.iter().filter(|v| **v < 0.0).count();
            s = Some(a);
        }
        Some(count)
    }

    /// Block Cholesky factor of `self + shift`.
    pub fn cholesky(&self, shift: f64) -> Option<BlockCholesky> {
        let mut l = Vec::with_capacity(self.diag.len());
        let mut w: Vec<DMatrix<f64>> = Vec::with_capacity(self.off.len());
        for k in 0..self.diag.len() {
            let mut a = self.diag[k].clone();
            for i in 0..a.nrows() {
                a[(i, i)] += shift;
            }
            if k > 0 {
                let wk = &w[k - 1];
                a -= wk.transpose() * wk;
                a = (&a + a.transpose()) * 0.5;
            }
            let lk = a.cholesky()?.unpack();
            if k < self.off.len() {
                let wk = lk.solve_lower_triangular(&self.off[k])?;
                w.push(wk);
            }
            l.push(lk);
        }
        Some(BlockCholesky { l, w })
    }
}

impl BlockCholesky {
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let sizes: Vec<usize> = self.l.iter().map(|l| l.nrows()).collect();
        let mut off = vec![0usize];
        for s in &sizes {
            off.push(off.last().unwrap() + s);
        }
        let nb = self.l.len();
        let mut y: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
        for k in 0..nb {
            let mut rhs = b.rows(off[k], sizes[k]).into_owned();
            if k > 0 {
                rhs -= self.w[k - 1].transpose() * &y[k - 1];
            }
            y.push(self.l[k].solve_lower_triangular(&rhs).expect("nonsingular factor"));
        }
        let mut x = vec![DMatrix::zeros(0, 0); nb];
        for k in (0..nb).rev() {
            let mut rhs = y[k].clone();
            if k + 1 < nb {
                rhs -= &self.w[k] * &x[k + 1];
            }
            x[k] = self.l[k].tr_solve_lower_triangular(&rhs).expect("nonsingular factor");
        }
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for k in 0..nb {
            out.rows_mut(off[k], sizes[k]).copy_from(&x[k]);
        }
        out
    }
}

/// Eigenpairs below a threshold, with the evidence for a spectral gap.
#[derive(Debug, Clone)]
pub struct LowModes {
    pub values: Vec<f64>,
    /// Orthonormal columns, one per value.
    pub vectors: DMatrix<f64>,
    /// Eigenvalue count below `tau_zero`.
    pub count: usize,
    /// The count below `gap^2` times the largest low value agreed with `count`.
    pub gap_ok: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LowModeConfig {
    /// Eigenvalues of the Gram matrix below this are treated as zero.
    pub tau_zero: f64,
    /// Required ratio between singular values on either side of the cut.
    pub gap: f64,
    pub extra: usize,
    pub max_iter: usize,
    pub seed: u64,
}

/// Partial isometry `v` of the polar decomposition `x = v|x|`, dropping
/// singular values below `tol` times the largest.
pub fn polar_isometry(x: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let eig = (x.transpose() * x).symmetric_eigen();
    let sv: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let top = sv.iter().fold(0.0f64, |a, b| a.max(*b));
    let mut inv_abs = DMatrix::zeros(x.ncols(), x.ncols());
    for (k, s) in sv.iter().enumerate() {
        if *s > tol * top {
            let e = eig.eigenvectors.column(k);
            inv_abs += e * e.transpose() / *s;
        }
    }
    x * inv_abs
}

fn orthonormalize(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().qr().q()
}

pub fn low_modes(g: &BlockTridiag, cfg: &LowModeConfig) -> Result<LowModes> {
    let n = g.dim();
    let count = g.count_below(cfg.tau_zero);
    if count == 0 || n == 0 {
        return Ok(LowModes { values: vec![], vectors: DMatrix::zeros(n, 0), count: 0, gap_ok: true });
    }
    let p = (count + cfg.extra).min(n);
    let shift = cfg.tau_zero.sqrt();
    let chol = g
        .cholesky(shift)
        .ok_or_else(|| Error::RankDeficient(n))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = orthonormalize(&DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0)));
    let mut values = vec![0.0; p];
    for _ in 0..cfg.max_iter {
        x = orthonormalize(&chol.solve(&x));
        let gx = g.mul(&x);
        let h = x.transpose() * &gx;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let rot = DMatrix::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
        x = &x * rot;
        values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let r = g.mul(&x.columns(0, count).into_owned()) - x.columns(0, count) * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&values[..count]));
        if r.norm() <= cfg.tau_zero.sqrt() * 1e-3 {
            break;
        }
    }
    let top = values[count - 1].max(0.0);
    let probe = top * cfg.gap * cfg.gap;
    let gap_ok = probe <= cfg.tau_zero || g.count_below(probe) == count;
    Ok(LowModes {
        values: values[..count].iter().map(|v| v.max(0.0)).collect(),
        vectors: x.columns(0, count).into_owned(),
        count,
        gap_ok,
    })
}

/// A connected component of a sparse Gram matrix in block tridiagonal form.
#[derive(Debug, Clone)]
pub struct Component {
    /// Global column indices in block order.
    pub columns: Vec<usize>,
    pub matrix: BlockTridiag,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Split a symmetric sparse matrix into connected components and arrange each
/// as a block tridiagonal matrix by level.
pub fn components(g: &Sp, levels: &[i32], exec: Exec) -> Result<Vec<Component>> {
    let n = g.rows();
    if g.cols() != n || levels.len() != n {
        return Err(Error::SizeMismatch("gram matrix and levels".into()));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for (_, (i, j)) in g.iter() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    parallel::try_map(exec, groups, |cols| component(g, levels, cols))
}

fn component(g: &Sp, levels: &[i32], mut cols: Vec<usize>) -> Result<Component> {
    cols.sort_by_key(|&c| (levels[c], c));
    let lo = levels[cols[0]];
    let mut width = 1;
    for &c in &cols {
        if let Some(row) = g.outer_view(c) {
            for (j, _) in row.iter() {
                width = width.max((levels[j] - levels[c]).abs());
            }
        }
    }
    let chunk_of = |c: usize| ((levels[c] - lo) / width) as usize;
    let nchunks = chunk_of(*cols.last().unwrap()) + 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nchunks];
    for &c in &cols {
        members[chunk_of(c)].push(c);
    }
    members.retain(|m| !m.is_empty());
    let mut pos = std::collections::HashMap::with_capacity(cols.len());
    for (b, m) in members.iter().enumerate() {
        for (i, &c) in m.iter().enumerate() {
            pos.insert(c, (b, i));
        }
    }
    let mut diag: Vec<DMatrix<f64>> = members.iter().map(|m| DMatrix::zeros(m.len(), m.len())).collect();
    let mut off: Vec<DMatrix<f64>> = (0..members.len().saturating_sub(1))
        .map(|b| DMatrix::zeros(members[b].len(), members[b + 1].len()))
        .collect();
    for m in &members {
        for &c in m {
            let (bc, ic) = pos[&c];
            let Some(row) = g.outer_view(c) else { continue };
            for (j, v) in row.iter() {
                let (bj, ij) = pos[&j];
                if bj == bc {
                    diag[bc][(ic, ij)] = *v;
                } else if bj == bc + 1 {
                    off[bc][(ic, ij)] = *v;
                } else if bc != bj + 1 {
                    return Err(Error::SizeMismatch(format!("coupling across {} chunks", bj.abs_diff(bc))));
                }
            }
        }
    }
    let columns = members.concat();
    Ok(Component { columns, matrix: BlockTridiag::new(diag, off)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse;

    fn random_tridiag(seed: u64, sizes: &[usize]) -> BlockTridiag {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = sizes.iter().sum();
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut off = vec![0];
        for s in sizes {
            off.push(off.last().unwrap() + s);
        }
        for k in 0..sizes.len() {
            let hi = if k + 1 < sizes.len() { off[k + 2] } else { off[k + 1] };
            for i in off[k]..off[k + 1] {
                for j in off[k]..hi {
                    m[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
        }
        // Rank deficient Gram matrix: drop two rows of the factor.
        let mut factor = m;
        factor.row_mut(1).fill(0.0);
        factor.row_mut(n - 1).fill(0.0);
        let gram = factor.transpose() * &factor;
        let diag = (0..sizes.len()).map(|k| gram.view((off[k], off[k]), (sizes[k], sizes[k])).into_owned()).collect();
        let offd = (0..sizes.len() - 1).map(|k| gram.view((off[k], off[k + 1]), (sizes[k], sizes[k + 1])).into_owned()).collect();
        BlockTridiag::new(diag, offd).unwrap()
    }

    #[test]
    fn inertia_matches_dense_spectrum() {
        let g = random_tridiag(3, &[3, 4, 2, 5]);
        let dense = g.to_dense();
        let ev = dense.symmetric_eigenvalues();
        for tau in [1e-8, 0.1, 0.7, 2.0, 10.0] {
            let want = ev.iter().filter(|v| **v < tau).count();
            assert_eq!(g.count_below(tau), want, "tau {tau}");
        }
    }

    #[test]
    fn block_product_and_solve() {
        let g = random_tridiag(5, &[2, 3, 3]);
        let dense = g.to_dense();
        let x = DMatrix::from_fn(8, 2, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5));
        assert!((g.mul(&x) - &dense * &x).norm() < 1e-12);
        let chol = g.cholesky(0.5).unwrap();
        let shifted = dense + DMatrix::identity(8, 8) * 0.5;
        assert!((&shifted * chol.solve(&x) - &x).norm() < 1e-10);
    }

    #[test]
    fn low_modes_find_the_null_space() {
        let g = random_tridiag(9, &[4, 4, 4]);
        let cfg = LowModeConfig { tau_zero: 1e-14, gap: 1e3, extra: 3, max_iter: 20, seed: 1 };
        let lm = low_modes(&g, &cfg).unwrap();
        assert_eq!(lm.count, 2);
        assert!(lm.gap_ok);
        let r = g.mul(&lm.vectors);
        assert!(r.norm() < 1e-8);
        let gram = lm.vectors.transpose() * &lm.vectors;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn components_split_and_band() {
        let g = sparse::from_triplets(
            5,
            5,
            [(0, 0, 2.0), (0, 2, 1.0), (2, 0, 1.0), (2, 2, 2.0), (1, 1, 1.0), (3, 3, 1.0), (3, 4, 0.5), (4, 3, 0.5), (4, 4, 1.0)],
        );
        let levels = [0, 0, 1, 2, 3];
        let comps = components(&g, &levels, Exec::Sequential).unwrap();
        assert_eq!(comps.len(), 3);
        let sizes: Vec<usize> = comps.iter().map(|c| c.columns.len()).collect();
        assert_eq!(sizes, vec![2, 1, 2]);
        for c in &comps {
            let dense = c.matrix.to_dense();
            for (a, &i) in c.columns.iter().enumerate() {
                for (b, &j) in c.columns.iter().enumerate() {
                    assert_eq!(dense[(a, b)], sparse::entry(&g, i, j));
                }
            }
        }
    }
}
