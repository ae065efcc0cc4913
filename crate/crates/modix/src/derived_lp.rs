//! Derived L^p norms on weighted matrix models.
//!
//! A weighted space is `M_d` with the trace and a positive diagonal weight
//! `Delta`. The weight is `phi(x) = Tr(Delta x)` and the modular flow is
//! `sigma_z(x) = Delta^{iz} x Delta^{-iz}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::{self, Exec};

pub type CMat = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpace {
    delta: Vec<f64>,
}

impl WeightedSpace {
    pub fn new(delta: Vec<f64>) -> Result<Self> {
        if delta.is_empty() || delta.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidConfig("weights must be strictly positive".into()));
        }
        Ok(Self { delta })
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn condition(&self) -> f64 {
        let (lo, hi) = self.delta.iter().fold((f64::MAX, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
        hi / lo
    }

    /// `Delta^e` as a diagonal matrix.
    pub fn power(&self, e: f64) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.delta.iter().map(|d| Complex64::new(d.powf(e), 0.0)),
        ))
    }
}

/// `Delta^{iz} x Delta^{-iz}`, i.e. `x_jk (Delta_j/Delta_k)^{iz}`.
pub fn sigma_conj(z: Complex64, x: &CMat, w: &WeightedSpace) -> CMat {
    let iz = Complex64::new(0.0, 1.0) * z;
    CMat::from_fn(x.nrows(), x.ncols(), |j, k| {
        let r = (w.delta[j] / w.delta[k]).ln();
        x[(j, k)] * (iz * r).exp()
    })
}

/// `sigma_{it}(x) = Delta^{-t} x Delta^{t}`.
fn sigma_it(t: f64, x: &CMat, w: &WeightedSpace) -> CMat {
    CMat::from_fn(x.nrows(), x.ncols(), |j, k| x[(j, k)] * (w.delta[k] / w.delta[j]).powf(t))
}

fn singular_values(x: &CMat) -> Vec<f64> {
    x.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn schatten(x: &CMat, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidConfig(format!("Schatten exponent must be >= 1, got {p}")));
    }
    Ok(schatten_unchecked(x, p))
}

fn schatten_unchecked(x: &CMat, p: f64) -> f64 {
    let sv = singular_values(x);
    if p.is_infinite() {
        return sv.iter().copied().fold(0.0, f64::max);
    }
    sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p)
}

pub fn operator_norm(x: &CMat) -> f64 {
    singular_values(x).into_iter().fold(0.0, f64::max)
}

/// `t -> ||Delta^{1/p} sigma_{it}(x)||_p`.
pub fn flow_profile(x: &CMat, p: f64, t: f64, w: &WeightedSpace) -> f64 {
    let y = w.power(1.0 / p) * sigma_it(t, x, w);
    schatten_unchecked(&y, p)
}

fn guard(w: &WeightedSpace, reach: f64) -> Result<()> {
    let exponent = w.condition().log2() * reach;
    if exponent > 900.0 {
        return Err(Error::Precision(format!(
            "weight condition number to the power {reach} overflows; use higher precision"
        )));
    }
    Ok(())
}

/// `||x||_{p,n}`: maximum of the flow profile at `t = -n, n`.
pub fn derived_norm(x: &CMat, p: f64, n: u32, w: &WeightedSpace) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidConfig(format!("Schatten exponent must be >= 1, got {p}")));
    }
    guard(w, n as f64 + 1.0 / p)?;
    let n = n as f64;
    Ok(flow_profile(x, p, -n, w).max(flow_profile(x, p, n, w)))
}

/// Maximum of the flow profile over a uniform grid on `[-n, n]`.
pub fn derived_norm_grid(x: &CMat, p: f64, n: u32, w: &WeightedSpace, points: usize) -> Result<(f64, f64)> {
    guard(w, n as f64 + 1.0 / p)?;
    let n = n as f64;
    let points = points.max(2);
    let mut best = (f64::MIN, 0.0);
    for i in 0..points {
        let t = -n + 2.0 * n * i as f64 / (points - 1) as f64;
        let v = flow_profile(x, p, t, w);
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(best)
}

/// `||x||_n = sup_{|t| <= n} ||sigma_{it}(x)||`, taken at the endpoints.
pub fn analytic_norm(x: &CMat, n: u32, w: &WeightedSpace) -> Result<f64> {
    guard(w, n as f64)?;
    let n = n as f64;
    Ok(operator_norm(&sigma_it(-n, x, w)).max(operator_norm(&sigma_it(n, x, w))))
}

/// `phi(x) = sum_j Delta_j x_jj`.
pub fn weighted_phi(x: &CMat, w: &WeightedSpace) -> Complex64 {
    (0..x.nrows()).map(|j| x[(j, j)] * w.delta[j]).sum()
}

/// `|x| = (x* x)^{1/2}`.
pub fn abs(x: &CMat) -> CMat {
    hermitian_fn(&(x.adjoint() * x), |v| v.max(0.0).sqrt())
}

/// Apply `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(h: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|v| Complex64::new(f(v), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest relative excess of the left side over the right side.
    pub worst: f64,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub trials: usize,
    pub max_dim: usize,
    pub seed: u64,
    pub slack: f64,
    pub grid: usize,
    pub exec: Exec,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { trials: 100, max_dim: 6, seed: 1, slack: 1e-9, grid: 200, exec: Exec::default() }
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    CMat::from_fn(d, d, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_space(rng: &mut ChaCha8Rng, d: usize) -> WeightedSpace {
    WeightedSpace::new((0..d).map(|_| rng.gen_range(0.4..2.5)).collect()).unwrap()
}

type Trial<'a> = dyn Fn(&mut ChaCha8Rng, usize) -> Result<(f64, f64)> + Sync + Send + 'a;

/// Runs `trial` and records `lhs <= rhs (1 + slack)` violations. For
/// equalities the trial returns `(|lhs - rhs|, slack scale)`.
fn run_property(name: &str, cfg: &SuiteConfig, salt: u64, trial: &Trial<'_>) -> Result<PropertyReport> {
    let outcomes = parallel::try_map(cfg.exec, (0..cfg.trials).collect(), |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (salt << 32) ^ i as u64);
        let d = rng.gen_range(1..=cfg.max_dim);
        trial(&mut rng, d)
    })?;
    let mut violations = 0;
    let mut worst = f64::MIN;
    for (lhs, rhs) in outcomes {
        let excess = (lhs - rhs) / rhs.abs().max(1e-300);
        worst = worst.max(excess);
        if lhs > rhs * (1.0 + cfg.slack) + 1e-300 {
            violations += 1;
        }
    }
    Ok(PropertyReport { name: name.into(), trials: cfg.trials, violations, worst })
}

fn pick(rng: &mut ChaCha8Rng, from: &[f64]) -> f64 {
    from[rng.gen_range(0..from.len())]
}

/// The full property suite: Hoelder, inclusion, adjoint, bimodule, twisted
/// trace, flow invariance, centralizer power identity, endpoint supremum.
pub fn property_suite(cfg: &SuiteConfig) -> Result<Vec<PropertyReport>> {
    let exps = [1.0, 2.0, 3.0, 4.0];
    let grid = cfg.grid;
    let mut out = Vec::new();

    out.push(run_property("hoelder", cfg, 1, &|rng, d| {
        let (mut p, mut q) = (pick(rng, &exps), pick(rng, &exps));
        while 1.0 / p + 1.0 / q > 1.0 {
            p = pick(rng, &exps);
            q = pick(rng, &exps);
        }
        let r = 1.0 / (1.0 / p + 1.0 / q);
        let n = rng.gen_range(0..=2u32);
        let w = random_space(rng, d);
        let (x, y) = (random_matrix(rng, d), random_matrix(rng, d));
        let lhs = derived_norm(&(&x * &y), r, n, &w)?;
        let rhs = derived_norm(&x, p, n + (1.0 / q).ceil() as u32, &w)? * derived_norm(&y, q, n, &w)?;
        Ok((lhs, rhs))
    })?);

    out.push(run_property("inclusion", cfg, 2, &|rng, d| {
        let (mut p, mut q) = (pick(rng, &exps), pick(rng, &exps));
        if p > q {
            std::mem::swap(&mut p, &mut q);
        }
        let n = rng.gen_range(0..=2u32);
        let w = random_space(rng, d);
        let x = random_matrix(rng, d);
        let lhs = derived_norm(&x, q, n, &w)?;
        let rhs = analytic_norm(&x, n, &w)?.powf(1.0 - p / q) * derived_norm(&x, p, n, &w)?.powf(p / q);
        Ok((lhs, rhs))
    })?);

    out.push(run_property("adjoint", cfg, 3, &|rng, d| {
        let p = pick(rng, &exps);
        let n = rng.gen_range(0..=2u32);
        let w = random_space(rng, d);
        let x = random_matrix(rng, d);
        let lhs = derived_norm(&x.adjoint(), p, n, &w)?;
        let rhs = derived_norm(&x, p, n + (1.0 / p).ceil() as u32, &w)?;
        Ok((lhs, rhs))
    })?);

    out.push(run_property("bimodule", cfg, 4, &|rng, d| {
        let p = pick(rng, &exps);
        let n = rng.gen_range(0..=2u32);
        let w = random_space(rng, d);
        let (x, y, z) = (random_matrix(rng, d), random_matrix(rng, d), random_matrix(rng, d));
        let lhs = derived_norm(&(&y * &x * &z), p, n, &w)?;
        let rhs = analytic_norm(&y, n + (1.0 / p).ceil() as u32, &w)?
            * derived_norm(&x, p, n, &w)?
            * analytic_norm(&z, n, &w)?;
        Ok((lhs, rhs))
    })?);

    out.push(run_property("twisted-trace", cfg, 5, &|rng, d| {
        let w = random_space(rng, d);
        let (x, y) = (random_matrix(rng, d), random_matrix(rng, d));
        let lhs = weighted_phi(&(&x * &y), &w);
        let rhs = weighted_phi(&(sigma_conj(Complex64::new(0.0, 1.0), &y, &w) * &x), &w);
        Ok(equality(lhs, rhs))
    })?);

    out.push(run_property("flow-invariance", cfg, 6, &|rng, d| {
        let w = random_space(rng, d);
        let x = random_matrix(rng, d);
        let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        Ok(equality(weighted_phi(&sigma_conj(z, &x, &w), &w), weighted_phi(&x, &w)))
    })?);

    out.push(run_property("centralizer-power", cfg, 7, &|rng, d| {
        let p = pick(rng, &exps);
        let (w, x) = random_centralizer_pair(rng, d);
        let lhs = hermitian_fn(&(w.power(1.0) * hermitian_fn(&abs(&x), |v| v.max(0.0).powf(p))), |v| {
            v.max(0.0).powf(1.0 / p)
        });
        let rhs = w.power(1.0 / p) * abs(&x);
        let err = (lhs - &rhs).norm() / rhs.norm().max(1.0);
        Ok((1.0 + err, 1.0))
    })?);

    out.push(run_property("endpoint-supremum", cfg, 8, &|rng, d| {
        let p = pick(rng, &exps);
        let n = rng.gen_range(1..=2u32);
        let w = random_space(rng, d);
        let x = random_matrix(rng, d);
        let (grid_max, _) = derived_norm_grid(&x, p, n, &w, grid)?;
        Ok((grid_max, derived_norm(&x, p, n, &w)?))
    })?);

    Ok(out)
}

/// Encodes `|a - b| <= slack * scale` as an inequality pair.
fn equality(a: Complex64, b: Complex64) -> (f64, f64) {
    let scale = a.norm().max(b.norm()).max(1.0);
    (1.0 + (a - b).norm() / scale, 1.0)
}

/// A weight with repeated eigenvalues and a matrix commuting with it.
fn random_centralizer_pair(rng: &mut ChaCha8Rng, d: usize) -> (WeightedSpace, CMat) {
    let levels = rng.gen_range(1..=d.min(3));
    let values: Vec<f64> = (0..levels).map(|_| rng.gen_range(0.4..2.5)).collect();
    let labels: Vec<usize> = (0..d).map(|_| rng.gen_range(0..levels)).collect();
    let w = WeightedSpace::new(labels.iter().map(|l| values[*l]).collect()).unwrap();
    let x = random_matrix(rng, d);
    let x = CMat::from_fn(d, d, |i, j| if labels[i] == labels[j] { x[(i, j)] } else { Complex64::new(0.0, 0.0) });
    (w, x)
}
