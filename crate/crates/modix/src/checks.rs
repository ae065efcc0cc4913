//! Property suites for the cyclic identities and the truncated representations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corep::{decay_profile, decay_ratios, Representation};
use crate::derived_lp::PropertyReport;
use crate::error::Result;
use crate::parallel;
use crate::qalgebra::{ExactRing, Gen, NCMatrix, NCPoly};
use crate::qscalar::{Exact, QContext};
use crate::sample::random_poly;
use crate::twisted_cyclic::{gen_trace, Chain, MatrixChain, Twist};

fn exact_chain(rng: &mut ChaCha8Rng, slots: usize) -> Result<Chain<Exact>> {
    let xs: Vec<NCPoly> = (0..slots).map(|_| random_poly(rng, 3, 2)).collect();
    Chain::tensor(Exact::one(), &xs)
}

/// Exact identities on `trials` random chains. `worst` counts the terms
/// surviving in the largest residual chain.
pub fn cyclic_suite(trials: usize, seed: u64, exec: parallel::Exec) -> Result<Vec<PropertyReport>> {
    let twist = Twist::sigma_imag(1);
    let run = |name: &str, salt: u64, f: &(dyn Fn(&mut ChaCha8Rng) -> Result<usize> + Sync)| -> Result<PropertyReport> {
        let sizes = parallel::try_map(exec, (0..trials).collect(), |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (salt << 40) ^ i as u64);
            f(&mut rng)
        })?;
        Ok(PropertyReport {
            name: name.into(),
            trials,
            violations: sizes.iter().filter(|n| **n > 0).count(),
            worst: sizes.iter().copied().max().unwrap_or(0) as f64,
        })
    };
    Ok(vec![
        run("b_sigma_squared", 1, &|rng| {
            let n = rng.gen_range(2..=3);
            let ch = exact_chain(rng, n + 1)?;
            Ok(ch.twisted_b(&twist)?.twisted_b(&twist)?.len())
        })?,
        run("lambda_intertwines_boundaries", 2, &|rng| {
            let n = rng.gen_range(1..=3);
            let ch = exact_chain(rng, n + 1)?;
            let lhs = ch.sub(&ch.lambda(&twist))?.twisted_b(&twist)?;
            let bp = ch.b_prime()?;
            let rhs = bp.sub(&bp.lambda(&twist))?;
            Ok(lhs.sub(&rhs)?.len())
        })?,
        run("gen_trace_chain_map", 3, &|rng| {
            let n = rng.gen_range(1..=2);
            let slots: Vec<NCMatrix> = (0..=n)
                .map(|_| NCMatrix::new(2, (0..4).map(|_| random_poly(rng, 3, 1)).collect()))
                .collect::<Result<_>>()?;
            let mc = MatrixChain::tensor(Exact::one(), slots)?;
            let lhs = gen_trace(&mc.twisted_b(&twist)?, &ExactRing)?;
            let rhs = gen_trace(&mc, &ExactRing)?.twisted_b(&twist)?;
            Ok(lhs.sub(&rhs)?.len())
        })?,
    ])
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RepReport {
    pub cutoff: i32,
    pub pi_relations: Vec<(String, f64)>,
    pub rho_relations: Vec<(String, f64)>,
    pub pi_unitarity: f64,
    /// Largest `sigma_z` intertwining residual over the sampled elements.
    pub intertwining: f64,
    /// Largest unit-step decay ratio of `Tr|(pi(g) - rho(g)) K^{-1}|` at `l >= 5`, per generator.
    pub decay: Vec<(char, f64)>,
}

impl RepReport {
    pub fn relation_max(&self) -> f64 {
        self.pi_relations.iter().chain(&self.rho_relations).map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn decay_max(&self) -> f64 {
        self.decay.iter().map(|d| d.1).fold(0.0, f64::max)
    }
}

pub fn rep_suite(ctx: &QContext, cutoff: i32, trials: usize, seed: u64) -> Result<RepReport> {
    let pi = Representation::pi(cutoff, ctx)?;
    let rho = Representation::rho(cutoff, ctx)?;
    let named = |v: Vec<(&str, f64)>| v.into_iter().map(|(n, r)| (n.to_string(), r)).collect();
    let zs = [Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), Complex64::new(0.0, -2.0), Complex64::new(0.3, 0.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut intertwining = 0.0f64;
    for _ in 0..trials {
        let x = random_poly(&mut rng, 3, 2).to_numeric(ctx.s);
        for z in zs {
            intertwining = intertwining.max(pi.intertwining_residual(&x, z, ctx.q));
        }
    }
    let mut decay = Vec::new();
    for g in [Gen::A, Gen::C] {
        let ratios = decay_ratios(&decay_profile(g, cutoff, ctx)?);
        let worst = ratios.iter().filter(|(l2, _)| *l2 >= 10).map(|r| r.1).fold(0.0, f64::max);
        decay.push((g.symbol(), worst));
    }
    Ok(RepReport {
        cutoff,
        pi_relations: named(pi.relation_residuals(ctx.q)),
        rho_relations: named(rho.relation_residuals(ctx.q)),
        pi_unitarity: pi.unitarity_residual(),
        intertwining,
        decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        let c = QContext::new(0.5).unwrap();
        for r in cyclic_suite(4, 9, parallel::Exec::Sequential).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
        let rep = rep_suite(&c, 14, 3, 2).unwrap();
        assert!(rep.pi_relations.iter().all(|r| r.1 < 1e-10));
        assert_eq!(rep.rho_relations.len(), rep.pi_relations.len());
        assert!(rep.intertwining < 1e-12);
        assert_eq!(rep.decay.len(), 2);
    }
}
