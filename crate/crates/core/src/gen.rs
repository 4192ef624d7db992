//! Instance generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::instance::{preprocess, Preprocessed, RawInstance};
use crate::solver::scan_t;

/// Ratios used by the grid generator.
pub const GRID: [(u64, u64); 5] = [(1, 3), (1, 2), (1, 1), (2, 1), (3, 1)];

pub fn grid_values() -> Vec<Rational> {
    GRID.iter().map(|&(a, b)| Rational::new(a, b).expect("nonzero")).collect()
}

/// Seeded generator for the uniform-rational distribution: agent `i` gets
/// `v1 = b`, `v2 = a` with `a, b` uniform in `[1, denom_bound]`.
pub struct UniformRational {
    rng: ChaCha8Rng,
    denom_bound: u64,
}

impl UniformRational {
    pub fn new(seed: u64, denom_bound: u64) -> Result<Self> {
        if denom_bound == 0 {
            return Err(Error::ShapeMismatch("denominator bound must be positive".into()));
        }
        Ok(UniformRational { rng: ChaCha8Rng::seed_from_u64(seed), denom_bound })
    }

    pub fn instance(&mut self, n: usize, m1: u64, m2: u64) -> RawInstance {
        let b = self.denom_bound;
        let pairs: Vec<_> = (0..n)
            .map(|_| {
                let v2 = self.rng.random_range(1..=b);
                let v1 = self.rng.random_range(1..=b);
                (Rational::from(v1), Rational::from(v2))
            })
            .collect();
        RawInstance::from_pairs(m1, m2, pairs)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Every assignment of a grid ratio to each of `n` agents (`5ⁿ` instances),
/// with `v1 = 1`.
pub fn grid_batch(n: usize, m1: u64, m2: u64) -> Vec<RawInstance> {
    let values = grid_values();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(RawInstance::from_pairs(m1, m2, idx.iter().map(|&i| (Rational::one(), values[i].clone()))));
        let Some(pos) = (0..n).rev().find(|&p| idx[p] + 1 < values.len()) else { return out };
        idx[pos] += 1;
        for p in &mut idx[pos + 1..] {
            *p = 0;
        }
    }
}

/// Every assignment of a pair `(v1, v2)` of grid values to each of `n`
/// agents (`25ⁿ` instances). Covers every ratio profile of [`grid_batch`]
/// with unnormalized values.
pub fn grid_pairs_batch(n: usize, m1: u64, m2: u64) -> Vec<RawInstance> {
    let values = grid_values();
    let pairs: Vec<(Rational, Rational)> =
        values.iter().flat_map(|a| values.iter().map(move |b| (a.clone(), b.clone()))).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(RawInstance::from_pairs(m1, m2, idx.iter().map(|&i| pairs[i].clone())));
        let Some(pos) = (0..n).rev().find(|&p| idx[p] + 1 < pairs.len()) else { return out };
        idx[pos] += 1;
        for p in &mut idx[pos + 1..] {
            *p = 0;
        }
    }
}

/// Whether no split allocation of the instance is EFX, so the solver must
/// take the reallocation path. `None` when the scan would be too large.
pub fn needs_reallocation(raw: &RawInstance, cap: u64) -> Option<bool> {
    match preprocess(raw).ok()? {
        Preprocessed::Trivial(_) => Some(false),
        Preprocessed::Prepared(p) => scan_t(&p, cap).ok().map(|rep| !rep.has_efx()),
    }
}

/// Rejection-samples uniform-rational instances until one needs the
/// reallocation path.
pub fn adversarial(gen: &mut UniformRational, n: usize, m1: u64, m2: u64, tries: u32) -> Result<RawInstance> {
    for _ in 0..tries {
        let raw = gen.instance(n, m1, m2);
        if needs_reallocation(&raw, 100_000) == Some(true) {
            return Ok(raw);
        }
    }
    Err(Error::BudgetExceeded { needed: format!("more than {tries} samples"), budget: u64::from(tries) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = UniformRational::new(7, 100).unwrap().instance(20, 50, 60);
        let b = UniformRational::new(7, 100).unwrap().instance(20, 50, 60);
        assert_eq!(a, b);
        let c = UniformRational::new(8, 100).unwrap().instance(20, 50, 60);
        assert_ne!(a, c);
        assert!(a.validate().is_ok());
    }

    #[test]
    fn bound_one_gives_integers() {
        let a = UniformRational::new(1, 1).unwrap().instance(10, 3, 3);
        assert!(a.agents.iter().all(|g| g.v1 == Rational::one() && g.v2 == Rational::one()));
        assert!(UniformRational::new(1, 0).is_err());
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(grid_batch(2, 1, 1).len(), 25);
        assert_eq!(grid_batch(3, 1, 1).len(), 125);
        assert_eq!(grid_pairs_batch(2, 1, 1).len(), 625);
    }

    #[test]
    fn adversarial_instances_need_reallocation() {
        let mut g = UniformRational::new(3, 6).unwrap();
        let raw = adversarial(&mut g, 3, 4, 5, 10_000).unwrap();
        assert_eq!(needs_reallocation(&raw, 1000), Some(true));
        let res = crate::solver::solve(&raw).unwrap();
        assert_eq!(res.certificate.label(), "realloc");
    }
}
