//! The `(t, k)`-reallocation: a split allocation whose type-1 goods are
//! redistributed so the left block and the pivot are levelled against the
//! type-2 holders on the right.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::allocation::{Bundle, SegmentedAllocation};
use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::instance::PreparedInstance;
use crate::split::{t_set_contains, Overlay, SplitIndex};

/// A split index together with the quantities the reallocation derives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReallocIndex {
    pub t: usize,
    pub k: u64,
    /// `⌊(m2 − k)/(n − t)⌋`, the type-2 count of agent `t + 1`.
    pub d: u64,
    /// `(m2 − k) mod (n − t)`.
    pub r2: u64,
    /// `⌈k·v2(t)⌉`.
    pub p: BigInt,
    /// `⌈d·v2(t)⌉`.
    pub c: BigInt,
    /// Last position holding exactly `d` type-2 goods, `n − r2`.
    pub ell: usize,
}

impl ReallocIndex {
    /// Derives the index and checks `m1 ≥ ⌈d·v2(t)⌉·t − p`.
    pub fn new(inst: &PreparedInstance, idx: SplitIndex) -> Result<Self> {
        let r = Self::derive(inst, idx)?;
        if BigInt::from(inst.m1()) < r.lower_requirement() {
            return Err(Error::PreconditionViolated(format!(
                "m1 = {} < ⌈d·v⌉·t − p = {} at ({}, {})",
                inst.m1(),
                r.lower_requirement(),
                r.t,
                r.k
            )));
        }
        Ok(r)
    }

    /// The derived quantities without the precondition check.
    pub fn derive(inst: &PreparedInstance, idx: SplitIndex) -> Result<Self> {
        let SplitIndex { t, k } = idx;
        if !t_set_contains(inst, t, k) {
            return Err(Error::NotInT { t, k });
        }
        let n = inst.n();
        if t >= n {
            return Err(Error::PreconditionViolated(format!("pivot t = {t} must be below n = {n}")));
        }
        let rest = inst.m2() - k;
        let width = (n - t) as u64;
        let (d, r2) = (rest / width, rest % width);
        let v = inst.v2(t);
        Ok(ReallocIndex { t, k, d, r2, p: v.ceil_mul(k), c: v.ceil_mul(d), ell: n - r2 as usize })
    }

    pub fn split_index(&self) -> SplitIndex {
        SplitIndex::new(self.t, self.k)
    }

    /// `⌈d·v⌉·t − p`: the type-1 goods steps 3 and 4 hand out.
    pub fn lower_requirement(&self) -> BigInt {
        &self.c * BigInt::from(self.t) - &self.p
    }

    /// Whether the residual goes to `1..ℓ` in natural order
    /// (`⌈d·v⌉ − p > (d − k)·v`), rather than with agent `t` last.
    pub fn natural_order(&self, inst: &PreparedInstance) -> bool {
        let lhs = Rational::from_integer(&self.c - &self.p);
        lhs > inst.v2(self.t).mul_count(self.d - self.k)
    }
}

fn to_count(x: &BigInt) -> Result<u64> {
    x.to_u64().ok_or_else(|| Error::Invariant(format!("count {x} out of range")))
}

/// Builds the `(t, k)`-reallocation.
pub fn build_realloc(inst: &PreparedInstance, idx: &ReallocIndex) -> Result<SegmentedAllocation> {
    let n = inst.n();
    let ReallocIndex { t, k, d, ell, .. } = *idx;
    let residual = BigInt::from(inst.m1()) - idx.lower_requirement();
    if residual < BigInt::from(0) {
        return Err(Error::PreconditionViolated(format!("negative residual {residual}")));
    }
    let residual = to_count(&residual)?;
    let pivot_share = to_count(&(&idx.c - &idx.p))
        .map_err(|_| Error::Invariant(format!("⌈d·v⌉ < p at ({t}, {k})")))?;

    let mut o = Overlay::default();
    o.add(t, t, Bundle::new(0, k));
    o.add(t + 1, ell, Bundle::new(0, d));
    o.add(ell + 1, n, Bundle::new(0, d + 1));
    if t > 1 {
        o.add(1, t - 1, Bundle::new(to_count(&idx.c)?, 0));
    }
    o.add(t, t, Bundle::new(pivot_share, 0));
    if idx.natural_order(inst) {
        o.add_pea(&[(1, ell)], residual, false)?;
    } else {
        o.add_pea(&[(1, t - 1), (t + 1, ell), (t, t)], residual, false)?;
    }
    o.into_segmented(n)
}

/// Lower bound at a flip point: `⌈d·v⌉·t − p + 1 ≤ m1`.
pub fn realloc_lower_bound_holds(inst: &PreparedInstance, idx: SplitIndex) -> bool {
    ReallocIndex::derive(inst, idx)
        .map(|r| r.lower_requirement() < BigInt::from(inst.m1()))
        .unwrap_or(false)
}

/// The bound under which the reallocation is EFX and Pareto-optimal:
/// `m1 ≤ ⌈d·v⌉·t − ⌈(k − 1)·v⌉`.
pub fn realloc_upper_bound_holds(inst: &PreparedInstance, idx: SplitIndex) -> bool {
    ReallocIndex::derive(inst, idx)
        .map(|r| {
            let upper = &r.c * BigInt::from(r.t) - inst.v2(r.t).ceil_mul(r.k - 1);
            BigInt::from(inst.m1()) <= upper
        })
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{is_efx_dense, is_proper_at, Allocation};
    use crate::split::{build_split, classify_split, t_set};

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn prepared(m1: u64, m2: u64, v2: &[&str]) -> PreparedInstance {
        PreparedInstance::from_sorted(m1, m2, v2.iter().map(|s| q(s)).collect()).unwrap()
    }

    fn dense(seg: &SegmentedAllocation) -> Vec<(u64, u64)> {
        seg.to_dense().bundles().iter().map(|b| (b.x1, b.x2)).collect()
    }

    /// Per-agent transcription of the five construction steps.
    fn by_steps(inst: &PreparedInstance, r: &ReallocIndex) -> Vec<(u64, u64)> {
        let n = inst.n();
        let split = build_split(inst, r.split_index()).unwrap().to_dense();
        let mut x: Vec<(u64, u64)> = split.bundles().iter().map(|b| (0, b.x2)).collect();
        let ell = (1..=n).rev().find(|&i| x[i - 1].1 == r.d).unwrap();
        assert_eq!(ell, r.ell);
        let c = r.c.to_u64().unwrap();
        for xi in x.iter_mut().take(r.t - 1) {
            xi.0 = c;
        }
        x[r.t - 1].0 = c - r.p.to_u64().unwrap();
        let rest = inst.m1() - (c * r.t as u64 - r.p.to_u64().unwrap());
        let seq: Vec<usize> = if r.natural_order(inst) {
            (1..=ell).collect()
        } else {
            (1..r.t).chain(r.t + 1..=ell).chain([r.t]).collect()
        };
        let s = seq.len() as u64;
        for (i, &a) in seq.iter().enumerate() {
            let extra = u64::from((i as u64) >= s - rest % s);
            x[a - 1].0 += rest / s + extra;
        }
        x
    }

    #[test]
    fn intro_flip() {
        // Prepared intro instance: v2 = (9, 10), m = (2, 2); (1, 1) is the flip.
        let inst = prepared(2, 2, &["9", "10"]);
        let r = ReallocIndex::new(&inst, SplitIndex::new(1, 1)).unwrap();
        assert_eq!((r.d, r.ell), (1, 2));
        assert_eq!((r.p.clone(), r.c.clone()), (BigInt::from(9), BigInt::from(9)));
        assert!(!r.natural_order(&inst), "0 > 0 is false");
        let seg = build_realloc(&inst, &r).unwrap();
        assert_eq!(dense(&seg), vec![(1, 1), (1, 1)]);
        assert!(realloc_lower_bound_holds(&inst, SplitIndex::new(1, 1)));
        assert!(realloc_upper_bound_holds(&inst, SplitIndex::new(1, 1)));
    }

    #[test]
    fn integer_valuation_takes_second_ordering() {
        let inst = prepared(20, 7, &["1", "2", "3"]);
        for s in t_set(&inst).filter(|s| s.t < 3) {
            let r = ReallocIndex::derive(&inst, s).unwrap();
            assert!(!r.natural_order(&inst), "{s:?}");
        }
    }

    #[test]
    fn upper_bound_plug_in() {
        // t = 1, k = 1, n = 3, m2 = 5: d = ⌊4/2⌋ = 2, v = 3/2 → c = 3, and
        // ⌈0·v⌉ = 0, so the bound reads m1 ≤ 3.
        let at = |m1| realloc_upper_bound_holds(&prepared(m1, 5, &["3/2", "2", "2"]), SplitIndex::new(1, 1));
        assert!(at(3));
        assert!(!at(4));
        assert!(!realloc_upper_bound_holds(&prepared(3, 5, &["3/2", "2", "2"]), SplitIndex::new(3, 5)));
    }

    #[test]
    fn precondition() {
        // v2 = (3/2, 2), m = (1, 4), (1, 1): d = 3, c = 5, p = 2 → needs m1 ≥ 3.
        let inst = prepared(1, 4, &["3/2", "2"]);
        assert!(matches!(ReallocIndex::new(&inst, SplitIndex::new(1, 1)), Err(Error::PreconditionViolated(_))));
        let inst = prepared(3, 4, &["3/2", "2"]);
        assert!(ReallocIndex::new(&inst, SplitIndex::new(1, 1)).is_ok());
        assert!(matches!(ReallocIndex::new(&inst, SplitIndex::new(2, 4)), Err(Error::PreconditionViolated(_))));
    }

    /// Worked example at a flip point located by scanning `𝒯`, where no split
    /// allocation is EFX.
    #[test]
    fn scanned_flip_golden() {
        let inst = prepared(4, 5, &["5/2", "5/2", "3"]);
        let verdicts: Vec<_> = t_set(&inst).map(|s| (s, classify_split(&inst, s).unwrap().1)).collect();
        assert!(verdicts.iter().all(|(_, v)| !v.is_efx()), "{verdicts:?}");
        let flip = verdicts.windows(2).find(|w| w[0].1.is_left() && w[1].1.is_right()).map(|w| w[0].0).unwrap();
        assert_eq!(flip, SplitIndex::new(1, 1));
        // d = ⌊4/2⌋ = 2, r2 = 0, ℓ = 3, p = ⌈5/2⌉ = 3, c = 5. Agent 1 gets
        // c − p = 2; 2 > (2 − 1)·5/2 fails, so the residual 4 − 2 = 2 goes
        // over (2, 3, 1) and agents 3 and 1 get one each.
        let r = ReallocIndex::new(&inst, flip).unwrap();
        assert_eq!((r.d, r.ell, r.r2), (2, 3, 0));
        assert!(!r.natural_order(&inst));
        let seg = build_realloc(&inst, &r).unwrap();
        assert_eq!(dense(&seg), vec![(3, 1), (0, 2), (1, 2)]);
        assert!(is_efx_dense(&inst, &seg.to_dense()));
        // 3 ≤ 4 ≤ 5.
        assert!(realloc_lower_bound_holds(&inst, flip) && realloc_upper_bound_holds(&inst, flip));
    }

    /// Exhaustive check on a grid: the constructor matches the step-by-step
    /// transcription, keeps the split's type-2 counts, conserves goods, and
    /// is proper at `t`; at every flip the sandwich holds and the result is
    /// EFX.
    #[test]
    fn exhaustive_small_reallocations() {
        let grid = ["1/3", "1/2", "1", "3/2", "2", "5/2", "3"];
        let mut flips = 0;
        for n in 2..=4usize {
            let mut idx = vec![0usize; n];
            loop {
                let v: Vec<Rational> = idx.iter().map(|&i| q(grid[i])).collect();
                for m1 in 1..=7 {
                    for m2 in 1..=6 {
                        let Ok(inst) = PreparedInstance::from_sorted(m1, m2, v.clone()) else { continue };
                        let scan: Vec<_> = t_set(&inst).map(|s| (s, classify_split(&inst, s).unwrap().1)).collect();
                        for s in scan.iter().map(|e| e.0).filter(|s| s.t < n) {
                            let Ok(r) = ReallocIndex::new(&inst, s) else { continue };
                            let seg = build_realloc(&inst, &r).unwrap();
                            let a: Allocation = seg.to_dense();
                            let got: Vec<_> = a.bundles().iter().map(|b| (b.x1, b.x2)).collect();
                            assert_eq!(got, by_steps(&inst, &r), "{s:?}");
                            let split = build_split(&inst, s).unwrap().to_dense();
                            assert!(a.bundles().iter().zip(split.bundles()).all(|(x, y)| x.x2 == y.x2));
                            assert_eq!(a.totals(), (m1 as u128, m2 as u128));
                            if realloc_upper_bound_holds(&inst, s) {
                                assert!(is_proper_at(&inst, &a, s.t), "{s:?} {got:?}");
                            }
                        }
                        for w in scan.windows(2) {
                            if w[0].1.is_left() && w[1].1.is_right() {
                                let s = w[0].0;
                                assert!(realloc_lower_bound_holds(&inst, s), "{s:?}");
                                assert!(realloc_upper_bound_holds(&inst, s), "{s:?}");
                                let r = ReallocIndex::new(&inst, s).unwrap();
                                let a = build_realloc(&inst, &r).unwrap().to_dense();
                                assert!(is_efx_dense(&inst, &a), "{s:?}");
                                flips += 1;
                            }
                        }
                    }
                }
                let Some(pos) = (0..n).rev().find(|&p| idx[p] + 1 < grid.len()) else { break };
                idx[pos] += 1;
                for p in pos + 1..n {
                    idx[p] = idx[pos];
                }
            }
        }
        assert!(flips > 40, "{flips}");
    }
}
