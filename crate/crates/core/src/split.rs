//! Split allocations: the index set `𝒯`, its order, and the `(t, k)`
//! constructor.
//!
//! In the `(t, k)`-split-allocation only the pivot agent `t` may hold both good
//! types. Agents before `t` hold only type 1, agents after `t` only type 2,
//! and `t` itself holds exactly `k` type-2 goods.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::allocation::{
    classify_segmented, envy_profile_segmented, Bundle, EnvyVerdict, Segment, SegmentedAllocation,
};
use crate::error::{Error, Result};
use crate::instance::{first_at_least_one, PreparedInstance};

/// Prioritized equitable split of `q` goods over `s` agents listed in
/// priority order: every agent gets `⌊q/s⌋` and the last `q mod s` agents get
/// one more.
pub fn pea_counts(q: u64, s: usize) -> Result<Vec<u64>> {
    if s == 0 {
        return Err(Error::EmptyAgentSequence);
    }
    let (base, extra) = (q / s as u64, (q % s as u64) as usize);
    Ok((0..s).map(|i| base + u64::from(i >= s - extra)).collect())
}

/// [`pea_counts`] over an explicit agent sequence; returns `(agent, count)`.
pub fn pea<A: Copy>(q: u64, agents: &[A]) -> Result<Vec<(A, u64)>> {
    let counts = pea_counts(q, agents.len())?;
    Ok(agents.iter().copied().zip(counts).collect())
}

/// Sums of per-range contributions, flattened into segments.
#[derive(Debug, Default)]
pub(crate) struct Overlay {
    pieces: Vec<(usize, usize, Bundle)>,
}

impl Overlay {
    pub(crate) fn add(&mut self, lo: usize, hi: usize, bundle: Bundle) {
        if lo <= hi && !bundle.is_empty() {
            self.pieces.push((lo, hi, bundle));
        }
    }

    /// PEA of `q` goods of the given type over an agent sequence made of
    /// contiguous ranges, listed from lowest to highest priority.
    pub(crate) fn add_pea(&mut self, ranges: &[(usize, usize)], q: u64, type2: bool) -> Result<()> {
        let s: usize = ranges.iter().filter(|r| r.0 <= r.1).map(|r| r.1 + 1 - r.0).sum();
        if s == 0 {
            return if q == 0 { Ok(()) } else { Err(Error::EmptyAgentSequence) };
        }
        let (base, mut extra) = (q / s as u64, q % s as u64);
        let make = |c: u64| if type2 { Bundle::new(0, c) } else { Bundle::new(c, 0) };
        for &(lo, hi) in ranges.iter().rev().filter(|r| r.0 <= r.1) {
            let len = (hi + 1 - lo) as u64;
            let bumped = extra.min(len);
            extra -= bumped;
            let split = hi + 1 - bumped as usize;
            self.add(lo, split - 1, make(base));
            self.add(split, hi, make(base + 1));
        }
        Ok(())
    }

    pub(crate) fn into_segmented(self, n: usize) -> Result<SegmentedAllocation> {
        let mut cuts: Vec<usize> = vec![1, n + 1];
        for &(lo, hi, _) in &self.pieces {
            cuts.push(lo);
            cuts.push(hi + 1);
        }
        cuts.sort_unstable();
        cuts.dedup();
        let segments = cuts
            .windows(2)
            .map(|w| {
                let bundle = self
                    .pieces
                    .iter()
                    .filter(|&&(lo, hi, _)| lo <= w[0] && w[0] <= hi)
                    .fold(Bundle::default(), |acc, &(_, _, b)| Bundle::new(acc.x1 + b.x1, acc.x2 + b.x2));
                Segment { lo: w[0], hi: w[1] - 1, bundle }
            })
            .collect();
        SegmentedAllocation::from_segments(segments)
    }
}

/// A member `(t, k)` of `𝒯`: `t` is a 1-based pivot position, `k` the number
/// of type-2 goods it receives.
///
/// Ordered by increasing `t`, then decreasing `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitIndex {
    pub t: usize,
    pub k: u64,
}

impl SplitIndex {
    pub fn new(t: usize, k: u64) -> Self {
        SplitIndex { t, k }
    }
}

impl Ord for SplitIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t.cmp(&other.t).then_with(|| other.k.cmp(&self.k))
    }
}

impl PartialOrd for SplitIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn t_set_contains(inst: &PreparedInstance, t: usize, k: u64) -> bool {
    let n = inst.n();
    if t == 0 || t > n || k == 0 {
        return false;
    }
    if t == n {
        return k == inst.m2();
    }
    inst.v2(t) >= &crate::arith::Rational::one()
        && u128::from(k) * (n - t + 1) as u128 <= u128::from(inst.m2())
}

/// Largest `k` with `(t, k) ∈ 𝒯` ignoring the value condition: `⌊m2/(n−t+1)⌋`.
pub fn max_k(inst: &PreparedInstance, t: usize) -> u64 {
    inst.m2() / (inst.n() - t + 1) as u64
}

/// The `≺`-minimum of `𝒯`.
pub fn minimum_split_index(inst: &PreparedInstance) -> SplitIndex {
    let n = inst.n();
    let first = first_at_least_one(inst).unwrap_or(n);
    let floor = if inst.m2() >= n as u64 { 1 } else { n + 1 - inst.m2() as usize };
    let t = first.max(floor).min(n);
    let k = max_k(inst, t);
    if t < n && t_set_contains(inst, t, k) {
        SplitIndex::new(t, k)
    } else {
        maximum_split_index(inst)
    }
}

/// The `≺`-maximum of `𝒯`, `(n, m2)`.
pub fn maximum_split_index(inst: &PreparedInstance) -> SplitIndex {
    SplitIndex::new(inst.n(), inst.m2())
}

/// All of `𝒯` in `≺` order. Meant for desk-scale scans only.
pub fn t_set(inst: &PreparedInstance) -> impl Iterator<Item = SplitIndex> + '_ {
    let start = minimum_split_index(inst).t;
    let n = inst.n();
    (start..n)
        .filter(move |&t| t_set_contains(inst, t, 1))
        .flat_map(move |t| (1..=max_k(inst, t)).rev().map(move |k| SplitIndex::new(t, k)))
        .chain(std::iter::once(maximum_split_index(inst)))
}

/// Number of elements of `𝒯` (exact, without enumerating).
pub fn t_set_len(inst: &PreparedInstance) -> u128 {
    let start = minimum_split_index(inst).t;
    let n = inst.n();
    (start..n)
        .filter(|&t| t_set_contains(inst, t, 1))
        .map(|t| u128::from(max_k(inst, t)))
        .sum::<u128>()
        + 1
}

/// Quantities the closed-form construction derives from `(t, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDerived {
    /// `⌈k·v2(t)⌉`.
    pub p: BigInt,
    /// `(m2 − k) = q2·(n − t) + r2`, absent when `t = n`.
    pub q2: Option<u64>,
    pub r2: Option<u64>,
    /// `m1 ≥ p·(t − 1)`.
    pub case_b: bool,
    /// Case (a): `m1 = q1·(t−1) + r1`; case (b): `m1 − p·(t−1) = q1·t + r1`.
    pub q1: u64,
    pub r1: u64,
}

pub fn derive(inst: &PreparedInstance, idx: SplitIndex) -> Result<SplitDerived> {
    let SplitIndex { t, k } = idx;
    if !t_set_contains(inst, t, k) {
        return Err(Error::NotInT { t, k });
    }
    let n = inst.n();
    let m1 = inst.m1();
    let p = inst.v2(t).ceil_mul(k);
    let (q2, r2) = if t < n {
        let rest = inst.m2() - k;
        let width = (n - t) as u64;
        (Some(rest / width), Some(rest % width))
    } else {
        (None, None)
    };
    let reserved = &p * BigInt::from(t - 1);
    let case_b = BigInt::from(m1) >= reserved;
    let (q1, r1) = if case_b {
        let rest = (BigInt::from(m1) - reserved).to_u64().expect("0 ≤ rest ≤ m1");
        (rest / t as u64, rest % t as u64)
    } else {
        let width = (t - 1) as u64;
        (m1 / width, m1 % width)
    };
    Ok(SplitDerived { p, q2, r2, case_b, q1, r1 })
}

fn to_count(x: &BigInt) -> Result<u64> {
    x.to_u64().ok_or_else(|| Error::Invariant(format!("count {x} out of range")))
}

/// Closed-form `(t, k)`-split-allocation, written segment by segment.
pub fn build_split_numeric(inst: &PreparedInstance, idx: SplitIndex) -> Result<SegmentedAllocation> {
    let d = derive(inst, idx)?;
    let SplitIndex { t, k } = idx;
    let n = inst.n();
    let mut segments = Vec::with_capacity(6);
    let mut push = |lo: usize, hi: usize, bundle: Bundle| {
        if lo <= hi {
            segments.push(Segment { lo, hi, bundle });
        }
    };
    let r1 = d.r1 as usize;
    if d.case_b {
        // Only materialize p + q1 when there are agents before t.
        if t > 1 {
            let low = to_count(&(&d.p + BigInt::from(d.q1)))?;
            push(1, (t - r1.min(t)).min(t - 1), Bundle::new(low, 0));
            push((t + 1).saturating_sub(r1).max(1), t - 1, Bundle::new(low + 1, 0));
        }
        push(t, t, Bundle::new(d.q1 + u64::from(d.r1 > 0), k));
    } else {
        push(1, t - 1 - r1, Bundle::new(d.q1, 0));
        push(t - r1, t - 1, Bundle::new(d.q1 + 1, 0));
        push(t, t, Bundle::new(0, k));
    }
    if let (Some(q2), Some(r2)) = (d.q2, d.r2) {
        let r2 = r2 as usize;
        push(t + 1, n - r2, Bundle::new(0, q2));
        push(n - r2 + 1, n, Bundle::new(0, q2 + 1));
    }
    SegmentedAllocation::from_segments(segments)
}

/// The same allocation expressed as four prioritized equitable allocations.
pub fn build_split_pea(inst: &PreparedInstance, idx: SplitIndex) -> Result<SegmentedAllocation> {
    let SplitIndex { t, k } = idx;
    if !t_set_contains(inst, t, k) {
        return Err(Error::NotInT { t, k });
    }
    let n = inst.n();
    let m1 = BigInt::from(inst.m1());
    let p = inst.v2(t).ceil_mul(k);
    let reserved = &p * BigInt::from(t - 1);
    let first = to_count(&std::cmp::min(m1.clone(), reserved.clone()))?;
    let rest = &m1 - &reserved;
    let second = if rest > BigInt::zero() { to_count(&rest)? } else { 0 };

    let mut overlay = Overlay::default();
    overlay.add_pea(&[(t, t)], k, true)?;
    overlay.add_pea(&[(t + 1, n)], inst.m2() - k, true)?;
    overlay.add_pea(&[(1, t - 1)], first, false)?;
    overlay.add_pea(&[(1, t)], second, false)?;
    overlay.into_segmented(n)
}

/// The `(t, k)`-split-allocation. Both constructions run and must agree.
pub fn build_split(inst: &PreparedInstance, idx: SplitIndex) -> Result<SegmentedAllocation> {
    let numeric = build_split_numeric(inst, idx)?;
    let summed = build_split_pea(inst, idx)?;
    if numeric != summed {
        return Err(Error::Invariant(format!(
            "split {idx:?}: closed form {numeric:?} differs from PEA sum {summed:?}"
        )));
    }
    Ok(numeric)
}

/// Builds the split allocation and classifies its envy in constant time.
/// Envy in both directions is reported as an invariant failure.
pub fn classify_split(inst: &PreparedInstance, idx: SplitIndex) -> Result<(SegmentedAllocation, EnvyVerdict)> {
    let seg = build_split(inst, idx)?;
    let verdict = classify_segmented(inst, &seg)?;
    Ok((seg, verdict))
}

/// Checks the structural facts every split allocation must satisfy.
pub fn check_split_structure(inst: &PreparedInstance, idx: SplitIndex, seg: &SegmentedAllocation) -> Result<()> {
    let SplitIndex { t, k } = idx;
    let fail = |what: &str| Err(Error::Invariant(format!("split {idx:?}: {what}")));
    if seg.totals() != (u128::from(inst.m1()), u128::from(inst.m2())) {
        return fail("good counts do not add up");
    }
    if seg.len() > 5 {
        return fail("more than five distinct runs");
    }
    for s in seg.segments() {
        if s.lo < t && s.bundle.x2 != 0 {
            return fail("type-2 good left of the pivot");
        }
        if s.hi > t && s.lo > t && (s.bundle.x1 != 0 || s.bundle.x2 < k) {
            return fail("right of the pivot must hold only type 2, at least k of it");
        }
    }
    if seg.bundle_at(t).map(|b| b.x2) != Some(k) {
        return fail("pivot does not hold k type-2 goods");
    }
    let profile = envy_profile_segmented(inst, seg);
    if profile.left.is_some() && profile.right.is_some() {
        return fail("envy in both directions");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{envy_profile_dense, is_proper_at, Allocation};
    use crate::arith::Rational;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn prepared(m1: u64, m2: u64, v2: &[&str]) -> PreparedInstance {
        PreparedInstance::from_sorted(m1, m2, v2.iter().map(|s| q(s)).collect()).unwrap()
    }

    fn dense(seg: &SegmentedAllocation) -> Vec<(u64, u64)> {
        seg.to_dense().bundles().iter().map(|b| (b.x1, b.x2)).collect()
    }

    #[test]
    fn pea_examples() {
        assert_eq!(pea(7, &['A', 'B', 'C']).unwrap(), vec![('A', 2), ('B', 2), ('C', 3)]);
        assert_eq!(pea_counts(6, 3).unwrap(), vec![2, 2, 2]);
        assert_eq!(pea_counts(2, 3).unwrap(), vec![0, 1, 1]);
        assert_eq!(pea_counts(0, 2).unwrap(), vec![0, 0]);
        assert_eq!(pea::<u8>(3, &[]), Err(Error::EmptyAgentSequence));
    }

    #[test]
    fn overlay_pea_over_split_ranges() {
        // Sequence (1, 2, 4, 5, 3) receives 7 goods: 1 each plus 2 extra for
        // the last two in the sequence, i.e. agents 5 and 3.
        let mut o = Overlay::default();
        o.add_pea(&[(1, 2), (4, 5), (3, 3)], 7, false).unwrap();
        let seg = o.into_segmented(5).unwrap();
        assert_eq!(dense(&seg), vec![(1, 0), (1, 0), (2, 0), (1, 0), (2, 0)]);
    }

    #[test]
    fn order_is_increasing_t_then_decreasing_k() {
        let mut v = vec![SplitIndex::new(2, 1), SplitIndex::new(1, 1), SplitIndex::new(2, 3), SplitIndex::new(1, 2)];
        v.sort();
        assert_eq!(v, vec![SplitIndex::new(1, 2), SplitIndex::new(1, 1), SplitIndex::new(2, 3), SplitIndex::new(2, 1)]);
    }

    #[test]
    fn membership() {
        let inst = prepared(6, 6, &["1/2", "1", "3"]);
        assert!(t_set_contains(&inst, 3, 6));
        assert!(!t_set_contains(&inst, 3, 5));
        assert!(!t_set_contains(&inst, 1, 1), "v2(1) < 1");
        assert!(t_set_contains(&inst, 2, 3), "k = ⌊6/2⌋ sits on the bound");
        assert!(!t_set_contains(&inst, 2, 4));
        assert!(!t_set_contains(&inst, 2, 0));
    }

    #[test]
    fn minimum_index_examples() {
        // Oracle: scan every (t, k) and take the ≺-least member.
        let brute = |inst: &PreparedInstance| {
            let n = inst.n();
            (1..=n)
                .flat_map(|t| (1..=inst.m2()).map(move |k| SplitIndex::new(t, k)))
                .filter(|i| t_set_contains(inst, i.t, i.k))
                .min()
                .unwrap()
        };
        let inst = prepared(6, 6, &["1/2", "1", "3"]);
        assert_eq!(minimum_split_index(&inst), SplitIndex::new(2, 3));
        assert_eq!(brute(&inst), SplitIndex::new(2, 3));

        let inst = prepared(9, 1, &["1/3", "1/2", "2"]);
        assert_eq!(minimum_split_index(&inst), SplitIndex::new(3, 1));

        let inst = prepared(4, 1, &["1", "2", "3"]);
        assert_eq!(minimum_split_index(&inst), SplitIndex::new(3, 1));
        assert_eq!(brute(&inst), SplitIndex::new(3, 1));

        for (m1, m2, v) in [(5, 3, vec!["1/2", "1", "2"]), (7, 7, vec!["1", "1", "5/4", "3"]), (9, 2, vec!["1/2", "2", "3"])] {
            let inst = prepared(m1, m2, &v);
            assert_eq!(minimum_split_index(&inst), brute(&inst));
            assert_eq!(t_set(&inst).next(), Some(brute(&inst)));
            assert_eq!(t_set(&inst).count() as u128, t_set_len(&inst));
        }
    }

    #[test]
    fn hand_evaluated_split_at_maximum() {
        // v2 = (1/2, 1, 2), m = (5, 3), (t, k) = (3, 3): p = ⌈3·2⌉ = 6 and
        // m1 = 5 < p·(t−1) = 12, so case (a): 5 = 2·2 + 1 over agents 1..2.
        let inst = prepared(5, 3, &["1/2", "1", "2"]);
        let seg = build_split(&inst, SplitIndex::new(3, 3)).unwrap();
        assert_eq!(dense(&seg), vec![(2, 0), (3, 0), (0, 3)]);
        let d = derive(&inst, SplitIndex::new(3, 3)).unwrap();
        assert_eq!(d.p, BigInt::from(6));
        assert!(!d.case_b);
        assert_eq!((d.q1, d.r1, d.q2), (2, 1, None));
    }

    #[test]
    fn hand_evaluated_case_b() {
        // v2 = (1, 1, 3/2, 2), m = (9, 5), (t, k) = (2, 1): p = 1,
        // m1 − p·1 = 8 = 4·2 + 0 → agent 1 gets 5, agent 2 gets 4;
        // m2 − k = 4 = 2·2 + 0 → agents 3, 4 get 2 each.
        let inst = prepared(9, 5, &["1", "1", "3/2", "2"]);
        let seg = build_split(&inst, SplitIndex::new(2, 1)).unwrap();
        assert_eq!(dense(&seg), vec![(5, 0), (4, 1), (0, 2), (0, 2)]);
        // Same instance at (3, 1): p = ⌈3/2⌉ = 2, 9 − 4 = 5 = 1·3 + 2 with
        // the extra goods going to agents 2 and 3, m2 − 1 = 4 to agent 4.
        let seg = build_split(&inst, SplitIndex::new(3, 1)).unwrap();
        assert_eq!(dense(&seg), vec![(3, 0), (4, 0), (2, 1), (0, 4)]);
    }

    #[test]
    fn remainder_zero_gives_one_tail_segment() {
        let inst = prepared(10, 9, &["1", "1", "2", "2"]);
        let seg = build_split(&inst, SplitIndex::new(2, 3)).unwrap();
        assert_eq!(dense(&seg)[2..], [(0, 3), (0, 3)]);
    }

    #[test]
    fn case_a_pivot_has_no_type_one_goods() {
        let inst = prepared(3, 4, &["1", "1", "3"]);
        let d = derive(&inst, SplitIndex::new(3, 4)).unwrap();
        assert!(!d.case_b);
        let seg = build_split(&inst, SplitIndex::new(3, 4)).unwrap();
        assert_eq!(seg.bundle_at(3), Some(Bundle::new(0, 4)));
    }

    #[test]
    fn rejects_indices_outside_t() {
        let inst = prepared(6, 6, &["1/2", "1", "3"]);
        assert_eq!(build_split(&inst, SplitIndex::new(1, 1)), Err(Error::NotInT { t: 1, k: 1 }));
        assert_eq!(build_split(&inst, SplitIndex::new(3, 2)), Err(Error::NotInT { t: 3, k: 2 }));
    }

    #[test]
    fn single_agent() {
        let inst = prepared(4, 3, &["2"]);
        assert_eq!(t_set(&inst).collect::<Vec<_>>(), vec![SplitIndex::new(1, 3)]);
        let (seg, verdict) = classify_split(&inst, SplitIndex::new(1, 3)).unwrap();
        assert_eq!(dense(&seg), vec![(4, 3)]);
        assert_eq!(verdict, EnvyVerdict::Efx);
    }

    /// Exhaustive small instances: both constructions agree, every split is
    /// proper, structurally sound, and the segmented verdict matches the
    /// dense one.
    #[test]
    fn exhaustive_small_splits() {
        let grid = ["1/3", "1/2", "1", "3/2", "2", "3"];
        let mut checked = 0;
        for n in 1..=4usize {
            let mut idx = vec![0usize; n];
            loop {
                let v: Vec<Rational> = idx.iter().map(|&i| q(grid[i])).collect();
                for m1 in 1..=6 {
                    for m2 in 1..=6 {
                        let Ok(inst) = PreparedInstance::from_sorted(m1, m2, v.clone()) else { continue };
                        for s in t_set(&inst) {
                            let seg = build_split(&inst, s).unwrap();
                            check_split_structure(&inst, s, &seg).unwrap();
                            let a: Allocation = seg.to_dense();
                            assert!(is_proper_at(&inst, &a, s.t), "{s:?} not proper");
                            let dense = envy_profile_dense(&inst, &a);
                            let fast = envy_profile_segmented(&inst, &seg);
                            assert_eq!(dense.verdict().unwrap().label(), fast.verdict().unwrap().label());
                            checked += 1;
                        }
                    }
                }
                // Next non-decreasing index tuple.
                let Some(pos) = (0..n).rev().find(|&p| idx[p] + 1 < grid.len()) else { break };
                idx[pos] += 1;
                for p in pos + 1..n {
                    idx[p] = idx[pos];
                }
            }
        }
        assert!(checked > 1000);
    }
}
