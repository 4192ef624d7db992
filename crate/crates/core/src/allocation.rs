//! Allocations, envy up to any good, and the proper-allocation PO certificate.
//!
//! Two representations exist. [`Allocation`] stores one bundle per agent and
//! backs the `O(n²)` reference checks. [`SegmentedAllocation`] stores maximal
//! runs of agents sharing a bundle; split allocations and reallocations have
//! at most six runs, so classifying their envy takes constant time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::instance::NormalizedInstance;

/// Counts of type-1 and type-2 goods held by one agent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bundle {
    pub x1: u64,
    pub x2: u64,
}

impl Bundle {
    pub const fn new(x1: u64, x2: u64) -> Self {
        Bundle { x1, x2 }
    }

    pub fn swapped(self) -> Self {
        Bundle { x1: self.x2, x2: self.x1 }
    }

    pub fn is_empty(self) -> bool {
        self.x1 == 0 && self.x2 == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation {
    bundles: Vec<Bundle>,
}

impl Allocation {
    pub fn new(bundles: Vec<Bundle>) -> Self {
        Allocation { bundles }
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    pub fn bundles_mut(&mut self) -> &mut [Bundle] {
        &mut self.bundles
    }

    /// Bundle of the agent at 1-based position `pos`.
    pub fn bundle(&self, pos: usize) -> Bundle {
        self.bundles[pos - 1]
    }

    pub fn totals(&self) -> (u128, u128) {
        self.bundles.iter().fold((0, 0), |(a, b), x| (a + u128::from(x.x1), b + u128::from(x.x2)))
    }

    pub fn is_complete(&self, m1: u64, m2: u64) -> bool {
        self.totals() == (u128::from(m1), u128::from(m2))
    }
}

/// Agents `lo..=hi` (1-based) all hold `bundle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: usize,
    pub hi: usize,
    pub bundle: Bundle,
}

impl Segment {
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.hi + 1 - self.lo
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.lo <= pos && pos <= self.hi
    }
}

/// Run-length form of an allocation: the segment ranges partition `1..=n` and
/// consecutive segments hold distinct bundles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedAllocation {
    segments: Vec<Segment>,
}

impl SegmentedAllocation {
    /// Validates that the ranges partition `1..=n`, dropping nothing and
    /// merging consecutive runs with equal bundles.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
        let mut next = 1;
        for s in segments {
            if s.lo != next || s.hi < s.lo {
                return Err(Error::ShapeMismatch(format!(
                    "segment {}..={} does not continue at {next}",
                    s.lo, s.hi
                )));
            }
            next = s.hi + 1;
            match merged.last_mut() {
                Some(last) if last.bundle == s.bundle => last.hi = s.hi,
                _ => merged.push(s),
            }
        }
        if merged.is_empty() {
            return Err(Error::ShapeMismatch("no segments".into()));
        }
        Ok(SegmentedAllocation { segments: merged })
    }

    pub fn from_dense(alloc: &Allocation) -> Result<Self> {
        let mut segments: Vec<Segment> = Vec::new();
        for (p, &bundle) in alloc.bundles().iter().enumerate() {
            match segments.last_mut() {
                Some(last) if last.bundle == bundle => last.hi = p + 1,
                _ => segments.push(Segment { lo: p + 1, hi: p + 1, bundle }),
            }
        }
        Self::from_segments(segments)
    }

    pub fn to_dense(&self) -> Allocation {
        let mut bundles = Vec::with_capacity(self.n());
        for s in &self.segments {
            bundles.extend(std::iter::repeat_n(s.bundle, s.len()));
        }
        Allocation::new(bundles)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Number of segments, `b`.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn n(&self) -> usize {
        self.segments.last().map_or(0, |s| s.hi)
    }

    pub fn bundle_at(&self, pos: usize) -> Option<Bundle> {
        let idx = self.segments.partition_point(|s| s.hi < pos);
        self.segments.get(idx).filter(|s| s.contains(pos)).map(|s| s.bundle)
    }

    pub fn totals(&self) -> (u128, u128) {
        self.segments.iter().fold((0, 0), |(a, b), s| {
            let len = s.len() as u128;
            (a + len * u128::from(s.bundle.x1), b + len * u128::from(s.bundle.x2))
        })
    }
}

/// `(envier, envied)` as 1-based positions.
pub type Witness = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvyVerdict {
    Efx,
    /// Some agent envies a lower-positioned agent.
    LeftEnvious { envier: usize, envied: usize },
    /// Some agent envies a higher-positioned agent.
    RightEnvious { envier: usize, envied: usize },
}

impl EnvyVerdict {
    pub fn is_efx(&self) -> bool {
        matches!(self, EnvyVerdict::Efx)
    }

    pub fn is_left(&self) -> bool {
        matches!(self, EnvyVerdict::LeftEnvious { .. })
    }

    pub fn is_right(&self) -> bool {
        matches!(self, EnvyVerdict::RightEnvious { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnvyVerdict::Efx => "EFX",
            EnvyVerdict::LeftEnvious { .. } => "LE",
            EnvyVerdict::RightEnvious { .. } => "RE",
        }
    }
}

/// Lexicographically smallest envy witness in each direction, if any.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnvyProfile {
    pub left: Option<Witness>,
    pub right: Option<Witness>,
}

impl EnvyProfile {
    pub fn is_efx(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }

    /// Fails when envy points both ways, which split allocations never allow.
    pub fn verdict(&self) -> Result<EnvyVerdict> {
        match (self.left, self.right) {
            (None, None) => Ok(EnvyVerdict::Efx),
            (Some((envier, envied)), None) => Ok(EnvyVerdict::LeftEnvious { envier, envied }),
            (None, Some((envier, envied))) => Ok(EnvyVerdict::RightEnvious { envier, envied }),
            (Some(l), Some(r)) => Err(Error::Invariant(format!(
                "envy in both directions: left witness {l:?}, right witness {r:?}"
            ))),
        }
    }
}

/// An agent's type-2 value prepared for repeated envy tests.
#[derive(Clone, Copy)]
enum Scaled<'a> {
    /// `v = a/b` with both parts small enough for `i128` arithmetic.
    Small { a: i128, b: i128 },
    Big(&'a Rational),
}

impl<'a> Scaled<'a> {
    fn new(v: &'a Rational) -> Self {
        match v.small_parts() {
            Some((a, b)) => Scaled::Small { a, b },
            None => Scaled::Big(v),
        }
    }

    fn envies(self, own: Bundle, other: Bundle) -> bool {
        if let Scaled::Small { a, b } = self {
            if let Some(answer) = envies_small(a, b, own, other) {
                return answer;
            }
        }
        match self {
            Scaled::Big(v) => envies_exact(v, own, other),
            Scaled::Small { a, b } => {
                envies_exact(&Rational::new(a as i64, b as i64).expect("b > 0"), own, other)
            }
        }
    }
}

fn envies_small(a: i128, b: i128, own: Bundle, other: Bundle) -> Option<bool> {
    let cheapest = match (other.x1 > 0, other.x2 > 0) {
        (false, false) => return Some(false),
        (true, false) => b,
        (false, true) => a,
        (true, true) => a.min(b),
    };
    let scaled = |x: Bundle| -> Option<i128> {
        b.checked_mul(i128::from(x.x1))?.checked_add(a.checked_mul(i128::from(x.x2))?)
    };
    let mine = scaled(own)?.checked_add(cheapest)?;
    Some(mine < scaled(other)?)
}

fn envies_exact(v: &Rational, own: Bundle, other: Bundle) -> bool {
    let one = Rational::one();
    let cheapest = match (other.x1 > 0, other.x2 > 0) {
        (false, false) => return false,
        (true, false) => &one,
        (false, true) => v,
        (true, true) => std::cmp::min(&one, v),
    };
    let value = |x: Bundle| &Rational::from(x.x1) + &v.mul_count(x.x2);
    &value(own) + cheapest < value(other)
}

/// Whether the agent at position `i` envies the agent at position `j` up to
/// any good. An empty bundle is never envied.
pub fn envies_up_to_any(inst: &NormalizedInstance, i: usize, j: usize, alloc: &Allocation) -> bool {
    Scaled::new(inst.v2(i)).envies(alloc.bundle(i), alloc.bundle(j))
}

/// Reference `O(n²)` envy scan over every ordered pair.
pub fn envy_profile_dense(inst: &NormalizedInstance, alloc: &Allocation) -> EnvyProfile {
    let bundles = alloc.bundles();
    let per_agent: Vec<(Option<usize>, Option<usize>)> = (0..bundles.len())
        .into_par_iter()
        .map(|i| {
            let v = Scaled::new(&inst.v2_values()[i]);
            let own = bundles[i];
            let left = (0..i).find(|&j| v.envies(own, bundles[j]));
            let right = (i + 1..bundles.len()).find(|&j| v.envies(own, bundles[j]));
            (left.map(|j| j + 1), right.map(|j| j + 1))
        })
        .collect();
    type Pick = fn(&(Option<usize>, Option<usize>)) -> Option<usize>;
    let first = |pick: Pick| {
        per_agent.iter().enumerate().find_map(|(i, w)| pick(w).map(|j| (i + 1, j)))
    };
    EnvyProfile { left: first(|w| w.0), right: first(|w| w.1) }
}

pub fn is_efx_dense(inst: &NormalizedInstance, alloc: &Allocation) -> bool {
    envy_profile_dense(inst, alloc).is_efx()
}

/// Constant-time envy scan for run-length allocations over sorted agents.
///
/// Agents strictly inside a run can be skipped: with type-2 values sorted, if
/// an inner agent envies some bundle then one of its neighbours does too, and
/// by induction so does one of the run's endpoints.
pub fn envy_profile_segmented(inst: &NormalizedInstance, seg: &SegmentedAllocation) -> EnvyProfile {
    let mut profile = EnvyProfile::default();
    let segments = seg.segments();
    let mut reps: Vec<(usize, usize)> = Vec::with_capacity(2 * segments.len());
    for (idx, s) in segments.iter().enumerate() {
        reps.push((s.lo, idx));
        if s.hi != s.lo {
            reps.push((s.hi, idx));
        }
    }
    for &(i, own_idx) in &reps {
        let v = Scaled::new(inst.v2(i));
        let own = segments[own_idx].bundle;
        for (idx, other) in segments.iter().enumerate() {
            if idx == own_idx || !v.envies(own, other.bundle) {
                continue;
            }
            let slot = if idx < own_idx { &mut profile.left } else { &mut profile.right };
            if slot.is_none() {
                *slot = Some((i, other.lo));
            }
        }
    }
    profile
}

pub fn classify_segmented(inst: &NormalizedInstance, seg: &SegmentedAllocation) -> Result<EnvyVerdict> {
    envy_profile_segmented(inst, seg).verdict()
}

/// Whether `t` witnesses that `alloc` is proper: nobody before `t` holds a
/// type-2 good and everybody after `t` holds fewer type-1 goods than `v2(t)`.
pub fn is_proper_at(inst: &NormalizedInstance, alloc: &Allocation, t: usize) -> bool {
    if t == 0 || t > alloc.n() {
        return false;
    }
    let bound = inst.v2(t);
    alloc.bundles()[..t - 1].iter().all(|b| b.x2 == 0)
        && alloc.bundles()[t..].iter().all(|b| &Rational::from(b.x1) < bound)
}

/// Smallest proper-allocation witness `t`, if any. A witness certifies Pareto
/// optimality.
pub fn is_proper(inst: &NormalizedInstance, alloc: &Allocation) -> Option<usize> {
    let bundles = alloc.bundles();
    let n = bundles.len();
    if n == 0 {
        return None;
    }
    // suffix_max[p] = max x1 over 0-based positions p..n.
    let mut suffix_max = vec![0u64; n + 1];
    for p in (0..n).rev() {
        suffix_max[p] = suffix_max[p + 1].max(bundles[p].x1);
    }
    let first_type2 = bundles.iter().position(|b| b.x2 > 0).map_or(n, |p| p + 1);
    (1..=first_type2.min(n)).find(|&t| {
        // Agents after t are 0-based positions t..n.
        t == n || &Rational::from(suffix_max[t]) < inst.v2(t)
    })
}
