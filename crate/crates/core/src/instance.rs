//! Raw instances, validation, and preprocessing into the sorted, normalized
//! form that the split/reallocation machinery works on.
//!
//! Preprocessing normalizes every agent to `(1, v2/v1)`, decides which good
//! type plays the role of "type 1" so that `m1·n2 ≥ m2·n1` holds for the two
//! preference groups, and sorts agents by their normalized type-2 value. The
//! resulting [`PreparedInstance`] remembers the permutation and the type swap
//! so that allocations can be mapped back with [`NormalizedInstance::map_back`].

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, Bundle};
use crate::arith::Rational;
use crate::error::{ensure_invariant, Error, Result, ValidationError};
use crate::split::pea_counts;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentValuation {
    pub v1: Rational,
    pub v2: Rational,
}

impl AgentValuation {
    pub fn new(v1: Rational, v2: Rational) -> Self {
        AgentValuation { v1, v2 }
    }
}

/// An instance as supplied by the user: good counts and per-agent values for
/// one good of each type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInstance {
    pub m1: u64,
    pub m2: u64,
    pub agents: Vec<AgentValuation>,
}

impl RawInstance {
    pub fn new(m1: u64, m2: u64, agents: Vec<AgentValuation>) -> Self {
        RawInstance { m1, m2, agents }
    }

    /// Convenience constructor from `(v1, v2)` pairs.
    pub fn from_pairs<I>(m1: u64, m2: u64, pairs: I) -> Self
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let agents = pairs.into_iter().map(|(v1, v2)| AgentValuation { v1, v2 }).collect();
        RawInstance { m1, m2, agents }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.agents.is_empty() {
            return Err(ValidationError::EmptyInstance);
        }
        if let Some(agent) = self
            .agents
            .iter()
            .position(|a| !a.v1.is_positive() || !a.v2.is_positive())
        {
            return Err(ValidationError::NonpositiveValuation { agent: agent + 1 });
        }
        if self.m1 == 0 && self.m2 == 0 {
            return Err(ValidationError::NoGoods);
        }
        Ok(())
    }

    /// Raw utility of `bundle` for the agent at 0-based `agent`.
    pub fn utility(&self, agent: usize, bundle: Bundle) -> Result<Rational> {
        let a = self.agents.get(agent).ok_or(Error::IndexOutOfRange(agent + 1))?;
        Ok(&a.v1.mul_count(bundle.x1) + &a.v2.mul_count(bundle.x2))
    }
}

/// A normalized view of an instance: every agent values type 1 at `1`, agents
/// are sorted by their type-2 value, and the good types may have been swapped.
///
/// Positions in this order are 1-based in every public API, matching the
/// pivot indices `t` and `ℓ` used by split allocations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedInstance {
    m1: u64,
    m2: u64,
    v2: Vec<Rational>,
    swap_applied: bool,
    /// `order[p]` is the 0-based raw index of the agent at 0-based position `p`.
    order: Vec<usize>,
    /// Raw value of "type 1" (after any swap) for the agent at each position.
    scale: Vec<Rational>,
}

impl NormalizedInstance {
    fn build(raw: &RawInstance, swap: bool) -> Self {
        let ratios: Vec<(usize, Rational, Rational)> = raw
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let (first, second) = if swap { (&a.v2, &a.v1) } else { (&a.v1, &a.v2) };
                (i, second / first, first.clone())
            })
            .collect();
        // Stable: ties keep raw order. Machine-integer keys avoid bignum
        // comparisons inside the sort.
        let keys: Vec<Option<(i128, i128)>> = ratios.iter().map(|r| r.1.small_parts()).collect();
        let mut perm: Vec<usize> = (0..ratios.len()).collect();
        perm.sort_by(|&x, &y| match (keys[x], keys[y]) {
            (Some((a, b)), Some((c, d))) => (a * d).cmp(&(c * b)),
            _ => ratios[x].1.cmp(&ratios[y].1),
        });
        let mut slots: Vec<Option<(usize, Rational, Rational)>> = ratios.into_iter().map(Some).collect();
        let ratios: Vec<(usize, Rational, Rational)> =
            perm.into_iter().map(|i| slots[i].take().expect("permutation")).collect();
        let (m1, m2) = if swap { (raw.m2, raw.m1) } else { (raw.m1, raw.m2) };
        let mut order = Vec::with_capacity(ratios.len());
        let mut v2 = Vec::with_capacity(ratios.len());
        let mut scale = Vec::with_capacity(ratios.len());
        for (i, r, s) in ratios {
            order.push(i);
            v2.push(r);
            scale.push(s);
        }
        NormalizedInstance { m1, m2, v2, swap_applied: swap, order, scale }
    }

    /// Builds a normalized instance directly from sorted type-2 values.
    pub fn from_sorted(m1: u64, m2: u64, v2: Vec<Rational>) -> Result<Self> {
        if v2.is_empty() {
            return Err(ValidationError::EmptyInstance.into());
        }
        if let Some(p) = v2.iter().position(|v| !v.is_positive()) {
            return Err(ValidationError::NonpositiveValuation { agent: p + 1 }.into());
        }
        if v2.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::ShapeMismatch("type-2 values must be non-decreasing".into()));
        }
        let n = v2.len();
        Ok(NormalizedInstance {
            m1,
            m2,
            scale: vec![Rational::one(); n],
            order: (0..n).collect(),
            swap_applied: false,
            v2,
        })
    }

    pub fn n(&self) -> usize {
        self.v2.len()
    }

    pub fn m1(&self) -> u64 {
        self.m1
    }

    pub fn m2(&self) -> u64 {
        self.m2
    }

    /// Normalized type-2 values in position order.
    pub fn v2_values(&self) -> &[Rational] {
        &self.v2
    }

    /// Type-2 value of the agent at 1-based position `pos`.
    pub fn v2(&self, pos: usize) -> &Rational {
        &self.v2[pos - 1]
    }

    pub fn swap_applied(&self) -> bool {
        self.swap_applied
    }

    /// `order()[p]` is the 0-based raw index of the agent at 0-based position `p`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Factor turning a normalized utility of the agent at 0-based position
    /// `p` back into raw units.
    pub fn raw_scale(&self, p: usize) -> &Rational {
        &self.scale[p]
    }

    /// Normalized utility of `bundle` for the agent at 1-based position `pos`.
    pub fn utility(&self, pos: usize, bundle: Bundle) -> Result<Rational> {
        if pos == 0 || pos > self.n() {
            return Err(Error::IndexOutOfRange(pos));
        }
        Ok(&Rational::from(bundle.x1) + &self.v2(pos).mul_count(bundle.x2))
    }

    /// The same instance as a [`RawInstance`] in position order with
    /// `v1 = 1`; convenient for the brute-force oracles.
    pub fn as_raw(&self) -> RawInstance {
        RawInstance::from_pairs(self.m1, self.m2, self.v2.iter().map(|v| (Rational::one(), v.clone())))
    }

    /// Undoes sorting and the type swap.
    pub fn map_back(&self, alloc: &Allocation) -> Result<Allocation> {
        if alloc.n() != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "allocation has {} agents, instance has {}",
                alloc.n(),
                self.n()
            )));
        }
        let mut raw = vec![Bundle::default(); self.n()];
        for (p, bundle) in alloc.bundles().iter().enumerate() {
            raw[self.order[p]] = if self.swap_applied { bundle.swapped() } else { *bundle };
        }
        Ok(Allocation::new(raw))
    }

    /// Inverse of [`map_back`](Self::map_back): raw agent order and
    /// orientation into position order.
    pub fn to_positions(&self, alloc: &Allocation) -> Result<Allocation> {
        if alloc.n() != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "allocation has {} agents, instance has {}",
                alloc.n(),
                self.n()
            )));
        }
        let bundles = self
            .order
            .iter()
            .map(|&i| {
                let b = alloc.bundles()[i];
                if self.swap_applied { b.swapped() } else { b }
            })
            .collect();
        Ok(Allocation::new(bundles))
    }
}

/// A normalized instance satisfying every preprocessed-input restriction:
/// sorted positive type-2 values, a group split `n1 + n2 = n` consistent with
/// the values, `m1·n2 ≥ m2·n1`, `m2 > 0`, `n2 > 0`, and `m1 + m2 ≥ n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedInstance {
    base: NormalizedInstance,
    n1: usize,
}

impl Deref for PreparedInstance {
    type Target = NormalizedInstance;
    fn deref(&self) -> &NormalizedInstance {
        &self.base
    }
}

impl PreparedInstance {
    /// Prepares an already sorted instance without swapping good types.
    pub fn from_sorted(m1: u64, m2: u64, v2: Vec<Rational>) -> Result<Self> {
        let base = NormalizedInstance::from_sorted(m1, m2, v2)?;
        let n1 = choose_group_split(&base).ok_or_else(|| {
            Error::ShapeMismatch("no group split satisfies m1·n2 ≥ m2·n1 with n2 > 0".into())
        })?;
        let prepared = PreparedInstance { base, n1 };
        prepared.check_restrictions()?;
        Ok(prepared)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n() - self.n1
    }

    pub fn normalized(&self) -> &NormalizedInstance {
        &self.base
    }

    /// Asserts every preprocessed-input restriction.
    pub fn check_restrictions(&self) -> Result<()> {
        let n = self.n();
        let (n1, n2) = (self.n1, self.n2());
        ensure_invariant!(self.v2.iter().all(Rational::is_positive), "nonpositive type-2 value");
        ensure_invariant!(self.v2.windows(2).all(|w| w[0] <= w[1]), "type-2 values not sorted");
        ensure_invariant!(n1 + n2 == n, "group sizes do not add up");
        let one = Rational::one();
        if n1 >= 1 {
            ensure_invariant!(self.v2(n1) <= &one, "agent {n1} is in group 1 but prefers type 2");
        }
        if n1 < n {
            ensure_invariant!(self.v2(n1 + 1) >= &one, "agent {} is in group 2 but prefers type 1", n1 + 1);
        }
        ensure_invariant!(
            u128::from(self.m1) * n2 as u128 >= u128::from(self.m2) * n1 as u128,
            "m1/n1 < m2/n2"
        );
        ensure_invariant!(self.m2 > 0 && n2 > 0, "m2 = 0 or n2 = 0");
        ensure_invariant!(
            u128::from(self.m1) + u128::from(self.m2) >= n as u128,
            "fewer goods than agents"
        );
        Ok(())
    }
}

/// Why an instance bypasses the split-allocation search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrivialKind {
    /// Only one good type is present.
    OneType,
    /// `m1 + m2 ≤ n`: everybody gets at most one good.
    TooFewItems,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrivialCase {
    pub kind: TrivialKind,
    pub instance: NormalizedInstance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preprocessed {
    Prepared(PreparedInstance),
    Trivial(TrivialCase),
}

/// Largest feasible `n1` in `[a, a+b]`, where `a` counts agents strictly
/// preferring type 1 and `b` counts indifferent agents.
fn choose_group_split(inst: &NormalizedInstance) -> Option<usize> {
    let one = Rational::one();
    let n = inst.n();
    let a = inst.v2.partition_point(|v| v < &one);
    let ab = inst.v2.partition_point(|v| v <= &one);
    (a..=ab).rev().find(|&n1| {
        let n2 = n - n1;
        n2 > 0 && u128::from(inst.m1) * n2 as u128 >= u128::from(inst.m2) * n1 as u128
    })
}

pub fn preprocess(raw: &RawInstance) -> Result<Preprocessed> {
    raw.validate()?;
    let n = raw.n() as u128;
    if raw.m1 == 0 || raw.m2 == 0 {
        let instance = NormalizedInstance::build(raw, false);
        return Ok(Preprocessed::Trivial(TrivialCase { kind: TrivialKind::OneType, instance }));
    }
    if u128::from(raw.m1) + u128::from(raw.m2) <= n {
        let instance = NormalizedInstance::build(raw, false);
        return Ok(Preprocessed::Trivial(TrivialCase { kind: TrivialKind::TooFewItems, instance }));
    }
    for swap in [false, true] {
        let base = NormalizedInstance::build(raw, swap);
        if let Some(n1) = choose_group_split(&base) {
            let prepared = PreparedInstance { base, n1 };
            prepared.check_restrictions()?;
            return Ok(Preprocessed::Prepared(prepared));
        }
    }
    Err(Error::Invariant("no feasible orientation and group split".into()))
}

/// Allocation (in position order) for instances that skip the search.
pub fn solve_trivial(case: &TrivialCase) -> Allocation {
    let inst = &case.instance;
    let n = inst.n();
    let mut bundles = vec![Bundle::default(); n];
    match case.kind {
        TrivialKind::TooFewItems => {
            // Positions 1..=m1 take one type-1 good, n-m2+1..=n one type-2 good.
            for b in bundles.iter_mut().take(inst.m1 as usize) {
                b.x1 = 1;
            }
            for b in bundles.iter_mut().skip(n - inst.m2 as usize) {
                b.x2 = 1;
            }
        }
        TrivialKind::OneType => {
            let counts1 = pea_counts(inst.m1, n).expect("n >= 1");
            let counts2 = pea_counts(inst.m2, n).expect("n >= 1");
            for (b, (x1, x2)) in bundles.iter_mut().zip(counts1.into_iter().zip(counts2)) {
                *b = Bundle::new(x1, x2);
            }
        }
    }
    Allocation::new(bundles)
}

/// Lower-bound search for the first position whose type-2 value is at least 1.
pub(crate) fn first_at_least_one(inst: &NormalizedInstance) -> Option<usize> {
    let one = Rational::one();
    let idx = inst.v2.partition_point(|v| v < &one);
    (idx < inst.n()).then_some(idx + 1)
}
