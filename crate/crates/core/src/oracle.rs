//! Brute-force verifiers written straight from the definitions.
//!
//! Nothing here reuses the envy, properness or index-set code of the main
//! path. Valuations are rescaled per agent to integers so every comparison is
//! exact `i128` arithmetic; instances whose scaled values do not fit are
//! refused with [`Error::OracleOverflow`].

use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, Bundle};
use crate::error::{Error, Result};
use crate::instance::{preprocess, Preprocessed, RawInstance};
use crate::realloc::{build_realloc, ReallocIndex};
use crate::solver::{solve_with, CheckLevel, SolveOptions};
use crate::split::{build_split, SplitIndex};

pub const DEFAULT_BUDGET: u64 = 2_000_000;

/// Cap on `C(m1+n−1, n−1)·C(m2+n−1, n−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumBudget {
    pub max_allocations: u64,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget { max_allocations: DEFAULT_BUDGET }
    }
}

/// Integer valuations: agent `i` values the goods at `a[i]` and `b[i]`.
struct Ints {
    a: Vec<i128>,
    b: Vec<i128>,
}

impl Ints {
    fn new(raw: &RawInstance) -> Result<Self> {
        let mut a = Vec::with_capacity(raw.n());
        let mut b = Vec::with_capacity(raw.n());
        for ag in &raw.agents {
            let l = ag.v1.denom().lcm(ag.v2.denom());
            let va = ag.v1.numer() * (&l / ag.v1.denom());
            let vb = ag.v2.numer() * (&l / ag.v2.denom());
            a.push(va.to_i64().ok_or(Error::OracleOverflow)?.into());
            b.push(vb.to_i64().ok_or(Error::OracleOverflow)?.into());
        }
        Ok(Ints { a, b })
    }

    fn u(&self, i: usize, x1: u64, x2: u64) -> i128 {
        self.a[i] * i128::from(x1) + self.b[i] * i128::from(x2)
    }
}

fn check_shape(raw: &RawInstance, alloc: &Allocation) -> Result<()> {
    if alloc.n() != raw.n() {
        return Err(Error::ShapeMismatch(format!("{} bundles for {} agents", alloc.n(), raw.n())));
    }
    if !alloc.is_complete(raw.m1, raw.m2) {
        return Err(Error::ShapeMismatch("allocation does not hand out every good".into()));
    }
    Ok(())
}

/// `C(m + n − 1, n − 1)`, or `None` on overflow.
fn compositions_count(m: u64, n: usize) -> Option<u128> {
    let r = (n as u128).checked_sub(1)?;
    let top = u128::from(m) + r;
    let mut acc: u128 = 1;
    for i in 1..=r.min(u128::from(m)) {
        acc = acc.checked_mul(top - i + 1)? / i;
    }
    Some(acc)
}

pub fn allocation_count(n: usize, m1: u64, m2: u64) -> Option<u128> {
    compositions_count(m1, n)?.checked_mul(compositions_count(m2, n)?)
}

fn check_budget(n: usize, m1: u64, m2: u64, budget: EnumBudget) -> Result<()> {
    match allocation_count(n, m1, m2) {
        Some(c) if c <= u128::from(budget.max_allocations) => Ok(()),
        c => Err(Error::BudgetExceeded {
            needed: c.map_or_else(|| "more than 2^128".to_string(), |c| c.to_string()),
            budget: budget.max_allocations,
        }),
    }
}

/// Weak compositions of `m` into `n` parts, lexicographically descending.
#[derive(Debug, Clone)]
pub struct Compositions {
    parts: Vec<u64>,
    done: bool,
}

impl Compositions {
    pub fn new(m: u64, n: usize) -> Self {
        let mut parts = vec![0; n];
        if let Some(first) = parts.first_mut() {
            *first = m;
        }
        Compositions { done: n == 0 && m > 0, parts }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        if self.done {
            return None;
        }
        let out = self.parts.clone();
        let n = self.parts.len();
        // Move one unit from the rightmost nonzero part (excluding the last)
        // one step right, and gather everything after it there.
        match (0..n.saturating_sub(1)).rev().find(|&i| self.parts[i] > 0) {
            Some(i) => {
                let tail: u64 = self.parts[i + 1..].iter().sum();
                self.parts[i] -= 1;
                for p in &mut self.parts[i + 1..] {
                    *p = 0;
                }
                self.parts[i + 1] = tail + 1;
            }
            None => self.done = true,
        }
        Some(out)
    }
}

/// Every complete allocation of the instance, each exactly once.
pub fn enumerate_allocations(raw: &RawInstance, budget: EnumBudget) -> Result<impl Iterator<Item = Allocation>> {
    let (n, m1, m2) = (raw.n(), raw.m1, raw.m2);
    check_budget(n, m1, m2, budget)?;
    let firsts: Vec<Vec<u64>> = Compositions::new(m1, n).collect();
    Ok(firsts.into_iter().flat_map(move |c1| {
        Compositions::new(m2, n).map(move |c2| {
            Allocation::new(c1.iter().zip(&c2).map(|(&x1, &x2)| Bundle::new(x1, x2)).collect())
        })
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfxCheck {
    pub efx: bool,
    /// First `(envier, envied)` pair found, 1-based.
    pub witness: Option<(usize, usize)>,
}

fn envies(v: &Ints, i: usize, own: Bundle, other: Bundle) -> bool {
    let mine = v.u(i, own.x1, own.x2);
    let theirs = v.u(i, other.x1, other.x2);
    let drop1 = other.x1 > 0 && mine < theirs - v.a[i];
    let drop2 = other.x2 > 0 && mine < theirs - v.b[i];
    drop1 || drop2
}

/// Pairwise EFX check: `i` envies `j` if removing some single good from
/// `X_j` still leaves it better than `X_i` for `i`.
pub fn oracle_efx(raw: &RawInstance, alloc: &Allocation) -> Result<EfxCheck> {
    check_shape(raw, alloc)?;
    let v = Ints::new(raw)?;
    let bs = alloc.bundles();
    for i in 0..bs.len() {
        for j in 0..bs.len() {
            if i != j && envies(&v, i, bs[i], bs[j]) {
                return Ok(EfxCheck { efx: false, witness: Some((i + 1, j + 1)) });
            }
        }
    }
    Ok(EfxCheck { efx: true, witness: None })
}

/// Whether some agent envies (up to any good) an agent with a smaller or a
/// larger index, in the order the instance lists them.
pub fn oracle_envy_directions(raw: &RawInstance, alloc: &Allocation) -> Result<(bool, bool)> {
    check_shape(raw, alloc)?;
    let v = Ints::new(raw)?;
    let bs = alloc.bundles();
    let (mut left, mut right) = (false, false);
    for i in 0..bs.len() {
        for j in 0..bs.len() {
            if i != j && envies(&v, i, bs[i], bs[j]) {
                if i > j {
                    left = true;
                } else {
                    right = true;
                }
            }
        }
    }
    Ok((left, right))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "witness", rename_all = "kebab-case")]
pub enum ParetoVerdict {
    Optimal,
    DominatedBy(Allocation),
}

impl ParetoVerdict {
    pub fn is_optimal(&self) -> bool {
        matches!(self, ParetoVerdict::Optimal)
    }
}

/// Exhaustive Pareto test. Walks every split of the type-1 goods; for each
/// one the cheapest type-2 completion keeping everybody at least as well
/// off is computed exactly, which decides whether any allocation with that
/// type-1 part dominates.
pub fn oracle_pareto(raw: &RawInstance, alloc: &Allocation, budget: EnumBudget) -> Result<ParetoVerdict> {
    check_shape(raw, alloc)?;
    check_budget(raw.n(), raw.m1, raw.m2, budget)?;
    let v = Ints::new(raw)?;
    let n = raw.n();
    let base: Vec<i128> = alloc.bundles().iter().enumerate().map(|(i, b)| v.u(i, b.x1, b.x2)).collect();
    for c1 in Compositions::new(raw.m1, n) {
        let mut need = vec![0u64; n];
        let mut total: u128 = 0;
        let mut strict = false;
        for i in 0..n {
            let rest = base[i] - v.a[i] * i128::from(c1[i]);
            let k = if rest <= 0 { 0 } else { (rest + v.b[i] - 1) / v.b[i] };
            strict |= v.a[i] * i128::from(c1[i]) + v.b[i] * k > base[i];
            need[i] = k as u64;
            total += k as u128;
        }
        let m2 = u128::from(raw.m2);
        if total <= m2 && (strict || total < m2) {
            need[0] += (m2 - total) as u64;
            let y = Allocation::new(c1.iter().zip(&need).map(|(&x1, &x2)| Bundle::new(x1, x2)).collect());
            return Ok(ParetoVerdict::DominatedBy(y));
        }
    }
    Ok(ParetoVerdict::Optimal)
}

/// The same test by listing every allocation. Quadratic in nothing but
/// slow; used to cross-check [`oracle_pareto`].
pub fn oracle_pareto_naive(raw: &RawInstance, alloc: &Allocation, budget: EnumBudget) -> Result<ParetoVerdict> {
    check_shape(raw, alloc)?;
    let v = Ints::new(raw)?;
    let base: Vec<i128> = alloc.bundles().iter().enumerate().map(|(i, b)| v.u(i, b.x1, b.x2)).collect();
    for y in enumerate_allocations(raw, budget)? {
        let utils: Vec<i128> = y.bundles().iter().enumerate().map(|(i, b)| v.u(i, b.x1, b.x2)).collect();
        if utils.iter().zip(&base).all(|(u, b)| u >= b) && utils.iter().zip(&base).any(|(u, b)| u > b) {
            return Ok(ParetoVerdict::DominatedBy(y));
        }
    }
    Ok(ParetoVerdict::Optimal)
}

/// Smallest `t` at which a proper-allocation witness exists, for agents
/// listed by nondecreasing `v2/v1`: nobody before `t` holds type 2 and
/// everybody after `t` holds fewer type-1 goods than `v2/v1` of agent `t`.
pub fn oracle_is_proper(raw: &RawInstance, alloc: &Allocation) -> Result<Option<usize>> {
    check_shape(raw, alloc)?;
    let v = Ints::new(raw)?;
    let bs = alloc.bundles();
    let n = bs.len();
    Ok((1..=n).find(|&t| {
        let before = (0..t - 1).all(|i| bs[i].x2 == 0);
        // x1 < b/a  ⇔  x1·a < b.
        let after = (t..n).all(|i| i128::from(bs[i].x1) * v.a[t - 1] < v.b[t - 1]);
        before && after
    }))
}

/// Split indices by definition, sorted by increasing `t`, then decreasing
/// `k`. Agents must be listed by nondecreasing `v2/v1`.
pub fn oracle_t_set(raw: &RawInstance) -> Result<Vec<SplitIndex>> {
    let v = Ints::new(raw)?;
    let n = raw.n();
    let mut out = Vec::new();
    for t in 1..=n {
        for k in (1..=raw.m2).rev() {
            let member = if t == n {
                k == raw.m2
            } else {
                v.b[t - 1] >= v.a[t - 1] && u128::from(k) * (n - t + 1) as u128 <= u128::from(raw.m2)
            };
            if member {
                out.push(SplitIndex::new(t, k));
            }
        }
    }
    Ok(out)
}

/// The sandwich `⌈d·v⌉·t − ⌈k·v⌉ + 1 ≤ m1 ≤ ⌈d·v⌉·t − ⌈(k−1)·v⌉`, with
/// `d = ⌊(m2 − k)/(n − t)⌋` and `v = v2/v1` of agent `t`.
pub fn oracle_sandwich(raw: &RawInstance, idx: SplitIndex) -> Result<bool> {
    let v = Ints::new(raw)?;
    let n = raw.n();
    let SplitIndex { t, k } = idx;
    if t >= n {
        return Ok(false);
    }
    let (a, b) = (v.a[t - 1], v.b[t - 1]);
    let ceil_times = |x: u64| (i128::from(x) * b + a - 1).div_euclid(a);
    let d = (raw.m2 - k) / (n - t) as u64;
    let top = ceil_times(d) * t as i128;
    let m1 = i128::from(raw.m1);
    Ok(top - ceil_times(k) < m1 && m1 <= top - ceil_times(k - 1))
}

/// EFX and Pareto check of a reallocation output. Returns the problems found.
pub fn check_realloc_output(raw: &RawInstance, alloc: &Allocation, budget: EnumBudget) -> Result<Vec<String>> {
    let mut problems = Vec::new();
    if let Some((i, j)) = oracle_efx(raw, alloc)?.witness {
        problems.push(format!("agent {i} envies agent {j} up to some good"));
    }
    if let ParetoVerdict::DominatedBy(y) = oracle_pareto(raw, alloc, budget)? {
        problems.push(format!("dominated by {:?}", y.bundles()));
    }
    Ok(problems)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremOptions {
    pub budget: EnumBudget,
    /// Largest allocation count for which every proper allocation is tested
    /// for Pareto optimality; above it only constructed ones are.
    pub exhaustive_proper_cap: u64,
}

impl Default for TheoremOptions {
    fn default() -> Self {
        TheoremOptions { budget: EnumBudget::default(), exhaustive_proper_cap: 3000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProperMode {
    Skipped,
    Exhaustive,
    Constructed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// `proper-po`, `single-direction`, `minimum`, `maximum`, `sandwich`,
    /// `realloc`, `classifier` or `solver`.
    pub check: String,
    pub detail: String,
    pub index: Option<SplitIndex>,
    /// Allocation in the order of `sorted_instance` (or of the input for
    /// `solver`).
    pub allocation: Option<Allocation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub instance: RawInstance,
    /// Normalized, sorted form the index-set checks ran on.
    pub sorted_instance: Option<RawInstance>,
    pub index_set_size: usize,
    pub flips: usize,
    pub proper_mode: ProperMode,
    pub proper_checked: u64,
    pub violations: Vec<Violation>,
}

impl TheoremReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs every structural claim on one desk-scale instance: proper
/// allocations are Pareto-optimal; split allocations never envy in both
/// directions; the extremal split allocations lean the right way; at every
/// LE→RE flip the sandwich holds and the reallocation is EFX and
/// Pareto-optimal; and the solver output is EFX and Pareto-optimal.
pub fn validate_theorems(raw: &RawInstance, opts: &TheoremOptions) -> Result<TheoremReport> {
    let mut report = TheoremReport {
        instance: raw.clone(),
        sorted_instance: None,
        index_set_size: 0,
        flips: 0,
        proper_mode: ProperMode::Skipped,
        proper_checked: 0,
        violations: Vec::new(),
    };
    let flag = |check: &str, detail: String, index: Option<SplitIndex>, allocation: Option<&Allocation>| {
        Violation { check: check.into(), detail, index, allocation: allocation.cloned() }
    };

    let solved = solve_with(raw, &SolveOptions { checks: CheckLevel::Structural, dense_limit: 0 });
    match solved {
        Ok(out) => {
            for p in check_realloc_output(raw, &out.allocation, opts.budget)? {
                report.violations.push(flag("solver", p, out.certificate.index(), Some(&out.allocation)));
            }
        }
        Err(e @ Error::Invariant(_)) => report.violations.push(flag("solver", e.to_string(), None, None)),
        Err(e) => return Err(e),
    }

    let inst = match preprocess(raw)? {
        Preprocessed::Prepared(p) => p,
        Preprocessed::Trivial(_) => return Ok(report),
    };
    let sorted = inst.as_raw();
    let index_set = oracle_t_set(&sorted)?;
    report.index_set_size = index_set.len();

    let mut verdicts = Vec::with_capacity(index_set.len());
    let mut constructed = Vec::new();
    for &idx in &index_set {
        let alloc = build_split(&inst, idx)?.to_dense();
        let (left, right) = oracle_envy_directions(&sorted, &alloc)?;
        if left && right {
            report.violations.push(flag("single-direction", "envy both ways".into(), Some(idx), Some(&alloc)));
        }
        let fast = crate::split::classify_split(&inst, idx).map(|(_, v)| (v.is_left(), v.is_right()));
        if fast.as_ref().ok() != Some(&(left, right)) {
            report.violations.push(flag("classifier", format!("oracle ({left}, {right}) vs {fast:?}"), Some(idx), Some(&alloc)));
        }
        verdicts.push((left, right));
        constructed.push(alloc);
    }
    if let (Some(first), Some(last)) = (verdicts.first(), verdicts.last()) {
        if first.1 {
            report.violations.push(flag("minimum", "≺-minimum is right-envious".into(), index_set.first().copied(), None));
        }
        if last.0 {
            report.violations.push(flag("maximum", "≺-maximum is left-envious".into(), index_set.last().copied(), None));
        }
    }

    for i in 0..verdicts.len().saturating_sub(1) {
        let (le, re) = ((verdicts[i].0 && !verdicts[i].1), (verdicts[i + 1].1 && !verdicts[i + 1].0));
        if !(le && re) {
            continue;
        }
        report.flips += 1;
        let idx = index_set[i];
        if !oracle_sandwich(&sorted, idx)? {
            report.violations.push(flag("sandwich", "integer bounds fail".into(), Some(idx), None));
            continue;
        }
        let alloc = ReallocIndex::new(&inst, idx).and_then(|r| build_realloc(&inst, &r));
        match alloc {
            Ok(seg) => {
                let dense = seg.to_dense();
                for p in check_realloc_output(&sorted, &dense, opts.budget)? {
                    report.violations.push(flag("realloc", p, Some(idx), Some(&dense)));
                }
                constructed.push(dense);
            }
            Err(e) => report.violations.push(flag("realloc", e.to_string(), Some(idx), None)),
        }
    }

    let count = allocation_count(sorted.n(), sorted.m1, sorted.m2);
    let candidates: Box<dyn Iterator<Item = Allocation>> = match count {
        Some(c) if c <= u128::from(opts.exhaustive_proper_cap) => {
            report.proper_mode = ProperMode::Exhaustive;
            Box::new(enumerate_allocations(&sorted, opts.budget)?)
        }
        _ => {
            report.proper_mode = ProperMode::Constructed;
            Box::new(constructed.into_iter())
        }
    };
    for alloc in candidates {
        if oracle_is_proper(&sorted, &alloc)?.is_none() {
            continue;
        }
        report.proper_checked += 1;
        if let ParetoVerdict::DominatedBy(y) = oracle_pareto(&sorted, &alloc, opts.budget)? {
            report.violations.push(flag("proper-po", format!("dominated by {:?}", y.bundles()), None, Some(&alloc)));
        }
    }
    report.sorted_instance = Some(sorted);
    Ok(report)
}
