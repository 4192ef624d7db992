//! The logarithmic search for an EFX and Pareto-optimal allocation.
//!
//! On a prepared instance the split allocations, walked in `≺` order, start
//! left-envious (or EFX) and end right-envious (or EFX). The search
//! binary-searches the pivot `t`, then `k`, and either hits an EFX split
//! allocation or stops at an LE→RE flip where the reallocation is EFX.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::allocation::{classify_segmented, is_efx_dense, is_proper, is_proper_at, Allocation, EnvyVerdict, SegmentedAllocation};
use crate::error::{ensure_invariant, Error, Result};
use crate::instance::{preprocess, solve_trivial, PreparedInstance, Preprocessed, RawInstance, TrivialKind};
use crate::realloc::{build_realloc, realloc_lower_bound_holds, realloc_upper_bound_holds, ReallocIndex};
use crate::split::{check_split_structure, classify_split, max_k, minimum_split_index, t_set, t_set_len, SplitIndex};

/// How much self-checking a solve performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckLevel {
    /// Constant-time and linear checks only.
    Structural,
    /// Adds the quadratic dense EFX scan (up to `dense_limit` agents).
    Full,
}

impl CheckLevel {
    /// Reads `EFXPO_CHECKS` (`structural` or `full`). Falls back to `Full`
    /// in debug builds and `Structural` otherwise.
    pub fn from_env() -> Self {
        match std::env::var("EFXPO_CHECKS").as_deref() {
            Ok("full") => CheckLevel::Full,
            Ok("structural") => CheckLevel::Structural,
            _ if cfg!(debug_assertions) => CheckLevel::Full,
            _ => CheckLevel::Structural,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub checks: CheckLevel,
    /// Largest `n` for which `Full` runs the dense EFX scan.
    pub dense_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { checks: CheckLevel::from_env(), dense_limit: 5000 }
    }
}

/// Which construction produced the allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    /// `m1 + m2 ≤ n`.
    TrivialObs1,
    TrivialOneType,
    Split { t: usize, k: u64 },
    Realloc { t: usize, k: u64 },
}

impl Certificate {
    pub fn label(&self) -> &'static str {
        match self {
            Certificate::TrivialObs1 => "trivial-obs1",
            Certificate::TrivialOneType => "trivial-one-type",
            Certificate::Split { .. } => "split",
            Certificate::Realloc { .. } => "realloc",
        }
    }

    pub fn index(&self) -> Option<SplitIndex> {
        match *self {
            Certificate::Split { t, k } | Certificate::Realloc { t, k } => Some(SplitIndex::new(t, k)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Verification {
    /// EFX confirmed on the segmented form (always for non-trivial kinds).
    pub efx_checked: bool,
    /// EFX also confirmed by the quadratic dense scan.
    pub efx_dense_checked: bool,
    /// Smallest `t` at which the allocation (in prepared order) is proper.
    pub proper_witness: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub split_builds: u64,
    pub classifier_calls: u64,
    pub preprocess_ns: u64,
    pub search_ns: u64,
    pub elapsed_ns: u64,
}

impl SolveStats {
    /// `2·(⌈log₂ n⌉ + ⌈log₂ m2⌉) + 6`.
    pub fn split_build_bound(n: usize, m2: u64) -> u64 {
        2 * (ceil_log2(n as u64) + ceil_log2(m2)) + 6
    }
}

fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        u64::from(64 - (x - 1).leading_zeros())
    }
}

/// Shape of the instance the search ran on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedSummary {
    pub n1: usize,
    pub n2: usize,
    pub swap_applied: bool,
    pub m1: u64,
    pub m2: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    /// Bundles in the caller's agent order and good-type orientation.
    pub allocation: Allocation,
    pub certificate: Certificate,
    pub verification: Verification,
    pub stats: SolveStats,
    /// Absent for trivial instances.
    pub prepared: Option<PreparedSummary>,
}

/// Result of the search on a prepared instance, in prepared position order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub allocation: SegmentedAllocation,
    pub certificate: Certificate,
    pub split_builds: u64,
    pub classifier_calls: u64,
}

struct Probe<'a> {
    inst: &'a PreparedInstance,
    split_builds: u64,
    classifier_calls: u64,
}

impl Probe<'_> {
    fn classify(&mut self, idx: SplitIndex) -> Result<(SegmentedAllocation, EnvyVerdict)> {
        self.split_builds += 1;
        self.classifier_calls += 1;
        let (seg, verdict) = classify_split(self.inst, idx)?;
        check_split_structure(self.inst, idx, &seg)?;
        Ok((seg, verdict))
    }

    fn done(self, allocation: SegmentedAllocation, certificate: Certificate) -> SearchOutcome {
        SearchOutcome { allocation, certificate, split_builds: self.split_builds, classifier_calls: self.classifier_calls }
    }
}

/// Runs the search on a prepared instance. Every step is checked in
/// constant time; a failed check is reported as [`Error::Invariant`].
pub fn search(inst: &PreparedInstance) -> Result<SearchOutcome> {
    let n = inst.n();
    let m2 = inst.m2();
    let mut probe = Probe { inst, split_builds: 0, classifier_calls: 0 };
    let split = |idx: SplitIndex| Certificate::Split { t: idx.t, k: idx.k };

    let lo = minimum_split_index(inst);
    let (seg, verdict) = probe.classify(lo)?;
    if verdict.is_efx() {
        return Ok(probe.done(seg, split(lo)));
    }
    ensure_invariant!(verdict.is_left(), "≺-minimum {lo:?} is {verdict:?}");
    let hi = SplitIndex::new(n, m2);
    ensure_invariant!(lo != hi, "single-element index set is not EFX");
    let (seg, verdict) = probe.classify(hi)?;
    if verdict.is_efx() {
        return Ok(probe.done(seg, split(hi)));
    }
    ensure_invariant!(verdict.is_right(), "≺-maximum {hi:?} is {verdict:?}");

    // Invariant: (t_l, max_k) is LE, (t_r, max_k) is RE.
    let (mut t_l, mut t_r) = (lo.t, n);
    while t_r - t_l > 1 {
        let t_m = (t_l + t_r) / 2;
        let idx = SplitIndex::new(t_m, max_k(inst, t_m));
        let (seg, verdict) = probe.classify(idx)?;
        match verdict {
            EnvyVerdict::Efx => return Ok(probe.done(seg, split(idx))),
            EnvyVerdict::LeftEnvious { .. } => t_l = t_m,
            EnvyVerdict::RightEnvious { .. } => t_r = t_m,
        }
    }

    let t = t_l;
    let (mut k_l, mut k_r) = (max_k(inst, t), 1);
    let bottom = SplitIndex::new(t, k_r);
    let (seg, verdict) = probe.classify(bottom)?;
    let k = match verdict {
        EnvyVerdict::RightEnvious { .. } => {
            while k_l - k_r > 1 {
                let k_m = (k_l + k_r) / 2;
                let idx = SplitIndex::new(t, k_m);
                let (seg, verdict) = probe.classify(idx)?;
                match verdict {
                    EnvyVerdict::Efx => return Ok(probe.done(seg, split(idx))),
                    EnvyVerdict::LeftEnvious { .. } => k_l = k_m,
                    EnvyVerdict::RightEnvious { .. } => k_r = k_m,
                }
            }
            k_l
        }
        EnvyVerdict::Efx => return Ok(probe.done(seg, split(bottom))),
        EnvyVerdict::LeftEnvious { .. } => 1,
    };

    let flip = SplitIndex::new(t, k);
    ensure_invariant!(realloc_lower_bound_holds(inst, flip), "lower sandwich bound fails at {flip:?}");
    ensure_invariant!(realloc_upper_bound_holds(inst, flip), "upper sandwich bound fails at {flip:?}");
    let idx = ReallocIndex::new(inst, flip)?;
    let seg = build_realloc(inst, &idx)?;
    probe.classifier_calls += 1;
    let verdict = classify_segmented(inst, &seg)?;
    ensure_invariant!(verdict.is_efx(), "reallocation at {flip:?} is {verdict:?}");
    Ok(probe.done(seg, Certificate::Realloc { t, k }))
}

pub fn solve(raw: &RawInstance) -> Result<SolveResult> {
    solve_with(raw, &SolveOptions::default())
}

pub fn solve_with(raw: &RawInstance, opts: &SolveOptions) -> Result<SolveResult> {
    let started = Instant::now();
    let pre = preprocess(raw)?;
    let preprocess_ns = elapsed_ns(started);
    let dense_ok = opts.checks == CheckLevel::Full && raw.n() <= opts.dense_limit;

    match pre {
        Preprocessed::Trivial(case) => {
            let positioned = solve_trivial(&case);
            let inst = &case.instance;
            ensure_invariant!(positioned.is_complete(inst.m1(), inst.m2()), "trivial allocation incomplete");
            let mut verification = Verification { proper_witness: is_proper(inst, &positioned), ..Default::default() };
            if dense_ok {
                ensure_invariant!(is_efx_dense(inst, &positioned), "trivial allocation not EFX");
                verification.efx_checked = true;
                verification.efx_dense_checked = true;
            }
            let certificate = match case.kind {
                TrivialKind::OneType => Certificate::TrivialOneType,
                TrivialKind::TooFewItems => Certificate::TrivialObs1,
            };
            let allocation = inst.map_back(&positioned)?;
            let elapsed = elapsed_ns(started);
            Ok(SolveResult {
                allocation,
                certificate,
                verification,
                stats: SolveStats { preprocess_ns, elapsed_ns: elapsed, ..Default::default() },
                prepared: None,
            })
        }
        Preprocessed::Prepared(inst) => {
            let search_started = Instant::now();
            let outcome = search(&inst)?;
            let search_ns = elapsed_ns(search_started);
            let bound = SolveStats::split_build_bound(inst.n(), inst.m2());
            ensure_invariant!(
                outcome.split_builds <= bound,
                "{} split constructions exceed the bound {bound}",
                outcome.split_builds
            );

            let positioned = outcome.allocation.to_dense();
            ensure_invariant!(positioned.is_complete(inst.m1(), inst.m2()), "allocation incomplete");
            let t = outcome.certificate.index().map(|i| i.t).expect("non-trivial certificate");
            ensure_invariant!(is_proper_at(&inst, &positioned, t), "allocation not proper at t = {t}");
            let mut verification =
                Verification { efx_checked: true, proper_witness: is_proper(&inst, &positioned), ..Default::default() };
            if dense_ok {
                ensure_invariant!(is_efx_dense(&inst, &positioned), "dense scan finds EFX envy");
                verification.efx_dense_checked = true;
            }
            let allocation = inst.map_back(&positioned)?;
            Ok(SolveResult {
                allocation,
                certificate: outcome.certificate,
                verification,
                stats: SolveStats {
                    split_builds: outcome.split_builds,
                    classifier_calls: outcome.classifier_calls,
                    preprocess_ns,
                    search_ns,
                    elapsed_ns: elapsed_ns(started),
                },
                prepared: Some(PreparedSummary {
                    n1: inst.n1(),
                    n2: inst.n2(),
                    swap_applied: inst.swap_applied(),
                    m1: inst.m1(),
                    m2: inst.m2(),
                }),
            })
        }
    }
}

fn elapsed_ns(since: Instant) -> u64 {
    u64::try_from(since.elapsed().as_nanos()).unwrap_or(u64::MAX)
}

/// Linear scan of `𝒯` with every verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub entries: Vec<(SplitIndex, EnvyVerdict)>,
    /// Positions `i` in `entries` with `entries[i]` LE and `entries[i+1]` RE.
    pub flips: Vec<usize>,
    /// Positions `i` where an LE entry comes after some RE entry.
    pub order_violations: Vec<usize>,
}

impl ScanReport {
    pub fn is_monotone(&self) -> bool {
        self.order_violations.is_empty()
    }

    pub fn has_efx(&self) -> bool {
        self.entries.iter().any(|e| e.1.is_efx())
    }

    /// Whether `idx` is an EFX entry or the left side of a flip.
    pub fn accepts(&self, cert: &Certificate) -> bool {
        match *cert {
            Certificate::Split { t, k } => {
                self.entries.iter().any(|e| e.0 == SplitIndex::new(t, k) && e.1.is_efx())
            }
            Certificate::Realloc { t, k } => self.flips.iter().any(|&i| self.entries[i].0 == SplitIndex::new(t, k)),
            _ => false,
        }
    }
}

/// Classifies every element of `𝒯` in `≺` order. Refuses when `|𝒯|`
/// exceeds `cap`.
pub fn scan_t(inst: &PreparedInstance, cap: u64) -> Result<ScanReport> {
    let size = t_set_len(inst);
    if size > u128::from(cap) {
        return Err(Error::BudgetExceeded { needed: size.to_string(), budget: cap });
    }
    let entries = t_set(inst)
        .map(|idx| classify_split(inst, idx).map(|(_, v)| (idx, v)))
        .collect::<Result<Vec<_>>>()?;
    let flips = (0..entries.len().saturating_sub(1))
        .filter(|&i| entries[i].1.is_left() && entries[i + 1].1.is_right())
        .collect();
    let first_right = entries.iter().position(|e| e.1.is_right());
    let order_violations = match first_right {
        Some(r) => (r + 1..entries.len()).filter(|&i| entries[i].1.is_left()).collect(),
        None => Vec::new(),
    };
    Ok(ScanReport { entries, flips, order_violations })
}
