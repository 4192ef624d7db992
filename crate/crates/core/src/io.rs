//! JSON instance and result documents.
//!
//! Instance: `{"m1": 2, "m2": 2, "agents": [{"v1": 1, "v2": "10"}, ...]}`.
//! Values may be JSON integers or strings holding an integer, a fraction
//! `"a/b"` or a finite decimal. Floats are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{is_efx_dense, is_proper, Allocation};
use crate::error::{Error, ValidationError};
use crate::instance::{preprocess, Preprocessed, RawInstance};
use crate::oracle::{oracle_pareto, EnumBudget, ParetoVerdict};
use crate::solver::{Certificate, SolveResult};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid instance: {0}")]
    Validation(#[from] ValidationError),
}

/// Parses and validates one instance document.
pub fn parse_instance(text: &str) -> Result<RawInstance, IoError> {
    let raw: RawInstance = serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    raw.validate()?;
    Ok(raw)
}

/// Parses either one instance or a JSON array of instances.
pub fn parse_instances(text: &str) -> Result<Vec<RawInstance>, IoError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    let list = match value {
        serde_json::Value::Array(items) => items,
        single => vec![single],
    };
    list.into_iter()
        .map(|v| {
            let raw: RawInstance = serde_json::from_value(v).map_err(|e| IoError::Parse(e.to_string()))?;
            raw.validate()?;
            Ok(raw)
        })
        .collect()
}

pub fn instance_to_json(raw: &RawInstance) -> String {
    serde_json::to_string_pretty(raw).expect("instances always serialize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyLevel {
    /// Report what the solver itself established.
    None,
    /// Dense EFX scan plus a properness witness.
    Fast,
    /// `Fast` plus the exhaustive Pareto oracle.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    pub proper_witness: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleOutcome {
    Optimal,
    Dominated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub efx: bool,
    pub proper: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_po: Option<OracleOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub split_builds: u64,
    pub classifier_calls: u64,
    /// Omitted when the caller asks for byte-reproducible output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultFile {
    pub allocation: Allocation,
    pub certificate: CertificateRecord,
    pub verification: VerificationRecord,
    pub stats: StatsRecord,
}

impl ResultFile {
    /// Builds the document, running the requested verification against the
    /// raw instance.
    pub fn build(raw: &RawInstance, res: &SolveResult, level: VerifyLevel, budget: EnumBudget, timing: bool) -> Result<Self, Error> {
        let (t, k) = match res.certificate {
            Certificate::Split { t, k } | Certificate::Realloc { t, k } => (Some(t), Some(k)),
            _ => (None, None),
        };
        let mut verification = VerificationRecord {
            efx: res.verification.efx_checked || res.verification.efx_dense_checked,
            proper: res.verification.proper_witness.is_some(),
            oracle_po: None,
        };
        let mut proper_witness = res.verification.proper_witness;
        if level != VerifyLevel::None {
            let (efx, witness) = verify_fast(raw, &res.allocation)?;
            verification.efx = efx;
            verification.proper = witness.is_some();
            proper_witness = witness;
        }
        if level == VerifyLevel::Full {
            verification.oracle_po = Some(match oracle_pareto(raw, &res.allocation, budget)? {
                ParetoVerdict::Optimal => OracleOutcome::Optimal,
                ParetoVerdict::DominatedBy(_) => OracleOutcome::Dominated,
            });
        }
        Ok(ResultFile {
            allocation: res.allocation.clone(),
            certificate: CertificateRecord { kind: res.certificate.label().to_string(), t, k, proper_witness },
            verification,
            stats: StatsRecord {
                split_builds: res.stats.split_builds,
                classifier_calls: res.stats.classifier_calls,
                elapsed_ns: timing.then_some(res.stats.elapsed_ns),
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results always serialize")
    }
}

/// Dense EFX scan and smallest properness witness for an allocation given in
/// raw agent order.
pub fn verify_fast(raw: &RawInstance, alloc: &Allocation) -> Result<(bool, Option<usize>), Error> {
    let inst = match preprocess(raw)? {
        Preprocessed::Prepared(p) => p.normalized().clone(),
        Preprocessed::Trivial(c) => c.instance,
    };
    if !alloc.is_complete(raw.m1, raw.m2) {
        return Err(Error::ShapeMismatch("allocation does not hand out every good".into()));
    }
    let positioned = inst.to_positions(alloc)?;
    Ok((is_efx_dense(&inst, &positioned), is_proper(&inst, &positioned)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_with, CheckLevel, SolveOptions};

    const INTRO: &str = r#"{"m1": 2, "m2": 2, "agents": [{"v1": 1, "v2": 10}, {"v1": "1", "v2": "9"}]}"#;

    #[test]
    fn parse_and_round_trip() {
        let raw = parse_instance(INTRO).unwrap();
        assert_eq!(raw.n(), 2);
        let again = parse_instance(&instance_to_json(&raw)).unwrap();
        assert_eq!(raw, again);
        assert_eq!(instance_to_json(&again), instance_to_json(&raw));
    }

    #[test]
    fn parse_errors() {
        let bad = r#"{"m1": 1, "m2": 1, "agents": [{"v1": 1, "v2": "3/0"}]}"#;
        assert!(matches!(parse_instance(bad), Err(IoError::Parse(_))));
        let float = r#"{"m1": 1, "m2": 1, "agents": [{"v1": 1, "v2": 0.5}]}"#;
        assert!(matches!(parse_instance(float), Err(IoError::Parse(_))));
        let zero = r#"{"m1": 1, "m2": 1, "agents": [{"v1": 0, "v2": 1}]}"#;
        assert!(matches!(parse_instance(zero), Err(IoError::Validation(_))));
        let decimal = r#"{"m1": 1, "m2": 1, "agents": [{"v1": "0.25", "v2": 1}]}"#;
        assert_eq!(parse_instance(decimal).unwrap().agents[0].v1, "1/4".parse().unwrap());
    }

    #[test]
    fn batch_parsing() {
        assert_eq!(parse_instances(INTRO).unwrap().len(), 1);
        assert_eq!(parse_instances(&format!("[{INTRO}, {INTRO}]")).unwrap().len(), 2);
    }

    #[test]
    fn result_document() {
        let raw = parse_instance(INTRO).unwrap();
        let res = solve_with(&raw, &SolveOptions { checks: CheckLevel::Full, dense_limit: 100 }).unwrap();
        let doc = ResultFile::build(&raw, &res, VerifyLevel::Full, EnumBudget::default(), false).unwrap();
        assert_eq!(doc.certificate.kind, "realloc");
        assert!(doc.verification.efx && doc.verification.proper);
        assert_eq!(doc.verification.oracle_po, Some(OracleOutcome::Optimal));
        let text = doc.to_json();
        assert!(!text.contains("elapsed_ns"));
        let back: ResultFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["allocation"], serde_json::json!([{"x1": 1, "x2": 1}, {"x1": 1, "x2": 1}]));
    }

    #[test]
    fn fast_verification_catches_envy() {
        let raw = parse_instance(INTRO).unwrap();
        let hoard = Allocation::new(vec![crate::Bundle::new(2, 2), crate::Bundle::new(0, 0)]);
        let (efx, _) = verify_fast(&raw, &hoard).unwrap();
        assert!(!efx);
    }
}
