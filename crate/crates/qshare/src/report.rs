//! Run reports and their fixed-precision number formatting.

use qshare_core::analysis::{SecrecyReport, StageCheck};
use qshare_core::protocol::{FinalSecret, SecretMode, Stage, Transcript};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::scenario::ScenarioFile;

/// Writes a float as a JSON number with exactly 12 decimals; non-finite
/// values become `null`.
pub fn fixed12<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return s.serialize_none();
    }
    let mut text = format!("{x:.12}");
    if text.bytes().all(|b| matches!(b, b'-' | b'0' | b'.')) {
        text = "0.000000000000".into();
    }
    let raw = RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

fn fixed12_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => fixed12(x, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Aborted,
    RerunRequired,
    CheckFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Aborted => 2,
            Outcome::RerunRequired => 3,
            Outcome::CheckFailed => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Term {
    pub digits: Vec<u64>,
    #[serde(serialize_with = "fixed12")]
    pub re: f64,
    #[serde(serialize_with = "fixed12")]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalDescriptor {
    pub mode: SecretMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digit: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub share_outcomes: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registers: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<Term>>,
}

impl FinalDescriptor {
    pub fn new(mode: SecretMode, secret: &FinalSecret) -> Self {
        let mut d = FinalDescriptor { mode, digit: secret.digit(), share_outcomes: None, registers: None, terms: None };
        match secret {
            FinalSecret::Measured { share_outcomes, .. } => d.share_outcomes = Some(share_outcomes.clone()),
            FinalSecret::RerunRequired { secret, .. } => d.digit = Some(*secret),
            FinalSecret::Superposition { state } => {
                d.registers = Some(state.layout().registers().iter().map(|r| r.to_string()).collect());
                d.terms = Some(
                    state.terms().map(|(digits, a)| Term { digits: digits.to_vec(), re: a.re, im: a.im }).collect(),
                );
            }
            FinalSecret::Basis { .. } => {}
        }
        d
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub stage: Stage,
    #[serde(serialize_with = "fixed12")]
    pub max_deviation: f64,
    pub passed: bool,
}

impl From<StageCheck> for OracleResult {
    fn from(c: StageCheck) -> Self {
        Self { stage: c.stage, max_deviation: c.max_deviation, passed: c.passed }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SecrecyResult {
    pub k: usize,
    pub n: usize,
    pub q: u64,
    pub subset_size: usize,
    pub subsets_checked: usize,
    pub secrets_checked: usize,
    #[serde(serialize_with = "fixed12")]
    pub max_deviation: f64,
    #[serde(serialize_with = "fixed12_opt")]
    pub max_identity_distance: Option<f64>,
    pub passed: bool,
}

impl SecrecyResult {
    pub fn new(r: &SecrecyReport, tol: f64) -> Self {
        Self {
            k: r.k,
            n: r.n,
            q: r.q,
            subset_size: r.subset_size,
            subsets_checked: r.subsets_checked,
            secrets_checked: r.secrets_checked,
            max_deviation: r.max_deviation,
            max_identity_distance: r.max_identity_distance,
            passed: r.passes(tol),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub global_terms: usize,
    pub registers: usize,
    /// Excluded from golden comparisons.
    #[serde(serialize_with = "fixed12")]
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: ScenarioFile,
    pub outcome: Outcome,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_secret: Option<FinalDescriptor>,
    pub transcript_hash: String,
    pub transcript: Transcript,
    pub oracle_checks: Vec<OracleResult>,
    pub secrecy: Vec<SecrecyResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectation_met: Option<bool>,
    pub stats: Stats,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// SHA-256 of the compact JSON encoding of a transcript.
pub fn transcript_hash(t: &Transcript) -> String {
    let bytes = serde_json::to_vec(t).expect("transcript serializes");
    hex::encode(Sha256::digest(bytes))
}
