//! Scenario files: what to run and what to check.

use std::path::Path;

use num_complex::Complex64;
use qshare_core::protocol::{Behavior, ParticipantSpec, ProtocolConfig, Scheme, SecretMode, Stage};
use qshare_core::{EvalPoints, PrimeField, SchemeParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub k: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    /// Secret dimension used to pick `q` when it is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<u64>>,
    pub scheme: Scheme,
    pub secret_mode: SecretMode,
    #[serde(default)]
    pub seed: u64,
    pub participants: Vec<ParticipantEntry>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digit: Option<u64>,
    /// `[re, im]` pairs, one per basis state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default = "honest")]
    pub behavior: Behavior,
}

fn honest() -> Behavior {
    Behavior::Honest
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default)]
    pub oracle_stages: Vec<Stage>,
    #[serde(default)]
    pub secrecy_subset_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default)]
    pub exit: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret: Option<u64>,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub file: ScenarioFile,
    pub config: ProtocolConfig,
    pub specs: Vec<ParticipantSpec>,
    pub subset: Vec<usize>,
}

fn field_err(field: impl Into<String>, message: impl std::fmt::Display) -> CliError {
    CliError::Field { field: field.into(), message: message.to_string() }
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    fn params(&self) -> Result<SchemeParams, CliError> {
        let (k, n) = (self.k, self.n);
        if k == 0 || k > n {
            return Err(field_err("k", format!("k = {k} must satisfy 1 <= k <= n = {n}")));
        }
        if n >= 2 * k {
            return Err(field_err("n", format!("n = {n} must be below 2k = {} (no-cloning bound)", 2 * k)));
        }
        let field = match (self.q, self.m) {
            (Some(q), _) => PrimeField::new(q).map_err(|e| field_err("q", e))?,
            (None, m) => SchemeParams::with_secret_dimension(k, n, m.unwrap_or(2)).map_err(|e| field_err("m", e))?.field(),
        };
        match &self.points {
            Some(points) => {
                let points = EvalPoints::new(field, points).map_err(|e| field_err("points", e))?;
                SchemeParams::new(k, n, field, points).map_err(|e| field_err("points", e))
            }
            None => SchemeParams::canonical(k, n, field).map_err(|e| field_err("q", e)),
        }
    }

    /// Checks every field and fills in the defaults.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let params = self.params()?;
        let q = params.field().modulus();
        if self.participants.len() != self.n {
            return Err(field_err("participants", format!("expected {} entries, got {}", self.n, self.participants.len())));
        }
        let mut specs = Vec::with_capacity(self.n);
        for (i, p) in self.participants.iter().enumerate() {
            let spec = match (p.digit, &p.amplitudes) {
                (Some(d), None) if d < q => ParticipantSpec::basis(i, q, d),
                (Some(d), None) => return Err(field_err(format!("participants[{i}].digit"), format!("{d} is not below q = {q}"))),
                (None, Some(amps)) => {
                    if amps.len() as u64 != q {
                        return Err(field_err(format!("participants[{i}].amplitudes"), format!("expected {q} amplitudes, got {}", amps.len())));
                    }
                    let amps: Vec<Complex64> = amps.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(field_err(format!("participants[{i}].amplitudes"), format!("squared norm is {norm}, expected 1")));
                    }
                    ParticipantSpec::superposition(i, amps)
                }
                _ => return Err(field_err(format!("participants[{i}]"), "give exactly one of `digit` and `amplitudes`")),
            };
            if self.secret_mode == SecretMode::Basis && spec.basis_digit().is_none() {
                return Err(field_err(format!("participants[{i}].amplitudes"), "basis mode needs basis-state inputs"));
            }
            specs.push(spec.with_behavior(p.behavior));
        }
        let real: Vec<usize> = specs.iter().filter(|s| s.behavior != Behavior::QuitterSilent).map(|s| s.id).collect();
        let subset = match &self.subset {
            Some(s) => {
                if s.len() != self.k {
                    return Err(field_err("subset", format!("expected {} members, got {}", self.k, s.len())));
                }
                for (i, m) in s.iter().enumerate() {
                    if *m >= self.n || s[..i].contains(m) {
                        return Err(field_err("subset", format!("member {m} is out of range or repeated")));
                    }
                }
                s.clone()
            }
            // An abort will be reported before the subset matters.
            None => real.iter().copied().take(self.k).collect(),
        };
        if !self.checks.oracle_stages.is_empty() {
            if self.scheme != Scheme::Aggregated {
                return Err(field_err("checks.oracle_stages", "stage oracles describe the scheme2 variant"));
            }
            if let Some(i) = specs.iter().position(|s| s.basis_digit().is_none()) {
                return Err(field_err("checks.oracle_stages", format!("participant {i} is not a basis state")));
            }
        }
        if let Some(&size) = self.checks.secrecy_subset_sizes.iter().find(|&&s| s >= self.k) {
            return Err(field_err("checks.secrecy_subset_sizes", format!("size {size} is not below k = {}", self.k)));
        }
        let mut file = self.clone();
        file.q = Some(q);
        file.points = Some(params.points().values().to_vec());
        file.subset = Some(subset.clone());
        let config = ProtocolConfig::new(params, self.scheme, self.secret_mode, self.seed);
        Ok(Resolved { file, config, specs, subset })
    }
}
