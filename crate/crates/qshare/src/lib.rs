//! Scenario runner for dealer-free quantum threshold secret sharing.
//!
//! Reads scenario files, runs the protocol from `qshare-core`, runs the
//! requested oracle and secrecy checks and writes a JSON report. The binary
//! in `main.rs` is a thin argument parser over [`run_scenario`], [`sweep`]
//! and [`secrecy`].

pub mod report;
pub mod scenario;

use std::path::{Path, PathBuf};
use std::time::Instant;

use qshare_core::analysis::{check_stages, secrecy_scan, AnalysisError};
use qshare_core::protocol::{run_generation, run_reconstruction, FinalSecret, ProtocolError};
use qshare_core::{PrimeField, SchemeParams, SparseState, ThresholdError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use report::{transcript_hash, FinalDescriptor, OracleResult, Outcome, RunReport, SecrecyResult, Stats};
use scenario::ScenarioFile;

/// Tolerance of oracle and secrecy comparisons.
pub const TOLERANCE: f64 = 1e-9;

pub const EXIT_INPUT_ERROR: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error("pattern `{0}` matches no files")]
    EmptyGlob(String),
    #[error("bad pattern: {0}")]
    Pattern(String),
}

/// A finished run: the report plus the final global state, when there is one.
#[derive(Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub state: Option<SparseState>,
}

/// Runs one scenario file. `seed` overrides the file's seed.
pub fn run_scenario(path: &Path, seed: Option<u64>) -> Result<RunOutput, CliError> {
    let mut file = ScenarioFile::load(path)?;
    if let Some(seed) = seed {
        file.seed = seed;
    }
    run_file(&file)
}

pub fn run_file(file: &ScenarioFile) -> Result<RunOutput, CliError> {
    let started = Instant::now();
    let resolved = file.resolve()?;
    let config = &resolved.config;

    let (final_secret, transcript, state) = match run_generation(config, &resolved.specs) {
        Ok((deal, mut transcript)) => {
            let rec = run_reconstruction(&deal, config, &resolved.subset)?;
            transcript.extend(rec.transcript);
            (Some(rec.final_secret), transcript, Some(rec.state))
        }
        Err(ProtocolError::Aborted { transcript, .. }) => (None, *transcript, None),
        Err(e) => return Err(e.into()),
    };

    let mut outcome = match &final_secret {
        None => Outcome::Aborted,
        Some(FinalSecret::RerunRequired { .. }) => Outcome::RerunRequired,
        Some(_) => Outcome::Success,
    };

    let mut oracle_checks = Vec::new();
    let mut secrecy = Vec::new();
    if outcome == Outcome::Success {
        if !file.checks.oracle_stages.is_empty() {
            oracle_checks = check_stages(config, &resolved.specs, &resolved.subset, &file.checks.oracle_stages, TOLERANCE)?
                .into_iter()
                .map(OracleResult::from)
                .collect();
        }
        for &size in &file.checks.secrecy_subset_sizes {
            secrecy.push(SecrecyResult::new(&secrecy_scan(&config.params, size)?, TOLERANCE));
        }
        if oracle_checks.iter().any(|c| !c.passed) || secrecy.iter().any(|s| !s.passed) {
            outcome = Outcome::CheckFailed;
        }
    }

    let final_descriptor = final_secret.as_ref().map(|f| FinalDescriptor::new(config.secret_mode, f));
    let expectation_met = file.expect.as_ref().map(|e| {
        e.exit == outcome.exit_code() && e.secret.is_none_or(|s| final_descriptor.as_ref().and_then(|f| f.digit) == Some(s))
    });
    let stats = Stats {
        global_terms: state.as_ref().map_or(0, |s| s.len()),
        registers: state.as_ref().map_or(0, |s| s.layout().len()),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let report = RunReport {
        scenario: resolved.file,
        outcome,
        exit_code: outcome.exit_code(),
        final_secret: final_descriptor,
        transcript_hash: transcript_hash(&transcript),
        transcript,
        oracle_checks,
        secrecy,
        expectation_met,
        stats,
    };
    Ok(RunOutput { report, state })
}

/// One line of a sweep summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub path: String,
    pub exit_code: i32,
    pub expected_exit: i32,
    pub secret: Option<u64>,
    pub transcript_hash: Option<String>,
    pub passed: bool,
    pub message: Option<String>,
}

impl SweepRow {
    pub fn line(&self) -> String {
        let secret = self.secret.map_or("-".to_string(), |s| s.to_string());
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!("{status} {} exit={} expected={} secret={secret}", self.path, self.exit_code, self.expected_exit);
        if let Some(m) = &self.message {
            line.push_str(&format!(" ({m})"));
        }
        line
    }
}

fn sweep_one(path: &Path) -> SweepRow {
    let path_str = path.display().to_string();
    let expected_exit = ScenarioFile::load(path).ok().and_then(|f| f.expect).map_or(0, |e| e.exit);
    match run_scenario(path, None) {
        Ok(out) => {
            let r = &out.report;
            SweepRow {
                path: path_str,
                exit_code: r.exit_code,
                expected_exit,
                secret: r.final_secret.as_ref().and_then(|f| f.digit),
                transcript_hash: Some(r.transcript_hash.clone()),
                passed: r.expectation_met.unwrap_or(r.exit_code == 0),
                message: None,
            }
        }
        Err(e) => SweepRow {
            path: path_str,
            exit_code: EXIT_INPUT_ERROR,
            expected_exit,
            secret: None,
            transcript_hash: None,
            passed: expected_exit == EXIT_INPUT_ERROR,
            message: Some(e.to_string()),
        },
    }
}

/// Runs every scenario matching `pattern` on `jobs` threads. Rows come back
/// sorted by path, so the summary does not depend on `jobs`.
pub fn sweep(pattern: &str, jobs: usize) -> Result<Vec<SweepRow>, CliError> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| CliError::Pattern(e.to_string()))?
        .filter_map(Result::ok)
        .filter(|p| p.is_file())
        .collect();
    if paths.is_empty() {
        return Err(CliError::EmptyGlob(pattern.to_string()));
    }
    paths.sort();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    Ok(pool.install(|| paths.par_iter().map(|p| sweep_one(p)).collect()))
}

/// Parameters for the `secrecy` command: `q` defaults to the smallest usable prime.
pub fn secrecy(k: usize, n: usize, q: Option<u64>, subset_size: usize) -> Result<SecrecyResult, CliError> {
    let params = match q {
        Some(q) => {
            let field = PrimeField::new(q).map_err(|e| CliError::Field { field: "q".into(), message: e.to_string() })?;
            SchemeParams::canonical(k, n, field)?
        }
        None => SchemeParams::smallest(k, n)?,
    };
    Ok(SecrecyResult::new(&secrecy_scan(&params, subset_size)?, TOLERANCE))
}
