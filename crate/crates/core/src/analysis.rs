//! Brute-force oracles for the closed-form global states of the protocol,
//! and secrecy scans over reduced density matrices.
//!
//! The oracles enumerate every choice of the hidden polynomial coefficients
//! and write down the digit tuple each stage's closed form dictates. They
//! use their own modular arithmetic and never call the simulator's
//! operations, so agreement with a simulated run is evidence rather than a
//! restatement.
//!
//! Register layout of an oracle state, in presentation order:
//! `R_h` for every real player `h` (ascending), then `C_{i,0..w-1}` for every
//! real dealer `i` (ascending), where `w = 2k - 1` is the dealing width. At
//! [`Stage::Reordered`] the front participant's `R` and `C_{i,front}`
//! registers move to the front, the rest keep their order.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use libm::{pow, sqrt};
use num_complex::Complex64;
use thiserror::Error;

use crate::protocol::{
    run_generation_observed, run_reconstruction_observed, ParticipantSpec, ProtocolConfig, ProtocolError, Scheme, SecretMode, Stage,
};
use crate::qstate::{DensityMatrix, RegisterId, RegisterLayout, SparseState, StateError};
use crate::threshold::{self, RecoveryStep, SchemeParams, ThresholdError};

/// Largest number of terms an oracle or a scan will enumerate.
pub const ORACLE_TERM_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("oracle would enumerate {terms} terms (limit {limit})")]
    TooLarge { terms: u128, limit: u128 },
    #[error("expected {expected} secret digits, got {actual}")]
    SecretCount { expected: usize, actual: usize },
    #[error("secret digit {digit} out of range for q = {q}")]
    DigitOutOfRange { digit: u64, q: u64 },
    #[error("subset must list {expected} distinct real players")]
    BadSubset { expected: usize },
    #[error("subset size {size} must be below k = {k}")]
    SubsetTooLarge { size: usize, k: usize },
}

/// A closed-form global state of the aggregated protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleExpr {
    pub stage: Stage,
    pub params: SchemeParams,
    /// Basis digit of every participant, quitters included (ignored).
    pub secrets: Vec<u64>,
    pub real_players: Vec<usize>,
    /// Reconstructing coalition; `subset[0]` receives the secret.
    pub subset: Vec<usize>,
}

impl OracleExpr {
    /// All participants real, coalition `0..k`.
    pub fn new(stage: Stage, params: SchemeParams, secrets: &[u64]) -> Self {
        let n = params.n();
        let k = params.k();
        Self { stage, params, secrets: secrets.to_vec(), real_players: (0..n).collect(), subset: (0..k).collect() }
    }

    pub fn with_real_players(mut self, real: &[usize]) -> Self {
        self.real_players = real.to_vec();
        self
    }

    pub fn with_subset(mut self, subset: &[usize]) -> Self {
        self.subset = subset.to_vec();
        self
    }

    /// Number of terms the enumeration visits.
    pub fn support_size(&self) -> u128 {
        let q = self.params.field().modulus() as u128;
        let free = self.real_players.len() * (self.params.k() - 1);
        q.checked_pow(free as u32).unwrap_or(u128::MAX)
    }
}

/// Point evaluation by summing powers, kept separate from Horner.
fn eval_sum(q: u64, coeffs: &[u64], x: u64) -> u64 {
    let q = q as u128;
    let mut acc = 0u128;
    let mut power = 1u128;
    for &c in coeffs {
        acc = (acc + c as u128 * power) % q;
        power = power * x as u128 % q;
    }
    acc as u64
}

/// How far along the three recovery steps a row of registers is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowLevel {
    Shares,
    Coefficients,
    Shifted,
    Disentangled,
}

/// Digits of a row of `w` slots holding the sharing with coefficients
/// `coeffs` and evaluations `evals`, after `level`.
fn row_digits(level: RowLevel, coeffs: &[u64], evals: &[u64], subset: &[usize], complement: &[usize]) -> Vec<u64> {
    let k = coeffs.len();
    let mut row = evals.to_vec();
    match level {
        RowLevel::Shares => {}
        RowLevel::Coefficients => {
            for (t, &slot) in subset.iter().enumerate() {
                row[slot] = coeffs[t];
            }
        }
        RowLevel::Shifted => {
            row[subset[0]] = coeffs[k - 1];
            for t in 1..k {
                row[subset[t]] = coeffs[t - 1];
            }
        }
        RowLevel::Disentangled => {
            row[subset[0]] = coeffs[k - 1];
            for t in 1..k {
                row[subset[t]] = evals[complement[t - 1]];
            }
        }
    }
    row
}

fn complement_slots(width: usize, subset: &[usize]) -> Vec<usize> {
    (0..width).filter(|s| !subset.contains(s)).collect()
}

/// Visits every assignment of the `free` low coefficients per dealer.
fn for_each_coefficients(q: u64, dealers: usize, free: usize, mut visit: impl FnMut(&[Vec<u64>])) {
    let mut lows = vec![vec![0u64; free]; dealers];
    loop {
        visit(&lows);
        let mut carried = true;
        'outer: for row in lows.iter_mut() {
            for d in row.iter_mut() {
                *d += 1;
                if *d < q {
                    carried = false;
                    break 'outer;
                }
                *d = 0;
            }
        }
        if carried {
            return;
        }
    }
}

fn check_scale(terms: u128) -> Result<(), AnalysisError> {
    if terms > ORACLE_TERM_LIMIT {
        return Err(AnalysisError::TooLarge { terms, limit: ORACLE_TERM_LIMIT });
    }
    Ok(())
}

/// The literal enumeration of the closed form at `expr.stage`.
pub fn oracle_state(expr: &OracleExpr) -> Result<SparseState, AnalysisError> {
    let params = &expr.params;
    let (k, n) = (params.k(), params.n());
    let field = params.field();
    let q = field.modulus();
    if expr.secrets.len() != n {
        return Err(AnalysisError::SecretCount { expected: n, actual: expr.secrets.len() });
    }
    if let Some(&digit) = expr.secrets.iter().find(|&&d| d >= q) {
        return Err(AnalysisError::DigitOutOfRange { digit, q });
    }
    let subset_ok = expr.subset.len() == k
        && expr.subset.iter().enumerate().all(|(i, s)| expr.real_players.contains(s) && !expr.subset[..i].contains(s));
    if !subset_ok {
        return Err(AnalysisError::BadSubset { expected: k });
    }
    check_scale(expr.support_size())?;

    let width = params.dealing_width();
    let points = params.dealing_points().values().to_vec();
    let real = &expr.real_players;
    let complement = complement_slots(width, &expr.subset);
    let front = expr.subset[0];

    let (local_level, row_level) = match expr.stage {
        Stage::Encoded | Stage::Distributed => (RowLevel::Shares, RowLevel::Shares),
        Stage::Coefficients => (RowLevel::Coefficients, RowLevel::Shares),
        Stage::Shifted => (RowLevel::Shifted, RowLevel::Shares),
        Stage::LocalDisentangled => (RowLevel::Disentangled, RowLevel::Shares),
        Stage::RowsDisentangled | Stage::Reordered => (RowLevel::Disentangled, RowLevel::Disentangled),
    };

    let mut ids: Vec<RegisterId> = real.iter().map(|&h| RegisterId::Local(h)).collect();
    for &i in real {
        ids.extend((0..width).map(|slot| threshold::share_register(i, slot)));
    }
    let order: Vec<usize> = if expr.stage == Stage::Reordered {
        let mut lead = vec![RegisterId::Local(front)];
        lead.extend(real.iter().map(|&i| threshold::share_register(i, front)));
        let mut order: Vec<usize> = lead.iter().map(|id| ids.iter().position(|x| x == id).unwrap()).collect();
        let rest: Vec<usize> = (0..ids.len()).filter(|p| !order.contains(p)).collect();
        order.extend(rest);
        order
    } else {
        (0..ids.len()).collect()
    };
    let layout = RegisterLayout::new(field, order.iter().map(|&p| ids[p]))?;

    let amp = Complex64::new(1.0 / sqrt(expr.support_size() as f64), 0.0);
    let mut terms: Vec<(Vec<u64>, Complex64)> = Vec::with_capacity(expr.support_size() as usize);
    for_each_coefficients(q, real.len(), k - 1, |lows| {
        let mut sum_coeffs = vec![0u64; k];
        let mut sum_evals = vec![0u64; width];
        let mut rows = Vec::with_capacity(real.len());
        for (r, &i) in real.iter().enumerate() {
            let mut coeffs = lows[r].clone();
            coeffs.push(expr.secrets[i]);
            let evals: Vec<u64> = points.iter().map(|&x| eval_sum(q, &coeffs, x)).collect();
            for t in 0..k {
                sum_coeffs[t] = (sum_coeffs[t] + coeffs[t]) % q;
            }
            for s in 0..width {
                sum_evals[s] = (sum_evals[s] + evals[s]) % q;
            }
            rows.push(row_digits(row_level, &coeffs, &evals, &expr.subset, &complement));
        }
        let locals = row_digits(local_level, &sum_coeffs, &sum_evals, &expr.subset, &complement);
        let mut digits: Vec<u64> = real
            .iter()
            .map(|&h| if expr.stage == Stage::Encoded { 0 } else { locals[h] })
            .collect();
        for row in rows {
            digits.extend(row);
        }
        terms.push((order.iter().map(|&p| digits[p]).collect(), amp));
    });
    Ok(SparseState::from_terms(layout, terms)?)
}

/// The single-dealer sharing of basis `secret` over the `C_{0,*}` registers,
/// after `step` of a recovery by `subset`.
pub fn threshold_oracle(
    params: &SchemeParams,
    secret: u64,
    subset: &[usize],
    step: Option<RecoveryStep>,
) -> Result<SparseState, AnalysisError> {
    let (k, q) = (params.k(), params.field().modulus());
    if secret >= q {
        return Err(AnalysisError::DigitOutOfRange { digit: secret, q });
    }
    let width = params.dealing_width();
    if subset.len() != k || subset.iter().enumerate().any(|(i, s)| *s >= width || subset[..i].contains(s)) {
        return Err(AnalysisError::BadSubset { expected: k });
    }
    let terms_count = (q as u128).pow((k - 1) as u32);
    check_scale(terms_count)?;
    let points = params.dealing_points().values().to_vec();
    let complement = complement_slots(width, subset);
    let level = match step {
        None => RowLevel::Shares,
        Some(RecoveryStep::CoefficientsRecovered) => RowLevel::Coefficients,
        Some(RecoveryStep::SecretShifted) => RowLevel::Shifted,
        Some(RecoveryStep::Disentangled) => RowLevel::Disentangled,
    };
    let layout = RegisterLayout::new(params.field(), (0..width).map(|s| threshold::share_register(0, s)))?;
    let amp = Complex64::new(1.0 / sqrt(terms_count as f64), 0.0);
    let mut terms = Vec::new();
    for_each_coefficients(q, 1, k - 1, |lows| {
        let mut coeffs = lows[0].clone();
        coeffs.push(secret);
        let evals: Vec<u64> = points.iter().map(|&x| eval_sum(q, &coeffs, x)).collect();
        terms.push((row_digits(level, &coeffs, &evals, subset, &complement), amp));
    });
    Ok(SparseState::from_terms(layout, terms)?)
}

/// Distance from a simulated state to an oracle state, up to global phase,
/// with registers matched by id. The first `lead` registers must also sit
/// in the same positions, otherwise the distance is infinite.
pub fn oracle_distance(simulated: &SparseState, oracle: &SparseState, lead: usize) -> Result<f64, AnalysisError> {
    let (a, b) = (simulated.layout().registers(), oracle.layout().registers());
    if a.len() < lead || b.len() < lead || a[..lead] != b[..lead] {
        return Ok(f64::INFINITY);
    }
    Ok(simulated.distance_up_to_phase(oracle)?)
}

/// Result of comparing one simulated stage against its oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageCheck {
    pub stage: Stage,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Runs the aggregated protocol on basis digits and compares every
/// requested stage with its oracle at tolerance `tol`.
pub fn check_stages(
    config: &ProtocolConfig,
    specs: &[ParticipantSpec],
    subset: &[usize],
    stages: &[Stage],
    tol: f64,
) -> Result<Vec<StageCheck>, AnalysisError> {
    let mut config = config.clone();
    config.scheme = Scheme::Aggregated;
    config.secret_mode = SecretMode::Basis;
    let q = config.params.field().modulus();
    let secrets: Vec<u64> = specs.iter().map(|s| s.basis_digit().unwrap_or(0)).collect();
    let mut captured: BTreeMap<Stage, SparseState> = BTreeMap::new();
    let mut keep = |stage: Stage, st: &SparseState| {
        if stages.contains(&stage) {
            captured.insert(stage, st.clone());
        }
    };
    let (deal, _) = run_generation_observed(&config, specs, &mut keep)?;
    run_reconstruction_observed(&deal, &config, subset, &mut keep)?;
    // A malicious dealer's oracle is built from the digit it actually dealt.
    let mut dealt = secrets.clone();
    for (r, &i) in deal.real_players.iter().enumerate() {
        dealt[i] = deal.dealt_digits[r].unwrap_or(0) % q;
    }
    let mut out = Vec::with_capacity(stages.len());
    for &stage in stages {
        let lead = if stage == Stage::Reordered { deal.real_players.len() + 1 } else { 0 };
        let expr = OracleExpr::new(stage, config.params.clone(), &dealt)
            .with_real_players(&deal.real_players)
            .with_subset(subset);
        let oracle = oracle_state(&expr)?;
        let max_deviation = match captured.get(&stage) {
            Some(sim) => oracle_distance(sim, &oracle, lead)?,
            None => f64::INFINITY,
        };
        out.push(StageCheck { stage, max_deviation, passed: max_deviation <= tol });
    }
    Ok(out)
}

/// Leakage of a share coalition of a fixed size.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SecrecyReport {
    pub k: usize,
    pub n: usize,
    pub q: u64,
    pub subset_size: usize,
    pub subsets_checked: usize,
    pub secrets_checked: usize,
    /// Largest entry-wise gap between reduced states of two different secrets.
    pub max_deviation: f64,
    /// Largest entry-wise gap between a single-share state and `I/q`; only
    /// present for single-share scans.
    pub max_identity_distance: Option<f64>,
}

impl SecrecyReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_deviation <= tol && self.max_identity_distance.is_none_or(|d| d <= tol)
    }
}

/// Every `size`-element subset of `items`, in lexicographic order.
pub fn combinations(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn go(items: &[usize], size: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..items.len() {
            current.push(items[i]);
            go(items, size, i + 1, current, out);
            current.pop();
        }
    }
    go(items, size, 0, &mut current, &mut out);
    out
}

fn max_pairwise(states: &[DensityMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, ra) in states.iter().enumerate() {
        for rb in &states[a + 1..] {
            worst = worst.max(ra.max_abs_diff(rb));
        }
    }
    worst
}

/// Splits every basis secret with the threshold scheme and compares the
/// reduced states of every `subset_size` coalition of the `n` active shares.
pub fn secrecy_scan(params: &SchemeParams, subset_size: usize) -> Result<SecrecyReport, AnalysisError> {
    let (k, n) = (params.k(), params.n());
    let field = params.field();
    let q = field.modulus();
    if subset_size >= k {
        return Err(AnalysisError::SubsetTooLarge { size: subset_size, k });
    }
    check_scale((q as u128).pow((k - 1) as u32))?;
    let dealer = 0;
    let secret = RegisterId::Private(dealer);
    let mut split_states = Vec::with_capacity(q as usize);
    for s in 0..q {
        let mut amps = vec![Complex64::new(0.0, 0.0); q as usize];
        amps[s as usize] = Complex64::new(1.0, 0.0);
        let st = SparseState::new_zero(RegisterLayout::new(field, [secret])?).prepare(secret, &amps)?;
        split_states.push(threshold::split(&st, secret, dealer, params)?);
    }
    let active = split_states[0].1.active_slots();
    debug_assert_eq!(active.len(), n);
    let subsets = combinations(&active, subset_size);
    let mut max_deviation: f64 = 0.0;
    let mut identity: Option<f64> = None;
    let mixed = DensityMatrix::maximally_mixed(q as usize);
    for subset in &subsets {
        let mut reduced = Vec::with_capacity(split_states.len());
        for (state, bundle) in &split_states {
            let regs = subset.iter().map(|&s| bundle.register(s)).collect::<Result<Vec<_>, _>>()?;
            let rho = state.reduced_density(&regs)?;
            if subset_size == 1 {
                let d = rho.max_abs_diff(&mixed);
                identity = Some(identity.map_or(d, |m: f64| m.max(d)));
            }
            reduced.push(rho);
        }
        max_deviation = max_deviation.max(max_pairwise(&reduced));
    }
    Ok(SecrecyReport {
        k,
        n,
        q,
        subset_size,
        subsets_checked: subsets.len(),
        secrets_checked: q as usize,
        max_deviation,
        max_identity_distance: identity,
    })
}

/// Protocol-level secrecy: for every coalition of `k - 1` players, the
/// reduced state of everything they hold after generation does not depend
/// on the other players' basis digits. Returns the largest deviation seen.
pub fn participant_view_deviation(params: &SchemeParams) -> Result<f64, AnalysisError> {
    let (k, n) = (params.k(), params.n());
    let q = params.field().modulus();
    check_scale((q as u128).pow(n as u32) * (q as u128).pow((n * (k - 1)) as u32))?;
    let config = ProtocolConfig::new(params.clone(), Scheme::Aggregated, SecretMode::Basis, 0);
    let all: Vec<usize> = (0..n).collect();
    let mut deals = Vec::new();
    let total = (q as u128).pow(n as u32) as u64;
    for code in 0..total {
        let mut digits = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            digits.push(c % q);
            c /= q;
        }
        let specs: Vec<ParticipantSpec> = digits.iter().enumerate().map(|(i, &d)| ParticipantSpec::basis(i, q, d)).collect();
        let (deal, _) = run_generation_observed(&config, &specs, &mut |_, _| {})?;
        deals.push((digits, deal));
    }
    let mut worst: f64 = 0.0;
    for coalition in combinations(&all, k - 1) {
        let regs: Vec<RegisterId> = coalition.iter().flat_map(|&p| deals[0].1.held_registers(p)).collect();
        let mut groups: BTreeMap<Vec<u64>, Vec<DensityMatrix>> = BTreeMap::new();
        for (digits, deal) in &deals {
            let own: Vec<u64> = coalition.iter().map(|&p| digits[p]).collect();
            groups.entry(own).or_default().push(deal.state.reduced_density(&regs)?);
        }
        for states in groups.values() {
            worst = worst.max(max_pairwise(states));
        }
    }
    Ok(worst)
}

/// Three-sigma binomial half-width for an outcome of probability `p` over `trials`.
pub fn binomial_bound(p: f64, trials: usize) -> f64 {
    3.0 * sqrt(p * (1.0 - p) / trials as f64)
}

/// `q^{-e/2}`, the uniform amplitude over `q^e` terms.
pub fn uniform_amplitude(q: u64, e: u32) -> f64 {
    pow(q as f64, -(e as f64) / 2.0)
}
