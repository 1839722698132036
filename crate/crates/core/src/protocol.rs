//! Dealer-free `(k, n)` sharing: every participant deals their own private
//! qudit with the threshold scheme and the agreed secret is the sum of all
//! private digits.
//!
//! Two variants:
//!
//! - [`Scheme::Separate`]: the reconstructing coalition recovers each
//!   private state on its own (`n` recoveries) and adds them into an
//!   accumulator.
//! - [`Scheme::Aggregated`]: each receiver adds every incoming share into
//!   its local register `R_i`, so the `R` registers carry a sharing of the
//!   sum and one recovery on them yields the secret. The coalition then runs
//!   the same recovery on every row of common registers to disentangle it.
//!
//! Time limits are logical rounds. A run is deterministic given the config,
//! the participant list and the seed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::qstate::{RegisterId, RegisterLayout, SparseState, StateError, NORM_TOLERANCE, PRUNE_THRESHOLD};
use crate::threshold::{self, RecoveryStep, SchemeParams, ShareBundle, ThresholdError};

pub const ROUND_PREPARE: u32 = 0;
pub const ROUND_DISTRIBUTE: u32 = 1;
pub const ROUND_REPORT: u32 = 2;
pub const ROUND_VERDICT: u32 = 3;
pub const ROUND_ANNOUNCE: u32 = 4;
pub const ROUND_RECONSTRUCT: u32 = 5;

/// Largest global-state support a run may reach.
pub const MAX_GLOBAL_TERMS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scheme {
    /// Recover every private state separately, then combine.
    #[cfg_attr(feature = "serde", serde(rename = "scheme1"))]
    Separate,
    /// Accumulate shares into local registers and recover the sum once.
    #[cfg_attr(feature = "serde", serde(rename = "scheme2"))]
    Aggregated,
}

/// How the final secret is read off the recovered registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SecretMode {
    /// All inputs are basis states; the secret is the digit `sum s_i`.
    Basis,
    /// The secret is the joint state of the sum register and the recovered private registers.
    Superposition,
    /// Measure those registers; the sum register outcome is the secret.
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Behavior {
    Honest,
    /// Distributes nothing, reports nothing, never announces.
    QuitterSilent,
    /// Deals shares of its private state shifted by `shift` (mod q).
    MaliciousWrongShares { shift: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantSpec {
    pub id: usize,
    pub private_state: Vec<Complex64>,
    pub behavior: Behavior,
}

impl ParticipantSpec {
    pub fn basis(id: usize, q: u64, digit: u64) -> Self {
        let private_state =
            (0..q).map(|d| Complex64::new(if d == digit % q { 1.0 } else { 0.0 }, 0.0)).collect();
        Self { id, private_state, behavior: Behavior::Honest }
    }

    pub fn superposition(id: usize, amplitudes: Vec<Complex64>) -> Self {
        Self { id, private_state: amplitudes, behavior: Behavior::Honest }
    }

    pub fn with_behavior(mut self, behavior: Behavior) -> Self {
        self.behavior = behavior;
        self
    }

    /// The digit of a basis-state input.
    pub fn basis_digit(&self) -> Option<u64> {
        let mut nonzero = self.private_state.iter().enumerate().filter(|(_, a)| a.norm() >= PRUNE_THRESHOLD);
        match (nonzero.next(), nonzero.next()) {
            (Some((d, _)), None) => Some(d as u64),
            _ => None,
        }
    }

    fn dealt_state(&self) -> Vec<Complex64> {
        match self.behavior {
            Behavior::MaliciousWrongShares { shift } => {
                let q = self.private_state.len();
                let mut out = vec![Complex64::new(0.0, 0.0); q];
                for (d, &a) in self.private_state.iter().enumerate() {
                    out[(d + (shift % q as u64) as usize) % q] = a;
                }
                out
            }
            _ => self.private_state.clone(),
        }
    }
}

/// Marks participant `id` as dealing shares of its digit shifted by `shift`.
pub fn inject_malicious(specs: &[ParticipantSpec], id: usize, shift: u64) -> Result<Vec<ParticipantSpec>, ProtocolError> {
    let mut out = specs.to_vec();
    let spec = out.iter_mut().find(|s| s.id == id).ok_or(ProtocolError::UnknownParticipant(id))?;
    spec.behavior = Behavior::MaliciousWrongShares { shift };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub params: SchemeParams,
    pub scheme: Scheme,
    pub secret_mode: SecretMode,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(params: SchemeParams, scheme: Scheme, secret_mode: SecretMode, seed: u64) -> Self {
        Self { params, scheme, secret_mode, seed }
    }

    /// Checks the participant list against the configuration.
    pub fn validate(&self, specs: &[ParticipantSpec]) -> Result<(), ProtocolError> {
        let n = self.params.n();
        let q = self.params.field().modulus() as usize;
        if specs.len() != n {
            return Err(ProtocolError::SpecCount { expected: n, actual: specs.len() });
        }
        for (position, spec) in specs.iter().enumerate() {
            if spec.id != position {
                return Err(ProtocolError::SpecOrder { position, id: spec.id });
            }
            if spec.private_state.len() != q {
                return Err(ProtocolError::AmplitudeCount { participant: spec.id, expected: q, actual: spec.private_state.len() });
            }
            let norm: f64 = spec.private_state.iter().map(|a| a.norm_sqr()).sum();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(ProtocolError::NotNormalized { participant: spec.id, norm });
            }
            if self.secret_mode == SecretMode::Basis && spec.basis_digit().is_none() {
                return Err(ProtocolError::NotBasis { participant: spec.id });
            }
        }
        Ok(())
    }
}

/// Named global states of the aggregated variant, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Stage {
    /// Every dealer has encoded; local registers still `|0>`.
    Encoded,
    /// Shares delivered and added into the local registers.
    Distributed,
    /// Coalition local registers hold the summed coefficients.
    Coefficients,
    /// The summed top coefficient sits in the front local register.
    Shifted,
    /// The other coalition local registers copy the complementary sums.
    LocalDisentangled,
    /// The same recovery has been applied to every row of common registers.
    RowsDisentangled,
    /// The front participant's registers lead the layout.
    Reordered,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Encoded,
        Stage::Distributed,
        Stage::Coefficients,
        Stage::Shifted,
        Stage::LocalDisentangled,
        Stage::RowsDisentangled,
        Stage::Reordered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Encoded => "encoded",
            Stage::Distributed => "distributed",
            Stage::Coefficients => "coefficients",
            Stage::Shifted => "shifted",
            Stage::LocalDisentangled => "local_disentangled",
            Stage::RowsDisentangled => "rows_disentangled",
            Stage::Reordered => "reordered",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AbortReason {
    /// More participants failed to distribute than the threshold tolerates.
    TooManyQuitters { missing: Vec<usize>, tolerated: usize },
    /// A participant withheld shares but fewer than `k` reports name it.
    UnresolvedMissing { participant: usize, reports: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "event"))]
pub enum EventKind {
    Prepared { participant: usize },
    Encoded { dealer: usize, shares: usize },
    ShareDelivered { from: usize, to: usize },
    ShareAdded { holder: usize, from: usize },
    MissingShare { reporter: usize, missing: usize },
    QuitterVerdict { participant: usize, reports: usize },
    Aborted { reason: AbortReason },
    Announced { participant: usize },
    ReconstructionSubset { members: Vec<usize> },
    Step { stage: Stage, terms: usize, checksum: String },
    RecoveryInvocation { dealer: usize, terms: usize, checksum: String },
    Combined { dealers: Vec<usize> },
    Measurement { registers: Vec<RegisterId>, outcomes: Vec<u64> },
    ConsistencyCheck { secret: u64, share_sum: u64, passed: bool },
    RerunRequired,
    FinalSecret { mode: SecretMode, digit: Option<u64>, terms: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    pub round: u32,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: EventKind,
}

/// Ordered event log of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Transcript {
    pub events: Vec<Event>,
}

impl Transcript {
    pub fn push(&mut self, round: u32, kind: EventKind) {
        debug_assert!(self.events.last().is_none_or(|e| e.round <= round), "rounds must not go backwards");
        self.events.push(Event { round, kind });
    }

    pub fn extend(&mut self, other: Transcript) {
        for e in other.events {
            self.push(e.round, e.kind);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventKind> {
        self.events.iter().map(|e| &e.kind)
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.iter().filter(|k| pred(k)).count()
    }

    pub fn last_round(&self) -> Option<u32> {
        self.events.last().map(|e| e.round)
    }
}

fn checksum_hex(state: &SparseState) -> String {
    format!("{:016x}", state.checksum())
}

/// Quitter verdicts: a participant is a quitter once at least `k` missing-share
/// reports filed no later than `round_limit` name it.
pub fn judge_quitters(transcript: &Transcript, k: usize, round_limit: u32) -> BTreeMap<usize, usize> {
    let mut reports: BTreeMap<usize, usize> = BTreeMap::new();
    for e in transcript.events.iter().filter(|e| e.round <= round_limit) {
        if let EventKind::MissingShare { missing, .. } = e.kind {
            *reports.entry(missing).or_default() += 1;
        }
    }
    reports.retain(|_, &mut count| count >= k);
    reports
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("expected {expected} participants, got {actual}")]
    SpecCount { expected: usize, actual: usize },
    #[error("participant at position {position} has id {id}; ids must be 0..n in order")]
    SpecOrder { position: usize, id: usize },
    #[error("participant {participant}: expected {expected} amplitudes, got {actual}")]
    AmplitudeCount { participant: usize, expected: usize, actual: usize },
    #[error("participant {participant}: private state has squared norm {norm}")]
    NotNormalized { participant: usize, norm: f64 },
    #[error("participant {participant}: basis mode requires a basis state")]
    NotBasis { participant: usize },
    #[error("no participant with id {0}")]
    UnknownParticipant(usize),
    #[error("protocol aborted: {reason:?}")]
    Aborted { reason: AbortReason, transcript: alloc::boxed::Box<Transcript> },
    #[error("reconstruction needs exactly {expected} participants, got {actual}")]
    SubsetSize { expected: usize, actual: usize },
    #[error("participant {0} is not a real player")]
    NotRealPlayer(usize),
    #[error("participant {0} listed twice")]
    DuplicateMember(usize),
    #[error("config selects {expected:?} but {actual:?} was requested")]
    WrongScheme { expected: Scheme, actual: Scheme },
    #[error("global state would hold up to {terms} terms (limit {limit})")]
    TooLarge { terms: u128, limit: u128 },
    #[error("secret register is not in a basis state")]
    FinalNotBasis,
}

/// Global state after the generation phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Deal {
    pub state: SparseState,
    pub scheme: Scheme,
    /// Participants that distributed their shares, ascending.
    pub real_players: Vec<usize>,
    pub quitters: Vec<usize>,
    /// One bundle per real player; quitter and surplus slots quarantined.
    pub bundles: Vec<ShareBundle>,
    /// Digit each real player actually dealt, when it was a basis state.
    pub dealt_digits: Vec<Option<u64>>,
    next_round: u32,
}

impl Deal {
    pub fn local_register(participant: usize) -> RegisterId {
        RegisterId::Local(participant)
    }

    /// Registers held by `participant`: its local register (aggregated
    /// variant only) and every share addressed to it.
    pub fn held_registers(&self, participant: usize) -> Vec<RegisterId> {
        let mut regs = Vec::new();
        if self.scheme == Scheme::Aggregated {
            regs.push(RegisterId::Local(participant));
        }
        regs.extend(self.real_players.iter().map(|&d| threshold::share_register(d, participant)));
        regs
    }

    /// `sum` of dealt digits mod q, when every input was a basis state.
    pub fn dealt_sum(&self) -> Option<u64> {
        let q = self.state.field().modulus();
        self.dealt_digits.iter().try_fold(0u64, |acc, d| d.map(|d| (acc + d) % q))
    }
}

/// Generation phase: prepare, deal, distribute, report, judge, announce.
pub fn run_generation(config: &ProtocolConfig, specs: &[ParticipantSpec]) -> Result<(Deal, Transcript), ProtocolError> {
    run_generation_observed(config, specs, &mut |_, _| {})
}

pub fn run_generation_observed(
    config: &ProtocolConfig,
    specs: &[ParticipantSpec],
    observer: &mut dyn FnMut(Stage, &SparseState),
) -> Result<(Deal, Transcript), ProtocolError> {
    config.validate(specs)?;
    let params = &config.params;
    let (n, k) = (params.n(), params.k());
    let field = params.field();
    let senders: Vec<usize> = specs.iter().filter(|s| s.behavior != Behavior::QuitterSilent).map(|s| s.id).collect();
    let silent: Vec<usize> = specs.iter().filter(|s| s.behavior == Behavior::QuitterSilent).map(|s| s.id).collect();
    let mut transcript = Transcript::default();

    let q = field.modulus() as u128;
    let terms = senders.iter().try_fold(1u128, |acc, &i| {
        let support = specs[i].private_state.iter().filter(|a| a.norm() >= PRUNE_THRESHOLD).count() as u128;
        acc.checked_mul(support)?.checked_mul(q.checked_pow((k - 1) as u32)?)
    });
    match terms {
        Some(t) if t <= MAX_GLOBAL_TERMS => {}
        _ => return Err(ProtocolError::TooLarge { terms: terms.unwrap_or(u128::MAX), limit: MAX_GLOBAL_TERMS }),
    }

    let locals: Vec<RegisterId> = match config.scheme {
        Scheme::Aggregated => senders.iter().map(|&i| RegisterId::Local(i)).collect(),
        Scheme::Separate => Vec::new(),
    };
    let mut state = SparseState::new_zero(RegisterLayout::new(field, locals)?);
    let mut bundles = Vec::with_capacity(senders.len());
    for &i in &senders {
        let private = RegisterId::Private(i);
        state = state.with_registers(&[private])?.prepare(private, &specs[i].dealt_state())?;
        transcript.push(ROUND_PREPARE, EventKind::Prepared { participant: i });
    }
    for &i in &senders {
        let (next, bundle) = threshold::split(&state, RegisterId::Private(i), i, params)?;
        state = next;
        transcript.push(ROUND_PREPARE, EventKind::Encoded { dealer: i, shares: bundle.shares().len() });
        bundles.push(bundle);
    }
    if config.scheme == Scheme::Aggregated {
        observer(Stage::Encoded, &state);
    }

    // Authenticated channels: delivery in (sender, receiver) order.
    for &i in &senders {
        for j in 0..n {
            transcript.push(ROUND_DISTRIBUTE, EventKind::ShareDelivered { from: i, to: j });
            if config.scheme == Scheme::Aggregated && senders.contains(&j) {
                state = state.controlled_add(threshold::share_register(i, j), RegisterId::Local(j), field.one())?;
                transcript.push(ROUND_DISTRIBUTE, EventKind::ShareAdded { holder: j, from: i });
            }
        }
    }

    for &j in &senders {
        for &l in silent.iter().filter(|&&l| l != j) {
            transcript.push(ROUND_REPORT, EventKind::MissingShare { reporter: j, missing: l });
        }
    }

    let verdicts = judge_quitters(&transcript, k, ROUND_REPORT);
    for (&participant, &reports) in &verdicts {
        transcript.push(ROUND_VERDICT, EventKind::QuitterVerdict { participant, reports });
    }
    let abort = if silent.len() > n - k {
        Some(AbortReason::TooManyQuitters { missing: silent.clone(), tolerated: n - k })
    } else {
        silent.iter().find(|l| !verdicts.contains_key(l)).map(|&participant| AbortReason::UnresolvedMissing {
            participant,
            reports: senders.iter().filter(|&&j| j != participant).count(),
        })
    };
    if let Some(reason) = abort {
        transcript.push(ROUND_VERDICT, EventKind::Aborted { reason: reason.clone() });
        return Err(ProtocolError::Aborted { reason, transcript: alloc::boxed::Box::new(transcript) });
    }

    for &j in &senders {
        transcript.push(ROUND_ANNOUNCE, EventKind::Announced { participant: j });
    }
    let bundles = bundles.iter().map(|b| b.quarantine(&silent)).collect::<Result<Vec<_>, _>>()?;
    if config.scheme == Scheme::Aggregated {
        observer(Stage::Distributed, &state);
    }

    let dealt_digits = senders
        .iter()
        .map(|&i| ParticipantSpec { private_state: specs[i].dealt_state(), ..specs[i].clone() }.basis_digit())
        .collect();
    Ok((
        Deal {
            state,
            scheme: config.scheme,
            real_players: senders,
            quitters: silent,
            bundles,
            dealt_digits,
            next_round: ROUND_RECONSTRUCT,
        },
        transcript,
    ))
}

/// The agreed secret read off the reconstructed registers.
#[derive(Debug, Clone, PartialEq)]
pub enum FinalSecret {
    Basis { digit: u64 },
    /// Joint state of the sum register followed by the recovered private registers.
    Superposition { state: SparseState },
    Measured { digit: u64, share_outcomes: Vec<u64> },
    /// The measured shares do not add up to the measured secret.
    RerunRequired { secret: u64, share_sum: u64 },
}

impl FinalSecret {
    pub fn digit(&self) -> Option<u64> {
        match self {
            FinalSecret::Basis { digit } | FinalSecret::Measured { digit, .. } => Some(*digit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub final_secret: FinalSecret,
    pub state: SparseState,
    /// Registers carrying the final secret: the sum register first.
    pub front: Vec<RegisterId>,
    pub transcript: Transcript,
}

/// Random stream for one measurement, derived from the run seed, the round
/// and the measured registers.
pub fn measurement_rng(seed: u64, round: u32, regs: &[RegisterId]) -> ChaCha8Rng {
    fn mix(h: u64, x: u64) -> u64 {
        // splitmix64 finalizer over the running hash
        let mut z = (h ^ x).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut h = mix(seed, round as u64);
    for r in regs {
        let (tag, a, b) = match *r {
            RegisterId::Local(i) => (1, i, 0),
            RegisterId::Common { dealer, slot } => (2, dealer, slot),
            RegisterId::Private(i) => (3, i, 0),
            RegisterId::Accumulator(i) => (4, i, 0),
        };
        h = mix(mix(mix(h, tag), a as u64), b as u64);
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn check_subset(deal: &Deal, k: usize, subset: &[usize]) -> Result<(), ProtocolError> {
    if subset.len() != k {
        return Err(ProtocolError::SubsetSize { expected: k, actual: subset.len() });
    }
    for (i, &m) in subset.iter().enumerate() {
        if subset[..i].contains(&m) {
            return Err(ProtocolError::DuplicateMember(m));
        }
        if !deal.real_players.contains(&m) {
            return Err(ProtocolError::NotRealPlayer(m));
        }
    }
    Ok(())
}

/// Reconstruction by the `k` real players in `subset`; `subset[0]` ends up
/// holding the secret.
pub fn run_reconstruction(
    deal: &Deal,
    config: &ProtocolConfig,
    subset: &[usize],
) -> Result<Reconstruction, ProtocolError> {
    run_reconstruction_observed(deal, config, subset, &mut |_, _| {})
}

pub fn run_reconstruction_observed(
    deal: &Deal,
    config: &ProtocolConfig,
    subset: &[usize],
    observer: &mut dyn FnMut(Stage, &SparseState),
) -> Result<Reconstruction, ProtocolError> {
    let params = &config.params;
    let k = params.k();
    check_subset(deal, k, subset)?;
    if deal.scheme != config.scheme {
        return Err(ProtocolError::WrongScheme { expected: config.scheme, actual: deal.scheme });
    }
    let mut round = deal.next_round;
    let mut transcript = Transcript::default();
    transcript.push(round, EventKind::ReconstructionSubset { members: subset.to_vec() });

    let front_slot = subset[0];
    let recovered: Vec<RegisterId> =
        deal.real_players.iter().map(|&d| threshold::share_register(d, front_slot)).collect();
    let (state, front) = match deal.scheme {
        Scheme::Aggregated => {
            let (points, complement) = threshold::subset_points(&params.dealing_points(), subset)?;
            let locals: Vec<RegisterId> = subset.iter().map(|&m| RegisterId::Local(m)).collect();
            let mut step_log = |stage: Stage, st: &SparseState, round: &mut u32, t: &mut Transcript| {
                *round += 1;
                t.push(*round, EventKind::Step { stage, terms: st.len(), checksum: checksum_hex(st) });
                observer(stage, st);
            };
            let mut pending = Vec::new();
            let mut state = threshold::recover_to_front(&deal.state, &locals, &points, &complement, &mut |step, st| {
                let stage = match step {
                    RecoveryStep::CoefficientsRecovered => Stage::Coefficients,
                    RecoveryStep::SecretShifted => Stage::Shifted,
                    RecoveryStep::Disentangled => Stage::LocalDisentangled,
                };
                pending.push((stage, st.clone()));
            })?;
            for (stage, st) in pending {
                step_log(stage, &st, &mut round, &mut transcript);
            }
            for &dealer in &deal.real_players {
                let row: Vec<RegisterId> = subset.iter().map(|&m| threshold::share_register(dealer, m)).collect();
                state = threshold::recover_to_front(&state, &row, &points, &complement, &mut |_, _| {})?;
            }
            step_log(Stage::RowsDisentangled, &state, &mut round, &mut transcript);
            let mut front = vec![RegisterId::Local(front_slot)];
            front.extend_from_slice(&recovered);
            let state = state.reorder_front(&front)?;
            step_log(Stage::Reordered, &state, &mut round, &mut transcript);
            (state, front)
        }
        Scheme::Separate => {
            let mut state = deal.state.clone();
            for bundle in &deal.bundles {
                let (next, _) = threshold::reconstruct(&state, bundle, subset)?;
                state = next;
                round += 1;
                transcript.push(
                    round,
                    EventKind::RecoveryInvocation { dealer: bundle.dealer(), terms: state.len(), checksum: checksum_hex(&state) },
                );
            }
            let acc = RegisterId::Accumulator(0);
            state = state.with_registers(&[acc])?;
            for &reg in &recovered {
                state = state.controlled_add(reg, acc, params.field().one())?;
            }
            round += 1;
            transcript.push(round, EventKind::Combined { dealers: deal.real_players.clone() });
            let mut front = vec![acc];
            front.extend_from_slice(&recovered);
            let state = state.reorder_front(&front)?;
            (state, front)
        }
    };

    round += 1;
    let q = params.field().modulus();
    let (final_secret, state) = match config.secret_mode {
        SecretMode::Basis => {
            let digit = state.basis_digit(front[0])?.ok_or(ProtocolError::FinalNotBasis)?;
            (FinalSecret::Basis { digit }, state)
        }
        SecretMode::Superposition => {
            let (joint, _) = state.factor_out(&front)?;
            (FinalSecret::Superposition { state: joint }, state)
        }
        SecretMode::Measured => {
            let mut rng = measurement_rng(config.seed, round, &front);
            let (outcomes, collapsed) = state.measure(&front, &mut rng)?;
            let outcomes: Vec<u64> = outcomes.iter().map(|e| e.value()).collect();
            transcript.push(round, EventKind::Measurement { registers: front.clone(), outcomes: outcomes.clone() });
            let secret = outcomes[0];
            let share_sum = outcomes[1..].iter().fold(0, |acc, &d| (acc + d) % q);
            let passed = secret == share_sum;
            transcript.push(round, EventKind::ConsistencyCheck { secret, share_sum, passed });
            if passed {
                (FinalSecret::Measured { digit: secret, share_outcomes: outcomes[1..].to_vec() }, collapsed)
            } else {
                transcript.push(round, EventKind::RerunRequired);
                (FinalSecret::RerunRequired { secret, share_sum }, collapsed)
            }
        }
    };
    let terms = match &final_secret {
        FinalSecret::Superposition { state } => state.len(),
        _ => 1,
    };
    transcript.push(round, EventKind::FinalSecret { mode: config.secret_mode, digit: final_secret.digit(), terms });
    Ok(Reconstruction { final_secret, state, front, transcript })
}

/// Generation followed by reconstruction, with one combined transcript.
pub fn run_protocol(
    config: &ProtocolConfig,
    specs: &[ParticipantSpec],
    subset: &[usize],
) -> Result<(Reconstruction, Transcript), ProtocolError> {
    let (deal, mut transcript) = run_generation(config, specs)?;
    let rec = run_reconstruction(&deal, config, subset)?;
    transcript.extend(rec.transcript.clone());
    Ok((rec, transcript))
}

/// The n-fold variant end to end.
pub fn run_scheme1(
    config: &ProtocolConfig,
    specs: &[ParticipantSpec],
    subset: &[usize],
) -> Result<(FinalSecret, Transcript), ProtocolError> {
    if config.scheme != Scheme::Separate {
        return Err(ProtocolError::WrongScheme { expected: config.scheme, actual: Scheme::Separate });
    }
    run_protocol(config, specs, subset).map(|(rec, t)| (rec.final_secret, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: usize, n: usize, scheme: Scheme, mode: SecretMode) -> ProtocolConfig {
        ProtocolConfig::new(SchemeParams::smallest(k, n).unwrap(), scheme, mode, 7)
    }

    fn basis_specs(q: u64, digits: &[u64]) -> Vec<ParticipantSpec> {
        digits.iter().enumerate().map(|(i, &d)| ParticipantSpec::basis(i, q, d)).collect()
    }

    #[test]
    fn generation_counts_events() {
        let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Basis);
        let (deal, t) = run_generation(&cfg, &basis_specs(3, &[1, 2, 0])).unwrap();
        assert_eq!(t.count(|e| matches!(e, EventKind::ShareDelivered { .. })), 9);
        assert_eq!(t.count(|e| matches!(e, EventKind::Announced { .. })), 3);
        assert_eq!(deal.real_players, vec![0, 1, 2]);
        assert_eq!(deal.state.len(), 27);
        assert_eq!(deal.state.layout().len(), 3 + 9);
        assert_eq!(deal.dealt_sum(), Some(0));
    }

    #[test]
    fn basis_secret_is_digit_sum_for_every_subset() {
        let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Basis);
        let (deal, _) = run_generation(&cfg, &basis_specs(3, &[1, 2, 0])).unwrap();
        for subset in [[0, 1], [0, 2], [1, 2], [2, 0]] {
            let rec = run_reconstruction(&deal, &cfg, &subset).unwrap();
            assert_eq!(rec.final_secret, FinalSecret::Basis { digit: 0 }, "subset {subset:?}");
        }
    }

    #[test]
    fn judge_quitters_threshold_rule() {
        let mut t = Transcript::default();
        assert!(judge_quitters(&t, 2, ROUND_REPORT).is_empty());
        t.push(ROUND_REPORT, EventKind::MissingShare { reporter: 0, missing: 2 });
        assert!(judge_quitters(&t, 2, ROUND_REPORT).is_empty());
        t.push(ROUND_REPORT, EventKind::MissingShare { reporter: 1, missing: 2 });
        assert_eq!(judge_quitters(&t, 2, ROUND_REPORT).into_keys().collect::<Vec<_>>(), vec![2]);
        assert!(judge_quitters(&t, 2, ROUND_DISTRIBUTE).is_empty(), "reports after the limit are ignored");
    }

    #[test]
    fn quitters_within_tolerance_shrink_n() {
        let cfg = config(3, 5, Scheme::Aggregated, SecretMode::Basis);
        let mut specs = basis_specs(5, &[1, 2, 3, 4, 0]);
        specs[1].behavior = Behavior::QuitterSilent;
        specs[3].behavior = Behavior::QuitterSilent;
        let (deal, t) = run_generation(&cfg, &specs).unwrap();
        assert_eq!(deal.real_players, vec![0, 2, 4]);
        assert_eq!(t.count(|e| matches!(e, EventKind::QuitterVerdict { .. })), 2);
        let rec = run_reconstruction(&deal, &cfg, &[0, 2, 4]).unwrap();
        assert_eq!(rec.final_secret, FinalSecret::Basis { digit: 4 });
        assert!(matches!(run_reconstruction(&deal, &cfg, &[0, 1, 2]), Err(ProtocolError::NotRealPlayer(1))));
    }

    #[test]
    fn too_many_quitters_abort() {
        let cfg = config(3, 5, Scheme::Aggregated, SecretMode::Basis);
        let mut specs = basis_specs(5, &[1, 2, 3, 4, 0]);
        for i in [0, 1, 2] {
            specs[i].behavior = Behavior::QuitterSilent;
        }
        match run_generation(&cfg, &specs) {
            Err(ProtocolError::Aborted { reason, transcript }) => {
                assert_eq!(reason, AbortReason::TooManyQuitters { missing: vec![0, 1, 2], tolerated: 2 });
                assert!(matches!(transcript.events.last().unwrap().kind, EventKind::Aborted { .. }));
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn validation_errors() {
        let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Basis);
        assert!(matches!(run_generation(&cfg, &basis_specs(3, &[1, 2])), Err(ProtocolError::SpecCount { .. })));
        let mut specs = basis_specs(3, &[1, 2, 0]);
        specs.swap(0, 1);
        assert!(matches!(run_generation(&cfg, &specs), Err(ProtocolError::SpecOrder { .. })));
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let mut specs = basis_specs(3, &[1, 2, 0]);
        specs[2].private_state = vec![Complex64::new(h, 0.0), Complex64::new(h, 0.0), Complex64::new(0.0, 0.0)];
        assert_eq!(run_generation(&cfg, &specs).unwrap_err(), ProtocolError::NotBasis { participant: 2 });
        specs[2].private_state[0] = Complex64::new(1.0, 0.0);
        assert!(matches!(run_generation(&cfg, &specs), Err(ProtocolError::NotNormalized { participant: 2, .. })));
        let (deal, _) = run_generation(&cfg, &basis_specs(3, &[1, 2, 0])).unwrap();
        assert!(matches!(run_reconstruction(&deal, &cfg, &[0]), Err(ProtocolError::SubsetSize { .. })));
        assert!(matches!(run_reconstruction(&deal, &cfg, &[1, 1]), Err(ProtocolError::DuplicateMember(1))));
    }

    #[test]
    fn scheme1_logs_one_recovery_per_dealer() {
        let cfg = config(2, 3, Scheme::Separate, SecretMode::Basis);
        let (secret, t) = run_scheme1(&cfg, &basis_specs(3, &[1, 2, 0]), &[0, 1]).unwrap();
        assert_eq!(secret, FinalSecret::Basis { digit: 0 });
        assert_eq!(t.count(|e| matches!(e, EventKind::RecoveryInvocation { .. })), 3);
        let cfg2 = config(2, 3, Scheme::Aggregated, SecretMode::Basis);
        assert!(matches!(run_scheme1(&cfg2, &basis_specs(3, &[1, 2, 0]), &[0, 1]), Err(ProtocolError::WrongScheme { .. })));
    }

    #[test]
    fn single_participant_gets_own_state() {
        for scheme in [Scheme::Separate, Scheme::Aggregated] {
            let cfg = config(1, 1, scheme, SecretMode::Basis);
            let (rec, _) = run_protocol(&cfg, &basis_specs(2, &[1]), &[0]).unwrap();
            assert_eq!(rec.final_secret, FinalSecret::Basis { digit: 1 });
        }
    }

    #[test]
    fn malicious_shift_moves_the_sum() {
        let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Basis);
        let specs = basis_specs(3, &[1, 2, 0]);
        assert_eq!(inject_malicious(&specs, 9, 1).unwrap_err(), ProtocolError::UnknownParticipant(9));
        let bad = inject_malicious(&specs, 1, 1).unwrap();
        let (rec, _) = run_protocol(&cfg, &bad, &[0, 1]).unwrap();
        assert_eq!(rec.final_secret, FinalSecret::Basis { digit: 1 });
    }

    #[test]
    fn transcripts_are_deterministic() {
        let cfg = config(2, 3, Scheme::Aggregated, SecretMode::Measured);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let sup = vec![Complex64::new(h, 0.0), Complex64::new(0.0, h), Complex64::new(0.0, 0.0)];
        let specs: Vec<_> = (0..3).map(|i| ParticipantSpec::superposition(i, sup.clone())).collect();
        let a = run_protocol(&cfg, &specs, &[1, 2]).unwrap().1;
        let b = run_protocol(&cfg, &specs, &[1, 2]).unwrap().1;
        assert_eq!(a, b);
    }

    #[test]
    fn measurement_streams_differ_by_round_and_registers() {
        use rand::RngCore;
        let regs = [RegisterId::Local(0)];
        let a = measurement_rng(1, 5, &regs).next_u64();
        assert_eq!(a, measurement_rng(1, 5, &regs).next_u64());
        assert_ne!(a, measurement_rng(1, 6, &regs).next_u64());
        assert_ne!(a, measurement_rng(2, 5, &regs).next_u64());
        assert_ne!(a, measurement_rng(1, 5, &[RegisterId::Local(1)]).next_u64());
    }
}
