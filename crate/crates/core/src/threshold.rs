//! Single-dealer quantum `(k, n)` threshold scheme on polynomial codes.
//!
//! A secret digit `s` is spread over `2k - 1` shares as the evaluations of
//! every degree `k - 1` polynomial whose top coefficient is `s`. Schemes with
//! `n < 2k - 1` deal the full `2k - 1` shares and quarantine the surplus: in
//! a pure-state engine those registers stay in the state, they are simply
//! never handed to anyone.
//!
//! Reconstruction from shares at points `z_0..z_{k-1}` with the remaining
//! points `w_1..w_{k-1}`:
//!
//! 1. apply `V_k(z)^{-1}` so the registers hold the coefficients `c_0..c_{k-1}`;
//! 2. rotate right by one so the first register holds `c_{k-1} = s`;
//! 3. apply `V_{k-1}(w)` to the other registers and add `s * w_j^{k-1}` to the
//!    `j`-th, turning them into copies of the remaining shares. The secret
//!    register is then a tensor factor.

use alloc::vec::Vec;

use thiserror::Error;

use crate::gfq::{find_modulus, FieldError, PrimeField};
use crate::linalg::{vandermonde, EvalPoints, LinalgError};
use crate::qstate::{RegisterId, SparseState, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("threshold k = {k} must satisfy 1 <= k <= n (n = {n})")]
    InvalidThreshold { k: usize, n: usize },
    #[error("n = {n} violates the no-cloning bound n < 2k (k = {k})")]
    NoCloning { k: usize, n: usize },
    #[error("expected {expected} evaluation points, got {actual}")]
    PointCount { expected: usize, actual: usize },
    #[error("q = {q} is too small: dealing needs {needed} distinct points")]
    FieldTooSmall { q: u64, needed: usize },
    #[error("cannot keep {requested} shares with threshold {k}")]
    BelowThreshold { requested: usize, k: usize },
    #[error("reconstruction needs exactly {expected} shares, got {actual}")]
    SubsetSize { expected: usize, actual: usize },
    #[error("share slot {0} is quarantined")]
    InactiveShare(usize),
    #[error("share slot {0} does not exist")]
    UnknownSlot(usize),
    #[error("share slot {0} listed twice")]
    DuplicateSlot(usize),
}

/// Parameters `(k, n, q, x_0..x_{n-1})` of a threshold scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeParams {
    k: usize,
    n: usize,
    field: PrimeField,
    points: EvalPoints,
}

impl SchemeParams {
    pub fn new(k: usize, n: usize, field: PrimeField, points: EvalPoints) -> Result<Self, ThresholdError> {
        if k < 1 || k > n {
            return Err(ThresholdError::InvalidThreshold { k, n });
        }
        if n >= 2 * k {
            return Err(ThresholdError::NoCloning { k, n });
        }
        if points.len() != n {
            return Err(ThresholdError::PointCount { expected: n, actual: points.len() });
        }
        if points.field() != field {
            return Err(FieldError::ModulusMismatch { left: field.modulus(), right: points.field().modulus() }.into());
        }
        let needed = 2 * k - 1;
        if (field.modulus() as u128) < needed as u128 {
            return Err(ThresholdError::FieldTooSmall { q: field.modulus(), needed });
        }
        Ok(Self { k, n, field, points })
    }

    /// Evaluation points `x_i = i`.
    pub fn canonical(k: usize, n: usize, field: PrimeField) -> Result<Self, ThresholdError> {
        if (field.modulus() as u128) < n as u128 {
            return Err(ThresholdError::FieldTooSmall { q: field.modulus(), needed: n });
        }
        let points = EvalPoints::canonical(field, n)?;
        Self::new(k, n, field, points)
    }

    /// Canonical points over the smallest prime that fits `2k - 1` shares.
    pub fn smallest(k: usize, n: usize) -> Result<Self, ThresholdError> {
        Self::with_secret_dimension(k, n, 2)
    }

    /// Canonical points over the smallest prime fitting both the dealt shares
    /// and a secret of dimension `m`.
    pub fn with_secret_dimension(k: usize, n: usize, m: u64) -> Result<Self, ThresholdError> {
        if k < 1 || k > n {
            return Err(ThresholdError::InvalidThreshold { k, n });
        }
        if n >= 2 * k {
            return Err(ThresholdError::NoCloning { k, n });
        }
        let field = find_modulus((2 * k - 1) as u64, m)?;
        Self::canonical(k, n, field)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn points(&self) -> &EvalPoints {
        &self.points
    }

    /// Number of shares actually dealt: `2k - 1`.
    pub fn dealing_width(&self) -> usize {
        2 * self.k - 1
    }

    /// The `n` participant points followed by the smallest unused field
    /// elements for the quarantined slots.
    pub fn dealing_points(&self) -> EvalPoints {
        self.points.extended_to(self.dealing_width()).expect("q >= 2k - 1 checked at construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    pub slot: usize,
    pub register: RegisterId,
    pub point: u64,
    pub active: bool,
}

/// The `2k - 1` share registers of one dealer's encoded state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareBundle {
    params: SchemeParams,
    dealer: usize,
    shares: Vec<Share>,
}

impl ShareBundle {
    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn dealer(&self) -> usize {
        self.dealer
    }

    pub fn shares(&self) -> &[Share] {
        &self.shares
    }

    pub fn active(&self) -> impl Iterator<Item = &Share> {
        self.shares.iter().filter(|s| s.active)
    }

    pub fn active_slots(&self) -> Vec<usize> {
        self.active().map(|s| s.slot).collect()
    }

    pub fn quarantined_slots(&self) -> Vec<usize> {
        self.shares.iter().filter(|s| !s.active).map(|s| s.slot).collect()
    }

    pub fn register(&self, slot: usize) -> Result<RegisterId, ThresholdError> {
        self.shares.get(slot).map(|s| s.register).ok_or(ThresholdError::UnknownSlot(slot))
    }

    /// Marks specific slots as out of protocol.
    pub fn quarantine(&self, slots: &[usize]) -> Result<ShareBundle, ThresholdError> {
        let mut out = self.clone();
        for &slot in slots {
            out.shares.get_mut(slot).ok_or(ThresholdError::UnknownSlot(slot))?.active = false;
        }
        let remaining = out.active().count();
        if remaining < self.params.k {
            return Err(ThresholdError::BelowThreshold { requested: remaining, k: self.params.k });
        }
        Ok(out)
    }
}

/// Register naming used for dealer `dealer`'s shares.
pub fn share_register(dealer: usize, slot: usize) -> RegisterId {
    RegisterId::Common { dealer, slot }
}

/// Encodes `secret_reg` into fresh registers `C_{dealer, 0..2k-1}`.
///
/// The returned bundle has the first `n` slots active.
pub fn split(
    state: &SparseState,
    secret_reg: RegisterId,
    dealer: usize,
    params: &SchemeParams,
) -> Result<(SparseState, ShareBundle), ThresholdError> {
    if state.field() != params.field {
        return Err(FieldError::ModulusMismatch { left: state.field().modulus(), right: params.field.modulus() }.into());
    }
    let points = params.dealing_points();
    let regs: Vec<RegisterId> = (0..params.dealing_width()).map(|slot| share_register(dealer, slot)).collect();
    let state = state.with_registers(&regs)?.encode_isometry(secret_reg, &regs, params.k, &points)?;
    let shares = regs
        .iter()
        .enumerate()
        .map(|(slot, &register)| Share { slot, register, point: points.values()[slot], active: true })
        .collect();
    let bundle = ShareBundle { params: params.clone(), dealer, shares };
    let bundle = reduce_shares(&bundle, params.n)?;
    Ok((state, bundle))
}

/// Keeps the first `n_target` active shares and quarantines the rest.
pub fn reduce_shares(bundle: &ShareBundle, n_target: usize) -> Result<ShareBundle, ThresholdError> {
    let k = bundle.params.k;
    let active = bundle.active_slots();
    if n_target < k || n_target > active.len() {
        return Err(ThresholdError::BelowThreshold { requested: n_target, k });
    }
    bundle.quarantine(&active[n_target..])
}

/// Named states passed to a reconstruction observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecoveryStep {
    /// Subset registers hold the polynomial coefficients.
    CoefficientsRecovered,
    /// The secret coefficient sits in the first subset register.
    SecretShifted,
    /// Remaining subset registers copy the complementary shares.
    Disentangled,
}

/// Runs the three reconstruction steps on `regs`, whose contents are
/// evaluations at `points`; `complement` lists the `k - 1` other points.
pub fn recover_to_front(
    state: &SparseState,
    regs: &[RegisterId],
    points: &EvalPoints,
    complement: &EvalPoints,
    observer: &mut dyn FnMut(RecoveryStep, &SparseState),
) -> Result<SparseState, ThresholdError> {
    let k = regs.len();
    if points.len() != k {
        return Err(ThresholdError::PointCount { expected: k, actual: points.len() });
    }
    if complement.len() + 1 != k {
        return Err(ThresholdError::PointCount { expected: k - 1, actual: complement.len() });
    }
    let inverse = vandermonde(points).invert()?;
    let state = state.apply_matrix(regs, &inverse)?;
    observer(RecoveryStep::CoefficientsRecovered, &state);
    let mut state = state.shift_right(regs)?;
    observer(RecoveryStep::SecretShifted, &state);
    if k > 1 {
        state = state.apply_matrix(&regs[1..], &vandermonde(complement))?;
        for (j, &reg) in regs[1..].iter().enumerate() {
            let scalar = complement.get(j).pow((k - 1) as u64);
            state = state.controlled_add(regs[0], reg, scalar)?;
        }
    }
    observer(RecoveryStep::Disentangled, &state);
    Ok(state)
}

/// Points of `subset` (in the given order) and of every other dealt slot (ascending).
pub(crate) fn subset_points(
    all: &EvalPoints,
    subset: &[usize],
) -> Result<(EvalPoints, EvalPoints), LinalgError> {
    let rest: Vec<usize> = (0..all.len()).filter(|i| !subset.contains(i)).collect();
    Ok((all.select(subset)?, all.select(&rest)?))
}

fn check_subset(bundle: &ShareBundle, subset: &[usize]) -> Result<(), ThresholdError> {
    let k = bundle.params.k;
    if subset.len() != k {
        return Err(ThresholdError::SubsetSize { expected: k, actual: subset.len() });
    }
    for (i, &slot) in subset.iter().enumerate() {
        if subset[..i].contains(&slot) {
            return Err(ThresholdError::DuplicateSlot(slot));
        }
        let share = bundle.shares.get(slot).ok_or(ThresholdError::UnknownSlot(slot))?;
        if !share.active {
            return Err(ThresholdError::InactiveShare(slot));
        }
    }
    Ok(())
}

/// Recovers the secret from the `k` active shares in `subset`.
///
/// Returns the new state and the register now holding the secret, which is
/// the register of `subset[0]`. The other shares stay in the state.
pub fn reconstruct(
    state: &SparseState,
    bundle: &ShareBundle,
    subset: &[usize],
) -> Result<(SparseState, RegisterId), ThresholdError> {
    reconstruct_observed(state, bundle, subset, &mut |_, _| {})
}

pub fn reconstruct_observed(
    state: &SparseState,
    bundle: &ShareBundle,
    subset: &[usize],
    observer: &mut dyn FnMut(RecoveryStep, &SparseState),
) -> Result<(SparseState, RegisterId), ThresholdError> {
    check_subset(bundle, subset)?;
    let regs: Vec<RegisterId> = subset.iter().map(|&s| bundle.shares[s].register).collect();
    let (points, complement) = subset_points(&bundle.params.dealing_points(), subset)?;
    let state = recover_to_front(state, &regs, &points, &complement, observer)?;
    Ok((state, regs[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{RegisterLayout, StateError};
    use alloc::vec;
    use num_complex::Complex64;

    fn secret_state(field: PrimeField, amps: &[Complex64]) -> SparseState {
        let layout = RegisterLayout::new(field, [RegisterId::Private(0)]).unwrap();
        SparseState::new_zero(layout).prepare(RegisterId::Private(0), amps).unwrap()
    }

    fn onehot(q: u64, d: u64) -> Vec<Complex64> {
        (0..q).map(|i| Complex64::new(if i == d { 1.0 } else { 0.0 }, 0.0)).collect()
    }

    #[test]
    fn params_validation() {
        let f3 = PrimeField::new(3).unwrap();
        assert_eq!(SchemeParams::smallest(2, 4), Err(ThresholdError::NoCloning { k: 2, n: 4 }));
        assert_eq!(SchemeParams::smallest(3, 2), Err(ThresholdError::InvalidThreshold { k: 3, n: 2 }));
        assert_eq!(SchemeParams::smallest(0, 1), Err(ThresholdError::InvalidThreshold { k: 0, n: 1 }));
        assert_eq!(SchemeParams::canonical(3, 3, f3), Err(ThresholdError::FieldTooSmall { q: 3, needed: 5 }));
        let p = SchemeParams::smallest(2, 3).unwrap();
        assert_eq!(p.field().modulus(), 3);
        assert_eq!(SchemeParams::smallest(3, 5).unwrap().field().modulus(), 5);
        assert_eq!(SchemeParams::smallest(2, 2).unwrap().field().modulus(), 3);
        assert_eq!(SchemeParams::smallest(1, 1).unwrap().field().modulus(), 2);
        assert_eq!(SchemeParams::with_secret_dimension(2, 3, 9).unwrap().field().modulus(), 11);
    }

    #[test]
    fn split_examples() {
        let p = SchemeParams::smallest(2, 3).unwrap();
        let st = secret_state(p.field(), &onehot(3, 1));
        let (enc, bundle) = split(&st, RegisterId::Private(0), 0, &p).unwrap();
        assert_eq!(enc.len(), 3);
        assert_eq!(bundle.active_slots(), vec![0, 1, 2]);
        let c = |s| share_register(0, s);
        let s = 1.0 / libm::sqrt(3.0);
        let layout = RegisterLayout::new(p.field(), [c(0), c(1), c(2)]).unwrap();
        let expect = SparseState::from_terms(
            layout,
            [(vec![0, 1, 2], Complex64::new(s, 0.0)), (vec![1, 2, 0], Complex64::new(s, 0.0)), (vec![2, 0, 1], Complex64::new(s, 0.0))],
        )
        .unwrap();
        assert!(enc.states_equal(&expect, 1e-12).unwrap());

        let p = SchemeParams::smallest(1, 1).unwrap();
        let st = secret_state(p.field(), &onehot(2, 1));
        let (enc, bundle) = split(&st, RegisterId::Private(0), 4, &p).unwrap();
        assert_eq!(bundle.shares().len(), 1);
        assert_eq!(enc.basis_digit(share_register(4, 0)).unwrap(), Some(1));
    }

    #[test]
    fn split_with_fewer_shares_quarantines_surplus() {
        let p = SchemeParams::smallest(2, 2).unwrap();
        let st = secret_state(p.field(), &onehot(3, 2));
        let (enc, bundle) = split(&st, RegisterId::Private(0), 0, &p).unwrap();
        assert_eq!(enc.layout().len(), 3);
        assert_eq!(bundle.active_slots(), vec![0, 1]);
        assert_eq!(bundle.quarantined_slots(), vec![2]);
    }

    #[test]
    fn reduce_shares_examples() {
        let p = SchemeParams::smallest(2, 3).unwrap();
        let st = secret_state(p.field(), &onehot(3, 0));
        let (_, bundle) = split(&st, RegisterId::Private(0), 0, &p).unwrap();
        let reduced = reduce_shares(&bundle, 2).unwrap();
        assert_eq!(reduced.active_slots(), vec![0, 1]);
        assert_eq!(reduced.quarantined_slots(), vec![2]);
        assert_eq!(reduce_shares(&bundle, 3).unwrap(), bundle);
        assert_eq!(reduce_shares(&bundle, 1), Err(ThresholdError::BelowThreshold { requested: 1, k: 2 }));
    }

    #[test]
    fn reconstruct_examples() {
        let p = SchemeParams::smallest(2, 3).unwrap();
        let st = secret_state(p.field(), &onehot(3, 1));
        let (enc, bundle) = split(&st, RegisterId::Private(0), 0, &p).unwrap();
        for subset in [[0, 1], [1, 2], [0, 2], [2, 0]] {
            let (out, reg) = reconstruct(&enc, &bundle, &subset).unwrap();
            assert_eq!(reg, share_register(0, subset[0]));
            assert_eq!(out.basis_digit(reg).unwrap(), Some(1), "subset {subset:?}");
            assert!((out.reduced_density(&[reg]).unwrap().purity() - 1.0).abs() < 1e-9);
        }

        let h = core::f64::consts::FRAC_1_SQRT_2;
        let amps = [Complex64::new(h, 0.0), Complex64::new(0.0, 0.0), Complex64::new(h, 0.0)];
        let st = secret_state(p.field(), &amps);
        let (enc, bundle) = split(&st, RegisterId::Private(0), 0, &p).unwrap();
        let (out, reg) = reconstruct(&enc, &bundle, &[0, 1]).unwrap();
        let (front, _) = out.factor_out(&[reg]).unwrap();
        let expect = secret_state(p.field(), &amps);
        let layout = RegisterLayout::new(p.field(), [reg]).unwrap();
        let expect = SparseState::from_terms(layout, expect.terms().map(|(k, a)| (k.to_vec(), a))).unwrap();
        assert!(front.states_equal(&expect, 1e-9).unwrap());
    }

    #[test]
    fn reconstruct_errors() {
        let p = SchemeParams::smallest(2, 2).unwrap();
        let st = secret_state(p.field(), &onehot(3, 1));
        let (enc, bundle) = split(&st, RegisterId::Private(0), 0, &p).unwrap();
        assert_eq!(reconstruct(&enc, &bundle, &[0]).unwrap_err(), ThresholdError::SubsetSize { expected: 2, actual: 1 });
        assert_eq!(reconstruct(&enc, &bundle, &[0, 2]).unwrap_err(), ThresholdError::InactiveShare(2));
        assert_eq!(reconstruct(&enc, &bundle, &[0, 0]).unwrap_err(), ThresholdError::DuplicateSlot(0));
        assert_eq!(reconstruct(&enc, &bundle, &[0, 7]).unwrap_err(), ThresholdError::UnknownSlot(7));
        assert!(matches!(
            split(&enc, RegisterId::Private(0), 1, &p),
            Err(ThresholdError::State(StateError::UnknownRegister(_)))
        ));
    }

    #[test]
    fn observer_sees_three_steps() {
        let p = SchemeParams::smallest(3, 5).unwrap();
        let st = secret_state(p.field(), &onehot(5, 4));
        let (enc, bundle) = split(&st, RegisterId::Private(0), 0, &p).unwrap();
        let mut seen = Vec::new();
        reconstruct_observed(&enc, &bundle, &[4, 1, 2], &mut |step, s| seen.push((step, s.len()))).unwrap();
        assert_eq!(
            seen,
            vec![
                (RecoveryStep::CoefficientsRecovered, 25),
                (RecoveryStep::SecretShifted, 25),
                (RecoveryStep::Disentangled, 25)
            ]
        );
    }
}
