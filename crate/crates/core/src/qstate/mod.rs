//! Exact sparse pure-state simulation of q-ary registers.
//!
//! A [`SparseState`] maps digit tuples (one digit per register, in layout
//! order) to complex amplitudes. Every operation the sharing protocol needs
//! is either a permutation of basis states or an isometry that fans one
//! basis state out into `q^{k-1}` equally weighted terms, so the support
//! stays small even when the dense dimension is astronomically large.
//!
//! Operations take `&self` and return a fresh state.

mod density;
mod layout;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::gfq::{FieldElement, FieldError, PrimeField};
use crate::linalg::{horner, EvalPoints, LinalgError, MatrixFq};

pub use density::DensityMatrix;
pub use layout::{RegisterId, RegisterLayout, RegisterRole};

pub type Amplitude = Complex64;

/// Amplitudes below this modulus are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-12;
/// Tolerance on `sum |amp|^2 = 1` for inputs and stored states.
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Largest subsystem dimension `reduced_density` will materialize.
pub const MAX_SUBSYSTEM_DIM: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("register {0} listed twice")]
    DuplicateRegister(RegisterId),
    #[error("register {0} is not part of the layout")]
    UnknownRegister(RegisterId),
    #[error("register {0} is not in a fresh |0> state")]
    NotFresh(RegisterId),
    #[error("source and destination are the same register {0}")]
    SameRegister(RegisterId),
    #[error("amplitude vector has squared norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("expected {expected} amplitudes, got {actual}")]
    AmplitudeCount { expected: usize, actual: usize },
    #[error("basis tuple has {actual} digits, layout has {expected} registers")]
    TupleLength { expected: usize, actual: usize },
    #[error("digit {digit} out of range for q = {q}")]
    DigitOutOfRange { digit: u64, q: u64 },
    #[error("invalid encoding threshold k = {k} for {n} shares")]
    InvalidThreshold { k: usize, n: usize },
    #[error("subsystem dimension {dim} exceeds limit {limit}")]
    SubsystemTooLarge { dim: u128, limit: usize },
    #[error("registers are entangled with the rest of the state (purity {purity})")]
    Entangled { purity: f64 },
    #[error("states are defined over different layouts")]
    LayoutMismatch,
    #[error("register list must not be empty")]
    EmptyRegisterList,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    layout: RegisterLayout,
    terms: BTreeMap<Vec<u64>, Amplitude>,
}

impl SparseState {
    /// Every register in `|0>`.
    pub fn new_zero(layout: RegisterLayout) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; layout.len()], Complex64::new(1.0, 0.0));
        Self { layout, terms }
    }

    /// Builds a state from explicit terms; repeated tuples accumulate.
    pub fn from_terms(
        layout: RegisterLayout,
        terms: impl IntoIterator<Item = (Vec<u64>, Amplitude)>,
    ) -> Result<Self, StateError> {
        let q = layout.field().modulus();
        let mut map: BTreeMap<Vec<u64>, Amplitude> = BTreeMap::new();
        for (key, amp) in terms {
            if key.len() != layout.len() {
                return Err(StateError::TupleLength { expected: layout.len(), actual: key.len() });
            }
            if let Some(&digit) = key.iter().find(|&&d| d >= q) {
                return Err(StateError::DigitOutOfRange { digit, q });
            }
            *map.entry(key).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let state = Self { layout, terms: map }.pruned();
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn field(&self) -> PrimeField {
        self.layout.field()
    }

    /// Number of stored (nonzero) terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u64], Amplitude)> {
        self.terms.iter().map(|(k, &a)| (k.as_slice(), a))
    }

    pub fn amplitude(&self, digits: &[u64]) -> Amplitude {
        self.terms.get(digits).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    fn pruned(mut self) -> Self {
        self.terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        self
    }

    fn map_keys(&self, layout: RegisterLayout, mut f: impl FnMut(&[u64], &mut Vec<u64>)) -> Self {
        let mut terms = BTreeMap::new();
        let mut scratch = Vec::new();
        for (key, &amp) in &self.terms {
            scratch.clear();
            f(key, &mut scratch);
            *terms.entry(scratch.clone()).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        Self { layout, terms }
    }

    fn is_fresh(&self, pos: usize) -> bool {
        self.terms.keys().all(|k| k[pos] == 0)
    }

    /// Appends fresh `|0>` registers.
    pub fn with_registers(&self, ids: &[RegisterId]) -> Result<Self, StateError> {
        let layout = self.layout.with_appended(ids)?;
        let extra = ids.len();
        Ok(self.map_keys(layout, |k, out| {
            out.extend_from_slice(k);
            out.extend(core::iter::repeat_n(0, extra));
        }))
    }

    /// Loads `amplitudes` (one per basis digit) into a register that is
    /// currently `|0>` in every term.
    pub fn prepare(&self, reg: RegisterId, amplitudes: &[Amplitude]) -> Result<Self, StateError> {
        let q = self.field().modulus() as usize;
        if amplitudes.len() != q {
            return Err(StateError::AmplitudeCount { expected: q, actual: amplitudes.len() });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(StateError::NotNormalized(norm));
        }
        let pos = self.layout.position(reg)?;
        if !self.is_fresh(pos) {
            return Err(StateError::NotFresh(reg));
        }
        let mut terms = BTreeMap::new();
        for (key, &amp) in &self.terms {
            for (digit, &a) in amplitudes.iter().enumerate() {
                if a.norm() < PRUNE_THRESHOLD {
                    continue;
                }
                let mut k = key.clone();
                k[pos] = digit as u64;
                terms.insert(k, amp * a);
            }
        }
        Ok(Self { layout: self.layout.clone(), terms }.pruned())
    }

    /// Polynomial encoding of `src` into `targets`.
    ///
    /// `|s> -> q^{-(k-1)/2} sum_{c in F^k, c_{k-1} = s} |p_c(x_0), ..., p_c(x_{n-1})>`
    /// where `x_j = points[j]` lands in `targets[j]`. The source register
    /// is consumed and removed from the layout.
    pub fn encode_isometry(
        &self,
        src: RegisterId,
        targets: &[RegisterId],
        k: usize,
        points: &EvalPoints,
    ) -> Result<Self, StateError> {
        let n = targets.len();
        if k < 1 || k > n {
            return Err(StateError::InvalidThreshold { k, n });
        }
        if points.len() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, actual: points.len() }.into());
        }
        let field = self.field();
        if points.field() != field {
            return Err(FieldError::ModulusMismatch { left: field.modulus(), right: points.field().modulus() }.into());
        }
        let mut all = Vec::with_capacity(n + 1);
        all.push(src);
        all.extend_from_slice(targets);
        let positions = self.layout.positions(&all)?;
        let src_pos = positions[0];
        let target_pos = &positions[1..];
        for (&pos, &id) in target_pos.iter().zip(targets) {
            if !self.is_fresh(pos) {
                return Err(StateError::NotFresh(id));
            }
        }
        let q = field.modulus();
        let fan_out = q.pow((k - 1) as u32);
        let scale = 1.0 / libm::sqrt(fan_out as f64);
        let layout = self.layout.without_position(src_pos);
        let mut terms = BTreeMap::new();
        let mut coeffs = vec![0u64; k];
        for (key, &amp) in &self.terms {
            coeffs.iter_mut().for_each(|c| *c = 0);
            coeffs[k - 1] = key[src_pos];
            for _ in 0..fan_out {
                let mut out = key.clone();
                for (&pos, &x) in target_pos.iter().zip(points.values()) {
                    out[pos] = horner(field, &coeffs, x);
                }
                out.remove(src_pos);
                *terms.entry(out).or_insert(Complex64::new(0.0, 0.0)) += amp * scale;
                // odometer over the free coefficients c_0 .. c_{k-2}
                for c in coeffs[..k - 1].iter_mut() {
                    *c += 1;
                    if *c < q {
                        break;
                    }
                    *c = 0;
                }
            }
        }
        Ok(Self { layout, terms }.pruned())
    }

    /// `|a>_src |b>_dst -> |a>_src |b + scalar * a>_dst`.
    pub fn controlled_add(&self, src: RegisterId, dst: RegisterId, scalar: FieldElement) -> Result<Self, StateError> {
        if src == dst {
            return Err(StateError::SameRegister(src));
        }
        let field = self.field();
        if scalar.field() != field {
            return Err(FieldError::ModulusMismatch { left: field.modulus(), right: scalar.field().modulus() }.into());
        }
        let s = self.layout.position(src)?;
        let d = self.layout.position(dst)?;
        let alpha = scalar.value();
        Ok(self.map_keys(self.layout.clone(), |k, out| {
            out.extend_from_slice(k);
            out[d] = field.add_raw(k[d], field.mul_raw(alpha, k[s]));
        }))
    }

    /// Replaces the digit row `y` held by `regs` with `y M` in every term.
    pub fn apply_matrix(&self, regs: &[RegisterId], m: &MatrixFq) -> Result<Self, StateError> {
        if m.field() != self.field() {
            return Err(FieldError::ModulusMismatch { left: self.field().modulus(), right: m.field().modulus() }.into());
        }
        if !m.is_square() {
            return Err(LinalgError::NotSquare { rows: m.rows(), cols: m.cols() }.into());
        }
        if m.rows() != regs.len() {
            return Err(LinalgError::DimensionMismatch { expected: m.rows(), actual: regs.len() }.into());
        }
        m.invert()?;
        let positions = self.layout.positions(regs)?;
        let mut y = vec![0u64; regs.len()];
        let mut ym = vec![0u64; regs.len()];
        Ok(self.map_keys(self.layout.clone(), |k, out| {
            out.extend_from_slice(k);
            for (yi, &p) in y.iter_mut().zip(&positions) {
                *yi = k[p];
            }
            m.row_mul_raw(&y, &mut ym);
            for (&v, &p) in ym.iter().zip(&positions) {
                out[p] = v;
            }
        }))
    }

    /// Cyclic right shift of register contents: `(r_0, ..., r_{l-1})` end up
    /// holding what `(r_{l-1}, r_0, ..., r_{l-2})` held. Only labels move.
    pub fn shift_right(&self, regs: &[RegisterId]) -> Result<Self, StateError> {
        if regs.is_empty() {
            return Err(StateError::EmptyRegisterList);
        }
        let positions = self.layout.positions(regs)?;
        let mut ids = self.layout.registers().to_vec();
        let l = regs.len();
        for (j, &pos) in positions.iter().enumerate() {
            // the column that was labeled r_j is now labeled r_{j+1}
            ids[pos] = regs[(j + 1) % l];
        }
        Ok(Self { layout: self.layout.with_registers(ids), terms: self.terms.clone() })
    }

    /// Moves `regs` to the front of the layout, keeping the relative order of
    /// the remaining registers.
    pub fn reorder_front(&self, regs: &[RegisterId]) -> Result<Self, StateError> {
        let front = self.layout.positions(regs)?;
        let order: Vec<usize> = front
            .iter()
            .copied()
            .chain((0..self.layout.len()).filter(|p| !front.contains(p)))
            .collect();
        Ok(self.permuted(&order))
    }

    /// New layout lists old position `order[i]` at position `i`.
    fn permuted(&self, order: &[usize]) -> Self {
        let ids: Vec<RegisterId> = order.iter().map(|&p| self.layout.registers()[p]).collect();
        let layout = self.layout.with_registers(ids);
        self.map_keys(layout, |k, out| out.extend(order.iter().map(|&p| k[p])))
    }

    /// Outcome distribution of a computational-basis measurement of `regs`.
    pub fn outcome_probabilities(&self, regs: &[RegisterId]) -> Result<BTreeMap<Vec<u64>, f64>, StateError> {
        let positions = self.layout.positions(regs)?;
        let mut probs: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for (key, amp) in &self.terms {
            let outcome: Vec<u64> = positions.iter().map(|&p| key[p]).collect();
            *probs.entry(outcome).or_insert(0.0) += amp.norm_sqr();
        }
        Ok(probs)
    }

    /// Projective measurement of `regs` in the computational basis.
    ///
    /// Outcomes are visited in lexicographic order, so the result depends
    /// only on the state and the random stream.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        regs: &[RegisterId],
        rng: &mut R,
    ) -> Result<(Vec<FieldElement>, SparseState), StateError> {
        let probs = self.outcome_probabilities(regs)?;
        let total: f64 = probs.values().sum();
        let draw = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (outcome, &p) in &probs {
            acc += p;
            chosen = Some((outcome, p));
            if draw < acc {
                break;
            }
        }
        let (outcome, p) = chosen.expect("normalized state has at least one term");
        let positions = self.layout.positions(regs)?;
        let scale = 1.0 / libm::sqrt(p);
        let terms = self
            .terms
            .iter()
            .filter(|(k, _)| positions.iter().zip(outcome).all(|(&pos, &d)| k[pos] == d))
            .map(|(k, &a)| (k.clone(), a * scale))
            .collect();
        let field = self.field();
        let digits = outcome.iter().map(|&d| field.element(d)).collect();
        Ok((digits, Self { layout: self.layout.clone(), terms }.pruned()))
    }

    /// Partial trace over every register not in `regs`.
    ///
    /// Row/column index is the mixed-radix number formed by the digits of
    /// `regs`, first register most significant.
    pub fn reduced_density(&self, regs: &[RegisterId]) -> Result<DensityMatrix, StateError> {
        let positions = self.layout.positions(regs)?;
        let q = self.field().modulus() as u128;
        let dim = (0..regs.len()).try_fold(1u128, |acc, _| acc.checked_mul(q)).unwrap_or(u128::MAX);
        if dim > MAX_SUBSYSTEM_DIM as u128 {
            return Err(StateError::SubsystemTooLarge { dim, limit: MAX_SUBSYSTEM_DIM });
        }
        let dim = dim as usize;
        let rest: Vec<usize> = (0..self.layout.len()).filter(|p| !positions.contains(p)).collect();
        let mut groups: BTreeMap<Vec<u64>, Vec<(usize, Amplitude)>> = BTreeMap::new();
        for (key, &amp) in &self.terms {
            let idx = positions.iter().fold(0usize, |acc, &p| acc * q as usize + key[p] as usize);
            let rest_key: Vec<u64> = rest.iter().map(|&p| key[p]).collect();
            groups.entry(rest_key).or_default().push((idx, amp));
        }
        let mut rho = DensityMatrix::zeros(dim);
        for members in groups.values() {
            for &(a, amp_a) in members {
                for &(b, amp_b) in members {
                    rho.add_at(a, b, amp_a * amp_b.conj());
                }
            }
        }
        Ok(rho)
    }

    /// Splits a product state into the factor on `regs` (in that order) and
    /// the factor on the remaining registers.
    ///
    /// Fails with [`StateError::Entangled`] unless the reduced state on
    /// `regs` has purity at least `1 - 1e-9`.
    pub fn factor_out(&self, regs: &[RegisterId]) -> Result<(SparseState, SparseState), StateError> {
        let purity = self.reduced_density(regs)?.purity();
        if purity < 1.0 - NORM_TOLERANCE {
            return Err(StateError::Entangled { purity });
        }
        let positions = self.layout.positions(regs)?;
        let rest: Vec<usize> = (0..self.layout.len()).filter(|p| !positions.contains(p)).collect();
        let split = |k: &[u64]| -> (Vec<u64>, Vec<u64>) {
            (positions.iter().map(|&p| k[p]).collect(), rest.iter().map(|&p| k[p]).collect())
        };
        let (_, anchor_rest) = self
            .terms
            .iter()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(k, _)| split(k))
            .expect("state has terms");
        let mut front: BTreeMap<Vec<u64>, Amplitude> = BTreeMap::new();
        for (key, &amp) in &self.terms {
            let (f, r) = split(key);
            if r == anchor_rest {
                front.insert(f, amp);
            }
        }
        normalize(&mut front);
        let mut back: BTreeMap<Vec<u64>, Amplitude> = BTreeMap::new();
        for (key, &amp) in &self.terms {
            let (f, r) = split(key);
            if let Some(phi) = front.get(&f) {
                *back.entry(r).or_insert(Complex64::new(0.0, 0.0)) += phi.conj() * amp;
            }
        }
        normalize(&mut back);
        let front_layout = RegisterLayout::new(self.field(), regs.iter().copied())?;
        let rest_ids: Vec<RegisterId> = rest.iter().map(|&p| self.layout.registers()[p]).collect();
        let rest_layout = RegisterLayout::new(self.field(), rest_ids)?;
        Ok((
            Self { layout: front_layout, terms: front }.pruned(),
            Self { layout: rest_layout, terms: back }.pruned(),
        ))
    }

    /// Removes a register that is not entangled with the rest.
    pub fn discard_register(&self, reg: RegisterId) -> Result<Self, StateError> {
        self.factor_out(&[reg]).map(|(_, rest)| rest)
    }

    /// Equality up to a global phase, taken from the largest-magnitude term of `self`.
    ///
    /// Layouts must hold the same registers; their order may differ.
    pub fn states_equal(&self, other: &SparseState, tol: f64) -> Result<bool, StateError> {
        Ok(self.distance_up_to_phase(other)? < tol)
    }

    /// Max-norm distance between `self` and `phase * other`.
    pub fn distance_up_to_phase(&self, other: &SparseState) -> Result<f64, StateError> {
        if !self.layout.same_registers(&other.layout) {
            return Err(StateError::LayoutMismatch);
        }
        let other = if self.layout.registers() == other.layout.registers() {
            other.clone()
        } else {
            let order = self.layout.positions_in(&other.layout)?;
            other.permuted(&order)
        };
        let Some((anchor, a)) = self.terms.iter().max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr())) else {
            return Ok(if other.terms.is_empty() { 0.0 } else { f64::INFINITY });
        };
        let b = other.amplitude(anchor);
        if b.norm() < PRUNE_THRESHOLD {
            return Ok(a.norm().max(max_modulus(&other)));
        }
        let ratio = a / b;
        let phase = ratio / ratio.norm();
        let mut worst: f64 = 0.0;
        for (key, &amp) in &self.terms {
            worst = worst.max((amp - phase * other.amplitude(key)).norm());
        }
        for (key, &amp) in &other.terms {
            if !self.terms.contains_key(key) {
                worst = worst.max(amp.norm());
            }
        }
        Ok(worst)
    }

    /// The digit held by `reg` if it has the same value in every term.
    pub fn basis_digit(&self, reg: RegisterId) -> Result<Option<u64>, StateError> {
        let pos = self.layout.position(reg)?;
        let mut digits = self.terms.keys().map(|k| k[pos]);
        let first = digits.next();
        Ok(first.filter(|&d| digits.all(|x| x == d)))
    }

    /// Order-sensitive FNV-1a digest of layout, digits and amplitudes rounded to 1e-12.
    pub fn checksum(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(self.field().modulus());
        for id in self.layout.registers() {
            let (tag, a, b) = match *id {
                RegisterId::Local(i) => (1, i, 0),
                RegisterId::Common { dealer, slot } => (2, dealer, slot),
                RegisterId::Private(i) => (3, i, 0),
                RegisterId::Accumulator(i) => (4, i, 0),
            };
            feed(tag);
            feed(a as u64);
            feed(b as u64);
        }
        for (key, amp) in &self.terms {
            key.iter().for_each(|&d| feed(d));
            feed(libm::round(amp.re * 1e12) as i64 as u64);
            feed(libm::round(amp.im * 1e12) as i64 as u64);
        }
        h
    }
}

impl RegisterLayout {
    /// For each register of `self`, its position in `other`.
    fn positions_in(&self, other: &RegisterLayout) -> Result<Vec<usize>, StateError> {
        self.registers().iter().map(|&id| other.position(id)).collect()
    }
}

fn max_modulus(state: &SparseState) -> f64 {
    state.terms.values().map(|a| a.norm()).fold(0.0, f64::max)
}

fn normalize(terms: &mut BTreeMap<Vec<u64>, Amplitude>) {
    let norm = libm::sqrt(terms.values().map(|a| a.norm_sqr()).sum::<f64>());
    if norm > 0.0 {
        terms.values_mut().for_each(|a| *a /= norm);
    }
}

fn fixed12(x: f64) -> impl fmt::Display {
    struct Fixed(f64);
    impl fmt::Display for Fixed {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            // avoid printing "-0.000000000000"
            let v = if self.0.abs() < 5e-13 { 0.0 } else { self.0 };
            write!(f, "{v:.12}")
        }
    }
    Fixed(x)
}

/// Text dump: one line per term, `d0,d1,... re,im` with 12 decimals.
impl fmt::Display for SparseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, amp) in &self.terms {
            for (i, d) in key.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{d}")?;
            }
            writeln!(f, " {},{}", fixed12(amp.re), fixed12(amp.im))?;
        }
        Ok(())
    }
}
