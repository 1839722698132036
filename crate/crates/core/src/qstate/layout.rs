use alloc::vec::Vec;
use core::fmt;

use crate::gfq::PrimeField;

use super::StateError;

/// Name of one q-ary register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RegisterId {
    /// Participant `i`'s local register `R_i`.
    Local(usize),
    /// Common register `C_{dealer,slot}`: the share of `dealer`'s private
    /// state evaluated at the point of `slot`.
    Common { dealer: usize, slot: usize },
    /// A participant's private state before it is encoded.
    Private(usize),
    /// Scratch register that collects recovered private states.
    Accumulator(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegisterRole {
    Local,
    Common,
    Private,
    Accumulator,
}

impl RegisterId {
    pub fn role(self) -> RegisterRole {
        match self {
            RegisterId::Local(_) => RegisterRole::Local,
            RegisterId::Common { .. } => RegisterRole::Common,
            RegisterId::Private(_) => RegisterRole::Private,
            RegisterId::Accumulator(_) => RegisterRole::Accumulator,
        }
    }
}

impl fmt::Display for RegisterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegisterId::Local(i) => write!(f, "R{i}"),
            RegisterId::Common { dealer, slot } => write!(f, "C{dealer}.{slot}"),
            RegisterId::Private(i) => write!(f, "S{i}"),
            RegisterId::Accumulator(i) => write!(f, "A{i}"),
        }
    }
}

/// Ordered list of registers, all of dimension `q`.
///
/// The version counter increments whenever registers are added, removed,
/// relabeled or reordered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    field: PrimeField,
    registers: Vec<RegisterId>,
    version: u64,
}

impl RegisterLayout {
    pub fn new(field: PrimeField, registers: impl IntoIterator<Item = RegisterId>) -> Result<Self, StateError> {
        let registers: Vec<RegisterId> = registers.into_iter().collect();
        check_distinct(&registers)?;
        Ok(Self { field, registers, version: 0 })
    }

    pub fn empty(field: PrimeField) -> Self {
        Self { field, registers: Vec::new(), version: 0 }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn registers(&self) -> &[RegisterId] {
        &self.registers
    }

    pub fn contains(&self, id: RegisterId) -> bool {
        self.registers.contains(&id)
    }

    pub fn position(&self, id: RegisterId) -> Result<usize, StateError> {
        self.registers.iter().position(|&r| r == id).ok_or(StateError::UnknownRegister(id))
    }

    pub fn positions(&self, ids: &[RegisterId]) -> Result<Vec<usize>, StateError> {
        check_distinct(ids)?;
        ids.iter().map(|&id| self.position(id)).collect()
    }

    /// Same register set, ignoring order.
    pub fn same_registers(&self, other: &RegisterLayout) -> bool {
        self.field == other.field
            && self.len() == other.len()
            && self.registers.iter().all(|r| other.contains(*r))
    }

    pub(crate) fn with_appended(&self, ids: &[RegisterId]) -> Result<Self, StateError> {
        let mut registers = self.registers.clone();
        registers.extend_from_slice(ids);
        check_distinct(&registers)?;
        Ok(Self { field: self.field, registers, version: self.version + 1 })
    }

    pub(crate) fn without_position(&self, pos: usize) -> Self {
        let mut registers = self.registers.clone();
        registers.remove(pos);
        Self { field: self.field, registers, version: self.version + 1 }
    }

    pub(crate) fn with_registers(&self, registers: Vec<RegisterId>) -> Self {
        Self { field: self.field, registers, version: self.version + 1 }
    }
}

pub(crate) fn check_distinct(ids: &[RegisterId]) -> Result<(), StateError> {
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(StateError::DuplicateRegister(*id));
        }
    }
    Ok(())
}
