//! Polynomials, evaluation points and small dense matrices over `Z_q`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::gfq::{FieldElement, FieldError, PrimeField};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("evaluation point {0} appears more than once")]
    DuplicatePoint(u64),
    #[error("{count} evaluation points do not fit in a field of size {q}")]
    TooManyPoints { count: usize, q: u64 },
    #[error("coefficient vector must not be empty")]
    EmptyVector,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
}

/// Coefficients `c_0, ..., c_{l-1}` of `c_0 + c_1 t + ... + c_{l-1} t^{l-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoeffVector {
    field: PrimeField,
    coeffs: Vec<u64>,
}

impl CoeffVector {
    pub fn new(coeffs: &[FieldElement]) -> Result<Self, LinalgError> {
        let first = coeffs.first().ok_or(LinalgError::EmptyVector)?;
        let field = first.field();
        for c in coeffs {
            if c.field() != field {
                return Err(FieldError::ModulusMismatch { left: field.modulus(), right: c.field().modulus() }.into());
            }
        }
        Ok(Self { field, coeffs: coeffs.iter().map(|c| c.value()).collect() })
    }

    /// Builds from raw integers, reducing each modulo `q`.
    pub fn from_values(field: PrimeField, values: &[u64]) -> Result<Self, LinalgError> {
        if values.is_empty() {
            return Err(LinalgError::EmptyVector);
        }
        Ok(Self { field, coeffs: values.iter().map(|&v| v % field.modulus()).collect() })
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, i: usize) -> FieldElement {
        self.field.element(self.coeffs[i])
    }

    pub fn values(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = FieldElement> + '_ {
        self.coeffs.iter().map(|&v| self.field.element(v))
    }

    /// Horner evaluation of the polynomial at `t`.
    pub fn eval(&self, t: FieldElement) -> Result<FieldElement, LinalgError> {
        if t.field() != self.field {
            return Err(FieldError::ModulusMismatch { left: self.field.modulus(), right: t.field().modulus() }.into());
        }
        Ok(self.field.element(horner(self.field, &self.coeffs, t.value())))
    }
}

pub(crate) fn horner(field: PrimeField, coeffs: &[u64], t: u64) -> u64 {
    coeffs.iter().rev().fold(0, |acc, &c| field.add_raw(field.mul_raw(acc, t), c))
}

/// Pairwise distinct evaluation points `x_0, ..., x_{n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EvalPoints {
    field: PrimeField,
    points: Vec<u64>,
}

impl EvalPoints {
    pub fn new(field: PrimeField, points: &[u64]) -> Result<Self, LinalgError> {
        if points.len() as u128 > field.modulus() as u128 {
            return Err(LinalgError::TooManyPoints { count: points.len(), q: field.modulus() });
        }
        let reduced: Vec<u64> = points.iter().map(|&p| p % field.modulus()).collect();
        for (i, p) in reduced.iter().enumerate() {
            if reduced[..i].contains(p) {
                return Err(LinalgError::DuplicatePoint(*p));
            }
        }
        Ok(Self { field, points: reduced })
    }

    /// The canonical choice `x_i = i`.
    pub fn canonical(field: PrimeField, count: usize) -> Result<Self, LinalgError> {
        let points: Vec<u64> = (0..count as u64).collect();
        Self::new(field, &points)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, i: usize) -> FieldElement {
        self.field.element(self.points[i])
    }

    pub fn values(&self) -> &[u64] {
        &self.points
    }

    /// Points at the given positions, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self, LinalgError> {
        let picked: Vec<u64> = indices.iter().map(|&i| self.points[i]).collect();
        Self::new(self.field, &picked)
    }

    /// Appends the smallest field elements not yet used until `count` points exist.
    pub fn extended_to(&self, count: usize) -> Result<Self, LinalgError> {
        if count as u128 > self.field.modulus() as u128 {
            return Err(LinalgError::TooManyPoints { count, q: self.field.modulus() });
        }
        let mut points = self.points.clone();
        let mut candidate = 0;
        while points.len() < count {
            if !points.contains(&candidate) {
                points.push(candidate);
            }
            candidate += 1;
        }
        Ok(Self { field: self.field, points })
    }
}

/// Dense row-major matrix over `Z_q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatrixFq {
    field: PrimeField,
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
}

impl MatrixFq {
    pub fn from_rows(field: PrimeField, rows: &[&[u64]]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(LinalgError::DimensionMismatch { expected: cols, actual: row.len() });
            }
            entries.extend(row.iter().map(|&v| v % field.modulus()));
        }
        Ok(Self { field, rows: rows.len(), cols, entries })
    }

    pub fn identity(field: PrimeField, size: usize) -> Self {
        let mut entries = vec![0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1 % field.modulus();
        }
        Self { field, rows: size, cols: size, entries }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub(crate) fn raw(&self, r: usize, c: usize) -> u64 {
        self.entries[r * self.cols + c]
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.field.element(self.raw(r, c))
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul(&self, rhs: &MatrixFq) -> Result<MatrixFq, LinalgError> {
        if self.field != rhs.field {
            return Err(FieldError::ModulusMismatch { left: self.field.modulus(), right: rhs.field.modulus() }.into());
        }
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch { expected: self.cols, actual: rhs.rows });
        }
        let f = self.field;
        let mut entries = vec![0; self.rows * rhs.cols];
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                entries[i * rhs.cols + j] =
                    (0..self.cols).fold(0, |acc, t| f.add_raw(acc, f.mul_raw(self.raw(i, t), rhs.raw(t, j))));
            }
        }
        Ok(MatrixFq { field: f, rows: self.rows, cols: rhs.cols, entries })
    }

    /// Gauss-Jordan inverse; pivots on the first nonzero entry of each column.
    pub fn invert(&self) -> Result<MatrixFq, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let f = self.field;
        let n = self.rows;
        let w = 2 * n;
        let mut aug = vec![0u64; n * w];
        for i in 0..n {
            aug[i * w..i * w + n].copy_from_slice(self.row(i));
            aug[i * w + n + i] = 1 % f.modulus();
        }
        for col in 0..n {
            let pivot = (col..n).find(|&r| aug[r * w + col] != 0).ok_or(LinalgError::Singular)?;
            if pivot != col {
                for j in 0..w {
                    aug.swap(pivot * w + j, col * w + j);
                }
            }
            let inv = f.element(aug[col * w + col]).inv()?.value();
            for j in 0..w {
                aug[col * w + j] = f.mul_raw(aug[col * w + j], inv);
            }
            for r in (0..n).filter(|&r| r != col) {
                let factor = aug[r * w + col];
                if factor == 0 {
                    continue;
                }
                for j in 0..w {
                    let sub = f.mul_raw(factor, aug[col * w + j]);
                    aug[r * w + j] = f.sub_raw(aug[r * w + j], sub);
                }
            }
        }
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            entries.extend_from_slice(&aug[i * w + n..(i + 1) * w]);
        }
        Ok(MatrixFq { field: f, rows: n, cols: n, entries })
    }

    /// Row-vector product `y M` on raw digits. Caller guarantees `y.len() == rows`.
    pub(crate) fn row_mul_raw(&self, y: &[u64], out: &mut [u64]) {
        let f = self.field;
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = y.iter().enumerate().fold(0, |acc, (i, &yi)| f.add_raw(acc, f.mul_raw(yi, self.raw(i, j))));
        }
    }
}

impl fmt::Display for MatrixFq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row = self.row(r);
            write!(f, "[")?;
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{v}")?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Evaluates `p_c(t)`.
pub fn poly_eval(c: &CoeffVector, t: FieldElement) -> Result<FieldElement, LinalgError> {
    c.eval(t)
}

/// The `l x l` Vandermonde matrix with entry `(i, j) = z_j^i`.
pub fn vandermonde(points: &EvalPoints) -> MatrixFq {
    let f = points.field();
    let l = points.len();
    let mut entries = vec![0; l * l];
    for (j, &z) in points.values().iter().enumerate() {
        let mut power = 1 % f.modulus();
        for i in 0..l {
            entries[i * l + j] = power;
            power = f.mul_raw(power, z);
        }
    }
    MatrixFq { field: f, rows: l, cols: l, entries }
}

pub fn invert(m: &MatrixFq) -> Result<MatrixFq, LinalgError> {
    m.invert()
}

/// Row-vector times matrix, `y M`.
pub fn row_vec_mul(y: &CoeffVector, m: &MatrixFq) -> Result<CoeffVector, LinalgError> {
    if y.field() != m.field() {
        return Err(FieldError::ModulusMismatch { left: y.field().modulus(), right: m.field().modulus() }.into());
    }
    if y.len() != m.rows() {
        return Err(LinalgError::DimensionMismatch { expected: m.rows(), actual: y.len() });
    }
    let mut out = vec![0; m.cols()];
    m.row_mul_raw(y.values(), &mut out);
    Ok(CoeffVector { field: y.field(), coeffs: out })
}
