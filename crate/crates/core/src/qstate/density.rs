use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

/// Dense `d x d` density matrix of a subsystem, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    /// `I / d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        m
    }

    /// `|psi><psi|` for a dense amplitude vector.
    pub fn pure(psi: &[Complex64]) -> Self {
        let dim = psi.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.entries[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.dim + c]
    }

    #[inline]
    pub(crate) fn add_at(&mut self, r: usize, c: usize, v: Complex64) {
        self.entries[r * self.dim + c] += v;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `Tr(rho^2)`; for Hermitian input this is the sum of squared moduli.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entry-wise modulus of `self - other`; infinite on dimension mismatch.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (i..self.dim).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= tol))
    }

    /// Eigenvalues in ascending order, by cyclic Jacobi on the real
    /// `2d x 2d` embedding `[[A, -B], [B, A]]` of `A + iB`.
    ///
    /// Cubic in `d`; intended for the small subsystems used in checks.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let n = 2 * d;
        let mut a = vec![0.0f64; n * n];
        for i in 0..d {
            for j in 0..d {
                let z = self.get(i, j);
                a[i * n + j] = z.re;
                a[(i + d) * n + (j + d)] = z.re;
                a[i * n + (j + d)] = -z.im;
                a[(i + d) * n + j] = z.im;
            }
        }
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum();
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut doubled: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        doubled.sort_by(f64::total_cmp);
        doubled.into_iter().step_by(2).collect()
    }

    /// Hermitian, unit trace and positive semidefinite, each within `tol`.
    pub fn is_valid_state(&self, tol: f64) -> bool {
        self.is_hermitian(tol)
            && (self.trace() - Complex64::new(1.0, 0.0)).norm() <= tol
            && self.eigenvalues().iter().all(|&e| e >= -tol)
    }
}
