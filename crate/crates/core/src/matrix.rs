//! Dense complex matrices and a few helpers shared by the other modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex square matrix (3×3, 9×9, 81×81, ...).
pub type ComplexMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// `e^{-i phase}`.
#[inline]
pub fn phase(angle: f64) -> Complex64 {
    Complex64::from_polar(1.0, -angle)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Kronecker product with `a` acting on the most significant digits.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Largest entrywise modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `max |U^dagger U - 1|`.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &identity(n))
}

/// `max |H - H^dagger|`.
pub fn hermiticity_deviation(h: &ComplexMatrix) -> f64 {
    max_abs_diff(h, &h.adjoint())
}

/// Row-major sparse matrix as a list of `(row, col, value)` entries.
///
/// Used for the Lindblad generator, where every operator (Hamiltonian,
/// ladder and number operators) has only a few nonzeros per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseMatrix {
    pub fn from_dense(m: &ComplexMatrix, tolerance: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "sparse conversion expects a square matrix");
        let dim = m.nrows();
        let mut entries = Vec::new();
        for r in 0..dim {
            for c in 0..dim {
                let v = m[(r, c)];
                if v.norm() > tolerance {
                    entries.push((r, c, v));
                }
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        Self { dim: self.dim, entries }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// `out += scale * self * x`.
    pub fn mul_add_left(&self, x: &ComplexMatrix, scale: Complex64, out: &mut ComplexMatrix) {
        let n = x.ncols();
        for &(r, c, v) in &self.entries {
            let f = scale * v;
            for k in 0..n {
                out[(r, k)] += f * x[(c, k)];
            }
        }
    }

    /// `out += scale * x * self`.
    pub fn mul_add_right(&self, x: &ComplexMatrix, scale: Complex64, out: &mut ComplexMatrix) {
        let n = x.nrows();
        for &(r, c, v) in &self.entries {
            let f = scale * v;
            for k in 0..n {
                out[(k, c)] += f * x[(k, r)];
            }
        }
    }

    /// `out += scale * self * x * self^dagger`.
    pub fn sandwich_add(&self, x: &ComplexMatrix, scale: Complex64, out: &mut ComplexMatrix) {
        for &(r1, c1, v1) in &self.entries {
            let f = scale * v1;
            for &(r2, c2, v2) in &self.entries {
                out[(r1, r2)] += f * x[(c1, c2)] * v2.conj();
            }
        }
    }
}
