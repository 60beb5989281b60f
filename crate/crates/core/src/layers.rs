//! Closed-form sector propagators.
//!
//! A free-propagation sector acts on one channel with the diagonal 3×3
//! propagator `diag(1, e^{-iωt}, e^{-2i(U+ω)t})`. A hopping region couples two
//! neighbouring channels; its 9×9 propagator is block diagonal in the total
//! photon number:
//!
//! ```text
//!   n = 1  {|0,1>, |1,0>}          E, F    (a rotation RX(2Jt) times e^{-iωt})
//!   n = 2  {|0,2>, |1,1>, |2,0>}   A, B, C, D
//!   n = 3  {|1,2>, |2,1>}          G, H    (truncated at two photons per channel)
//!   n = 4  {|2,2>}                 I
//! ```
//!
//! with `Ω = sqrt(4J² + U²)` and `φ = U + 2ω`. The `n = 3, 4` coefficients are
//! the exact exponentials of the Hamiltonian truncated to the `{0,1,2}`
//! single-channel basis. They never matter for two injected photons.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::FockBasis;
use crate::matrix::{self, phase, ComplexMatrix, I, ONE, ZERO};

/// Below this value of `Ω t` the ratio `sin(Ω t)/Ω` is replaced by its limit `t`.
const SINC_SERIES_THRESHOLD: f64 = 1e-8;
/// Below this value of `Ω t` the derivative kernel uses its Taylor expansion.
const DERIV_SERIES_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpLayerParams {
    pub omega: f64,
    pub u: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrLayerParams {
    pub omega: f64,
    pub u: f64,
    pub j: f64,
    pub t: f64,
}

impl HrLayerParams {
    pub fn free_part(&self) -> FpLayerParams {
        FpLayerParams { omega: self.omega, u: self.u, t: self.t }
    }
}

pub fn u_fp(p: &FpLayerParams) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(3, 3);
    m[(0, 0)] = ONE;
    m[(1, 1)] = phase(p.omega * p.t);
    m[(2, 2)] = phase(2.0 * (p.u + p.omega) * p.t);
    m
}

/// The nine distinct entries of the hopping-region propagator (or of its
/// derivative with respect to `J`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrCoefficients {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    pub e: Complex64,
    pub f: Complex64,
    pub g: Complex64,
    pub h: Complex64,
    pub i: Complex64,
    /// Vacuum entry: 1 for the propagator, 0 for its derivative.
    pub vacuum: Complex64,
}

impl HrCoefficients {
    pub fn to_matrix(&self) -> ComplexMatrix {
        // index(a, b) = 3a + b
        let mut m = ComplexMatrix::zeros(9, 9);
        m[(0, 0)] = self.vacuum;
        // |0,1> = 1, |1,0> = 3
        m[(1, 1)] = self.e;
        m[(3, 3)] = self.e;
        m[(1, 3)] = self.f;
        m[(3, 1)] = self.f;
        // |0,2> = 2, |1,1> = 4, |2,0> = 6
        m[(4, 4)] = self.a;
        for k in [2, 6] {
            m[(4, k)] = self.b;
            m[(k, 4)] = self.b;
            m[(k, k)] = self.c;
        }
        m[(2, 6)] = self.d;
        m[(6, 2)] = self.d;
        // |1,2> = 5, |2,1> = 7
        m[(5, 5)] = self.g;
        m[(7, 7)] = self.g;
        m[(5, 7)] = self.h;
        m[(7, 5)] = self.h;
        m[(8, 8)] = self.i;
        m
    }
}

/// `sin(Ω t) / Ω`, continuous through `Ω = 0`.
fn sin_over(omega_big: f64, t: f64) -> f64 {
    if (omega_big * t).abs() < SINC_SERIES_THRESHOLD {
        t
    } else {
        (omega_big * t).sin() / omega_big
    }
}

/// `d/dΩ [sin(Ω t)/Ω] / Ω = (t cos Ωt - sin(Ωt)/Ω) / Ω²`.
fn sin_over_derivative_kernel(omega_big: f64, t: f64) -> f64 {
    let x = omega_big * t;
    if x.abs() < DERIV_SERIES_THRESHOLD {
        let t3 = t * t * t;
        -t3 / 3.0 + omega_big * omega_big * t3 * t * t / 30.0
    } else {
        (t * x.cos() - x.sin() / omega_big) / (omega_big * omega_big)
    }
}

pub fn hr_coefficients(p: &HrLayerParams) -> HrCoefficients {
    let HrLayerParams { omega, u, j, t } = *p;
    let big = (4.0 * j * j + u * u).sqrt();
    let s = sin_over(big, t);
    let c = (big * t).cos();
    let two_photon = phase((u + 2.0 * omega) * t);
    let single = phase(omega * t);
    let three = phase((3.0 * omega + 2.0 * u) * t);
    let kerr = phase(u * t);

    let sym = Complex64::new(c, -u * s) * 0.5;
    HrCoefficients {
        a: Complex64::new(c, u * s) * two_photon,
        b: Complex64::new(0.0, -(2f64.sqrt()) * j * s) * two_photon,
        c: (sym + kerr * 0.5) * two_photon,
        d: (sym - kerr * 0.5) * two_photon,
        e: single * (j * t).cos(),
        f: single * Complex64::new(0.0, -(j * t).sin()),
        g: three * (2.0 * j * t).cos(),
        h: three * Complex64::new(0.0, -(2.0 * j * t).sin()),
        i: phase(4.0 * (omega + u) * t),
        vacuum: ONE,
    }
}

pub fn u_hr(p: &HrLayerParams) -> ComplexMatrix {
    hr_coefficients(p).to_matrix()
}

/// `∂/∂J` of every entry of [`u_hr`] at fixed `ω, U, t`.
pub fn d_hr_coefficients_dj(p: &HrLayerParams) -> HrCoefficients {
    let HrLayerParams { omega, u, j, t } = *p;
    let big = (4.0 * j * j + u * u).sqrt();
    let s = sin_over(big, t);
    // dΩ/dJ = 4J/Ω, folded into the kernels below so Ω = 0 stays regular.
    let ds = 4.0 * j * sin_over_derivative_kernel(big, t);
    let dc = -4.0 * j * t * s;
    let two_photon = phase((u + 2.0 * omega) * t);
    let single = phase(omega * t);
    let three = phase((3.0 * omega + 2.0 * u) * t);

    let dsym = Complex64::new(dc, -u * ds) * 0.5;
    HrCoefficients {
        a: Complex64::new(dc, u * ds) * two_photon,
        b: Complex64::new(0.0, -(2f64.sqrt()) * (s + j * ds)) * two_photon,
        c: dsym * two_photon,
        d: dsym * two_photon,
        e: single * (-t * (j * t).sin()),
        f: single * Complex64::new(0.0, -t * (j * t).cos()),
        g: three * (-2.0 * t * (2.0 * j * t).sin()),
        h: three * Complex64::new(0.0, -2.0 * t * (2.0 * j * t).cos()),
        i: ZERO,
        vacuum: ZERO,
    }
}

pub fn d_u_hr_dj(p: &HrLayerParams) -> ComplexMatrix {
    d_hr_coefficients_dj(p).to_matrix()
}

/// Single-channel Hamiltonian `ω n + U a†² a²` on `{|0>, |1>, |2>}`.
pub fn hamiltonian_fp(p: &FpLayerParams) -> ComplexMatrix {
    let basis = FockBasis::new(1, 2).expect("valid basis");
    onsite_hamiltonian(&basis, p.omega, p.u)
}

/// Two-channel Hamiltonian `Σ (ω n_k + U a_k†² a_k²) + J (a_1† a_2 + a_2† a_1)`.
pub fn hamiltonian_hr(p: &HrLayerParams) -> ComplexMatrix {
    let basis = FockBasis::two_channel();
    onsite_hamiltonian(&basis, p.omega, p.u) + hopping_term(&basis, 0, 1) * Complex64::new(p.j, 0.0)
}

/// `Σ_k (ω n_k + U a_k†² a_k²)` over every channel of `basis`.
pub fn onsite_hamiltonian(basis: &FockBasis, omega: f64, u: f64) -> ComplexMatrix {
    let dim = basis.dimension();
    let mut h = ComplexMatrix::zeros(dim, dim);
    for k in 0..basis.channels() {
        let a = basis.annihilation(k);
        let ad = a.adjoint();
        let n = &ad * &a;
        let pair = &ad * &ad * &a * &a;
        h += n * Complex64::new(omega, 0.0) + pair * Complex64::new(u, 0.0);
    }
    h
}

/// `a_i† a_k + a_k† a_i` on the truncated basis.
pub fn hopping_term(basis: &FockBasis, i: usize, k: usize) -> ComplexMatrix {
    let ai = basis.annihilation(i);
    let ak = basis.annihilation(k);
    ai.adjoint() * &ak + ak.adjoint() * &ai
}

/// Tolerance on `max |H - H†|` accepted by [`expm_oracle`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// `exp(-i H t)` through the eigendecomposition of the Hermitian `H`.
///
/// Independent of the closed forms above; used to check them.
pub fn expm_oracle(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    let dev = matrix::hermiticity_deviation(h);
    if dev > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian(dev));
    }
    let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let v = &eig.eigenvectors;
    let phases = ComplexMatrix::from_diagonal(&eig.eigenvalues.map(|lambda| phase(lambda * t)));
    Ok(v * phases * v.adjoint())
}

/// `RX(θ) = cos(θ/2) 1 - i sin(θ/2) σ_x`.
pub fn rx(theta: f64) -> ComplexMatrix {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = -I * (theta / 2.0).sin();
    ComplexMatrix::from_row_slice(2, 2, &[c, s, s, c])
}
