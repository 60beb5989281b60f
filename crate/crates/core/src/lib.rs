//! Inverse design of deterministic two-qubit gates in four-channel, weakly
//! nonlinear photonic interferometers.
//!
//! Two photons in dual-rail encoding propagate through a sequence of sectors.
//! Each sector is either free propagation (linear and Kerr phases only) or a
//! hopping region that evanescently couples two neighbouring channels. The
//! hopping rates of every block are optimized so that the circuit acts as a
//! target gate (CNOT or Mølmer-Sørensen) on the computational subspace.
//!
//! Module map:
//!
//! * [`fockspace`]: truncated Fock basis, index mapping and dual-rail encoding.
//! * [`layers`]: closed-form free-propagation and hopping-region propagators.
//! * [`circuit`]: four-channel layer assembly, blocks and total propagator.
//! * [`objective`]: targets, cost, average gate fidelity, leakage, gradients.
//! * [`optimizer`]: L-BFGS-B with Gaussian multi-restart.
//! * [`lindblad`]: open-system validation with loss, thermal noise and dephasing.
//! * [`robustness`]: Monte Carlo over static parameter fluctuations.

pub mod circuit;
pub mod error;
pub mod fockspace;
pub mod layers;
pub mod lindblad;
pub mod matrix;
pub mod objective;
pub mod ode;
pub mod optimizer;
pub mod robustness;

pub use error::{Error, Result};
pub use matrix::ComplexMatrix;
pub use num_complex::Complex64;
