//! Open-system evolution of a circuit under particle loss, thermal excitation
//! and pure dephasing:
//!
//! ```text
//! dρ/dt = -i[H, ρ] + γ₋ Σ_j D[a_j]ρ + γ₊ Σ_j D[a_j†]ρ + γ_deph Σ_j D[n_j]ρ
//! D[O]ρ = O ρ O† - ½{O†O, ρ}
//! ```
//!
//! The equation is integrated sector by sector with the sector Hamiltonian
//! held constant. Operators are applied in sparse form. `a_j†a_j` and
//! `a_j a_j†` are diagonal in the Fock basis, so every anticommutator term and
//! the whole dephasing dissipator reduce to an entrywise damping of ρ.
//!
//! Without thermal excitation the photon number never increases, so the
//! states with at most `n_max` photons (the largest number present in ρ₀)
//! form an invariant subspace. Integration is then restricted to it and the
//! result is embedded back into the 81×81 matrix.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{self, CircuitSpec};
use crate::error::{Error, Result};
use crate::fockspace::{logical_to_fock, FockBasis, LogicalState};
use crate::matrix::{self, ComplexMatrix, SparseMatrix, ONE, ZERO};
use crate::objective::TargetGate;
use crate::ode::{dopri5, Dopri5Config};

/// Photons carried by a dual-rail two-qubit input.
pub const LOGICAL_PHOTONS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub gamma: f64,
    pub gamma_deph: f64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_omega_physical")]
    pub omega_physical: f64,
}

fn default_omega_physical() -> f64 {
    1.0
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { gamma: 0.0, gamma_deph: 0.0, temperature: 0.0, omega_physical: default_omega_physical() }
    }
}

impl NoiseConfig {
    /// Rates given in units of `γ0 = 1/t_tot` of `spec`.
    pub fn relative(spec: &CircuitSpec, gamma_over_gamma0: f64, gamma_deph_over_gamma0: f64) -> Self {
        let g0 = gamma0(spec);
        Self { gamma: gamma_over_gamma0 * g0, gamma_deph: gamma_deph_over_gamma0 * g0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("gamma_deph", self.gamma_deph), ("temperature", self.temperature)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.omega_physical > 0.0) {
            return Err(Error::Domain(format!("omega_physical must be positive, got {}", self.omega_physical)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tolerance: f64,
    pub abs_tolerance: f64,
    #[serde(default)]
    pub initial_step: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tolerance: 1e-8, abs_tolerance: 1e-10, initial_step: None, max_step: None }
    }
}

/// `γ0 = 1 / t_tot`.
pub fn gamma0(spec: &CircuitSpec) -> f64 {
    1.0 / spec.total_time()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        Ok(Self { matrix })
    }

    /// `|ψ><ψ|` for a normalized `ψ`.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        check_normalized(psi)?;
        Ok(Self { matrix: psi * psi.adjoint() })
    }

    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dimension: dim });
        }
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Ok(Self { matrix: m })
    }

    pub fn logical(state: LogicalState) -> Self {
        let basis = FockBasis::four_channel();
        let idx = basis.index_of(&logical_to_fock(state)).expect("logical states fit the cutoff");
        Self::basis_state(basis.dimension(), idx).expect("in range")
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        matrix::hermiticity_deviation(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest total photon number carried by any nonzero entry.
    fn max_photons(&self, basis: &FockBasis) -> u32 {
        let numbers = basis.photon_numbers();
        let mut n = 0;
        for c in 0..self.dim() {
            for r in 0..self.dim() {
                let z = self.matrix[(r, c)];
                if z.re != 0.0 || z.im != 0.0 {
                    n = n.max(numbers[r]).max(numbers[c]);
                }
            }
        }
        n
    }
}

fn check_normalized(psi: &DVector<Complex64>) -> Result<()> {
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(())
}

/// Bose-Einstein occupation `1/(e^{ω/T} - 1)`, exactly zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    if temperature < 0.0 {
        return Err(Error::Domain(format!("temperature must be non-negative, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// `(γ₋, γ₊) = (γ (n_B + 1), γ n_B)`.
pub fn thermal_rates(config: &NoiseConfig) -> Result<(f64, f64)> {
    let nb = bose_occupation(config.omega_physical, config.temperature)?;
    Ok((config.gamma * (nb + 1.0), config.gamma * nb))
}

/// The dissipative part of the generator on a subset of basis states.
#[derive(Debug, Clone)]
struct Dissipator {
    dim: usize,
    lowering: Vec<SparseMatrix>,
    raising: Vec<SparseMatrix>,
    gamma_minus: f64,
    gamma_plus: f64,
    /// Entrywise damping of ρ (column-major), from every diagonal term.
    damping: Vec<f64>,
}

impl Dissipator {
    fn new(basis: &FockBasis, support: &[usize], noise: &NoiseConfig) -> Result<Self> {
        noise.validate()?;
        let (gamma_minus, gamma_plus) = thermal_rates(noise)?;
        let dim = support.len();
        let restrict = |m: &ComplexMatrix| ComplexMatrix::from_fn(dim, dim, |r, c| m[(support[r], support[c])]);
        let mut lowering = Vec::new();
        let mut raising = Vec::new();
        let mut n_diag = vec![vec![0.0; dim]; basis.channels()];
        let mut m_sum = vec![0.0; dim];
        for j in 0..basis.channels() {
            let a = basis.annihilation(j);
            let ad = a.adjoint();
            let n = &ad * &a;
            let m = &a * &ad;
            for (k, &s) in support.iter().enumerate() {
                n_diag[j][k] = n[(s, s)].re;
                m_sum[k] += m[(s, s)].re;
            }
            lowering.push(SparseMatrix::from_dense(&restrict(&a), 0.0));
            raising.push(SparseMatrix::from_dense(&restrict(&ad), 0.0));
        }
        let n_sum: Vec<f64> = (0..dim).map(|k| n_diag.iter().map(|v| v[k]).sum()).collect();
        let mut damping = vec![0.0; dim * dim];
        for c in 0..dim {
            for r in 0..dim {
                let deph: f64 = n_diag.iter().map(|v| (v[r] - v[c]).powi(2)).sum();
                damping[r + c * dim] = 0.5 * gamma_minus * (n_sum[r] + n_sum[c])
                    + 0.5 * gamma_plus * (m_sum[r] + m_sum[c])
                    + 0.5 * noise.gamma_deph * deph;
            }
        }
        Ok(Self { dim, lowering, raising, gamma_minus, gamma_plus, damping })
    }

    /// `out = L(ρ)` for column-major `rho` and Hamiltonian `h` on the same support.
    fn apply(&self, h: &SparseMatrix, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        for (o, (x, g)) in out.iter_mut().zip(rho.iter().zip(&self.damping)) {
            *o = -x * *g;
        }
        let minus_i = Complex64::new(0.0, -1.0);
        for &(r, c, v) in h.entries() {
            let f = minus_i * v;
            for k in 0..d {
                // -i H ρ
                out[r + k * d] += f * rho[c + k * d];
                // +i ρ H
                out[k + c * d] -= f * rho[k + r * d];
            }
        }
        for (ops, rate) in [(&self.lowering, self.gamma_minus), (&self.raising, self.gamma_plus)] {
            if rate == 0.0 {
                continue;
            }
            for op in ops.iter() {
                for &(r1, c1, v1) in op.entries() {
                    let f = v1 * rate;
                    for &(r2, c2, v2) in op.entries() {
                        out[r1 + r2 * d] += f * rho[c1 + c2 * d] * v2.conj();
                    }
                }
            }
        }
    }
}

/// `dρ/dt` for a constant Hamiltonian `h` on the full basis of `rho`.
pub fn liouvillian_apply(rho: &DensityMatrix, h: &ComplexMatrix, config: &NoiseConfig) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if h.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: h.nrows() });
    }
    let basis = basis_for_dimension(dim)?;
    let support: Vec<usize> = (0..dim).collect();
    let diss = Dissipator::new(&basis, &support, config)?;
    let hs = SparseMatrix::from_dense(h, 0.0);
    let mut out = vec![ZERO; dim * dim];
    diss.apply(&hs, rho.matrix.as_slice(), &mut out);
    DensityMatrix::new(ComplexMatrix::from_vec(dim, dim, out))
}

/// The cutoff-2 basis whose dimension is `dim` (`3^channels`).
fn basis_for_dimension(dim: usize) -> Result<FockBasis> {
    let mut channels = 0;
    let mut d = 1;
    while d < dim {
        d *= 3;
        channels += 1;
    }
    if d != dim || channels == 0 {
        return Err(Error::Domain(format!("dimension {dim} is not a power of 3")));
    }
    FockBasis::new(channels, 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenEvolution {
    pub rho: DensityMatrix,
    /// Number of basis states the integration actually ran on.
    pub support_dimension: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Largest `|Tr ρ - 1|` seen at the sector boundaries.
    pub max_trace_deviation: f64,
}

/// Name of the embedded pair, recorded in result metadata.
pub const INTEGRATOR_NAME: &str = "dormand-prince-5(4)";

/// Integrates ρ0 through every sector of `spec`; see the module docs.
pub fn evolve_circuit_open(
    rho0: &DensityMatrix,
    spec: &CircuitSpec,
    noise: &NoiseConfig,
    integ: &IntegratorConfig,
) -> Result<DensityMatrix> {
    evolve_circuit_open_traced(rho0, spec, noise, integ).map(|e| e.rho)
}

pub fn evolve_circuit_open_traced(
    rho0: &DensityMatrix,
    spec: &CircuitSpec,
    noise: &NoiseConfig,
    integ: &IntegratorConfig,
) -> Result<OpenEvolution> {
    evolve_on_support(rho0, spec, noise, integ, false)
}

fn evolve_on_support(
    rho0: &DensityMatrix,
    spec: &CircuitSpec,
    noise: &NoiseConfig,
    integ: &IntegratorConfig,
    force_full: bool,
) -> Result<OpenEvolution> {
    spec.validate()?;
    noise.validate()?;
    let basis = FockBasis::four_channel();
    if rho0.dim() != basis.dimension() {
        return Err(Error::DimensionMismatch { expected: basis.dimension(), found: rho0.dim() });
    }
    let (_, gamma_plus) = thermal_rates(noise)?;
    let support: Vec<usize> = if force_full || gamma_plus > 0.0 {
        (0..basis.dimension()).collect()
    } else {
        let n_max = rho0.max_photons(&basis);
        let numbers = basis.photon_numbers();
        (0..basis.dimension()).filter(|&i| numbers[i] <= n_max).collect()
    };
    let dim = support.len();
    let diss = Dissipator::new(&basis, &support, noise)?;

    let mut state: Vec<Complex64> =
        ComplexMatrix::from_fn(dim, dim, |r, c| rho0.matrix[(support[r], support[c])]).as_slice().to_vec();

    let t_tot = spec.total_time();
    let mut cfg = Dopri5Config {
        rel_tolerance: integ.rel_tolerance,
        abs_tolerance: integ.abs_tolerance,
        initial_step: integ.initial_step,
        max_step: integ.max_step,
        min_step: 1e-12 * t_tot,
    };
    let mut result = OpenEvolution {
        rho: rho0.clone(),
        support_dimension: dim,
        accepted_steps: 0,
        rejected_steps: 0,
        rhs_evaluations: 0,
        max_trace_deviation: 0.0,
    };
    let mut elapsed = 0.0;
    for (index, sector) in spec.sectors().enumerate() {
        let h_full = circuit::sector_hamiltonian(sector.tag, &spec.blocks[sector.block], spec);
        let h = SparseMatrix::from_dense(&ComplexMatrix::from_fn(dim, dim, |r, c| h_full[(support[r], support[c])]), 0.0);
        let stats = dopri5(|_, y, dy| diss.apply(&h, y, dy), 0.0, sector.duration, &mut state, &cfg)
            .map_err(|u| Error::StepUnderflow { sector: index, time: elapsed + u.time, step: u.step })?;
        elapsed += sector.duration;
        result.accepted_steps += stats.accepted;
        result.rejected_steps += stats.rejected;
        result.rhs_evaluations += stats.evaluations;
        if stats.next_step > 0.0 {
            cfg.initial_step = Some(stats.next_step);
        }
        let trace: Complex64 = (0..dim).map(|k| state[k + k * dim]).sum();
        result.max_trace_deviation = result.max_trace_deviation.max((trace - ONE).norm());
        if state.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { what: "density matrix", evaluation: index });
        }
    }

    let mut out = ComplexMatrix::zeros(basis.dimension(), basis.dimension());
    for c in 0..dim {
        for r in 0..dim {
            out[(support[r], support[c])] = state[r + c * dim];
        }
    }
    result.rho = DensityMatrix { matrix: out };
    Ok(result)
}

/// `<ψ|ρ|ψ>` for a normalized pure target.
pub fn state_fidelity(rho: &DensityMatrix, pure_target: &DVector<Complex64>) -> Result<f64> {
    if pure_target.len() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: pure_target.len() });
    }
    check_normalized(pure_target)?;
    let v = (pure_target.adjoint() * &rho.matrix * pure_target)[(0, 0)];
    Ok(v.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub f0: f64,
    pub rate: f64,
    pub max_residual: f64,
}

/// Least-squares fit of `F = F0 e^{-r x}` in log space.
pub fn decay_fit(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 3 {
        return Err(Error::Domain(format!("decay fit needs at least 3 samples, got {}", samples.len())));
    }
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("decay fit abscissae must be distinct".into()));
    }
    if let Some(&(x, f)) = samples.iter().find(|s| !(s.1 > 0.0)) {
        return Err(Error::Domain(format!("non-positive fidelity {f} at x = {x}")));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let f0 = (my - slope * mx).exp();
    let rate = -slope;
    let max_residual = samples.iter().map(|&(x, f)| ((f0 * (-rate * x).exp() - f) / f).abs()).fold(0.0, f64::max);
    Ok(DecayFit { f0, rate, max_residual })
}

/// `T|input>` embedded in the 81-state basis.
pub fn ideal_output(target: &TargetGate, input: LogicalState) -> DVector<Complex64> {
    let basis = FockBasis::four_channel();
    let mut psi = DVector::zeros(basis.dimension());
    for out in LogicalState::ALL {
        let idx = basis.index_of(&logical_to_fock(out)).expect("logical state fits");
        psi[idx] = target.matrix[(out.position(), input.position())];
    }
    psi
}

/// Fidelity of the open-system output with the ideal gate output, per input of S.
pub fn open_gate_fidelities(
    spec: &CircuitSpec,
    target: &TargetGate,
    noise: &NoiseConfig,
    integ: &IntegratorConfig,
) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for input in LogicalState::ALL {
        let rho = evolve_circuit_open(&DensityMatrix::logical(input), spec, noise, integ)?;
        out[input.position()] = state_fidelity(&rho, &ideal_output(target, input))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma_over_gamma0: f64,
    pub gamma_deph_over_gamma0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma_over_gamma0: f64,
    pub gamma_deph_over_gamma0: f64,
    /// Logical input label (`00`, `01`, `10`, `11`) or `avg` for the mean over S.
    pub input_state: String,
    pub raw_fidelity: f64,
    /// `raw · e^{2γ/γ0}`: the fidelity with the two-photon survival factored out.
    pub rescaled_fidelity: f64,
}

/// Evaluates every point (in parallel) and returns five rows per point, in point order.
pub fn noise_sweep(
    spec: &CircuitSpec,
    target: &TargetGate,
    points: &[SweepPoint],
    temperature: f64,
    omega_physical: f64,
    integ: &IntegratorConfig,
) -> Result<Vec<SweepRow>> {
    let per_point: Vec<Vec<SweepRow>> = points
        .par_iter()
        .map(|p| {
            let noise = NoiseConfig {
                temperature,
                omega_physical,
                ..NoiseConfig::relative(spec, p.gamma_over_gamma0, p.gamma_deph_over_gamma0)
            };
            let fids = open_gate_fidelities(spec, target, &noise, integ)?;
            let survival = (LOGICAL_PHOTONS * p.gamma_over_gamma0).exp();
            let row = |label: String, f: f64| SweepRow {
                gamma_over_gamma0: p.gamma_over_gamma0,
                gamma_deph_over_gamma0: p.gamma_deph_over_gamma0,
                input_state: label,
                raw_fidelity: f,
                rescaled_fidelity: f * survival,
            };
            let mut rows: Vec<SweepRow> = LogicalState::ALL.iter().map(|s| row(s.label(), fids[s.position()])).collect();
            rows.push(row("avg".into(), fids.iter().sum::<f64>() / 4.0));
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{total_unitary, BlockParams, LayerTag};
    use crate::matrix::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(rng: &mut ChaCha8Rng, blocks: usize) -> CircuitSpec {
        let mut spec = CircuitSpec::new(blocks, 0.5);
        for b in &mut spec.blocks {
            *b = BlockParams::from_slice(&(0..5).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>());
        }
        spec
    }

    fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
        let a = ComplexMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::new(m / tr).unwrap()
    }

    #[test]
    fn bose_examples() {
        assert_eq!(bose_occupation(1.0, 0.0).unwrap(), 0.0);
        assert!((bose_occupation(2f64.ln(), 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((bose_occupation(10.0, 1.0).unwrap() - 1.0 / (10f64.exp() - 1.0)).abs() < 1e-18);
        assert!(bose_occupation(0.0, 1.0).is_err());
        assert!(bose_occupation(-1.0, 1.0).is_err());
    }

    #[test]
    fn rate_examples() {
        let cfg = NoiseConfig { gamma: 0.3, ..Default::default() };
        assert_eq!(thermal_rates(&cfg).unwrap(), (0.3, 0.0));
        let cfg = NoiseConfig { gamma: 0.3, temperature: 1.0 / 2f64.ln(), ..Default::default() };
        let (m, p) = thermal_rates(&cfg).unwrap();
        assert!((m - 0.6).abs() < 1e-14 && (p - 0.3).abs() < 1e-14);
        let cfg = NoiseConfig { temperature: 5.0, ..Default::default() };
        assert_eq!(thermal_rates(&cfg).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn noiseless_generator_is_commutator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = random_spec(&mut rng, 1);
        let h = circuit::sector_hamiltonian(LayerTag::Paral, &spec.blocks[0], &spec);
        let rho = random_density(&mut rng, 81);
        let d = liouvillian_apply(&rho, &h, &NoiseConfig::default()).unwrap();
        let expected = (&h * rho.matrix() - rho.matrix() * &h) * Complex64::new(0.0, -1.0);
        assert!(max_abs_diff(d.matrix(), &expected) < 1e-13);
    }

    #[test]
    fn single_mode_decay_rates() {
        let basis = FockBasis::four_channel();
        let one = basis.index_of(&[1, 0, 0, 0].into()).unwrap();
        let rho = DensityMatrix::basis_state(81, one).unwrap();
        let h = ComplexMatrix::zeros(81, 81);
        let d = liouvillian_apply(&rho, &h, &NoiseConfig { gamma: 0.7, ..Default::default() }).unwrap();
        assert!((d.matrix()[(0, 0)].re - 0.7).abs() < 1e-15);
        assert!((d.matrix()[(one, one)].re + 0.7).abs() < 1e-15);
    }

    #[test]
    fn generator_matches_dense_dissipators() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = FockBasis::four_channel();
        let spec = random_spec(&mut rng, 1);
        let h = circuit::sector_hamiltonian(LayerTag::Inter, &spec.blocks[0], &spec);
        let noise = NoiseConfig { gamma: 0.4, gamma_deph: 0.25, temperature: 0.8, omega_physical: 1.0 };
        let (gm, gp) = thermal_rates(&noise).unwrap();
        let rho = random_density(&mut rng, 81);
        let r = rho.matrix();
        let dis = |o: &ComplexMatrix| {
            let od = o.adjoint();
            o * r * &od - (&od * o * r + r * &od * o) * Complex64::new(0.5, 0.0)
        };
        let mut expected = (&h * r - r * &h) * Complex64::new(0.0, -1.0);
        for j in 0..4 {
            let a = basis.annihilation(j);
            expected += dis(&a) * Complex64::new(gm, 0.0);
            expected += dis(&a.adjoint()) * Complex64::new(gp, 0.0);
            expected += dis(&basis.number(j)) * Complex64::new(noise.gamma_deph, 0.0);
        }
        let d = liouvillian_apply(&rho, &h, &noise).unwrap();
        assert!(max_abs_diff(d.matrix(), &expected) < 1e-12);
        assert!(d.trace().norm() < 1e-12);
        assert!(d.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn closed_system_reproduces_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = random_spec(&mut rng, 2);
        let u = total_unitary(&spec).unwrap();
        let rho0 = DensityMatrix::logical(LogicalState::new(1, 1));
        let out = evolve_circuit_open_traced(&rho0, &spec, &NoiseConfig::default(), &IntegratorConfig::default()).unwrap();
        let expected = &u * rho0.matrix() * u.adjoint();
        assert!(max_abs_diff(out.rho.matrix(), &expected) < 1e-6);
        assert_eq!(out.support_dimension, 15);
        assert!(out.max_trace_deviation < 1e-7);
    }

    #[test]
    fn reduced_support_matches_full_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = random_spec(&mut rng, 1);
        let noise = NoiseConfig::relative(&spec, 0.5, 0.3);
        let integ = IntegratorConfig::default();
        let rho0 = DensityMatrix::logical(LogicalState::new(0, 1));
        let reduced = evolve_on_support(&rho0, &spec, &noise, &integ, false).unwrap();
        let full = evolve_on_support(&rho0, &spec, &noise, &integ, true).unwrap();
        assert_eq!((reduced.support_dimension, full.support_dimension), (15, 81));
        assert!(max_abs_diff(reduced.rho.matrix(), full.rho.matrix()) < 1e-8);
    }

    #[test]
    fn two_photon_block_decays_at_twice_the_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = random_spec(&mut rng, 2);
        let noise = NoiseConfig::relative(&spec, 0.7, 0.0);
        let rho =
            evolve_circuit_open(&DensityMatrix::logical(LogicalState::new(1, 0)), &spec, &noise, &IntegratorConfig::default())
                .unwrap();
        let basis = FockBasis::four_channel();
        let two: f64 = basis.sector_indices(2).iter().map(|&i| rho.population(i)).sum();
        assert!((two - (-1.4f64).exp()).abs() < 1e-7);
        assert!((rho.trace() - ONE).norm() < 1e-7);
        assert!(rho.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn thermal_noise_populates_higher_sectors() {
        let spec = CircuitSpec::new(1, 0.5);
        let noise = NoiseConfig { gamma: 0.05, temperature: 1.0, ..Default::default() };
        let out = evolve_circuit_open_traced(
            &DensityMatrix::logical(LogicalState::new(0, 0)),
            &spec,
            &noise,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(out.support_dimension, 81);
        let basis = FockBasis::four_channel();
        let three: f64 = basis.sector_indices(3).iter().map(|&i| out.rho.population(i)).sum();
        assert!(three > 1e-3);
        assert!(out.max_trace_deviation < 1e-7);
        assert!(out.rho.hermiticity_deviation() < 1e-9);
        assert!(out.rho.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn dephasing_damps_channel_coherence() {
        // H = 0: free sectors with U = ω = 0
        let mut spec = CircuitSpec::new(1, 0.0);
        spec.layer_order = vec![LayerTag::Free; 3];
        let basis = FockBasis::four_channel();
        let (a, b) = (basis.index_of(&[1, 0, 0, 0].into()).unwrap(), basis.index_of(&[0, 1, 0, 0].into()).unwrap());
        let mut psi = DVector::zeros(81);
        psi[a] = ONE * std::f64::consts::FRAC_1_SQRT_2;
        psi[b] = ONE * std::f64::consts::FRAC_1_SQRT_2;
        let noise = NoiseConfig { gamma_deph: 0.2, ..Default::default() };
        let rho = evolve_circuit_open(&DensityMatrix::pure(&psi).unwrap(), &spec, &noise, &IntegratorConfig::default()).unwrap();
        assert!((rho.matrix()[(a, b)].re - 0.5 * (-0.2f64 * 3.0).exp()).abs() < 1e-8);
        assert!((rho.population(a) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn step_underflow_names_sector() {
        let mut spec = CircuitSpec::new(1, 0.5);
        spec.layer_order = vec![LayerTag::Free, LayerTag::Up];
        spec.blocks[0].j_up = 1e14;
        let err = evolve_circuit_open(
            &DensityMatrix::logical(LogicalState::new(0, 0)),
            &spec,
            &NoiseConfig::default(),
            &IntegratorConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { sector: 1, .. }), "{err:?}");
    }

    #[test]
    fn state_fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut psi = DVector::from_fn(81, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        psi /= Complex64::new(psi.norm(), 0.0);
        let rho = DensityMatrix::pure(&psi).unwrap();
        assert!((state_fidelity(&rho, &psi).unwrap() - 1.0).abs() < 1e-12);

        let mut phi = DVector::from_fn(81, |_, _| Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        let overlap = psi.dotc(&phi);
        phi -= &psi * overlap;
        phi /= Complex64::new(phi.norm(), 0.0);
        assert!(state_fidelity(&DensityMatrix::pure(&phi).unwrap(), &psi).unwrap().abs() < 1e-12);

        assert!((state_fidelity(&DensityMatrix::maximally_mixed(81), &psi).unwrap() - 1.0 / 81.0).abs() < 1e-14);
        assert!(matches!(state_fidelity(&rho, &(psi * Complex64::new(2.0, 0.0))), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn decay_fit_examples() {
        let exact: Vec<_> = (0..11).map(|k| (0.1 * k as f64, (-0.2 * k as f64).exp())).collect();
        let fit = decay_fit(&exact).unwrap();
        assert!((fit.f0 - 1.0).abs() < 1e-10 && (fit.rate - 2.0).abs() < 1e-10);
        assert!(fit.max_residual < 1e-12);

        let flat: Vec<_> = (0..5).map(|k| (k as f64, 0.8)).collect();
        let fit = decay_fit(&flat).unwrap();
        assert!(fit.rate.abs() < 1e-14 && (fit.f0 - 0.8).abs() < 1e-14);

        assert!(decay_fit(&exact[..2]).is_err());
        assert!(decay_fit(&[(0.0, 1.0), (0.0, 0.9), (1.0, 0.5)]).is_err());
        assert!(decay_fit(&[(0.0, 1.0), (0.5, 0.0), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn sweep_rows_in_point_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = random_spec(&mut rng, 1);
        let points = [
            SweepPoint { gamma_over_gamma0: 0.5, gamma_deph_over_gamma0: 0.0 },
            SweepPoint { gamma_over_gamma0: 0.0, gamma_deph_over_gamma0: 0.0 },
        ];
        let rows = noise_sweep(&spec, &TargetGate::cnot(), &points, 0.0, 1.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0].gamma_over_gamma0, 0.5);
        assert_eq!(rows[4].input_state, "avg");
        assert_eq!(rows[5].gamma_over_gamma0, 0.0);
        // loss only rescales: rescaled fidelities agree across the two points
        for k in 0..5 {
            assert!((rows[k].rescaled_fidelity - rows[5 + k].raw_fidelity).abs() < 1e-3);
        }
    }
}
