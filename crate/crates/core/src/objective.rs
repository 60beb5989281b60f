//! Target gates, the entrywise cost, average gate fidelity, leakage and the
//! analytic cost gradient.
//!
//! Two photons stay two photons, so everything the objective needs lives in
//! the 10-dimensional two-photon sector of the 81-state basis. The optimizer
//! works there directly; the dense 81×81 functions exist for reporting and
//! cross-checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{self, CircuitSpec, PARAMS_PER_BLOCK};
use crate::error::{Error, Result};
use crate::fockspace::{computational_basis_indices, FockBasis, OccupationState};
use crate::matrix::{ComplexMatrix, I, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct TargetGate {
    pub name: String,
    pub matrix: ComplexMatrix,
}

impl TargetGate {
    pub fn cnot() -> Self {
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        Self { name: "cnot".into(), matrix: m }
    }

    /// `RXX(π/2) = exp(-i (π/4) σx⊗σx)`.
    pub fn ms() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = ComplexMatrix::zeros(4, 4);
        for k in 0..4 {
            m[(k, k)] = ONE * h;
            m[(k, 3 - k)] = -I * h;
        }
        Self { name: "ms".into(), matrix: m }
    }

    pub fn identity() -> Self {
        Self { name: "identity".into(), matrix: ComplexMatrix::identity(4, 4) }
    }

    pub fn custom(name: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.shape() != (4, 4) {
            return Err(Error::DimensionMismatch { expected: 4, found: matrix.nrows() });
        }
        Ok(Self { name: name.into(), matrix })
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "cnot" => Ok(Self::cnot()),
            "ms" | "m-s" | "rxx" => Ok(Self::ms()),
            "identity" | "id" => Ok(Self::identity()),
            _ => Err(Error::UnknownTarget(name.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub cost: f64,
    pub fidelity: f64,
    pub leakage: f64,
    /// Real parts of the 4×4 logic block, row-major in the order of S.
    pub logic_real: Vec<Vec<f64>>,
    pub logic_imag: Vec<Vec<f64>>,
}

impl GateReport {
    pub fn from_logic(m: &ComplexMatrix, target: &TargetGate) -> Self {
        let rows = |f: fn(&Complex64) -> f64| (0..4).map(|r| (0..4).map(|c| f(&m[(r, c)])).collect()).collect();
        Self {
            cost: cost_of_logic(m, target),
            fidelity: fidelity_of_logic(m, target),
            leakage: leakage_of_logic(m),
            logic_real: rows(|z| z.re),
            logic_imag: rows(|z| z.im),
        }
    }

    pub fn logic_submatrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(4, 4, |r, c| Complex64::new(self.logic_real[r][c], self.logic_imag[r][c]))
    }
}

/// Rows and columns of `u` (81×81) on the computational states, in the order of S.
pub fn logic_submatrix(u: &ComplexMatrix) -> ComplexMatrix {
    let idx = computational_basis_indices(&FockBasis::four_channel()).expect("four-channel basis");
    ComplexMatrix::from_fn(4, 4, |r, c| u[(idx[r], idx[c])])
}

/// `Σ |U_ij - T_ij|²` over the logic block.
pub fn cost_of_logic(m: &ComplexMatrix, target: &TargetGate) -> f64 {
    (m - &target.matrix).iter().map(|z| z.norm_sqr()).sum()
}

/// `¼ Σ_i |(U† T)_ii|²`.
pub fn fidelity_of_logic(m: &ComplexMatrix, target: &TargetGate) -> f64 {
    let overlap = m.adjoint() * &target.matrix;
    (0..4).map(|i| overlap[(i, i)].norm_sqr()).sum::<f64>() / 4.0
}

/// `max_j (1 - Σ_{i∈S} |U_ij|²)`, clamped at zero against roundoff.
pub fn leakage_of_logic(m: &ComplexMatrix) -> f64 {
    (0..4).map(|j| 1.0 - m.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>()).fold(0.0, f64::max)
}

/// `‖U_SS‖² + ‖T‖² - 2 |tr(T† U_SS)|`: the cost minimized over a global phase.
/// Diagnostic only.
pub fn phase_marginalized_cost_of_logic(m: &ComplexMatrix, target: &TargetGate) -> f64 {
    let norm = |x: &ComplexMatrix| x.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let overlap = (target.matrix.adjoint() * m).trace();
    (norm(m) + norm(&target.matrix) - 2.0 * overlap.norm()).max(0.0)
}

pub fn cost(u: &ComplexMatrix, target: &TargetGate) -> f64 {
    cost_of_logic(&logic_submatrix(u), target)
}

pub fn avg_gate_fidelity(u: &ComplexMatrix, target: &TargetGate) -> f64 {
    fidelity_of_logic(&logic_submatrix(u), target)
}

pub fn leakage(u: &ComplexMatrix) -> f64 {
    leakage_of_logic(&logic_submatrix(u))
}

pub fn phase_marginalized_cost(u: &ComplexMatrix, target: &TargetGate) -> f64 {
    phase_marginalized_cost_of_logic(&logic_submatrix(u), target)
}

pub fn gate_report(u: &ComplexMatrix, target: &TargetGate) -> GateReport {
    GateReport::from_logic(&logic_submatrix(u), target)
}

/// The two-photon states of the four-channel basis and where S sits among them.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonSector {
    /// Indices into the 81-state basis, ascending.
    pub indices: Vec<usize>,
    pub states: Vec<OccupationState>,
    /// Position of each computational state inside `states`, in the order of S.
    pub logic_positions: [usize; 4],
}

impl TwoPhotonSector {
    pub fn new() -> Self {
        let basis = FockBasis::four_channel();
        let indices = basis.sector_indices(2);
        let states = indices.iter().map(|&i| basis.occupation_of(i).expect("in range")).collect();
        let comp = computational_basis_indices(&basis).expect("four channels");
        let logic_positions = comp.map(|c| indices.iter().position(|&i| i == c).expect("logic state has two photons"));
        Self { indices, states, logic_positions }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Total propagator on the two-photon sector (10×10).
    pub fn transfer_matrix(&self, spec: &CircuitSpec) -> Result<ComplexMatrix> {
        circuit::total_restricted(spec, &self.states)
    }

    fn embedding(&self) -> ComplexMatrix {
        let mut p = ComplexMatrix::zeros(self.dim(), 4);
        for (col, &pos) in self.logic_positions.iter().enumerate() {
            p[(pos, col)] = ONE;
        }
        p
    }

    fn logic_rows(&self, psi: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(4, psi.ncols(), |r, c| psi[(self.logic_positions[r], c)])
    }
}

impl Default for TwoPhotonSector {
    fn default() -> Self {
        Self::new()
    }
}

/// Gate report computed on the two-photon sector only, along the same
/// floating-point path as the optimizer.
pub fn sector_gate_report(spec: &CircuitSpec, target: &TargetGate) -> Result<GateReport> {
    GateObjective::new(spec.clone(), target.clone())?.report(&circuit::pack_params(spec))
}

/// The cost as a function of the packed hopping rates, with its adjoint gradient.
#[derive(Debug, Clone)]
pub struct GateObjective {
    template: CircuitSpec,
    target: TargetGate,
    sector: TwoPhotonSector,
}

impl GateObjective {
    pub fn new(template: CircuitSpec, target: TargetGate) -> Result<Self> {
        template.validate()?;
        Ok(Self { template, target, sector: TwoPhotonSector::new() })
    }

    pub fn n_params(&self) -> usize {
        self.template.n_params()
    }

    pub fn template(&self) -> &CircuitSpec {
        &self.template
    }

    pub fn target(&self) -> &TargetGate {
        &self.target
    }

    /// 4×4 logic block of the circuit with parameters `v`.
    pub fn logic_block(&self, v: &[f64]) -> Result<ComplexMatrix> {
        let spec = circuit::unpack_params(v, &self.template)?;
        let mut psi = self.sector.embedding();
        for s in spec.sectors() {
            psi = spec.factors(&s).restricted(&self.sector.states) * psi;
        }
        Ok(self.sector.logic_rows(&psi))
    }

    pub fn cost(&self, v: &[f64]) -> Result<f64> {
        Ok(cost_of_logic(&self.logic_block(v)?, &self.target))
    }

    pub fn report(&self, v: &[f64]) -> Result<GateReport> {
        Ok(GateReport::from_logic(&self.logic_block(v)?, &self.target))
    }

    /// `(C, ∂C/∂θ)` by a forward sweep and an adjoint backward sweep.
    ///
    /// With `Ψ_k = L_k Ψ_{k-1}`, `Ψ_0 = P` and `Φ_K = P (U_SS - T)`,
    /// `Φ_{k-1} = L_k† Φ_k`, each parameter of layer `k` contributes
    /// `2 Re tr(Φ_k† ∂L_k Ψ_{k-1})`.
    pub fn cost_and_gradient(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let spec = circuit::unpack_params(v, &self.template)?;
        let states = &self.sector.states;
        let sectors: Vec<_> = spec.sectors().collect();

        let mut layers = Vec::with_capacity(sectors.len());
        let mut psis = Vec::with_capacity(sectors.len() + 1);
        psis.push(self.sector.embedding());
        for s in &sectors {
            let factors = spec.factors(s);
            let l = factors.restricted(states);
            let next = &l * psis.last().expect("non-empty");
            psis.push(next);
            layers.push((factors, l));
        }

        let logic = self.sector.logic_rows(psis.last().expect("non-empty"));
        let residual = &logic - &self.target.matrix;
        let cost = residual.iter().map(|z| z.norm_sqr()).sum();

        let mut phi = ComplexMatrix::zeros(self.sector.dim(), 4);
        for (r, &pos) in self.sector.logic_positions.iter().enumerate() {
            for c in 0..4 {
                phi[(pos, c)] = residual[(r, c)];
            }
        }

        let mut grad = vec![0.0; v.len()];
        for (k, s) in sectors.iter().enumerate().rev() {
            let (factors, l) = &layers[k];
            if s.tag.is_hopping() {
                for (role, dl) in factors.restricted_derivatives(states) {
                    let dpsi = dl * &psis[k];
                    let inner: Complex64 = phi.iter().zip(dpsi.iter()).map(|(a, b)| a.conj() * b).sum();
                    grad[s.block * PARAMS_PER_BLOCK + role.offset()] += 2.0 * inner.re;
                }
            }
            phi = l.adjoint() * phi;
        }
        Ok((cost, grad))
    }
}

/// `∂C/∂θ` for the packed parameter vector `v`.
pub fn cost_gradient(v: &[f64], template: &CircuitSpec, target: &TargetGate) -> Result<Vec<f64>> {
    GateObjective::new(template.clone(), target.clone())?.cost_and_gradient(v).map(|(_, g)| g)
}

/// Embeds a 4×4 logic matrix into an 81×81 matrix that is the identity elsewhere.
pub fn embed_logic(m: &ComplexMatrix) -> ComplexMatrix {
    let idx = computational_basis_indices(&FockBasis::four_channel()).expect("four channels");
    let mut u = ComplexMatrix::identity(81, 81);
    for &i in &idx {
        u[(i, i)] = ZERO;
    }
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            u[(i, j)] = m[(r, c)];
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{pack_params, total_unitary, BlockParams, LayerTag};
    use crate::matrix::{identity, unitarity_deviation};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_spec(rng: &mut ChaCha8Rng, blocks: usize) -> CircuitSpec {
        let mut spec = CircuitSpec::new(blocks, 0.5);
        for b in &mut spec.blocks {
            *b = BlockParams::from_slice(&(0..5).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>());
        }
        spec
    }

    fn random_unitary4(rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let h = ComplexMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = &h + h.adjoint();
        crate::layers::expm_oracle(&h, 1.0).unwrap()
    }

    #[test]
    fn targets_are_unitary() {
        for t in [TargetGate::cnot(), TargetGate::ms(), TargetGate::identity()] {
            assert!(unitarity_deviation(&t.matrix) < 1e-15);
        }
        assert!(matches!(TargetGate::from_name("toffoli"), Err(Error::UnknownTarget(_))));
        // MS = exp(-i π/4 XX) from the oracle
        let x = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let xx = x.kronecker(&x);
        let ms = crate::layers::expm_oracle(&xx, PI / 4.0).unwrap();
        assert!(crate::matrix::max_abs_diff(&ms, &TargetGate::ms().matrix) < 1e-12);
    }

    #[test]
    fn cost_and_fidelity_examples() {
        let id = identity(81);
        assert_eq!(cost(&embed_logic(&TargetGate::cnot().matrix), &TargetGate::cnot()), 0.0);
        assert!((cost(&id, &TargetGate::cnot()) - 4.0).abs() < 1e-15);
        assert!((cost(&id, &TargetGate::ms()) - (8.0 - 4.0 * 2f64.sqrt())).abs() < 1e-14);
        assert!((avg_gate_fidelity(&embed_logic(&TargetGate::ms().matrix), &TargetGate::ms()) - 1.0).abs() < 1e-15);
        assert!((avg_gate_fidelity(&id, &TargetGate::cnot()) - 0.5).abs() < 1e-15);
        assert_eq!(leakage(&embed_logic(&TargetGate::cnot().matrix)), 0.0);
        assert!(crate::matrix::max_abs_diff(&logic_submatrix(&id), &identity(4)) == 0.0);
    }

    #[test]
    fn hong_ou_mandel_leaks() {
        let mut spec = CircuitSpec::new(1, 0.0);
        spec.layer_order = vec![LayerTag::Inter];
        spec.blocks[0].j_inter = PI / 4.0;
        let u = total_unitary(&spec).unwrap();
        let m = logic_submatrix(&u);
        // |0,1,1,0> = |10>_2 sits at position 2 of S
        let kept: f64 = m.column(2).iter().map(|z| z.norm_sqr()).sum();
        assert!(kept < 1e-14);
        assert!(leakage(&u) > 0.99);
        assert!(unitarity_deviation(&m) > 0.5);
    }

    #[test]
    fn fidelity_ignores_global_phase_but_cost_does_not() {
        let t = TargetGate::cnot();
        let shifted = &t.matrix * Complex64::from_polar(1.0, PI / 3.0);
        let u = embed_logic(&shifted);
        assert!((avg_gate_fidelity(&u, &t) - 1.0).abs() < 1e-14);
        assert!(cost(&u, &t) > 1.0);
        assert!(phase_marginalized_cost(&u, &t) < 1e-14);
    }

    #[test]
    fn exact_embeddings_have_unit_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let m = random_unitary4(&mut rng);
            let t = TargetGate::custom("random", m.clone()).unwrap();
            let u = embed_logic(&m);
            assert!(cost(&u, &t) < 1e-28);
            assert!((avg_gate_fidelity(&u, &t) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn metrics_ignore_states_outside_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = total_unitary(&random_spec(&mut rng, 2)).unwrap();
        let idx = computational_basis_indices(&FockBasis::four_channel()).unwrap();
        let mut v = u.clone();
        for r in 0..81 {
            for c in 0..81 {
                if !(idx.contains(&r) && idx.contains(&c)) {
                    v[(r, c)] = Complex64::new(rng.random_range(-1.0..1.0), 0.3);
                }
            }
        }
        for t in [TargetGate::cnot(), TargetGate::ms()] {
            assert_eq!(cost(&u, &t), cost(&v, &t));
            assert_eq!(avg_gate_fidelity(&u, &t), avg_gate_fidelity(&v, &t));
        }
    }

    #[test]
    fn sector_path_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut spec = random_spec(&mut rng, 3);
        spec.omega = 0.2;
        let dense = gate_report(&total_unitary(&spec).unwrap(), &TargetGate::cnot());
        let fast = sector_gate_report(&spec, &TargetGate::cnot()).unwrap();
        assert!((dense.cost - fast.cost).abs() < 1e-12);
        assert!((dense.fidelity - fast.fidelity).abs() < 1e-12);
        assert!((dense.leakage - fast.leakage).abs() < 1e-12);

        let obj = GateObjective::new(spec.clone(), TargetGate::cnot()).unwrap();
        let v = pack_params(&spec);
        let (c, _) = obj.cost_and_gradient(&v).unwrap();
        assert!((c - dense.cost).abs() < 1e-12);
        assert!((obj.cost(&v).unwrap() - dense.cost).abs() < 1e-12);
    }

    fn fd_gradient(obj: &GateObjective, v: &[f64], step: f64) -> Vec<f64> {
        (0..v.len())
            .map(|k| {
                let mut p = v.to_vec();
                let mut m = v.to_vec();
                p[k] += step;
                m[k] -= step;
                (obj.cost(&p).unwrap() - obj.cost(&m).unwrap()) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for target in [TargetGate::cnot(), TargetGate::ms()] {
            let spec = random_spec(&mut rng, 3);
            let obj = GateObjective::new(spec.clone(), target).unwrap();
            let v = pack_params(&spec);
            let (_, g) = obj.cost_and_gradient(&v).unwrap();
            let fd = fd_gradient(&obj, &v, 1e-6);
            for (a, b) in g.iter().zip(&fd) {
                if a.abs().max(b.abs()) > 1e-10 {
                    assert!((a - b).abs() / a.abs().max(b.abs()) < 1e-6 || (a - b).abs() < 1e-9, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let spec = random_spec(&mut rng, 2);
        let probe = GateObjective::new(spec.clone(), TargetGate::identity()).unwrap();
        let v = pack_params(&spec);
        let target = TargetGate::custom("self", probe.logic_block(&v).unwrap()).unwrap();
        let obj = GateObjective::new(spec, target).unwrap();
        let (c, g) = obj.cost_and_gradient(&v).unwrap();
        assert!(c < 1e-28);
        assert!(g.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn gradient_respects_mirror_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = random_spec(&mut rng, 2);
        let target = TargetGate::cnot();
        // reflection maps |q1 q2> to |!q2 !q1>
        let perm = [3, 1, 2, 0];
        let mirrored_target =
            TargetGate::custom("mirrored", ComplexMatrix::from_fn(4, 4, |r, c| target.matrix[(perm[r], perm[c])])).unwrap();
        let mirrored = spec.mirrored();
        let g = cost_gradient(&pack_params(&spec), &spec, &target).unwrap();
        let gm = cost_gradient(&pack_params(&mirrored), &mirrored, &mirrored_target).unwrap();
        let role_perm = [1, 0, 2, 4, 3];
        for b in 0..2 {
            for r in 0..5 {
                let (a, m) = (g[5 * b + r], gm[5 * b + role_perm[r]]);
                assert!((a - m).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn length_mismatch_is_error() {
        let spec = CircuitSpec::new(2, 0.5);
        assert_eq!(cost_gradient(&[0.1; 3], &spec, &TargetGate::cnot()), Err(Error::ParamLength { expected: 10, found: 3 }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fidelity_in_unit_interval(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spec(&mut rng, 2);
            for t in [TargetGate::cnot(), TargetGate::ms()] {
                let r = sector_gate_report(&spec, &t).unwrap();
                prop_assert!(r.fidelity >= 0.0 && r.fidelity <= 1.0 + 1e-12);
                prop_assert!(r.leakage >= 0.0 && r.cost >= 0.0);
            }
        }
    }
}
