//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers (`numpy.array(m)` turns them into arrays).

use ::kerr_gates as core_lib;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use core_lib::circuit::{self, BlockParams, LayerTag};
use core_lib::fockspace::{self, FockBasis, LogicalState, OccupationState};
use core_lib::layers::{self, FpLayerParams, HrLayerParams};
use core_lib::lindblad::{self, DensityMatrix, IntegratorConfig, NoiseConfig};
use core_lib::objective::{self, TargetGate};
use core_lib::optimizer::{self, OptimizerConfig};
use core_lib::robustness::{self, NoiseSpec, PerturbTarget};
use core_lib::{Complex64, ComplexMatrix, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NonFinite { .. } | Error::AllRestartsAborted(_) | Error::StepUnderflow { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

type Rows = Vec<Vec<Complex64>>;

fn to_rows(m: &ComplexMatrix) -> Rows {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

fn from_rows(rows: Rows) -> PyResult<ComplexMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a square matrix"));
    }
    Ok(ComplexMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn target_gate(name: &str) -> PyResult<TargetGate> {
    TargetGate::from_name(name).map_err(py_err)
}

/// The parametrized four-channel circuit.
#[pyclass(name = "CircuitSpec", module = "kerr_gates", skip_from_py_object)]
#[derive(Clone)]
struct PyCircuitSpec {
    inner: circuit::CircuitSpec,
}

#[pymethods]
impl PyCircuitSpec {
    #[new]
    #[pyo3(signature = (blocks, u, omega = 0.0, jmax = 1.0, sector_time = 1.0, layer_order = None))]
    fn new(blocks: usize, u: f64, omega: f64, jmax: f64, sector_time: f64, layer_order: Option<Vec<String>>) -> PyResult<Self> {
        let mut inner = circuit::CircuitSpec { omega, jmax, sector_time, ..circuit::CircuitSpec::new(blocks, u) };
        if let Some(order) = layer_order {
            inner.layer_order = order.iter().map(|t| t.parse::<LayerTag>()).collect::<Result<_, _>>().map_err(py_err)?;
        }
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: circuit::CircuitSpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn n_blocks(&self) -> usize {
        self.inner.n_blocks()
    }

    #[getter]
    fn u(&self) -> f64 {
        self.inner.u
    }

    #[getter]
    fn jmax(&self) -> f64 {
        self.inner.jmax
    }

    #[getter]
    fn total_time(&self) -> f64 {
        self.inner.total_time()
    }

    #[getter]
    fn layer_order(&self) -> Vec<String> {
        self.inner.layer_order.iter().map(|t| t.as_str().to_string()).collect()
    }

    /// Hopping rates, block-major, five per block.
    fn params(&self) -> Vec<f64> {
        circuit::pack_params(&self.inner)
    }

    /// A copy with the hopping rates replaced.
    fn with_params(&self, params: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: circuit::unpack_params(&params, &self.inner).map_err(py_err)? })
    }

    fn mirrored(&self) -> Self {
        Self { inner: self.inner.mirrored() }
    }

    fn __len__(&self) -> usize {
        self.inner.n_blocks()
    }

    fn __repr__(&self) -> String {
        format!("CircuitSpec(blocks={}, u={}, jmax={})", self.inner.n_blocks(), self.inner.u, self.inner.jmax)
    }
}

/// Index of an occupation tuple in the 81-state basis.
#[pyfunction]
fn index_of(occupations: Vec<u8>) -> PyResult<usize> {
    FockBasis::four_channel().index_of(&OccupationState::new(occupations)).map_err(py_err)
}

#[pyfunction]
fn occupation_of(index: usize) -> PyResult<Vec<u32>> {
    Ok(FockBasis::four_channel().occupation_of(index).map_err(py_err)?.occupations().iter().map(|&n| n as u32).collect())
}

/// Basis indices of |00>, |01>, |10>, |11>.
#[pyfunction]
fn computational_basis_indices() -> PyResult<Vec<usize>> {
    Ok(fockspace::computational_basis_indices(&FockBasis::four_channel()).map_err(py_err)?.to_vec())
}

#[pyfunction]
fn u_fp(omega: f64, u: f64, t: f64) -> Rows {
    to_rows(&layers::u_fp(&FpLayerParams { omega, u, t }))
}

#[pyfunction]
fn u_hr(omega: f64, u: f64, j: f64, t: f64) -> Rows {
    to_rows(&layers::u_hr(&HrLayerParams { omega, u, j, t }))
}

#[pyfunction]
fn assemble_layer(tag: &str, block: [f64; 5], spec: &PyCircuitSpec) -> PyResult<Rows> {
    Ok(to_rows(&circuit::assemble_layer_named(tag, &BlockParams::from_slice(&block), &spec.inner).map_err(py_err)?))
}

#[pyfunction]
fn total_unitary(spec: &PyCircuitSpec) -> PyResult<Rows> {
    Ok(to_rows(&circuit::total_unitary(&spec.inner).map_err(py_err)?))
}

/// 4x4 target matrix of `cnot`, `ms` or `identity`.
#[pyfunction]
fn target_matrix(name: &str) -> PyResult<Rows> {
    Ok(to_rows(&target_gate(name)?.matrix))
}

#[pyfunction]
fn cost(unitary: Rows, target: &str) -> PyResult<f64> {
    Ok(objective::cost(&from_rows(unitary)?, &target_gate(target)?))
}

#[pyfunction]
fn avg_gate_fidelity(unitary: Rows, target: &str) -> PyResult<f64> {
    Ok(objective::avg_gate_fidelity(&from_rows(unitary)?, &target_gate(target)?))
}

#[pyfunction]
fn leakage(unitary: Rows) -> PyResult<f64> {
    Ok(objective::leakage(&from_rows(unitary)?))
}

/// Cost, fidelity, leakage and the 4x4 logic block of a circuit.
#[pyfunction]
fn gate_report<'py>(py: Python<'py>, spec: &PyCircuitSpec, target: &str) -> PyResult<Bound<'py, PyDict>> {
    let r = objective::sector_gate_report(&spec.inner, &target_gate(target)?).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("cost", r.cost)?;
    d.set_item("fidelity", r.fidelity)?;
    d.set_item("leakage", r.leakage)?;
    d.set_item("logic", to_rows(&r.logic_submatrix()))?;
    Ok(d)
}

#[pyfunction]
fn cost_gradient(spec: &PyCircuitSpec, target: &str) -> PyResult<Vec<f64>> {
    objective::cost_gradient(&circuit::pack_params(&spec.inner), &spec.inner, &target_gate(target)?).map_err(py_err)
}

/// Multi-restart optimization; returns the report as a dict plus the best circuit.
#[pyfunction]
#[pyo3(signature = (target, blocks, u, restarts = 20, seed = 0, max_iterations = 5000))]
fn optimize<'py>(
    py: Python<'py>,
    target: &str,
    blocks: usize,
    u: f64,
    restarts: usize,
    seed: u64,
    max_iterations: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let template = circuit::CircuitSpec::new(blocks, u);
    let config = OptimizerConfig { restarts, seed, max_iterations, ..OptimizerConfig::default() };
    let gate = target_gate(target)?;
    let report = py.detach(|| optimizer::multi_restart_optimize(&template, &gate, &config)).map_err(py_err)?;
    let spec = circuit::unpack_params(&report.best_params, &template).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("best_restart", report.best_restart)?;
    d.set_item("best_cost", report.best_cost)?;
    d.set_item("best_fidelity", report.best_fidelity)?;
    d.set_item("best_leakage", report.best_leakage)?;
    d.set_item("best_params", report.best_params)?;
    d.set_item("wall_time_seconds", report.wall_time_seconds)?;
    d.set_item("spec", PyCircuitSpec { inner: spec })?;
    Ok(d)
}

fn logical(label: &str) -> PyResult<LogicalState> {
    LogicalState::ALL
        .into_iter()
        .find(|s| s.label() == label)
        .ok_or_else(|| PyValueError::new_err(format!("logical input must be 00, 01, 10 or 11, got {label}")))
}

/// Density matrix after the circuit for a logical input, rates in units of 1/t_tot.
#[pyfunction]
#[pyo3(signature = (spec, input, gamma_over_gamma0 = 0.0, gamma_deph_over_gamma0 = 0.0, temperature = 0.0))]
fn evolve(
    py: Python<'_>,
    spec: &PyCircuitSpec,
    input: &str,
    gamma_over_gamma0: f64,
    gamma_deph_over_gamma0: f64,
    temperature: f64,
) -> PyResult<Rows> {
    let noise = NoiseConfig { temperature, ..NoiseConfig::relative(&spec.inner, gamma_over_gamma0, gamma_deph_over_gamma0) };
    let rho0 = DensityMatrix::logical(logical(input)?);
    let rho =
        py.detach(|| lindblad::evolve_circuit_open(&rho0, &spec.inner, &noise, &IntegratorConfig::default())).map_err(py_err)?;
    Ok(to_rows(rho.matrix()))
}

/// Open-system fidelity per logical input (00, 01, 10, 11).
#[pyfunction]
#[pyo3(signature = (spec, target, gamma_over_gamma0 = 0.0, gamma_deph_over_gamma0 = 0.0))]
fn open_gate_fidelities(
    py: Python<'_>,
    spec: &PyCircuitSpec,
    target: &str,
    gamma_over_gamma0: f64,
    gamma_deph_over_gamma0: f64,
) -> PyResult<Vec<f64>> {
    let noise = NoiseConfig::relative(&spec.inner, gamma_over_gamma0, gamma_deph_over_gamma0);
    let gate = target_gate(target)?;
    let f =
        py.detach(|| lindblad::open_gate_fidelities(&spec.inner, &gate, &noise, &IntegratorConfig::default())).map_err(py_err)?;
    Ok(f.to_vec())
}

/// Fidelities of perturbed copies of `spec`; `targets` from J, T_HR, T_FP.
#[pyfunction]
#[pyo3(signature = (spec, target, n_max, targets = vec!["J".to_string(), "T_HR".to_string(), "T_FP".to_string()], samples = 20, seed = 0))]
fn monte_carlo_fidelity<'py>(
    py: Python<'py>,
    spec: &PyCircuitSpec,
    target: &str,
    n_max: f64,
    targets: Vec<String>,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let targets = targets.iter().map(|t| t.parse::<PerturbTarget>()).collect::<Result<_, _>>().map_err(py_err)?;
    let noise = NoiseSpec { n_max, targets, samples, seed };
    let gate = target_gate(target)?;
    let r = py.detach(|| robustness::monte_carlo_fidelity(&spec.inner, &gate, &noise)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("fidelities", r.fidelities)?;
    d.set_item("mean", r.mean)?;
    d.set_item("std", r.std)?;
    d.set_item("target_set", r.target_set)?;
    Ok(d)
}

#[pymodule]
pub fn kerr_gates(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuitSpec>()?;
    m.add("BASIS_DIMENSION", FockBasis::four_channel().dimension())?;
    m.add_function(wrap_pyfunction!(index_of, m)?)?;
    m.add_function(wrap_pyfunction!(occupation_of, m)?)?;
    m.add_function(wrap_pyfunction!(computational_basis_indices, m)?)?;
    m.add_function(wrap_pyfunction!(u_fp, m)?)?;
    m.add_function(wrap_pyfunction!(u_hr, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_layer, m)?)?;
    m.add_function(wrap_pyfunction!(total_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(target_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    m.add_function(wrap_pyfunction!(avg_gate_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(leakage, m)?)?;
    m.add_function(wrap_pyfunction!(gate_report, m)?)?;
    m.add_function(wrap_pyfunction!(cost_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(open_gate_fidelities, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_fidelity, m)?)?;
    Ok(())
}
