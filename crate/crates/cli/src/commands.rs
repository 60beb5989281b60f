//! The five workflows. Each writes its outputs into one directory and
//! finishes with a manifest that is enough to regenerate them.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use kerr_gates::circuit::{self, CircuitSpec};
use kerr_gates::fockspace::FockBasis;
use kerr_gates::lindblad::{self, DecayFit, SweepPoint, INTEGRATOR_NAME};
use kerr_gates::objective::{self, GateReport, TargetGate, TwoPhotonSector};
use kerr_gates::optimizer::{multi_restart_optimize, OptimizationReport};
use kerr_gates::robustness::{monte_carlo_fidelity, NoiseSpec, RobustnessReport};

use crate::config::RunConfig;
use crate::output::{self, num};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Optimize,
    Sweep,
    Evaluate,
    Lindblad,
    Robustness,
}

impl Command {
    pub fn needs_input(self) -> bool {
        matches!(self, Command::Evaluate | Command::Lindblad | Command::Robustness)
    }
}

/// Everything a command needs; this is what a manifest stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub command: Command,
    pub config: RunConfig,
    /// The circuit read from `--params`, for commands that take one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_spec: Option<CircuitSpec>,
    #[serde(default)]
    pub full_matrix: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub job: Job,
    pub seed: u64,
    pub code_version: String,
    /// Output files relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = output::read_to_string(path)?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid manifest: {e}", path.display())))?;
        m.job.config.validate()?;
        Ok(m)
    }
}

/// One-line result description printed by the binary.
pub struct Outcome {
    pub summary: String,
    pub outputs: Vec<String>,
}

/// Runs `job`, writing into `out_dir`, and records the manifest.
pub fn execute(job: &Job, out_dir: &Path) -> Result<Outcome, CliError> {
    let start = Instant::now();
    job.config.validate()?;
    if job.command.needs_input() && job.input_spec.is_none() {
        return Err(CliError::Usage(format!("{:?} needs a parameter file", job.command).to_lowercase()));
    }
    let outcome = match job.command {
        Command::Optimize => optimize(&job.config, out_dir)?,
        Command::Sweep => sweep(&job.config, out_dir)?,
        Command::Evaluate => evaluate(&job.config, input(job)?, job.full_matrix, out_dir)?,
        Command::Lindblad => lindblad_sweep(&job.config, input(job)?, out_dir)?,
        Command::Robustness => robustness(&job.config, input(job)?, out_dir)?,
    };
    let manifest = Manifest {
        job: job.clone(),
        seed: job.config.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outcome.outputs.clone(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    output::write_json(&out_dir.join(MANIFEST), &manifest)?;
    Ok(outcome)
}

fn input(job: &Job) -> Result<&CircuitSpec, CliError> {
    let spec = job.input_spec.as_ref().expect("checked by execute");
    spec.validate()?;
    Ok(spec)
}

fn target(cfg: &RunConfig) -> Result<TargetGate, CliError> {
    Ok(TargetGate::from_name(&cfg.target)?)
}

/// Reads a circuit from a parameter table (`.csv`, laid out on the config's
/// template) or from a JSON circuit, bare or under a `spec` key.
pub fn load_params(path: &Path, cfg: &RunConfig) -> Result<CircuitSpec, CliError> {
    let text = output::read_to_string(path)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let spec = if is_csv {
        let blocks = output::parse_params_csv(&text)?;
        if blocks.len() != cfg.blocks {
            return Err(CliError::Usage(format!(
                "{} has {} blocks but the configuration has {}; pass --blocks {}",
                path.display(),
                blocks.len(),
                cfg.blocks,
                blocks.len()
            )));
        }
        CircuitSpec { blocks, ..cfg.template() }
    } else {
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("spec") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| CliError::Usage(format!("{}: not a circuit: {e}", path.display())))?
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub spec: CircuitSpec,
    pub report: OptimizationReport,
}

pub const OPTIMIZE_OUTPUTS: [&str; 3] = ["report.json", "params.csv", "spec.json"];

fn optimize(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let template = cfg.template();
    let report = multi_restart_optimize(&template, &target(cfg)?, &cfg.optimizer_config())?;
    let spec = circuit::unpack_params(&report.best_params, &template)?;
    output::write_atomic(&dir.join("params.csv"), &output::params_csv(&spec)?)?;
    output::write_json(&dir.join("spec.json"), &spec)?;
    let summary = format!(
        "best restart {}: cost {:.3e}, fidelity {:.6}, leakage {:.3e}",
        report.best_restart, report.best_cost, report.best_fidelity, report.best_leakage
    );
    output::write_json(&dir.join("report.json"), &OptimizeOutput { spec, report })?;
    Ok(Outcome { summary, outputs: OPTIMIZE_OUTPUTS.map(String::from).to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
struct SweepCell {
    u_over_jmax: f64,
    blocks: usize,
    best_cost: f64,
    best_fidelity: f64,
}

pub fn cell_dir(u_over_jmax: f64, blocks: usize) -> String {
    format!("cells/u{u_over_jmax}_b{blocks}")
}

/// A cell whose manifest records the same configuration and whose outputs
/// are all present is reused.
fn finished_cell(cfg: &RunConfig, dir: &Path) -> Option<OptimizeOutput> {
    let manifest = Manifest::load(&dir.join(MANIFEST)).ok()?;
    if manifest.job.command != Command::Optimize || manifest.job.config != *cfg {
        return None;
    }
    if !manifest.outputs.iter().all(|o| dir.join(o).is_file()) {
        return None;
    }
    serde_json::from_str(&output::read_to_string(&dir.join("report.json")).ok()?).ok()
}

fn sweep(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let grid: Vec<(f64, usize)> =
        cfg.sweep.u_values.iter().flat_map(|&u| cfg.sweep.block_counts.iter().map(move |&b| (u, b))).collect();
    if grid.is_empty() {
        return Err(CliError::Usage("sweep.u_values and sweep.block_counts must not be empty".into()));
    }
    let cells = grid
        .par_iter()
        .map(|&(u, b)| {
            let cell_cfg = RunConfig { u_over_jmax: u, blocks: b, ..cfg.clone() };
            let cell = dir.join(cell_dir(u, b));
            let out = match finished_cell(&cell_cfg, &cell) {
                Some(out) => {
                    log::info!("reusing {}", cell.display());
                    out
                }
                None => {
                    let job = Job { command: Command::Optimize, config: cell_cfg, input_spec: None, full_matrix: false };
                    execute(&job, &cell)?;
                    finished_cell(&job.config, &cell)
                        .ok_or_else(|| CliError::Numerical(format!("cell {} did not complete", cell.display())))?
                }
            };
            Ok(SweepCell { u_over_jmax: u, blocks: b, best_cost: out.report.best_cost, best_fidelity: out.report.best_fidelity })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let rows = cells.iter().map(|c| vec![num(c.u_over_jmax), c.blocks.to_string(), num(c.best_cost), num(c.best_fidelity)]);
    let csv = output::csv_text(&["u_over_jmax", "blocks", "best_cost", "best_fidelity"], rows)?;
    output::write_atomic(&dir.join("sweep.csv"), &csv)?;
    let best = cells.iter().max_by(|a, b| a.best_fidelity.total_cmp(&b.best_fidelity)).expect("non-empty grid");
    let summary = format!(
        "{} cells; best fidelity {:.6} at U/Jmax = {}, {} blocks",
        cells.len(),
        best.best_fidelity,
        best.u_over_jmax,
        best.blocks
    );
    let mut outputs = vec!["sweep.csv".to_string()];
    for &(u, b) in &grid {
        outputs.extend(OPTIMIZE_OUTPUTS.iter().chain([&MANIFEST]).map(|f| format!("{}/{f}", cell_dir(u, b))));
    }
    Ok(Outcome { summary, outputs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOutput {
    pub target: String,
    #[serde(flatten)]
    pub report: GateReport,
    /// Cost minimized over a global phase; a diagnostic only.
    pub phase_marginalized_cost: f64,
    /// Row and column order of the two-photon transfer-matrix tables.
    pub two_photon_states: Vec<String>,
}

fn state_label(s: &kerr_gates::fockspace::OccupationState) -> String {
    s.occupations().iter().map(|n| n.to_string()).collect()
}

fn evaluate(cfg: &RunConfig, spec: &CircuitSpec, full_matrix: bool, dir: &Path) -> Result<Outcome, CliError> {
    let target = target(cfg)?;
    let report = objective::sector_gate_report(spec, &target)?;
    let sector = TwoPhotonSector::new();
    let transfer = sector.transfer_matrix(spec)?;
    let labels: Vec<String> = sector.states.iter().map(state_label).collect();

    let mut outputs = vec!["gate_report.json".to_string(), "two_photon_real.csv".into(), "two_photon_imag.csv".into()];
    output::write_atomic(&dir.join("two_photon_real.csv"), &output::matrix_csv(&transfer, &labels, |z| z.re)?)?;
    output::write_atomic(&dir.join("two_photon_imag.csv"), &output::matrix_csv(&transfer, &labels, |z| z.im)?)?;
    if full_matrix {
        let u = circuit::total_unitary(spec)?;
        let all: Vec<String> = FockBasis::four_channel().states().map(|s| state_label(&s)).collect();
        output::write_atomic(&dir.join("unitary_real.csv"), &output::matrix_csv(&u, &all, |z| z.re)?)?;
        output::write_atomic(&dir.join("unitary_imag.csv"), &output::matrix_csv(&u, &all, |z| z.im)?)?;
        outputs.extend(["unitary_real.csv".into(), "unitary_imag.csv".into()]);
    }
    let summary = format!("cost {:.3e}, fidelity {:.6}, leakage {:.3e}", report.cost, report.fidelity, report.leakage);
    let doc = EvaluateOutput {
        target: target.name.clone(),
        phase_marginalized_cost: objective::phase_marginalized_cost_of_logic(&report.logic_submatrix(), &target),
        report,
        two_photon_states: labels,
    };
    output::write_json(&dir.join("gate_report.json"), &doc)?;
    Ok(Outcome { summary, outputs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladOutput {
    pub target: String,
    pub integrator: String,
    pub rtol: f64,
    pub atol: f64,
    pub total_time: f64,
    pub gamma0: f64,
    pub temperature: f64,
    pub omega_physical: f64,
    /// Closed-system average gate fidelity of the same circuit.
    pub unitary_fidelity: f64,
    /// Fit of the input-averaged raw fidelity against γ/γ0 at zero dephasing.
    pub decay_fit: Option<DecayFit>,
}

fn lindblad_sweep(cfg: &RunConfig, spec: &CircuitSpec, dir: &Path) -> Result<Outcome, CliError> {
    let target = target(cfg)?;
    let l = &cfg.lindblad;
    let points: Vec<SweepPoint> = l
        .gamma_grid
        .iter()
        .flat_map(|&g| l.gamma_deph_grid.iter().map(move |&d| SweepPoint { gamma_over_gamma0: g, gamma_deph_over_gamma0: d }))
        .collect();
    if points.is_empty() {
        return Err(CliError::Usage("lindblad.gamma_grid and lindblad.gamma_deph_grid must not be empty".into()));
    }
    let rows = lindblad::noise_sweep(spec, &target, &points, l.temperature, l.omega_physical, &cfg.integrator_config())?;
    let csv = output::csv_text(
        &["gamma_over_gamma0", "gamma_deph_over_gamma0", "input_state", "raw_fidelity", "rescaled_fidelity"],
        rows.iter().map(|r| {
            vec![
                num(r.gamma_over_gamma0),
                num(r.gamma_deph_over_gamma0),
                r.input_state.clone(),
                num(r.raw_fidelity),
                num(r.rescaled_fidelity),
            ]
        }),
    )?;
    output::write_atomic(&dir.join("lindblad.csv"), &csv)?;

    let loss_only: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.input_state == "avg" && r.gamma_deph_over_gamma0 == 0.0)
        .map(|r| (r.gamma_over_gamma0, r.raw_fidelity))
        .collect();
    let decay_fit = if loss_only.len() >= 3 { Some(lindblad::decay_fit(&loss_only)?) } else { None };
    let doc = LindbladOutput {
        target: target.name.clone(),
        integrator: INTEGRATOR_NAME.into(),
        rtol: l.rtol,
        atol: l.atol,
        total_time: spec.total_time(),
        gamma0: lindblad::gamma0(spec),
        temperature: l.temperature,
        omega_physical: l.omega_physical,
        unitary_fidelity: objective::sector_gate_report(spec, &target)?.fidelity,
        decay_fit,
    };
    output::write_json(&dir.join("lindblad.json"), &doc)?;
    let summary = match decay_fit {
        Some(f) => format!("{} noise points; decay rate {:.4} (F0 {:.6})", points.len(), f.rate, f.f0),
        None => format!("{} noise points", points.len()),
    };
    Ok(Outcome { summary, outputs: vec!["lindblad.csv".into(), "lindblad.json".into()] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessOutput {
    pub target: String,
    pub seed: u64,
    pub samples: usize,
    /// How each sample is drawn.
    pub draw: String,
    pub nominal_fidelity: f64,
    pub reports: Vec<RobustnessReport>,
}

fn robustness(cfg: &RunConfig, spec: &CircuitSpec, dir: &Path) -> Result<Outcome, CliError> {
    let target = target(cfg)?;
    let r = &cfg.robustness;
    let sets = r.targets.sets();
    if r.n_max_list.is_empty() || sets.is_empty() || sets.iter().any(Vec::is_empty) {
        return Err(CliError::Usage("robustness.n_max_list and robustness.targets must be non-empty".into()));
    }
    let mut reports = Vec::new();
    for &n_max in &r.n_max_list {
        for set in &sets {
            let noise = NoiseSpec { n_max, targets: set.clone(), samples: r.samples, seed: cfg.seed };
            reports.push(monte_carlo_fidelity(spec, &target, &noise)?);
        }
    }
    let mut rows = Vec::new();
    for rep in &reports {
        for (k, f) in rep.fidelities.iter().enumerate() {
            rows.push(vec![num(rep.n_max), rep.target_set.clone(), k.to_string(), num(*f), String::new()]);
        }
        rows.push(vec![num(rep.n_max), rep.target_set.clone(), "mean".into(), num(rep.mean), num(rep.std)]);
    }
    let csv = output::csv_text(&["n_max", "target_set", "sample_index", "fidelity", "std"], rows)?;
    output::write_atomic(&dir.join("robustness.csv"), &csv)?;

    let nominal = objective::sector_gate_report(spec, &target)?.fidelity;
    let worst = reports.iter().map(|r| nominal - r.mean).fold(f64::NEG_INFINITY, f64::max);
    let doc = RobustnessOutput {
        target: target.name.clone(),
        seed: cfg.seed,
        samples: r.samples,
        draw: "independent uniform shift per parameter, N ~ U(-n_max, n_max)".into(),
        nominal_fidelity: nominal,
        reports,
    };
    output::write_json(&dir.join("robustness.json"), &doc)?;
    let summary = format!("{} noise settings; nominal fidelity {nominal:.6}, largest mean drop {worst:.3e}", doc.reports.len());
    Ok(Outcome { summary, outputs: vec!["robustness.csv".into(), "robustness.json".into()] })
}

/// Re-runs a manifest's job into `out_dir`.
pub fn replay(manifest: &Path, out_dir: &Path) -> Result<Outcome, CliError> {
    let m = Manifest::load(manifest)?;
    if m.code_version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest was written by version {}, replaying with {}", m.code_version, env!("CARGO_PKG_VERSION"));
    }
    execute(&m.job, out_dir)
}
