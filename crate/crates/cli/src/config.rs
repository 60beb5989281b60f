//! Run configuration: one JSON document, versioned, with CLI overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use kerr_gates::circuit::{CircuitSpec, LayerTag, DEFAULT_LAYER_ORDER};
use kerr_gates::lindblad::IntegratorConfig;
use kerr_gates::optimizer::{LineSearchConfig, OptimizerConfig};
use kerr_gates::robustness::PerturbTarget;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub restarts: usize,
    pub memory: usize,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub cost_tolerance: f64,
    pub init_mean: f64,
    pub init_std: f64,
    pub line_search: LineSearchConfig,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            restarts: d.restarts,
            memory: d.memory,
            max_iterations: d.max_iterations,
            grad_tolerance: d.grad_tolerance,
            cost_tolerance: d.cost_tolerance,
            init_mean: d.init_mean,
            init_std: d.init_std,
            line_search: d.line_search,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LindbladSection {
    /// γ/γ0 values.
    pub gamma_grid: Vec<f64>,
    /// γ_deph/γ0 values; the sweep runs over the Cartesian product with `gamma_grid`.
    pub gamma_deph_grid: Vec<f64>,
    pub temperature: f64,
    pub omega_physical: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for LindbladSection {
    fn default() -> Self {
        let i = IntegratorConfig::default();
        Self {
            gamma_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
            gamma_deph_grid: vec![0.0],
            temperature: 0.0,
            omega_physical: 1.0,
            rtol: i.rel_tolerance,
            atol: i.abs_tolerance,
        }
    }
}

/// A single target set (`["J", "T_HR"]`) or a list of them (`[["J"], ["T_FP"]]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSets {
    One(Vec<PerturbTarget>),
    Many(Vec<Vec<PerturbTarget>>),
}

impl TargetSets {
    pub fn sets(&self) -> Vec<Vec<PerturbTarget>> {
        match self {
            TargetSets::One(s) => vec![s.clone()],
            TargetSets::Many(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSection {
    pub n_max_list: Vec<f64>,
    pub targets: TargetSets,
    pub samples: usize,
}

impl Default for RobustnessSection {
    fn default() -> Self {
        use PerturbTarget::*;
        Self {
            n_max_list: vec![0.001, 0.01, 0.05],
            targets: TargetSets::Many(vec![vec![J], vec![THr], vec![TFp], vec![J, THr, TFp]]),
            samples: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub u_values: Vec<f64>,
    pub block_counts: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { u_values: vec![0.0, 0.05, 0.5, 10.0], block_counts: vec![4, 8, 12, 16, 20] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub target: String,
    pub blocks: usize,
    pub u_over_jmax: f64,
    pub omega: f64,
    pub jmax: f64,
    pub sector_time: f64,
    pub layer_order: Vec<LayerTag>,
    pub seed: u64,
    pub optimizer: OptimizerSection,
    pub lindblad: LindbladSection,
    pub robustness: RobustnessSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            target: "cnot".into(),
            blocks: 20,
            u_over_jmax: 0.5,
            omega: 0.0,
            jmax: 1.0,
            sector_time: 1.0,
            layer_order: DEFAULT_LAYER_ORDER.to_vec(),
            seed: 0,
            optimizer: OptimizerSection::default(),
            lindblad: LindbladSection::default(),
            robustness: RobustnessSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Allowed keys, nested sections spelled `section.key`.
const KNOWN_KEYS: &[&str] = &[
    "schema_version",
    "target",
    "blocks",
    "u_over_jmax",
    "omega",
    "jmax",
    "sector_time",
    "layer_order",
    "seed",
    "optimizer",
    "optimizer.restarts",
    "optimizer.memory",
    "optimizer.max_iterations",
    "optimizer.grad_tolerance",
    "optimizer.cost_tolerance",
    "optimizer.init_mean",
    "optimizer.init_std",
    "optimizer.line_search",
    "optimizer.line_search.c1",
    "optimizer.line_search.c2",
    "optimizer.line_search.max_evaluations",
    "lindblad",
    "lindblad.gamma_grid",
    "lindblad.gamma_deph_grid",
    "lindblad.temperature",
    "lindblad.omega_physical",
    "lindblad.rtol",
    "lindblad.atol",
    "robustness",
    "robustness.n_max_list",
    "robustness.targets",
    "robustness.samples",
    "sweep",
    "sweep.u_values",
    "sweep.block_counts",
];

/// Every key of `value` (recursively into known sections) not in the schema.
pub fn unknown_keys(value: &Value) -> Vec<String> {
    fn walk(v: &Value, prefix: &str, out: &mut Vec<String>) {
        let Value::Object(map) = v else { return };
        for (k, child) in map {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            if !KNOWN_KEYS.contains(&path.as_str()) {
                out.push(path);
            } else if child.is_object() {
                walk(child, &path, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(value, "", &mut out);
    out
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
        if !value.is_object() {
            return Err(CliError::Usage("config must be a JSON object".into()));
        }
        let unknown = unknown_keys(&value);
        if !unknown.is_empty() {
            return Err(CliError::Usage(format!("unknown config keys: {}", unknown.join(", "))));
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut bad = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            bad.push(format!("schema_version (expected {SCHEMA_VERSION}, got {})", self.schema_version));
        }
        if kerr_gates::objective::TargetGate::from_name(&self.target).is_err() {
            bad.push(format!("target ('{}' is not one of cnot, ms, identity)", self.target));
        }
        if self.blocks == 0 {
            bad.push("blocks (must be positive)".into());
        }
        if !(self.jmax > 0.0) {
            bad.push("jmax (must be positive)".into());
        }
        if !(self.sector_time > 0.0) {
            bad.push("sector_time (must be positive)".into());
        }
        if self.layer_order.is_empty() {
            bad.push("layer_order (must not be empty)".into());
        }
        if !(self.lindblad.rtol > 0.0 && self.lindblad.atol > 0.0) {
            bad.push("lindblad.rtol/atol (must be positive)".into());
        }
        if self.robustness.samples == 0 {
            bad.push("robustness.samples (must be positive)".into());
        }
        if let Err(e) = self.optimizer_config().validate() {
            bad.push(format!("optimizer ({e})"));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!("invalid config keys: {}", bad.join("; "))))
        }
    }

    /// Zero-coupling circuit with this configuration's physics and layout.
    pub fn template(&self) -> CircuitSpec {
        CircuitSpec {
            omega: self.omega,
            jmax: self.jmax,
            sector_time: self.sector_time,
            layer_order: self.layer_order.clone(),
            ..CircuitSpec::new(self.blocks, self.u_over_jmax * self.jmax)
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            restarts: o.restarts,
            init_mean: o.init_mean,
            init_std: o.init_std,
            memory: o.memory,
            max_iterations: o.max_iterations,
            grad_tolerance: o.grad_tolerance,
            cost_tolerance: o.cost_tolerance,
            seed: self.seed,
            line_search: o.line_search,
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig { rel_tolerance: self.lindblad.rtol, abs_tolerance: self.lindblad.atol, ..IntegratorConfig::default() }
    }
}
