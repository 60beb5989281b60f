//! Monte Carlo over static fabrication errors: every targeted parameter is
//! shifted by `N·θ_ref` with an independent `N ~ U(-n_max, n_max)`.
//!
//! Reference scales are Jmax for hopping rates and the nominal duration of
//! each sector for interaction (`T_HR`) and free-propagation (`T_FP`) times.
//! Perturbed values are not clipped to the optimization box.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitSpec, PARAMS_PER_BLOCK};
use crate::error::{Error, Result};
use crate::objective::{sector_gate_report, TargetGate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PerturbTarget {
    #[serde(rename = "J", alias = "j")]
    J,
    #[serde(rename = "T_HR", alias = "t_hr")]
    THr,
    #[serde(rename = "T_FP", alias = "t_fp")]
    TFp,
}

impl PerturbTarget {
    pub const ALL: [PerturbTarget; 3] = [PerturbTarget::J, PerturbTarget::THr, PerturbTarget::TFp];

    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbTarget::J => "J",
            PerturbTarget::THr => "T_HR",
            PerturbTarget::TFp => "T_FP",
        }
    }
}

impl fmt::Display for PerturbTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "J" => Ok(PerturbTarget::J),
            "T_HR" | "THR" => Ok(PerturbTarget::THr),
            "T_FP" | "TFP" => Ok(PerturbTarget::TFp),
            _ => Err(Error::Domain(format!("unknown perturbation target '{s}' (expected J, T_HR or T_FP)"))),
        }
    }
}

/// `J+T_HR+T_FP`-style label of a target set, in canonical order.
pub fn target_set_label(targets: &[PerturbTarget]) -> String {
    let mut t = targets.to_vec();
    t.sort();
    t.dedup();
    t.iter().map(|x| x.as_str()).collect::<Vec<_>>().join("+")
}

fn default_samples() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub n_max: f64,
    pub targets: Vec<PerturbTarget>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_max >= 0.0 && self.n_max.is_finite()) {
            return Err(Error::Domain(format!("n_max must be finite and non-negative, got {}", self.n_max)));
        }
        if self.samples == 0 {
            return Err(Error::Domain("samples must be at least 1".into()));
        }
        Ok(())
    }

    fn targets(&self, t: PerturbTarget) -> bool {
        self.targets.contains(&t)
    }
}

/// One perturbed copy of `spec`, a deterministic function of `(seed, sample_index)`.
///
/// Draw order is fixed whatever the targets: the five hopping rates of every
/// block, then one draw per sector. Untargeted draws are discarded, so a
/// given sample sees the same `N` for a parameter in every target set.
pub fn perturb_spec(spec: &CircuitSpec, noise: &NoiseSpec, sample_index: usize) -> CircuitSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(sample_index as u64);
    let mut draw = || noise.n_max * (2.0 * rng.random::<f64>() - 1.0);

    let mut out = spec.clone();
    let j_draws: Vec<f64> = (0..spec.n_blocks() * PARAMS_PER_BLOCK).map(|_| draw()).collect();
    let t_draws: Vec<f64> = (0..spec.n_sectors()).map(|_| draw()).collect();

    if noise.targets(PerturbTarget::J) {
        for (b, block) in out.blocks.iter_mut().enumerate() {
            let mut v = block.to_array();
            for (k, x) in v.iter_mut().enumerate() {
                *x += j_draws[b * PARAMS_PER_BLOCK + k] * spec.jmax;
            }
            *block = crate::circuit::BlockParams::from_slice(&v);
        }
    }
    let (hr, fp) = (noise.targets(PerturbTarget::THr), noise.targets(PerturbTarget::TFp));
    if (hr || fp) && noise.n_max > 0.0 {
        let durations = spec
            .sectors()
            .zip(&t_draws)
            .map(|(s, n)| {
                let hit = if s.tag.is_hopping() { hr } else { fp };
                if hit {
                    s.duration + n * s.duration
                } else {
                    s.duration
                }
            })
            .collect();
        out.sector_durations = Some(durations);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub n_max: f64,
    pub target_set: String,
    pub fidelities: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `fidelities`.
    pub std: f64,
}

impl RobustnessReport {
    fn from_samples(noise: &NoiseSpec, fidelities: Vec<f64>) -> Self {
        let n = fidelities.len() as f64;
        let mean = fidelities.iter().sum::<f64>() / n;
        let var = fidelities.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
        Self { n_max: noise.n_max, target_set: target_set_label(&noise.targets), fidelities, mean, std: var.sqrt() }
    }
}

/// Average gate fidelity of `noise.samples` perturbed copies of `spec`.
pub fn monte_carlo_fidelity(spec: &CircuitSpec, target: &TargetGate, noise: &NoiseSpec) -> Result<RobustnessReport> {
    noise.validate()?;
    spec.validate()?;
    let fidelities = (0..noise.samples)
        .into_par_iter()
        .map(|k| sector_gate_report(&perturb_spec(spec, noise, k), target).map(|r| r.fidelity))
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustnessReport::from_samples(noise, fidelities))
}
