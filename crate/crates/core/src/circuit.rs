//! Four-channel layer assembly, block composition and the total propagator.
//!
//! Channels are numbered 1..4 in documentation and 0..3 in code. Channel 1 is
//! the leftmost tensor factor. Five layer kinds exist:
//!
//! ```text
//!   free   FP ⊗ FP ⊗ FP ⊗ FP
//!   paral  HR(j_paral_upper) ⊗ HR(j_paral_lower)    channels (1,2) and (3,4)
//!   inter  FP ⊗ HR(j_inter) ⊗ FP                     channels (2,3)
//!   down   FP ⊗ FP ⊗ HR(j_down)                      channels (3,4)
//!   up     HR(j_up) ⊗ FP ⊗ FP                        channels (1,2)
//! ```
//!
//! Every factor of a sector shares the sector duration. A block applies its
//! sectors in `layer_order` (first entry first), and the circuit applies its
//! blocks in list order, so `U_tot = U_M ··· U_1`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{FockBasis, OccupationState};
use crate::layers::{self, FpLayerParams, HrLayerParams};
use crate::matrix::{self, ComplexMatrix};

/// Number of optimized hopping rates per block.
pub const PARAMS_PER_BLOCK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerTag {
    Free,
    Paral,
    Inter,
    Down,
    Up,
}

pub const DEFAULT_LAYER_ORDER: [LayerTag; 8] = [
    LayerTag::Paral,
    LayerTag::Free,
    LayerTag::Inter,
    LayerTag::Free,
    LayerTag::Down,
    LayerTag::Free,
    LayerTag::Up,
    LayerTag::Free,
];

impl LayerTag {
    pub const ALL: [LayerTag; 5] = [LayerTag::Free, LayerTag::Paral, LayerTag::Inter, LayerTag::Down, LayerTag::Up];

    pub fn as_str(&self) -> &'static str {
        match self {
            LayerTag::Free => "free",
            LayerTag::Paral => "paral",
            LayerTag::Inter => "inter",
            LayerTag::Down => "down",
            LayerTag::Up => "up",
        }
    }

    pub fn is_hopping(&self) -> bool {
        !matches!(self, LayerTag::Free)
    }

    /// Image under the channel reflection 1↔4, 2↔3.
    pub fn mirrored(&self) -> LayerTag {
        match self {
            LayerTag::Down => LayerTag::Up,
            LayerTag::Up => LayerTag::Down,
            other => *other,
        }
    }
}

impl fmt::Display for LayerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "free" => Ok(LayerTag::Free),
            "paral" => Ok(LayerTag::Paral),
            "inter" => Ok(LayerTag::Inter),
            "down" => Ok(LayerTag::Down),
            "up" => Ok(LayerTag::Up),
            _ => Err(Error::UnknownLayer(s.to_string())),
        }
    }
}

/// Position of a hopping rate inside its block's parameter slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamRole {
    ParalUpper = 0,
    ParalLower = 1,
    Inter = 2,
    Down = 3,
    Up = 4,
}

impl ParamRole {
    pub const NAMES: [&'static str; PARAMS_PER_BLOCK] = ["j_paral_upper", "j_paral_lower", "j_inter", "j_down", "j_up"];

    pub fn offset(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockParams {
    pub j_paral_upper: f64,
    pub j_paral_lower: f64,
    pub j_inter: f64,
    pub j_down: f64,
    pub j_up: f64,
}

impl BlockParams {
    pub fn to_array(&self) -> [f64; PARAMS_PER_BLOCK] {
        [self.j_paral_upper, self.j_paral_lower, self.j_inter, self.j_down, self.j_up]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { j_paral_upper: v[0], j_paral_lower: v[1], j_inter: v[2], j_down: v[3], j_up: v[4] }
    }

    pub fn get(&self, role: ParamRole) -> f64 {
        self.to_array()[role.offset()]
    }

    pub fn mirrored(&self) -> Self {
        Self {
            j_paral_upper: self.j_paral_lower,
            j_paral_lower: self.j_paral_upper,
            j_inter: self.j_inter,
            j_down: self.j_up,
            j_up: self.j_down,
        }
    }
}

fn default_omega() -> f64 {
    0.0
}

fn default_jmax() -> f64 {
    1.0
}

fn default_sector_time() -> f64 {
    1.0
}

fn default_layer_order() -> Vec<LayerTag> {
    DEFAULT_LAYER_ORDER.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub blocks: Vec<BlockParams>,
    pub u: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_jmax")]
    pub jmax: f64,
    #[serde(default = "default_sector_time")]
    pub sector_time: f64,
    #[serde(default = "default_layer_order")]
    pub layer_order: Vec<LayerTag>,
    /// Per-sector durations, block-major, overriding `sector_time` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_durations: Option<Vec<f64>>,
}

/// One sector of the flattened, time-ordered circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    pub block: usize,
    pub position: usize,
    pub tag: LayerTag,
    pub duration: f64,
}

impl CircuitSpec {
    /// `blocks` zero-coupling blocks with ω = 0, Jmax = 1, t = 1 and the default order.
    pub fn new(blocks: usize, u: f64) -> Self {
        Self {
            blocks: vec![BlockParams::default(); blocks],
            u,
            omega: default_omega(),
            jmax: default_jmax(),
            sector_time: default_sector_time(),
            layer_order: default_layer_order(),
            sector_durations: None,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_params(&self) -> usize {
        PARAMS_PER_BLOCK * self.blocks.len()
    }

    pub fn sectors_per_block(&self) -> usize {
        self.layer_order.len()
    }

    pub fn n_sectors(&self) -> usize {
        self.blocks.len() * self.layer_order.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::EmptyCircuit);
        }
        if self.layer_order.is_empty() {
            return Err(Error::Domain("layer_order is empty".into()));
        }
        if !(self.jmax > 0.0 && self.jmax.is_finite()) {
            return Err(Error::Domain(format!("jmax must be positive, got {}", self.jmax)));
        }
        if !(self.sector_time >= 0.0 && self.sector_time.is_finite()) {
            return Err(Error::Domain(format!("sector_time must be non-negative, got {}", self.sector_time)));
        }
        if let Some(d) = &self.sector_durations {
            if d.len() != self.n_sectors() {
                return Err(Error::DimensionMismatch { expected: self.n_sectors(), found: d.len() });
            }
        }
        Ok(())
    }

    pub fn duration(&self, block: usize, position: usize) -> f64 {
        match &self.sector_durations {
            Some(d) => d[block * self.layer_order.len() + position],
            None => self.sector_time,
        }
    }

    /// All sector durations, block-major.
    pub fn durations(&self) -> Vec<f64> {
        self.sectors().map(|s| s.duration).collect()
    }

    pub fn total_time(&self) -> f64 {
        self.sectors().map(|s| s.duration).sum()
    }

    /// Time-ordered sectors of every block.
    pub fn sectors(&self) -> impl Iterator<Item = Sector> + '_ {
        (0..self.blocks.len()).flat_map(move |b| {
            self.layer_order.iter().enumerate().map(move |(p, &tag)| Sector {
                block: b,
                position: p,
                tag,
                duration: self.duration(b, p),
            })
        })
    }

    /// The spec seen through the channel reflection 1↔4, 2↔3.
    pub fn mirrored(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(BlockParams::mirrored).collect(),
            layer_order: self.layer_order.iter().map(LayerTag::mirrored).collect(),
            ..self.clone()
        }
    }

    pub fn factors(&self, sector: &Sector) -> LayerFactors {
        layer_factors(sector.tag, &self.blocks[sector.block], self, sector.duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorKind {
    Free(FpLayerParams),
    Hopping { params: HrLayerParams, role: ParamRole },
}

/// One tensor factor of a layer: a propagator acting on consecutive channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub first_channel: usize,
    pub kind: FactorKind,
    pub matrix: ComplexMatrix,
}

impl Factor {
    fn free(first_channel: usize, p: FpLayerParams) -> Self {
        Self { first_channel, kind: FactorKind::Free(p), matrix: layers::u_fp(&p) }
    }

    fn hopping(first_channel: usize, p: HrLayerParams, role: ParamRole) -> Self {
        Self { first_channel, kind: FactorKind::Hopping { params: p, role }, matrix: layers::u_hr(&p) }
    }

    pub fn width(&self) -> usize {
        match self.kind {
            FactorKind::Free(_) => 1,
            FactorKind::Hopping { .. } => 2,
        }
    }

    pub fn derivative(&self) -> Option<(ParamRole, ComplexMatrix)> {
        match self.kind {
            FactorKind::Free(_) => None,
            FactorKind::Hopping { params, role } => Some((role, layers::d_u_hr_dj(&params))),
        }
    }
}

/// Local index of the occupations `occ[first..first + width]` (cutoff 2).
fn local_index(occ: &[u8], first: usize, width: usize) -> usize {
    occ[first..first + width].iter().fold(0, |acc, &n| acc * 3 + n as usize)
}

/// The tensor factors of one sector, ordered from channel 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFactors {
    pub factors: Vec<Factor>,
}

impl LayerFactors {
    pub fn to_dense(&self) -> ComplexMatrix {
        let mut it = self.factors.iter();
        let first = it.next().expect("at least one factor").matrix.clone();
        it.fold(first, |acc, f| matrix::kron(&acc, &f.matrix))
    }

    /// `⟨states[r]| L |states[c]⟩` with the `skip`-th factor replaced by `replacement`.
    fn restricted_with(&self, states: &[OccupationState], skip: Option<(usize, &ComplexMatrix)>) -> ComplexMatrix {
        let n = states.len();
        ComplexMatrix::from_fn(n, n, |r, c| {
            let (or, oc) = (states[r].occupations(), states[c].occupations());
            let mut value = Complex64::new(1.0, 0.0);
            for (k, f) in self.factors.iter().enumerate() {
                let m = match skip {
                    Some((s, rep)) if s == k => rep,
                    _ => &f.matrix,
                };
                let w = f.width();
                value *= m[(local_index(or, f.first_channel, w), local_index(oc, f.first_channel, w))];
                if value.re == 0.0 && value.im == 0.0 {
                    break;
                }
            }
            value
        })
    }

    /// The layer restricted to the span of `states` (exact when the span is
    /// invariant, e.g. a fixed photon-number sector).
    pub fn restricted(&self, states: &[OccupationState]) -> ComplexMatrix {
        self.restricted_with(states, None)
    }

    /// `(role, ∂L/∂J_role)` restricted to `states`, one entry per hopping factor.
    pub fn restricted_derivatives(&self, states: &[OccupationState]) -> Vec<(ParamRole, ComplexMatrix)> {
        self.factors
            .iter()
            .enumerate()
            .filter_map(|(k, f)| f.derivative().map(|(role, d)| (role, self.restricted_with(states, Some((k, &d))))))
            .collect()
    }
}

pub fn layer_factors(tag: LayerTag, block: &BlockParams, spec: &CircuitSpec, duration: f64) -> LayerFactors {
    let fp = FpLayerParams { omega: spec.omega, u: spec.u, t: duration };
    let hr = |j: f64| HrLayerParams { omega: spec.omega, u: spec.u, j, t: duration };
    let factors = match tag {
        LayerTag::Free => (0..4).map(|c| Factor::free(c, fp)).collect(),
        LayerTag::Paral => vec![
            Factor::hopping(0, hr(block.j_paral_upper), ParamRole::ParalUpper),
            Factor::hopping(2, hr(block.j_paral_lower), ParamRole::ParalLower),
        ],
        LayerTag::Inter => {
            vec![Factor::free(0, fp), Factor::hopping(1, hr(block.j_inter), ParamRole::Inter), Factor::free(3, fp)]
        }
        LayerTag::Down => vec![Factor::free(0, fp), Factor::free(1, fp), Factor::hopping(2, hr(block.j_down), ParamRole::Down)],
        LayerTag::Up => vec![Factor::hopping(0, hr(block.j_up), ParamRole::Up), Factor::free(2, fp), Factor::free(3, fp)],
    };
    LayerFactors { factors }
}

/// 81×81 layer unitary with the spec's sector time.
pub fn assemble_layer(tag: LayerTag, block: &BlockParams, spec: &CircuitSpec) -> ComplexMatrix {
    layer_factors(tag, block, spec, spec.sector_time).to_dense()
}

/// Parses the tag before assembling; unknown names are a domain error.
pub fn assemble_layer_named(tag: &str, block: &BlockParams, spec: &CircuitSpec) -> Result<ComplexMatrix> {
    Ok(assemble_layer(tag.parse()?, block, spec))
}

/// `L_8 ··· L_1` for block `index` of `spec`.
pub fn block_unitary_at(spec: &CircuitSpec, index: usize) -> ComplexMatrix {
    let dim = FockBasis::four_channel().dimension();
    let block = &spec.blocks[index];
    spec.layer_order
        .iter()
        .enumerate()
        .fold(matrix::identity(dim), |acc, (p, &tag)| layer_factors(tag, block, spec, spec.duration(index, p)).to_dense() * acc)
}

/// Block unitary of `block` under the layout and physics of `spec`.
pub fn block_unitary(block: &BlockParams, spec: &CircuitSpec) -> ComplexMatrix {
    let dim = FockBasis::four_channel().dimension();
    spec.layer_order
        .iter()
        .fold(matrix::identity(dim), |acc, &tag| layer_factors(tag, block, spec, spec.sector_time).to_dense() * acc)
}

pub fn total_unitary(spec: &CircuitSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    let dim = FockBasis::four_channel().dimension();
    Ok((0..spec.n_blocks()).fold(matrix::identity(dim), |acc, b| block_unitary_at(spec, b) * acc))
}

/// Total propagator restricted to the span of `states`.
pub fn total_restricted(spec: &CircuitSpec, states: &[OccupationState]) -> Result<ComplexMatrix> {
    spec.validate()?;
    let n = states.len();
    Ok(spec.sectors().fold(matrix::identity(n), |acc, s| spec.factors(&s).restricted(states) * acc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorDescriptor {
    pub tag: LayerTag,
    pub block: usize,
    pub duration: f64,
    pub hamiltonian: ComplexMatrix,
    pub unitary: ComplexMatrix,
}

/// 81×81 Hamiltonian of a sector with the given active couplings.
pub fn sector_hamiltonian(tag: LayerTag, block: &BlockParams, spec: &CircuitSpec) -> ComplexMatrix {
    let basis = FockBasis::four_channel();
    let mut h = layers::onsite_hamiltonian(&basis, spec.omega, spec.u);
    let couplings: &[(usize, usize, f64)] = match tag {
        LayerTag::Free => &[],
        LayerTag::Paral => &[(0, 1, block.j_paral_upper), (2, 3, block.j_paral_lower)],
        LayerTag::Inter => &[(1, 2, block.j_inter)],
        LayerTag::Down => &[(2, 3, block.j_down)],
        LayerTag::Up => &[(0, 1, block.j_up)],
    };
    for &(i, k, j) in couplings {
        h += layers::hopping_term(&basis, i, k) * Complex64::new(j, 0.0);
    }
    h
}

pub fn sector_hamiltonians(spec: &CircuitSpec) -> Result<Vec<SectorDescriptor>> {
    spec.validate()?;
    Ok(spec
        .sectors()
        .map(|s| SectorDescriptor {
            tag: s.tag,
            block: s.block,
            duration: s.duration,
            hamiltonian: sector_hamiltonian(s.tag, &spec.blocks[s.block], spec),
            unitary: spec.factors(&s).to_dense(),
        })
        .collect())
}

pub fn pack_params(spec: &CircuitSpec) -> Vec<f64> {
    spec.blocks.iter().flat_map(|b| b.to_array()).collect()
}

pub fn unpack_params(v: &[f64], template: &CircuitSpec) -> Result<CircuitSpec> {
    let expected = template.n_params();
    if v.len() != expected {
        return Err(Error::ParamLength { expected, found: v.len() });
    }
    let mut spec = template.clone();
    spec.blocks = v.chunks_exact(PARAMS_PER_BLOCK).map(BlockParams::from_slice).collect();
    Ok(spec)
}

/// Basis permutation of the channel reflection: `perm[i]` is the index of the
/// reversed occupation of state `i`.
pub fn mirror_permutation(basis: &FockBasis) -> Vec<usize> {
    basis
        .states()
        .map(|s| {
            let mut occ = s.occupations().to_vec();
            occ.reverse();
            basis.index_of(&OccupationState::new(occ)).expect("reflection preserves cutoff")
        })
        .collect()
}
