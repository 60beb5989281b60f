//! Truncated bosonic Fock basis over `N` channels and the dual-rail encoding.
//!
//! States are ranked in mixed radix `cutoff + 1` with channel 1 as the most
//! significant digit, so that the basis order coincides with the row order of
//! Kronecker products `A_1 ⊗ A_2 ⊗ ... ⊗ A_N`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, ZERO};
use num_complex::Complex64;

/// Per-channel photon cutoff used throughout the crate: two injected photons
/// never put more than two quanta into one channel.
pub const DEFAULT_CUTOFF: u8 = 2;

/// Photon counts, one per channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupationState(Vec<u8>);

impl OccupationState {
    pub fn new(occupations: Vec<u8>) -> Self {
        Self(occupations)
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    pub fn channels(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| n as u32).sum()
    }
}

impl From<Vec<u8>> for OccupationState {
    fn from(v: Vec<u8>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[u8; N]> for OccupationState {
    fn from(v: [u8; N]) -> Self {
        Self(v.to_vec())
    }
}

impl fmt::Display for OccupationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

/// Truncated Fock basis `{|0>, ..., |cutoff>}^{⊗ channels}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasis {
    channels: usize,
    cutoff: u8,
    dimension: usize,
}

impl FockBasis {
    pub fn new(channels: usize, cutoff: u8) -> Result<Self> {
        if channels == 0 || cutoff == 0 {
            return Err(Error::Domain(format!(
                "basis needs at least one channel and a positive cutoff (got {channels}, {cutoff})"
            )));
        }
        let radix = cutoff as usize + 1;
        let dimension = radix
            .checked_pow(channels as u32)
            .ok_or_else(|| Error::Domain(format!("basis with {channels} channels is too large")))?;
        Ok(Self { channels, cutoff, dimension })
    }

    /// The 81-dimensional basis of the four-channel circuits.
    pub fn four_channel() -> Self {
        Self { channels: 4, cutoff: DEFAULT_CUTOFF, dimension: 81 }
    }

    /// The 9-dimensional basis of a two-channel hopping region.
    pub fn two_channel() -> Self {
        Self { channels: 2, cutoff: DEFAULT_CUTOFF, dimension: 9 }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cutoff(&self) -> u8 {
        self.cutoff
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn radix(&self) -> usize {
        self.cutoff as usize + 1
    }

    pub fn index_of(&self, state: &OccupationState) -> Result<usize> {
        if state.channels() != self.channels {
            return Err(Error::ChannelMismatch { expected: self.channels, found: state.channels() });
        }
        let radix = self.radix();
        let mut index = 0;
        for (channel, &n) in state.occupations().iter().enumerate() {
            if n > self.cutoff {
                return Err(Error::OccupationAboveCutoff { channel: channel + 1, value: n, cutoff: self.cutoff });
            }
            index = index * radix + n as usize;
        }
        Ok(index)
    }

    pub fn occupation_of(&self, index: usize) -> Result<OccupationState> {
        if index >= self.dimension {
            return Err(Error::IndexOutOfRange { index, dimension: self.dimension });
        }
        Ok(self.digits(index))
    }

    fn digits(&self, mut index: usize) -> OccupationState {
        let radix = self.radix();
        let mut occ = vec![0u8; self.channels];
        for slot in occ.iter_mut().rev() {
            *slot = (index % radix) as u8;
            index /= radix;
        }
        OccupationState(occ)
    }

    /// All basis states in index order.
    pub fn states(&self) -> impl Iterator<Item = OccupationState> + '_ {
        (0..self.dimension).map(|i| self.digits(i))
    }

    /// Indices of all states with the given total photon number, ascending.
    pub fn sector_indices(&self, photons: u32) -> Vec<usize> {
        (0..self.dimension).filter(|&i| self.digits(i).total() == photons).collect()
    }

    /// Total photon number of every basis state, in index order.
    pub fn photon_numbers(&self) -> Vec<u32> {
        self.states().map(|s| s.total()).collect()
    }

    /// Dense annihilation operator `a_channel` (zero-based channel) truncated to the basis.
    pub fn annihilation(&self, channel: usize) -> ComplexMatrix {
        assert!(channel < self.channels, "channel {channel} out of range");
        let radix = self.radix();
        let stride = radix.pow((self.channels - 1 - channel) as u32);
        let mut a = ComplexMatrix::from_element(self.dimension, self.dimension, ZERO);
        for col in 0..self.dimension {
            let n = (col / stride) % radix;
            if n > 0 {
                a[(col - stride, col)] = Complex64::new((n as f64).sqrt(), 0.0);
            }
        }
        a
    }

    /// Dense number operator `n_channel`.
    pub fn number(&self, channel: usize) -> ComplexMatrix {
        let radix = self.radix();
        let stride = radix.pow((self.channels - 1 - channel) as u32);
        ComplexMatrix::from_fn(self.dimension, self.dimension, |r, c| {
            if r == c {
                Complex64::new(((r / stride) % radix) as f64, 0.0)
            } else {
                ZERO
            }
        })
    }
}

/// Two dual-rail qubits: `(control, target)` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicalState {
    pub first: bool,
    pub second: bool,
}

impl LogicalState {
    /// `|00>, |01>, |10>, |11>`, the order of the computational basis.
    pub const ALL: [LogicalState; 4] = [
        LogicalState { first: false, second: false },
        LogicalState { first: false, second: true },
        LogicalState { first: true, second: false },
        LogicalState { first: true, second: true },
    ];

    pub fn new(first: u8, second: u8) -> Self {
        Self { first: first != 0, second: second != 0 }
    }

    /// Position in the computational basis order.
    pub fn position(&self) -> usize {
        (self.first as usize) << 1 | self.second as usize
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.first as u8, self.second as u8)
    }
}

/// Dual-rail encoding: `|0>_2` puts the photon in the upper channel of the
/// pair, `|1>_2` in the lower one. Qubit 1 uses channels (1, 2), qubit 2
/// channels (3, 4).
pub fn logical_to_fock(logical: LogicalState) -> OccupationState {
    let rail = |bit: bool| if bit { [0u8, 1] } else { [1u8, 0] };
    let (a, b) = (rail(logical.first), rail(logical.second));
    OccupationState(vec![a[0], a[1], b[0], b[1]])
}

/// Basis indices of `|00>_2, |01>_2, |10>_2, |11>_2`.
pub fn computational_basis_indices(basis: &FockBasis) -> Result<[usize; 4]> {
    if basis.channels() != 4 {
        return Err(Error::ChannelMismatch { expected: 4, found: basis.channels() });
    }
    let mut out = [0usize; 4];
    for (slot, logical) in out.iter_mut().zip(LogicalState::ALL) {
        *slot = basis.index_of(&logical_to_fock(logical))?;
    }
    Ok(out)
}
