//! Maximum-likelihood baselines: GF(2) elimination under erasures and
//! exhaustive search for tiny codes.

use crate::channels::{PriorVec, Symbol};
use crate::circuits::LayeredCircuit;
use crate::decoder::FrozenMask;
use crate::error::{Error, Result};
use crate::gf2::{pack, BitVec, Echelon};
use crate::Real;

pub const EXHAUSTIVE_MAX_K: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MlErasure {
    /// The full input word (frozen positions 0).
    Unique(BitVec),
    /// Dimension of the solution space over the data bits.
    Ambiguous(usize),
}

/// Erasure ML decoder for a fixed code: rows of `G` restricted to the data
/// columns, packed once.
#[derive(Clone, Debug)]
pub struct ErasureMl {
    frozen: FrozenMask,
    rows: Vec<Vec<u64>>,
}

impl ErasureMl {
    pub fn new(circuit: &LayeredCircuit, frozen: &FrozenMask) -> Result<Self> {
        circuit.check_len(frozen.n())?;
        let g = circuit.generator_matrix();
        let data = frozen.data_positions();
        let rows = (0..circuit.n())
            .map(|r| {
                let bits: Vec<u8> = data.iter().map(|&c| u8::from(g.get(r, c))).collect();
                let mut p = pack(&bits);
                p.resize(data.len().div_ceil(64).max(1), 0);
                p
            })
            .collect();
        Ok(ErasureMl {
            frozen: frozen.clone(),
            rows,
        })
    }

    fn eliminate(&self, received: &[Symbol]) -> Result<Echelon> {
        if received.len() != self.rows.len() {
            return Err(Error::LengthMismatch {
                expected: self.rows.len(),
                got: received.len(),
            });
        }
        let mut e = Echelon::new(self.frozen.k());
        for (j, sym) in received.iter().enumerate() {
            match *sym {
                Symbol::Known(b) => e.push(self.rows[j].clone(), b & 1),
                Symbol::Erased => {}
                Symbol::Soft(_) => return Err(Error::SymbolMismatch { position: j }),
            }
        }
        if e.is_inconsistent() {
            return Err(Error::Inconsistent);
        }
        Ok(e)
    }

    pub fn decode(&self, received: &[Symbol]) -> Result<MlErasure> {
        let e = self.eliminate(received)?;
        Ok(match e.solve() {
            Some(d) => MlErasure::Unique(self.frozen.embed(&d)?),
            None => MlErasure::Ambiguous(self.frozen.k() - e.rank()),
        })
    }

    /// Like [`decode`](Self::decode) but always returns a word: one member
    /// of the solution set with every free data variable set to 0.
    pub fn decode_guess_zero(&self, received: &[Symbol]) -> Result<(BitVec, usize)> {
        let e = self.eliminate(received)?;
        Ok((
            self.frozen.embed(&e.solve_free_zero())?,
            self.frozen.k() - e.rank(),
        ))
    }
}

pub fn ml_erasure_decode(
    circuit: &LayeredCircuit,
    frozen: &FrozenMask,
    received: &[Symbol],
) -> Result<MlErasure> {
    ErasureMl::new(circuit, frozen)?.decode(received)
}

/// Most likely input word over all `2^k` data assignments. Ties go to the
/// lexicographically smallest input (bit 0 compared first).
pub fn ml_exhaustive_decode<T: Real>(
    circuit: &LayeredCircuit,
    frozen: &FrozenMask,
    priors: &[PriorVec<T>],
) -> Result<BitVec> {
    let n = circuit.n();
    circuit.check_len(frozen.n())?;
    circuit.check_len(priors.len())?;
    let k = frozen.k();
    if k > EXHAUSTIVE_MAX_K {
        return Err(Error::TooLarge {
            what: "data bit count",
            value: k,
            limit: EXHAUSTIVE_MAX_K,
        });
    }
    let data = frozen.data_positions();
    let g = circuit.generator_matrix();
    let cols: Vec<BitVec> = data.iter().map(|&c| g.column(c)).collect();
    let logp: Vec<[T; 2]> = priors.iter().map(|p| [p[0].ln(), p[1].ln()]).collect();
    // lexicographic key: first data position is the most significant bit
    let key = |u: u32| -> u32 { (0..k).fold(0, |acc, b| acc | (u >> b & 1) << (k - 1 - b)) };

    let mut y = vec![0u8; n];
    let mut u = 0u32;
    let mut best = (T::neg_infinity(), u32::MAX);
    for step in 0..1u64 << k {
        if step > 0 {
            // Gray code: flip one data bit
            let b = step.trailing_zeros() as usize;
            u ^= 1 << b;
            for (yj, cj) in y.iter_mut().zip(&cols[b]) {
                *yj ^= cj;
            }
        }
        let ll = y
            .iter()
            .zip(&logp)
            .fold(T::zero(), |acc, (&b, l)| acc + l[b as usize]);
        let better = ll > best.0 || (ll == best.0 && key(u) < best.1) || best.1 == u32::MAX;
        if better {
            best = (ll, key(u));
        }
    }
    let u = key(best.1);
    let bits: Vec<u8> = (0..k).map(|b| (u >> b & 1) as u8).collect();
    frozen.embed(&bits)
}
