//! Successive-cancellation decoding.
//!
//! Bits are decided from `n - 1` down to `0`. For bit `i` the inputs to the
//! right are fixed to their decided values, those to the left are uniform
//! ("e"), and the marginal of `x_i` is the contraction of the resulting
//! network with the output priors. Frozen inputs to the left stay uniform.
//!
//! Two paths compute the same marginals:
//! * [`marginal`] builds, simplifies and contracts the network for one bit;
//! * [`ScDecoder`] reuses ring messages across bits in `O(n log n)` total.

use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::channels::PriorVec;
use crate::circuits::LayeredCircuit;
use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::tensor::{
    cnot_with_labels, schedule_and_contract, simplify, BitValue, Node, NodeKind, Tensor,
    TensorNetwork,
};
use crate::window::{Engine, Schedule};
use crate::Real;

/// Width cap used by the reference path on the canonical circuits.
pub const SC_WIDTH: usize = 4;
const CUSTOM_WIDTH: usize = 20;
const EXHAUSTIVE_MAX_N: usize = 16;

/// Frozen input positions (carrying 0); the others carry data.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrozenMask {
    frozen: Vec<bool>,
}

impl FrozenMask {
    pub fn new(frozen: Vec<bool>) -> Self {
        FrozenMask { frozen }
    }

    pub fn all_frozen(n: usize) -> Self {
        FrozenMask {
            frozen: vec![true; n],
        }
    }

    pub fn none_frozen(n: usize) -> Self {
        FrozenMask {
            frozen: vec![false; n],
        }
    }

    /// Everything frozen except `data`.
    pub fn from_data_positions(n: usize, data: &[usize]) -> Result<Self> {
        let mut frozen = vec![true; n];
        for &j in data {
            if j >= n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: j,
                });
            }
            frozen[j] = false;
        }
        Ok(FrozenMask { frozen })
    }

    pub fn n(&self) -> usize {
        self.frozen.len()
    }

    /// Number of data bits.
    pub fn k(&self) -> usize {
        self.frozen.iter().filter(|f| !**f).count()
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.frozen
    }

    pub fn data_positions(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.frozen[i]).collect()
    }

    /// Input word with `data` placed on the unfrozen positions.
    pub fn embed(&self, data: &[u8]) -> Result<BitVec> {
        let pos = self.data_positions();
        if data.len() != pos.len() {
            return Err(Error::LengthMismatch {
                expected: pos.len(),
                got: data.len(),
            });
        }
        let mut x = vec![0; self.n()];
        for (&p, &d) in pos.iter().zip(data) {
            x[p] = d;
        }
        Ok(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult<T> {
    pub bits: BitVec,
    /// Normalized `(P(x_i = 0), P(x_i = 1))` as seen when bit `i` was decided.
    pub marginals: Vec<PriorVec<T>>,
    /// Positions in the order they were decided.
    pub order: Vec<usize>,
}

impl<T: Real> DecodeResult<T> {
    fn empty(n: usize) -> Self {
        DecodeResult {
            bits: vec![0; n],
            marginals: vec![[T::zero(); 2]; n],
            order: Vec::with_capacity(n),
        }
    }

    fn record(&mut self, i: usize, m: PriorVec<T>, frozen: bool) -> u8 {
        let m = normalize(m);
        let b = if frozen { 0 } else { decide(m) };
        self.bits[i] = b;
        self.marginals[i] = m;
        self.order.push(i);
        b
    }
}

/// Whether the two entries agree to within rounding (256 ulps of their sum).
/// Different contraction orders round differently, so exact equality would
/// make tie-breaking depend on the path.
pub fn is_tie<T: Real>(m: PriorVec<T>) -> bool {
    let tol = T::epsilon() * T::from(256.0).expect("256");
    (m[1] - m[0]).abs() <= tol * (m[0] + m[1])
}

/// Argmax with ties (see [`is_tie`]) going to 0.
pub fn decide<T: Real>(m: PriorVec<T>) -> u8 {
    u8::from(m[1] > m[0] && !is_tie(m))
}

/// Scale to unit sum; an all-zero pair becomes `(1/2, 1/2)`.
pub fn normalize<T: Real>(m: PriorVec<T>) -> PriorVec<T> {
    let s = m[0] + m[1];
    if s > T::zero() {
        [m[0] / s, m[1] / s]
    } else {
        let h = T::from(0.5).expect("0.5");
        [h, h]
    }
}

fn check_inputs<T>(
    circuit: &LayeredCircuit,
    priors: &[PriorVec<T>],
    i: usize,
    suffix: &[u8],
) -> Result<()> {
    let n = circuit.n();
    circuit.check_len(priors.len())?;
    if i >= n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: i,
        });
    }
    if suffix.len() != n - i - 1 {
        return Err(Error::LengthMismatch {
            expected: n - i - 1,
            got: suffix.len(),
        });
    }
    Ok(())
}

/// The SC network for bit `i`: "e" on inputs left of `i`, `suffix` on the
/// inputs right of it, `x_i` open, output priors at the bottom.
pub fn sc_network<T: Real>(
    circuit: &LayeredCircuit,
    priors: &[PriorVec<T>],
    suffix: &[u8],
    i: usize,
) -> Result<TensorNetwork<T>> {
    check_inputs(circuit, priors, i, suffix)?;
    let n = circuit.n();
    let mut net = TensorNetwork::new();
    let mut cur: Vec<usize> = (0..n).map(|_| net.fresh_label(0)).collect();
    for j in 0..n {
        let v = match j.cmp(&i) {
            std::cmp::Ordering::Less => BitValue::Uniform,
            std::cmp::Ordering::Equal => {
                net.add_open(cur[j]);
                continue;
            }
            std::cmp::Ordering::Greater => BitValue::from_bit(suffix[j - i - 1]),
        };
        net.add(Node {
            tensor: Tensor::bit(cur[j], v),
            kind: NodeKind::Bit(v),
            layer: 0,
        });
    }
    for (k, layer) in circuit.layers().iter().enumerate() {
        for g in layer {
            let co = net.fresh_label(k + 1);
            let to = net.fresh_label(k + 1);
            let t = cnot_with_labels([cur[g.control], cur[g.target], co, to]);
            net.add(Node {
                tensor: t,
                kind: NodeKind::Cnot,
                layer: k,
            });
            cur[g.control] = co;
            cur[g.target] = to;
        }
    }
    let depth = circuit.depth();
    for (j, p) in priors.iter().enumerate() {
        let t = Tensor::new(vec![cur[j]], p.to_vec())?;
        net.add(Node {
            tensor: t,
            kind: NodeKind::Prior,
            layer: depth,
        });
    }
    Ok(net)
}

fn reference_cap(circuit: &LayeredCircuit) -> usize {
    if circuit.is_canonical() {
        SC_WIDTH
    } else {
        CUSTOM_WIDTH
    }
}

/// Marginal of `x_i` given the priors and the decided suffix
/// `x_{i+1..n}`, by simplifying and contracting the SC network.
/// The pair is normalized to unit sum (zero if the suffix is impossible).
pub fn marginal<T: Real>(
    circuit: &LayeredCircuit,
    priors: &[PriorVec<T>],
    suffix: &[u8],
    i: usize,
) -> Result<PriorVec<T>> {
    let net = simplify(&sc_network(circuit, priors, suffix, i)?);
    let c = schedule_and_contract(&net, reference_cap(circuit))?;
    let d = c.tensor.data();
    Ok([d[0], d[1]])
}

/// Brute-force marginal: sums the output likelihood over every completion
/// of the inputs left of `i`. Only for `n <= 16`.
pub fn marginalize_exhaustive<T: Real>(
    circuit: &LayeredCircuit,
    priors: &[PriorVec<T>],
    suffix: &[u8],
    i: usize,
) -> Result<PriorVec<T>> {
    let n = circuit.n();
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::TooLarge {
            what: "code length",
            value: n,
            limit: EXHAUSTIVE_MAX_N,
        });
    }
    check_inputs(circuit, priors, i, suffix)?;
    let g = circuit.generator_matrix();
    let cols: Vec<u32> = (0..n)
        .map(|j| (0..n).fold(0u32, |m, r| m | u32::from(g.get(r, j)) << r))
        .collect();
    let base =
        suffix.iter().enumerate().fold(
            0u32,
            |m, (k, &b)| if b & 1 == 1 { m ^ cols[i + 1 + k] } else { m },
        );
    let mut out = [T::zero(); 2];
    for xi in 0..2usize {
        let with_i = if xi == 1 { base ^ cols[i] } else { base };
        for prefix in 0..1u32 << i {
            let mut y = with_i;
            let mut bits = prefix;
            while bits != 0 {
                y ^= cols[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
            let w = (0..n).fold(T::one(), |acc, j| acc * priors[j][(y >> j & 1) as usize]);
            out[xi] = out[xi] + w;
        }
    }
    Ok(out)
}

/// SC decoding through [`marginal`], one full contraction per bit.
pub fn sc_decode_reference<T: Real>(
    circuit: &LayeredCircuit,
    frozen: &FrozenMask,
    priors: &[PriorVec<T>],
) -> Result<DecodeResult<T>> {
    let n = circuit.n();
    circuit.check_len(frozen.n())?;
    circuit.check_len(priors.len())?;
    let mut res = DecodeResult::empty(n);
    for i in (0..n).rev() {
        let m = marginal(circuit, priors, &res.bits[i + 1..], i)?;
        res.record(i, m, frozen.is_frozen(i));
    }
    Ok(res)
}

/// SC decoder with a precomputed message schedule.
///
/// Building the decoder is `O(n log n)`; each decode is `O(n log n)` and
/// allocates its own workspace, so one decoder can serve many threads.
pub struct ScDecoder<'c, T> {
    circuit: &'c LayeredCircuit,
    schedule: Option<Schedule>,
    _t: PhantomData<fn() -> T>,
}

impl<'c, T: Real> ScDecoder<'c, T> {
    pub fn new(circuit: &'c LayeredCircuit) -> Self {
        let schedule = circuit
            .is_canonical()
            .then(|| Schedule::new(circuit.levels(), circuit.family(), circuit.boundary()));
        ScDecoder {
            circuit,
            schedule,
            _t: PhantomData,
        }
    }

    pub fn circuit(&self) -> &LayeredCircuit {
        self.circuit
    }

    /// Whether decodes use the memoized path (canonical circuits only).
    pub fn is_memoized(&self) -> bool {
        self.schedule.is_some()
    }

    pub fn decode(&self, frozen: &FrozenMask, priors: &[PriorVec<T>]) -> Result<DecodeResult<T>> {
        self.circuit.check_len(frozen.n())?;
        self.circuit.check_len(priors.len())?;
        let Some(sched) = &self.schedule else {
            return sc_decode_reference(self.circuit, frozen, priors);
        };
        let mut res = DecodeResult::empty(self.circuit.n());
        Engine::new(sched).run(priors, |i, m| res.record(i, m, frozen.is_frozen(i)));
        Ok(res)
    }

    /// Marginals of every bit when the true input `truth` is supplied as the
    /// suffix (genie-aided SC).
    pub fn genie_marginals(
        &self,
        priors: &[PriorVec<T>],
        truth: &[u8],
    ) -> Result<Vec<PriorVec<T>>> {
        let n = self.circuit.n();
        self.circuit.check_len(priors.len())?;
        self.circuit.check_len(truth.len())?;
        let mut out = vec![[T::zero(); 2]; n];
        match &self.schedule {
            Some(sched) => Engine::new(sched).run(priors, |i, m| {
                out[i] = normalize(m);
                truth[i]
            }),
            None => {
                for i in 0..n {
                    out[i] = normalize(marginal(self.circuit, priors, &truth[i + 1..], i)?);
                }
            }
        }
        Ok(out)
    }
}

pub fn sc_decode<T: Real>(
    circuit: &LayeredCircuit,
    frozen: &FrozenMask,
    priors: &[PriorVec<T>],
) -> Result<DecodeResult<T>> {
    ScDecoder::new(circuit).decode(frozen, priors)
}
