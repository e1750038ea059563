//! Polar and branching-MERA codes.
//!
//! Encoding circuits, successive-cancellation decoding as tensor-network
//! contraction, erasure density evolution, frozen-bit selection, ML oracles
//! and a Monte Carlo sweep harness.
//!
//! Numeric code is generic over [`Real`] (any `num_traits::Float`); the
//! exact density evolution routines accept any ring-like scalar so they can
//! run over rationals. Concrete aliases for `f64` and `f32` live below.

pub mod channels;
pub mod circuits;
pub mod decoder;
pub mod error;
pub mod gf2;
pub mod ml;
pub mod polarization;
pub mod sim;
pub mod tensor;
mod window;

use std::fmt::Debug;

pub use channels::{priors, transmit, ChannelModel, PriorVec, ReceivedWord, Symbol};
pub use circuits::{build_circuit, Boundary, Family, Gate, LayeredCircuit};
pub use decoder::{
    marginal, marginalize_exhaustive, sc_decode, DecodeResult, FrozenMask, ScDecoder,
};
pub use error::{Error, Result};
pub use gf2::{BinMatrix, BitVec};
pub use ml::{ml_erasure_decode, ml_exhaustive_decode, MlErasure};
pub use polarization::{
    de_bmera_erasure, de_polar_erasure, dry_run_select, fer_upper_bound, mc_channel_estimate,
    ReliabilityReport,
};
pub use sim::{run_sweep, summarize, SimRecord, SweepConfig};
pub use tensor::{Tensor, TensorNetwork};

/// Scalar used by tensors and decoders.
pub trait Real: num_traits::Float + Debug + Send + Sync + 'static {}
impl<T: num_traits::Float + Debug + Send + Sync + 'static> Real for T {}

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Network64 = TensorNetwork<f64>;
pub type Prior64 = PriorVec<f64>;
pub type Prior32 = PriorVec<f32>;
pub type Decoder64<'c> = ScDecoder<'c, f64>;
pub type Decoder32<'c> = ScDecoder<'c, f32>;
pub type DecodeResult64 = DecodeResult<f64>;
