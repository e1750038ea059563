//! Memoryless binary-input channels and per-bit priors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Unnormalized `(w0, w1)` weight of an output bit.
pub type PriorVec<T> = [T; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelModel {
    Bec {
        eps: f64,
    },
    Bsc {
        p: f64,
    },
    /// Unit-energy BPSK (`0 -> +1`, `1 -> -1`) with noise std `sigma`.
    Awgn {
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Symbol {
    Known(u8),
    Erased,
    Soft(f64),
}

pub type ReceivedWord = Vec<Symbol>;

impl ChannelModel {
    pub fn bec(eps: f64) -> Result<Self> {
        check_prob("erasure probability", eps)?;
        Ok(ChannelModel::Bec { eps })
    }

    pub fn bsc(p: f64) -> Result<Self> {
        check_prob("flip probability", p)?;
        Ok(ChannelModel::Bsc { p })
    }

    pub fn awgn(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(ChannelModel::Awgn { sigma })
    }

    /// AWGN from `Eb/N0` in dB at code rate `rate`: `sigma^2 = 1 / (2 R Eb/N0)`.
    pub fn awgn_ebn0_db(db: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rate must lie in (0, 1], got {rate}"
            )));
        }
        Self::awgn((1.0 / (2.0 * rate * 10f64.powf(db / 10.0))).sqrt())
    }

    /// The scalar parameter (eps, p or sigma).
    pub fn param(&self) -> f64 {
        match *self {
            ChannelModel::Bec { eps } => eps,
            ChannelModel::Bsc { p } => p,
            ChannelModel::Awgn { sigma } => sigma,
        }
    }

    /// Same variant with a different parameter.
    pub fn with_param(&self, v: f64) -> Result<Self> {
        match self {
            ChannelModel::Bec { .. } => Self::bec(v),
            ChannelModel::Bsc { .. } => Self::bsc(v),
            ChannelModel::Awgn { .. } => Self::awgn(v),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ChannelModel::Bec { .. } => "bec",
            ChannelModel::Bsc { .. } => "bsc",
            ChannelModel::Awgn { .. } => "awgn",
        }
    }
}

fn check_prob(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!(
            "{what} must lie in [0, 1], got {v}"
        )));
    }
    Ok(())
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind(), self.param())
    }
}

/// Parses `bec:0.4`, `bsc:0.08`, `awgn:0.9` (sigma) and `awgn-db:2.0`
/// (Eb/N0 at rate 1/2).
impl FromStr for ChannelModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, v) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("expected kind:value, got {s:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad number in {s:?}")))?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "bec" => Self::bec(v),
            "bsc" => Self::bsc(v),
            "awgn" => Self::awgn(v),
            "awgn-db" => Self::awgn_ebn0_db(v, 0.5),
            other => Err(Error::InvalidParameter(format!(
                "unknown channel {other:?}"
            ))),
        }
    }
}

/// Pass a codeword through the channel, one independent use per bit.
pub fn transmit<R: Rng + ?Sized>(
    channel: &ChannelModel,
    codeword: &[u8],
    rng: &mut R,
) -> ReceivedWord {
    match *channel {
        ChannelModel::Bec { eps } => codeword
            .iter()
            .map(|&b| {
                if rng.gen::<f64>() < eps {
                    Symbol::Erased
                } else {
                    Symbol::Known(b)
                }
            })
            .collect(),
        ChannelModel::Bsc { p } => codeword
            .iter()
            .map(|&b| Symbol::Known(b ^ (rng.gen::<f64>() < p) as u8))
            .collect(),
        ChannelModel::Awgn { sigma } => {
            let noise = Normal::new(0.0, sigma).expect("sigma validated on construction");
            codeword
                .iter()
                .map(|&b| Symbol::Soft(if b == 0 { 1.0 } else { -1.0 } + noise.sample(rng)))
                .collect()
        }
    }
}

/// Per-output priors `p_i` proportional to the channel likelihoods.
pub fn priors<T: Real>(channel: &ChannelModel, received: &[Symbol]) -> Result<Vec<PriorVec<T>>> {
    let c = |v: f64| T::from(v).expect("finite prior");
    received
        .iter()
        .enumerate()
        .map(|(i, sym)| match (channel, *sym) {
            (ChannelModel::Bec { .. }, Symbol::Erased) => Ok([T::one(), T::one()]),
            (ChannelModel::Bec { .. }, Symbol::Known(b)) if b <= 1 => Ok(if b == 0 {
                [T::one(), T::zero()]
            } else {
                [T::zero(), T::one()]
            }),
            (&ChannelModel::Bsc { p }, Symbol::Known(b)) if b <= 1 => Ok(if b == 0 {
                [c(1.0 - p), c(p)]
            } else {
                [c(p), c(1.0 - p)]
            }),
            (&ChannelModel::Awgn { sigma }, Symbol::Soft(y)) if y.is_finite() => {
                let s2 = 2.0 * sigma * sigma;
                let l0 = -(y - 1.0).powi(2) / s2;
                let l1 = -(y + 1.0).powi(2) / s2;
                let m = l0.max(l1);
                Ok([c((l0 - m).exp()), c((l1 - m).exp())])
            }
            _ => Err(Error::SymbolMismatch { position: i }),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_flags() {
        assert_eq!(
            "bec:0.4".parse::<ChannelModel>().unwrap(),
            ChannelModel::Bec { eps: 0.4 }
        );
        assert_eq!(
            "bsc:0.08".parse::<ChannelModel>().unwrap(),
            ChannelModel::Bsc { p: 0.08 }
        );
        assert_eq!(
            "awgn:0.9".parse::<ChannelModel>().unwrap(),
            ChannelModel::Awgn { sigma: 0.9 }
        );
        // Eb/N0 = 0 dB at rate 1/2 gives sigma = 1
        let ChannelModel::Awgn { sigma } = "awgn-db:0".parse().unwrap() else {
            panic!()
        };
        assert!((sigma - 1.0).abs() < 1e-15);
        assert!("bec:1.5".parse::<ChannelModel>().is_err());
        assert!("foo:1".parse::<ChannelModel>().is_err());
    }

    #[test]
    fn bec_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cw = vec![0, 1, 1, 0, 1];
        let r = transmit(&ChannelModel::Bec { eps: 0.0 }, &cw, &mut rng);
        assert_eq!(r, cw.iter().map(|&b| Symbol::Known(b)).collect::<Vec<_>>());
        let r = transmit(&ChannelModel::Bec { eps: 1.0 }, &cw, &mut rng);
        assert!(r.iter().all(|s| *s == Symbol::Erased));
    }

    #[test]
    fn bsc_flip_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let r = transmit(&ChannelModel::Bsc { p: 0.11 }, &vec![0; n], &mut rng);
        let flips = r.iter().filter(|s| **s == Symbol::Known(1)).count() as f64;
        let sd = (n as f64 * 0.11 * 0.89).sqrt();
        assert!((flips - 0.11 * n as f64).abs() < 3.0 * sd);
    }

    #[test]
    fn prior_values() {
        let p: Vec<[f64; 2]> = priors(
            &ChannelModel::Bec { eps: 0.3 },
            &[Symbol::Erased, Symbol::Known(1)],
        )
        .unwrap();
        assert_eq!(p, vec![[1.0, 1.0], [0.0, 1.0]]);
        let p: Vec<[f64; 2]> = priors(&ChannelModel::Bsc { p: 0.2 }, &[Symbol::Known(0)]).unwrap();
        assert_eq!(p, vec![[0.8, 0.2]]);
        let p: Vec<[f64; 2]> = priors(
            &ChannelModel::Awgn { sigma: 1.0 },
            &[Symbol::Soft(0.0), Symbol::Soft(0.5)],
        )
        .unwrap();
        assert_eq!(p[0][0], p[0][1]);
        assert!((p[1][1] / p[1][0] - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(
            priors::<f64>(&ChannelModel::Bsc { p: 0.2 }, &[Symbol::Erased]),
            Err(Error::SymbolMismatch { position: 0 })
        );
    }

    #[test]
    fn awgn_far_symbols_stay_finite() {
        let p: Vec<[f64; 2]> =
            priors(&ChannelModel::Awgn { sigma: 0.1 }, &[Symbol::Soft(40.0)]).unwrap();
        assert_eq!(p[0][0], 1.0);
        assert!(p[0][1] >= 0.0 && p[0][1].is_finite());
    }
}
