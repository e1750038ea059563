//! Logical-channel reliabilities: exact erasure density evolution, the
//! cumulative FER bound, dry-run frozen-bit selection and Monte Carlo
//! estimates for any channel.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{priors, transmit, ChannelModel};
use crate::circuits::{build_circuit, Boundary, Family, LayeredCircuit};
use crate::decoder::{decide, is_tie, FrozenMask, ScDecoder};
use crate::error::{Error, Result};
use crate::sim::wilson_interval;
use crate::window::{erasure_rates, Schedule};

/// Largest `L` accepted by the exact branching-MERA method.
pub const EXACT_MAX_LEVELS: usize = 20;

/// Default flip probability assumed by [`dry_run_select`].
pub const DRY_RUN_P: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
    DryRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub family: Family,
    pub n: usize,
    pub channel: String,
    pub method: Method,
    /// Per input index: erasure rate (exact) or error probability (MC).
    pub rates: Vec<f64>,
    /// 95% interval per index, for Monte Carlo reports.
    pub ci: Option<Vec<(f64, f64)>>,
}

impl ReliabilityReport {
    pub fn sorted_rates(&self) -> Vec<f64> {
        let mut r = self.rates.clone();
        r.sort_by(f64::total_cmp);
        r
    }

    /// Number of channels with rate strictly inside `(lo, hi)`.
    pub fn count_between(&self, lo: f64, hi: f64) -> usize {
        self.rates.iter().filter(|&&r| r > lo && r < hi).count()
    }

    pub fn mean(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }

    /// `index,rate,ci_low,ci_high`; interval columns are empty for exact reports.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,rate,ci_low,ci_high\n");
        for (i, r) in self.rates.iter().enumerate() {
            match &self.ci {
                Some(ci) => writeln!(out, "{i},{r},{},{}", ci[i].0, ci[i].1),
                None => writeln!(out, "{i},{r},,"),
            }
            .expect("write to string");
        }
        out
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "erasure probability {eps} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Polar erasure recursion over any ring-like scalar. Each level maps a
/// channel with erasure rate `z` to the pair `(z^2, 2z - z^2)`; the pair
/// occupies indices `2j, 2j + 1`.
pub fn de_polar_exact<P>(eps: P, levels: usize) -> Vec<P>
where
    P: Clone + Add<Output = P> + Sub<Output = P> + Mul<Output = P>,
{
    let mut z = vec![eps];
    for _ in 0..levels {
        z = z
            .iter()
            .flat_map(|v| {
                let sq = v.clone() * v.clone();
                [sq.clone(), v.clone() + v.clone() - sq]
            })
            .collect();
    }
    z
}

pub fn de_polar_erasure(eps: f64, levels: usize) -> Result<ReliabilityReport> {
    check_eps(eps)?;
    Ok(ReliabilityReport {
        family: Family::Polar,
        n: 1 << levels,
        channel: format!("bec:{eps}"),
        method: Method::Exact,
        rates: de_polar_exact(eps, levels),
        ci: None,
    })
}

/// Exact SC erasure rates for either family by propagating parity-subspace
/// knowledge through the ring windows. `P` may be a float or an exact type.
pub fn de_erasure_exact<P>(
    family: Family,
    eps: P,
    levels: usize,
    boundary: Boundary,
) -> Result<Vec<P>>
where
    P: Clone + Zero + One + Add<Output = P> + Sub<Output = P> + Mul<Output = P>,
{
    if levels == 0 {
        return Err(Error::ZeroLayers);
    }
    if levels > EXACT_MAX_LEVELS {
        return Err(Error::TooLarge {
            what: "exact density evolution levels (use Monte Carlo)",
            value: levels,
            limit: EXACT_MAX_LEVELS,
        });
    }
    let sched = Schedule::new(levels, family, boundary);
    let keep = P::one() - eps.clone();
    Ok(erasure_rates(&sched, eps, keep))
}

pub fn de_bmera_erasure(eps: f64, levels: usize, boundary: Boundary) -> Result<ReliabilityReport> {
    check_eps(eps)?;
    Ok(ReliabilityReport {
        family: Family::BranchingMera,
        n: 1 << levels,
        channel: format!("bec:{eps}"),
        method: Method::Exact,
        rates: de_erasure_exact(Family::BranchingMera, eps, levels, boundary)?,
        ci: None,
    })
}

/// Sum of the `k` smallest rates: a union bound on the frame error rate when
/// those channels carry data. Not capped; use `.min(1.0)` for display.
pub fn fer_upper_bound(report: &ReliabilityReport, k: usize) -> Result<f64> {
    if k > report.rates.len() {
        return Err(Error::TooLarge {
            what: "data bit count",
            value: k,
            limit: report.rates.len(),
        });
    }
    Ok(report.sorted_rates()[..k].iter().sum())
}

/// Largest `k` whose [`fer_upper_bound`] stays at or below `bound`.
pub fn max_data_bits(report: &ReliabilityReport, bound: f64) -> usize {
    let mut acc = 0.0;
    let mut k = 0;
    for r in report.sorted_rates() {
        acc += r;
        if acc > bound {
            break;
        }
        k += 1;
    }
    k
}

/// `P(x_i = 1)` from genie-aided SC with the all-zero input and every
/// output prior set to `(1 - p, p)`. Reported as the error side because
/// `P(x_i = 0)` rounds to 1 for most good channels of a long code.
pub fn dry_run_error_rates(circuit: &LayeredCircuit, p: f64) -> Result<Vec<f64>> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "dry-run p must lie in (0, 1/2], got {p}"
        )));
    }
    let n = circuit.n();
    let dec = ScDecoder::<f64>::new(circuit);
    let m = dec.genie_marginals(&vec![[1.0 - p, p]; n], &vec![0; n])?;
    Ok(m.iter().map(|m| m[1]).collect())
}

/// Unfreeze the `k` indices with the lowest dry-run error rate (ties to the
/// lower index).
pub fn dry_run_select(circuit: &LayeredCircuit, p: f64, k: usize) -> Result<FrozenMask> {
    let n = circuit.n();
    if k > n {
        return Err(Error::TooLarge {
            what: "data bit count",
            value: k,
            limit: n,
        });
    }
    let err = dry_run_error_rates(circuit, p)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| err[a].total_cmp(&err[b]).then(a.cmp(&b)));
    idx.truncate(k);
    FrozenMask::from_data_positions(n, &idx)
}

/// Per-index first-error statistics of genie-aided SC over `trials` random
/// frames. For the erasure channel the statistic is the probability that
/// bit `i` is left undetermined; otherwise the probability of a wrong
/// decision, counting exact ties as half an error.
pub fn mc_channel_estimate<R: Rng + ?Sized>(
    circuit: &LayeredCircuit,
    channel: &ChannelModel,
    trials: usize,
    rng: &mut R,
) -> Result<ReliabilityReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = circuit.n();
    let master: u64 = rng.gen();
    let dec = ScDecoder::<f64>::new(circuit);
    let erasure = matches!(channel, ChannelModel::Bec { .. });
    // counts in half-units
    let halves = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(master);
            rng.set_stream(t);
            let x: Vec<u8> = (0..n).map(|_| rng.gen::<bool>() as u8).collect();
            let y = circuit.encode(&x)?;
            let rx = transmit(channel, &y, &mut rng);
            let m = dec.genie_marginals(&priors::<f64>(channel, &rx)?, &x)?;
            Ok(m.iter()
                .zip(&x)
                .map(|(m, &b)| {
                    if erasure {
                        2 * u64::from(is_tie(*m))
                    } else if is_tie(*m) {
                        1
                    } else {
                        2 * u64::from(decide(*m) != b)
                    }
                })
                .collect())
        })
        .try_reduce(
            || vec![0; n],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let t = trials as f64;
    Ok(ReliabilityReport {
        family: circuit.family(),
        n,
        channel: channel.to_string(),
        method: Method::MonteCarlo,
        rates: halves.iter().map(|&h| h as f64 / 2.0 / t).collect(),
        ci: Some(
            halves
                .iter()
                .map(|&h| wilson_interval(h as f64 / 2.0, t))
                .collect(),
        ),
    })
}

/// Convenience: exact erasure report for a family.
pub fn de_erasure(
    family: Family,
    eps: f64,
    levels: usize,
    boundary: Boundary,
) -> Result<ReliabilityReport> {
    match family {
        Family::Polar => de_polar_erasure(eps, levels),
        Family::BranchingMera => de_bmera_erasure(eps, levels, boundary),
    }
}

/// Dry-run error rates as a report.
pub fn dry_run_report(
    family: Family,
    levels: usize,
    boundary: Boundary,
    p: f64,
) -> Result<ReliabilityReport> {
    let c = build_circuit(family, levels, boundary)?;
    Ok(ReliabilityReport {
        family,
        n: c.n(),
        channel: format!("bsc:{p}"),
        method: Method::DryRun,
        rates: dry_run_error_rates(&c, p)?,
        ci: None,
    })
}
