//! Monte Carlo FER/BER sweeps.
//!
//! Frame `f` of grid point `g` draws from `ChaCha8Rng::seed_from_u64(seed)`
//! on stream `(g << 40) | f`, so results do not depend on scheduling. Frames
//! run in fixed batches and early stopping is checked between batches only.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{priors, transmit, ChannelModel, Symbol};
use crate::circuits::{build_circuit, Boundary, Family, LayeredCircuit};
use crate::decoder::{is_tie, DecodeResult, FrozenMask, ScDecoder};
use crate::error::{Error, Result};
use crate::ml::{ml_exhaustive_decode, ErasureMl};
use crate::polarization::{dry_run_select, DRY_RUN_P};

pub const BATCH: u64 = 256;
pub const VERSION: &str = concat!("bmera-", env!("CARGO_PKG_VERSION"));
const Z95: f64 = 1.959963984540054;

/// 95% Wilson score interval for `x` successes out of `n`.
pub fn wilson_interval(x: f64, n: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let p = x / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the exact endpoints at the extremes are 0 and 1; rounding can miss them
    let lo = if x <= 0.0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if x >= n {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    #[default]
    Sc,
    MlErasure,
    MlExhaustive,
}

impl FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sc" => Ok(DecoderKind::Sc),
            "ml-erasure" => Ok(DecoderKind::MlErasure),
            "ml-exhaustive" => Ok(DecoderKind::MlExhaustive),
            _ => Err(Error::InvalidParameter(format!("unknown decoder {s:?}"))),
        }
    }
}

/// Channel family swept by a config; grid values are its parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Bec,
    Bsc,
    /// Grid is sigma.
    Awgn,
    /// Grid is Eb/N0 in dB at the config's rate.
    AwgnDb,
}

impl ChannelKind {
    pub fn model(self, param: f64, rate: f64) -> Result<ChannelModel> {
        match self {
            ChannelKind::Bec => ChannelModel::bec(param),
            ChannelKind::Bsc => ChannelModel::bsc(param),
            ChannelKind::Awgn => ChannelModel::awgn(param),
            ChannelKind::AwgnDb => ChannelModel::awgn_ebn0_db(param, rate),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ChannelKind::Bec => "bec",
            ChannelKind::Bsc => "bsc",
            ChannelKind::Awgn => "awgn",
            ChannelKind::AwgnDb => "awgn-db",
        }
    }
}

impl FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bec" => Ok(ChannelKind::Bec),
            "bsc" => Ok(ChannelKind::Bsc),
            "awgn" => Ok(ChannelKind::Awgn),
            "awgn-db" => Ok(ChannelKind::AwgnDb),
            _ => Err(Error::InvalidParameter(format!(
                "unknown channel kind {s:?}"
            ))),
        }
    }
}

fn default_p() -> f64 {
    DRY_RUN_P
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: Family,
    pub n: usize,
    /// `k / n`; `k` is rounded to the nearest integer.
    pub rate: f64,
    #[serde(default)]
    pub boundary: Boundary,
    pub channel: ChannelKind,
    pub grid: Vec<f64>,
    /// Frames per grid point (upper limit when `target_errors` is set).
    pub frames: u64,
    /// Stop a grid point once this many frame errors have been seen.
    #[serde(default)]
    pub target_errors: Option<u64>,
    #[serde(default)]
    pub decoder: DecoderKind,
    /// Dry-run flip probability used to choose the frozen set.
    #[serde(default = "default_p")]
    pub selection_p: f64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn k(&self) -> usize {
        (self.rate * self.n as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.n >= 2 && self.n.is_power_of_two()) {
            return bad(format!("n = {} is not a power of two >= 2", self.n));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return bad(format!("rate {} outside (0, 1]", self.rate));
        }
        if self.grid.is_empty() {
            return bad("empty parameter grid".into());
        }
        if self.frames == 0 {
            return bad("frames must be at least 1".into());
        }
        if self.decoder == DecoderKind::MlErasure && self.channel != ChannelKind::Bec {
            return bad("ml-erasure needs the erasure channel".into());
        }
        for &v in &self.grid {
            self.channel.model(v, self.rate)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub family: Family,
    pub n: usize,
    pub k: usize,
    pub rate: f64,
    pub boundary: Boundary,
    pub decoder: DecoderKind,
    pub channel: ChannelKind,
    pub param: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    pub fer: f64,
    pub fer_lo: f64,
    pub fer_hi: f64,
    pub ber: f64,
    pub ber_lo: f64,
    pub ber_hi: f64,
    pub seconds: f64,
    pub seed: u64,
    pub version: String,
}

/// A code with its frozen set and decoder structures, ready to simulate.
pub struct Prepared<'c> {
    pub circuit: &'c LayeredCircuit,
    pub frozen: FrozenMask,
    sc: ScDecoder<'c, f64>,
    ml: Option<ErasureMl>,
}

impl<'c> Prepared<'c> {
    pub fn new(circuit: &'c LayeredCircuit, frozen: FrozenMask) -> Result<Self> {
        let ml = Some(ErasureMl::new(circuit, &frozen)?);
        Ok(Prepared {
            circuit,
            frozen,
            sc: ScDecoder::new(circuit),
            ml,
        })
    }

    /// Simulate one frame: returns (frame error, bit errors on data positions).
    /// On the erasure channel a frame where SC or ML had to guess a data bit
    /// is a frame error even if the guess was right.
    pub fn frame<R: Rng>(
        &self,
        channel: &ChannelModel,
        decoder: DecoderKind,
        rng: &mut R,
    ) -> Result<(bool, u64)> {
        let data: Vec<u8> = (0..self.frozen.k())
            .map(|_| rng.gen::<bool>() as u8)
            .collect();
        let x = self.frozen.embed(&data)?;
        let y = self.circuit.encode(&x)?;
        let rx = transmit(channel, &y, rng);
        let (guess, failed) = match decoder {
            DecoderKind::Sc => {
                let r = self
                    .sc
                    .decode(&self.frozen, &priors::<f64>(channel, &rx)?)?;
                let failed = matches!(channel, ChannelModel::Bec { .. }) && self.undetermined(&r);
                (r.bits, failed)
            }
            DecoderKind::MlErasure => {
                let (g, free) = self.ml.as_ref().expect("prepared").decode_guess_zero(&rx)?;
                (g, free > 0)
            }
            DecoderKind::MlExhaustive => (
                ml_exhaustive_decode(self.circuit, &self.frozen, &priors::<f64>(channel, &rx)?)?,
                false,
            ),
        };
        let bit_errors = self
            .frozen
            .data_positions()
            .iter()
            .filter(|&&p| guess[p] != x[p])
            .count() as u64;
        Ok((failed || bit_errors > 0, bit_errors))
    }

    /// Whether SC had to guess some data bit (erasure channel only).
    fn undetermined(&self, r: &DecodeResult<f64>) -> bool {
        self.frozen
            .data_positions()
            .iter()
            .any(|&p| is_tie(r.marginals[p]))
    }

    /// Paired SC / erasure-ML outcome on one erasure pattern:
    /// (SC frame error, ML frame error).
    pub fn paired_erasure_frame<R: Rng>(&self, eps: f64, rng: &mut R) -> Result<(bool, bool)> {
        let data: Vec<u8> = (0..self.frozen.k())
            .map(|_| rng.gen::<bool>() as u8)
            .collect();
        let x = self.frozen.embed(&data)?;
        let y = self.circuit.encode(&x)?;
        let ch = ChannelModel::bec(eps)?;
        let rx: Vec<Symbol> = transmit(&ch, &y, rng);
        let sc = self.sc.decode(&self.frozen, &priors::<f64>(&ch, &rx)?)?;
        let sc_err = self.undetermined(&sc)
            || self
                .frozen
                .data_positions()
                .iter()
                .any(|&p| sc.bits[p] != x[p]);
        let (g, free) = self.ml.as_ref().expect("prepared").decode_guess_zero(&rx)?;
        let ml_err = free > 0 || g != x;
        Ok((sc_err, ml_err))
    }
}

pub fn frame_rng(seed: u64, grid: usize, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((grid as u64) << 40) | frame);
    rng
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SimRecord>> {
    config.validate()?;
    let levels = config.n.trailing_zeros() as usize;
    let circuit = build_circuit(config.family, levels, config.boundary)?;
    let frozen = dry_run_select(&circuit, config.selection_p, config.k())?;
    let prepared = Prepared::new(&circuit, frozen)?;
    config
        .grid
        .iter()
        .enumerate()
        .map(|(gi, &param)| run_point(config, &prepared, gi, param))
        .collect()
}

fn run_point(
    config: &SweepConfig,
    code: &Prepared<'_>,
    gi: usize,
    param: f64,
) -> Result<SimRecord> {
    let start = Instant::now();
    let channel = config.channel.model(param, config.rate)?;
    let (mut frames, mut fe, mut be) = (0u64, 0u64, 0u64);
    while frames < config.frames && config.target_errors.is_none_or(|t| fe < t) {
        let end = (frames + BATCH).min(config.frames);
        let (f, b) = (frames..end)
            .into_par_iter()
            .map(|f| code.frame(&channel, config.decoder, &mut frame_rng(config.seed, gi, f)))
            .try_fold(
                || (0u64, 0u64),
                |(f, b), r| r.map(|(e, bits)| (f + u64::from(e), b + bits)),
            )
            .try_reduce(|| (0, 0), |x, y| Ok((x.0 + y.0, x.1 + y.1)))?;
        fe += f;
        be += b;
        frames = end;
    }
    let k = code.frozen.k();
    let bits = (frames * k as u64) as f64;
    let (fer_lo, fer_hi) = wilson_interval(fe as f64, frames as f64);
    let (ber_lo, ber_hi) = wilson_interval(be as f64, bits);
    Ok(SimRecord {
        family: config.family,
        n: config.n,
        k,
        rate: config.rate,
        boundary: config.boundary,
        decoder: config.decoder,
        channel: config.channel,
        param,
        frames,
        frame_errors: fe,
        bit_errors: be,
        fer: fe as f64 / frames as f64,
        fer_lo,
        fer_hi,
        ber: if bits > 0.0 { be as f64 / bits } else { 0.0 },
        ber_lo,
        ber_hi,
        seconds: start.elapsed().as_secs_f64(),
        seed: config.seed,
        version: VERSION.to_string(),
    })
}

pub const CSV_HEADER: &str =
    "family,n,rate,channel,param,frames,fer,fer_lo,fer_hi,ber,ber_lo,ber_hi,seconds";

/// Results table. With `timing = false` the seconds column is written as 0
/// so that reruns are byte-identical.
pub fn records_to_csv(records: &[SimRecord], timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let secs = if timing { r.seconds } else { 0.0 };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.family.tag(),
            r.n,
            r.rate,
            r.channel.tag(),
            r.param,
            r.frames,
            r.fer,
            r.fer_lo,
            r.fer_hi,
            r.ber,
            r.ber_lo,
            r.ber_hi,
            secs
        )
        .expect("write to string");
    }
    out
}

pub fn records_to_jsonl(records: &[SimRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: Family,
    pub n: usize,
    pub decoder: DecoderKind,
    pub channel: ChannelKind,
    pub param: f64,
    pub frames: u64,
    pub fer: f64,
    pub ber: f64,
    /// BER / FER, when any frame failed.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,n,decoder,channel,param,frames,fer,ber,ber_fer_ratio\n");
        for r in &self.rows {
            let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.family.tag(),
                r.n,
                decoder_tag(r.decoder),
                r.channel.tag(),
                r.param,
                r.frames,
                r.fer,
                r.ber,
                ratio
            )
            .expect("write to string");
        }
        out
    }

    /// One `(series, x, metric, value)` row per measurement.
    pub fn to_long(&self) -> String {
        let mut out = String::from("series,param,metric,value\n");
        for r in &self.rows {
            let series = format!(
                "{}-{}-{}-{}",
                r.family.tag(),
                r.n,
                decoder_tag(r.decoder),
                r.channel.tag()
            );
            for (m, v) in [
                ("fer", Some(r.fer)),
                ("ber", Some(r.ber)),
                ("ratio", r.ratio),
            ] {
                if let Some(v) = v {
                    writeln!(out, "{series},{},{m},{v}", r.param).expect("write to string");
                }
            }
        }
        out
    }
}

fn decoder_tag(d: DecoderKind) -> &'static str {
    match d {
        DecoderKind::Sc => "sc",
        DecoderKind::MlErasure => "ml-erasure",
        DecoderKind::MlExhaustive => "ml-exhaustive",
    }
}

pub fn summarize(records: &[SimRecord]) -> Summary {
    let rows = records
        .iter()
        .map(|r| SummaryRow {
            family: r.family,
            n: r.n,
            decoder: r.decoder,
            channel: r.channel,
            param: r.param,
            frames: r.frames,
            fer: r.fer,
            ber: r.ber,
            ratio: (r.frame_errors > 0).then(|| r.ber / r.fer),
        })
        .collect();
    Summary { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> SweepConfig {
        SweepConfig {
            family: Family::Polar,
            n: 64,
            rate: 0.5,
            boundary: Boundary::Periodic,
            channel: ChannelKind::Bec,
            grid: vec![0.0, 0.4],
            frames: 300,
            target_errors: None,
            decoder: DecoderKind::Sc,
            selection_p: DRY_RUN_P,
            seed: 11,
        }
    }

    #[test]
    fn noiseless_point_has_no_errors() {
        let r = run_sweep(&config()).unwrap();
        assert_eq!(
            (r[0].frames, r[0].frame_errors, r[0].bit_errors),
            (300, 0, 0)
        );
        assert!(r[1].frame_errors > 0);
        assert!(r[1].bit_errors <= r[1].frames * r[1].k as u64);
    }

    #[test]
    fn early_stop_is_batch_aligned() {
        let mut c = config();
        c.grid = vec![0.6];
        c.frames = 10_000;
        c.target_errors = Some(100);
        let r = run_sweep(&c).unwrap();
        assert!(r[0].frame_errors >= 100);
        assert_eq!(r[0].frames % BATCH, 0);
    }

    #[test]
    fn wilson_sanity() {
        let (lo, hi) = wilson_interval(0.0, 100.0);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50.0, 100.0);
        assert!((lo + hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_from_toml_shape() {
        let c: SweepConfig = serde_json::from_str(
            r#"{"family":"bmera","n":256,"rate":0.5,"channel":"bsc","grid":[0.05],"frames":10,"seed":1}"#,
        )
        .unwrap();
        assert_eq!(
            (c.boundary, c.decoder, c.selection_p),
            (Boundary::Periodic, DecoderKind::Sc, DRY_RUN_P)
        );
        assert!(c.validate().is_ok());
    }

    #[test]
    fn summary_passes_single_record_through() {
        let r = run_sweep(&config()).unwrap();
        let s = summarize(&r[1..]);
        assert_eq!(s.rows.len(), 1);
        assert_eq!((s.rows[0].fer, s.rows[0].ber), (r[1].fer, r[1].ber));
        assert_eq!(s.rows[0].ratio, Some(r[1].ber / r[1].fer));
    }
}
