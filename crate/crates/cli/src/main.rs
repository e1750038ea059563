use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bmera::circuits::{render_matrix, MatrixFormat};
use bmera::ml::ErasureMl;
use bmera::polarization::{de_erasure, dry_run_error_rates};
use bmera::sim::{records_to_csv, records_to_jsonl, ChannelKind, DecoderKind};
use bmera::{
    build_circuit, dry_run_select, mc_channel_estimate, ml_exhaustive_decode, priors, run_sweep,
    Boundary, ChannelModel, Family, FrozenMask, LayeredCircuit, MlErasure, ScDecoder, SimRecord,
    SweepConfig, Symbol,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

type CliResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "bmera", version, about = "Polar and branching-MERA codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the generator matrix.
    Genmatrix {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long = "out", value_enum, default_value = "ascii")]
        format: Format,
    },
    /// Decode one received word.
    Decode {
        #[command(flatten)]
        code: CodeArgs,
        /// Mask file written by `select`.
        #[arg(long)]
        frozen: PathBuf,
        /// e.g. bec:0.4, bsc:0.08, awgn:0.9 or awgn-db:2.0
        #[arg(long)]
        channel: ChannelModel,
        /// Whitespace-separated symbols: 0, 1, e (erased) or real values for AWGN.
        #[arg(long)]
        received: PathBuf,
        #[arg(long, value_enum, default_value = "sc")]
        decoder: Decoder,
    },
    /// Per-channel reliabilities as CSV.
    Polarize {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long, default_value_t = 0.5)]
        erasure: f64,
        #[arg(long, value_enum, default_value = "exact")]
        method: PolarizeMethod,
        /// Channel for the Monte Carlo method (defaults to bec:<erasure>).
        #[arg(long)]
        channel: Option<ChannelModel>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Choose the frozen set by a dry run.
    Select {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        #[arg(long, default_value_t = bmera::polarization::DRY_RUN_P)]
        p: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo FER/BER sweep.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct CodeArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    /// Code length, a power of two.
    #[arg(long)]
    n: usize,
    #[arg(long, value_parser = parse_boundary, default_value = "periodic")]
    boundary: Boundary,
}

impl CodeArgs {
    fn circuit(&self) -> CliResult<LayeredCircuit> {
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(format!("--n must be a power of two >= 2, got {}", self.n).into());
        }
        Ok(build_circuit(
            self.family,
            self.n.trailing_zeros() as usize,
            self.boundary,
        )?)
    }
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: bmera::Error| e.to_string())
}

fn parse_boundary(s: &str) -> Result<Boundary, String> {
    s.parse().map_err(|e: bmera::Error| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Ascii,
    Pbm,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Decoder {
    Sc,
    MlErasure,
    MlExhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolarizeMethod {
    Exact,
    Mc,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML sweep description; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, value_parser = parse_boundary)]
    boundary: Option<Boundary>,
    /// bec, bsc, awgn (sigma) or awgn-db (Eb/N0)
    #[arg(long)]
    channel: Option<ChannelKind>,
    /// Comma-separated channel parameters.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    target_errors: Option<u64>,
    #[arg(long)]
    decoder: Option<DecoderKind>,
    #[arg(long)]
    selection_p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results.csv")]
    csv: PathBuf,
    #[arg(long, default_value = "results.jsonl")]
    jsonl: PathBuf,
    /// Report 0 seconds so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

/// File format shared by `select` and `decode --frozen`.
#[derive(Serialize, Deserialize)]
struct MaskFile {
    family: Family,
    n: usize,
    boundary: Boundary,
    k: usize,
    p: f64,
    data_positions: Vec<usize>,
}

fn write_or_print(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_received(path: &Path, channel: &ChannelModel) -> CliResult<Vec<Symbol>> {
    let text = fs::read_to_string(path)?;
    let soft = matches!(channel, ChannelModel::Awgn { .. });
    text.split_whitespace()
        .map(|tok| match tok {
            "e" | "?" if !soft => Ok(Symbol::Erased),
            "0" if !soft => Ok(Symbol::Known(0)),
            "1" if !soft => Ok(Symbol::Known(1)),
            _ if soft => tok
                .parse()
                .map(Symbol::Soft)
                .map_err(|_| format!("bad soft value {tok:?}").into()),
            _ => Err(format!("bad symbol {tok:?}").into()),
        })
        .collect()
}

fn genmatrix(code: &CodeArgs, format: Format) -> CliResult<()> {
    let g = code.circuit()?.generator_matrix();
    let f = match format {
        Format::Ascii => MatrixFormat::Ascii,
        Format::Pbm => MatrixFormat::Pbm,
        Format::Csv => MatrixFormat::Csv,
    };
    print!("{}", render_matrix(&g, f));
    Ok(())
}

fn decode(
    code: &CodeArgs,
    frozen: &Path,
    channel: &ChannelModel,
    received: &Path,
    decoder: Decoder,
) -> CliResult<()> {
    let c = code.circuit()?;
    let mask: MaskFile = serde_json::from_str(&fs::read_to_string(frozen)?)?;
    if mask.n != c.n() {
        return Err(format!("mask is for n = {}, code has n = {}", mask.n, c.n()).into());
    }
    let f = FrozenMask::from_data_positions(c.n(), &mask.data_positions)?;
    let rx = read_received(received, channel)?;
    let bits_string = |b: &[u8]| b.iter().map(|v| char::from(b'0' + v)).collect::<String>();
    match decoder {
        Decoder::Sc => {
            let r = ScDecoder::<f64>::new(&c).decode(&f, &priors(channel, &rx)?)?;
            for &i in &r.order {
                let m = r.marginals[i];
                let line = serde_json::json!({"index": i, "frozen": f.is_frozen(i), "bit": r.bits[i], "p0": m[0], "p1": m[1]});
                println!("{line}");
            }
            println!(
                "{}",
                serde_json::json!({"decoder": "sc", "bits": bits_string(&r.bits)})
            );
        }
        Decoder::MlErasure => {
            if !matches!(channel, ChannelModel::Bec { .. }) {
                return Err("ml-erasure needs an erasure channel".into());
            }
            let ml = ErasureMl::new(&c, &f)?;
            let line = match ml.decode(&rx)? {
                MlErasure::Unique(x) => {
                    serde_json::json!({"decoder": "ml-erasure", "status": "unique", "bits": bits_string(&x)})
                }
                MlErasure::Ambiguous(d) => {
                    let (g, _) = ml.decode_guess_zero(&rx)?;
                    serde_json::json!({"decoder": "ml-erasure", "status": "ambiguous", "free": d, "bits": bits_string(&g)})
                }
            };
            println!("{line}");
        }
        Decoder::MlExhaustive => {
            let x = ml_exhaustive_decode(&c, &f, &priors::<f64>(channel, &rx)?)?;
            println!(
                "{}",
                serde_json::json!({"decoder": "ml-exhaustive", "bits": bits_string(&x)})
            );
        }
    }
    Ok(())
}

fn polarize(
    code: &CodeArgs,
    erasure: f64,
    method: PolarizeMethod,
    channel: Option<ChannelModel>,
    trials: usize,
    seed: u64,
    output: Option<&Path>,
) -> CliResult<()> {
    let report = match method {
        PolarizeMethod::Exact => {
            if channel.is_some() {
                return Err(
                    "--channel only applies to --method mc; the exact method is for erasures"
                        .into(),
                );
            }
            de_erasure(
                code.family,
                erasure,
                code.n.trailing_zeros() as usize,
                code.boundary,
            )?
        }
        PolarizeMethod::Mc => {
            let c = code.circuit()?;
            let ch = match channel {
                Some(ch) => ch,
                None => ChannelModel::bec(erasure)?,
            };
            mc_channel_estimate(&c, &ch, trials, &mut ChaCha8Rng::seed_from_u64(seed))?
        }
    };
    write_or_print(output, &report.to_csv())
}

fn select(code: &CodeArgs, rate: f64, p: f64, out: Option<&Path>) -> CliResult<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(format!("--rate must lie in [0, 1], got {rate}").into());
    }
    let c = code.circuit()?;
    let k = (rate * c.n() as f64).round() as usize;
    let f = dry_run_select(&c, p, k)?;
    let mask = MaskFile {
        family: code.family,
        n: c.n(),
        boundary: code.boundary,
        k,
        p,
        data_positions: f.data_positions(),
    };
    let text = serde_json::to_string_pretty(&mask)? + "\n";
    write_or_print(out, &text)?;
    if out.is_some() {
        let err = dry_run_error_rates(&c, p)?;
        let worst = mask
            .data_positions
            .iter()
            .map(|&i| err[i])
            .fold(0.0, f64::max);
        eprintln!(
            "selected {k} of {} channels; worst dry-run error rate {worst:e}",
            c.n()
        );
    }
    Ok(())
}

fn sweep_config(a: &SimulateArgs) -> CliResult<SweepConfig> {
    let mut table: toml::Table = match &a.config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?)?,
        None => toml::Table::new(),
    };
    let mut set = |key: &str, v: Option<toml::Value>| {
        if let Some(v) = v {
            table.insert(key.into(), v);
        }
    };
    fn val<T: Serialize>(v: &Option<T>) -> Option<toml::Value> {
        v.as_ref()
            .map(|x| toml::Value::try_from(x).expect("plain value"))
    }
    set("family", val(&a.family));
    set("n", val(&a.n.map(|n| n as u64)));
    set("rate", val(&a.rate));
    set("boundary", val(&a.boundary));
    set("channel", val(&a.channel));
    set("grid", val(&a.grid));
    set("frames", val(&a.frames));
    set("target_errors", val(&a.target_errors));
    set("decoder", val(&a.decoder));
    set("selection_p", val(&a.selection_p));
    set("seed", val(&a.seed));
    let cfg: SweepConfig = table.try_into()?;
    cfg.validate()?;
    Ok(cfg)
}

/// Sanity checks on the counts a sweep reports.
fn check_records(records: &[SimRecord]) -> Result<(), String> {
    for r in records {
        let bits = r.frames * r.k as u64;
        let ok = r.frame_errors <= r.frames
            && r.bit_errors <= bits
            && (r.bit_errors == 0 || r.frame_errors > 0)
            && r.fer_lo <= r.fer
            && r.fer <= r.fer_hi
            && r.ber_lo <= r.ber
            && r.ber <= r.ber_hi;
        if !ok {
            return Err(format!("inconsistent record at param {}: {r:?}", r.param));
        }
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let cfg = sweep_config(a)?;
    let mut records = run_sweep(&cfg)?;
    check_records(&records)?;
    if a.no_timing {
        records.iter_mut().for_each(|r| r.seconds = 0.0);
    }
    fs::write(&a.csv, records_to_csv(&records, !a.no_timing))?;
    let jsonl = records_to_jsonl(&records);
    fs::write(&a.jsonl, &jsonl)?;
    print!("{jsonl}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Genmatrix { code, format } => genmatrix(&code, format),
        Command::Decode {
            code,
            frozen,
            channel,
            received,
            decoder,
        } => decode(&code, &frozen, &channel, &received, decoder),
        Command::Polarize {
            code,
            erasure,
            method,
            channel,
            trials,
            seed,
            output,
        } => polarize(
            &code,
            erasure,
            method,
            channel,
            trials,
            seed,
            output.as_deref(),
        ),
        Command::Select { code, rate, p, out } => select(&code, rate, p, out.as_deref()),
        Command::Simulate(a) => simulate(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
