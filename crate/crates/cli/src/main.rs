use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ers_polar::analysis::{self, SubchannelProfile};
use ers_polar::decoder::{llr_from_channel, sc_decode, scl_decode_traced, TraceRecord};
use ers_polar::ers_code::{ErsCode, LocatorOrder};
use ers_polar::galois::{MAX_ORDER, MIN_ORDER};
use ers_polar::sim::{self, ChannelConfig, DecoderSpec, StopRule};
use ers_polar::transform::{
    d_set, make_permutation, pretransform, rank_submatrix, GreedyConfig, PermStrategy,
    PreTransform, SymbolClass,
};
use ers_polar::{FieldElement, FieldSpec};

#[derive(Parser, Debug)]
#[command(
    name = "ers-polar",
    version,
    about = "eRS codes as parallel binary polar codes: encode, analyse, decode, simulate"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Global {
    /// Primitive polynomial (decimal, 0x.. or 0b..); defaults to the built-in table.
    #[arg(long, global = true, value_parser = parse_int)]
    prim_poly: Option<u32>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output format (default: csv for `bound`, json otherwise).
    #[arg(long, global = true, value_enum)]
    out: Option<OutFormat>,
    #[arg(long, global = true, default_value_t = ers_polar::decoder::DEFAULT_LLR_MAX)]
    llr_max: f64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Ga,
    Mc,
}

#[derive(Args, Debug, Clone)]
struct CodeArgs {
    /// Field degree: symbols live in GF(2^n), N = 2^n.
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: usize,
    /// identity | bit-reversal | natural | greedy | path to a JSON index array.
    #[arg(long, default_value = "natural")]
    perm: String,
    /// Eb/N0 of the GA profile that drives `--perm greedy`.
    #[arg(long, default_value_t = 6.0)]
    design_snr: f64,
    /// Evaluation budget of `--perm greedy`.
    #[arg(long, default_value_t = 20_000)]
    greedy_budget: usize,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Encode a message (K field elements) into an eRS codeword.
    Encode {
        #[command(flatten)]
        code: CodeArgs,
        /// Message symbols, separated by commas or spaces.
        #[arg(long)]
        message: String,
    },
    /// Decode frames of channel observations.
    Decode {
        #[command(flatten)]
        code: CodeArgs,
        /// Observations file: one frame per line, N*n reals.
        #[arg(long)]
        obs: PathBuf,
        /// Eb/N0 used to scale observations into LLRs.
        #[arg(long)]
        snr: f64,
        /// List size; 1 runs plain SC.
        #[arg(long, default_value_t = 1)]
        list: usize,
        /// Write a newline-delimited JSON trace of the SCL steps here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Pivot set, frozen classes and D-set coverage of the pre-transform.
    TransformInfo {
        #[command(flatten)]
        code: CodeArgs,
        /// Include M, E and the permutation in the output.
        #[arg(long)]
        full: bool,
    },
    /// Subchannel error probabilities P_e(W_i).
    Profile {
        /// Field degree (N = 2^n).
        #[arg(long)]
        n: u32,
        #[arg(long)]
        snr: f64,
        #[arg(long)]
        rate: f64,
        #[arg(long, value_enum, default_value = "ga")]
        method: Method,
        /// Genie frames for `--method mc`.
        #[arg(long, default_value_t = 1_000_000)]
        frames: u64,
    },
    /// SC lower bound grid over lengths, rates and SNRs.
    Bound {
        /// Field degrees, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        rate: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        snr: Vec<f64>,
        #[arg(long, value_enum, default_value = "ga")]
        method: Method,
        /// Genie frames per cell for `--method mc` (default 1e6 for N <= 64, 1e5 above).
        #[arg(long)]
        frames: Option<u64>,
    },
    /// Frame error rate sweep.
    Fer {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        snr: Vec<f64>,
        /// Decoders: `sc` or a list size, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "sc")]
        list: Vec<String>,
        #[arg(long, default_value_t = 100)]
        min_errors: u64,
        #[arg(long, default_value_t = 10_000_000)]
        max_frames: u64,
        /// Transmit without noise (LLRs still use the SNR's noise variance).
        #[arg(long)]
        noiseless: bool,
    },
}

fn parse_int(s: &str) -> Result<u32, String> {
    let t = s.trim();
    let r = if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u32::from_str_radix(h, 16)
    } else if let Some(b) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        u32::from_str_radix(b, 2)
    } else {
        t.parse()
    };
    r.map_err(|e| format!("{s:?}: {e}"))
}

fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn build_code(g: &Global, a: &CodeArgs) -> anyhow::Result<ErsCode> {
    let field = FieldSpec::new(a.n, g.prim_poly)?;
    let len = field.size();
    if a.k == 0 || a.k > len {
        usage_error(
            ErrorKind::ValueValidation,
            format!("--k {} must lie in 1..={len} for --n {}", a.k, a.n),
        );
    }
    Ok(ErsCode::new(
        Arc::new(field),
        a.k,
        LocatorOrder::AlphaPower,
    )?)
}

fn build_transform(code: &ErsCode, a: &CodeArgs, g: &Global) -> anyhow::Result<PreTransform> {
    let strategy = match a.perm.as_str() {
        "identity" => PermStrategy::Identity,
        "bit-reversal" => PermStrategy::BitReversal,
        "natural" => PermStrategy::NaturalLocator,
        "greedy" => {
            let pe = analysis::ga_profile(code.len(), a.design_snr, code.rate())?.pe;
            let config = GreedyConfig {
                budget: a.greedy_budget,
                seed: g.seed,
                ..GreedyConfig::default()
            };
            PermStrategy::Greedy { pe, config }
        }
        path => {
            let text = fs::read_to_string(path).with_context(|| {
                format!("--perm {path:?} is neither a strategy name nor a readable file")
            })?;
            let map: Vec<usize> = serde_json::from_str(&text)
                .with_context(|| format!("parsing permutation {path:?}"))?;
            PermStrategy::Custom(map)
        }
    };
    let perm = make_permutation(code, &strategy)?;
    Ok(pretransform(code, &perm)?)
}

fn parse_symbols(s: &str) -> anyhow::Result<Vec<FieldElement>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            Ok(FieldElement(
                parse_int(t).map_err(anyhow::Error::msg)?.try_into()?,
            ))
        })
        .collect()
}

fn symbols(v: &[FieldElement]) -> Vec<u16> {
    v.iter().map(|x| x.0).collect()
}

fn emit_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn emit_csv<T: Serialize>(rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EncodeOut {
    n: u32,
    prim_poly: u32,
    #[serde(rename = "N")]
    len: usize,
    #[serde(rename = "K")]
    k: usize,
    message: Vec<u16>,
    codeword: Vec<u16>,
}

#[derive(Serialize)]
struct EncodeRow {
    index: usize,
    symbol: u16,
}

#[derive(Serialize)]
struct DecodeOut {
    frame: usize,
    metric: f64,
    message: Vec<u16>,
}

#[derive(Serialize)]
struct DecodeRow {
    frame: usize,
    metric: f64,
    message: String,
}

#[derive(Serialize)]
struct TransformInfo {
    n: u32,
    prim_poly: u32,
    #[serde(rename = "N")]
    len: usize,
    #[serde(rename = "K")]
    k: usize,
    perm: String,
    perm_digest: String,
    pivots: Vec<usize>,
    static_frozen: Vec<usize>,
    dynamic_frozen: Vec<usize>,
    a: u32,
    d_set: Vec<usize>,
    d_rank: usize,
    d_in_pivots: bool,
    d_free_of_static: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<ers_polar::transform::PreTransformExport>,
}

#[derive(Serialize)]
struct TransformRow {
    index: usize,
    class: &'static str,
    tau: usize,
    in_d: bool,
}

#[derive(Serialize)]
struct ProfileRow {
    index: usize,
    pe: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_hi: Option<f64>,
}

#[derive(Serialize)]
struct BoundRow {
    #[serde(rename = "N")]
    len: usize,
    rate: f64,
    #[serde(rename = "K")]
    k: usize,
    snr_db: f64,
    method: &'static str,
    frames: u64,
    a: u32,
    bound: f64,
}

fn class_name(c: SymbolClass) -> &'static str {
    match c {
        SymbolClass::Info => "info",
        SymbolClass::Static => "static",
        SymbolClass::Dynamic => "dynamic",
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Ga => "gaussian_approx",
        Method::Mc => "monte_carlo",
    }
}

fn make_profile(
    len: usize,
    snr: f64,
    rate: f64,
    method: Method,
    frames: u64,
    seed: u64,
) -> anyhow::Result<SubchannelProfile> {
    Ok(match method {
        Method::Ga => analysis::ga_profile(len, snr, rate)?,
        Method::Mc => analysis::mc_profile(len, snr, rate, frames, seed)?,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let json = |default_csv: bool| match g.out {
        Some(OutFormat::Json) => true,
        Some(OutFormat::Csv) => false,
        None => !default_csv,
    };
    match &cli.cmd {
        Cmd::Encode { code: a, message } => {
            let code = build_code(g, a)?;
            let msg = parse_symbols(message)?;
            let cw = code.encode_poly(&msg)?;
            if json(false) {
                emit_json(&EncodeOut {
                    n: a.n,
                    prim_poly: code.field().prim_poly(),
                    len: code.len(),
                    k: code.k(),
                    message: symbols(&msg),
                    codeword: symbols(&cw),
                })?;
            } else {
                let rows: Vec<_> = cw
                    .iter()
                    .enumerate()
                    .map(|(index, s)| EncodeRow { index, symbol: s.0 })
                    .collect();
                emit_csv(&rows)?;
            }
        }
        Cmd::Decode {
            code: a,
            obs,
            snr,
            list,
            trace,
        } => {
            if *list == 0 {
                usage_error(ErrorKind::ValueValidation, "--list must be at least 1");
            }
            if trace.is_some() && *list == 1 {
                usage_error(
                    ErrorKind::ArgumentConflict,
                    "--trace needs an SCL decode (--list >= 2)",
                );
            }
            let code = build_code(g, a)?;
            let pt = build_transform(&code, a, g)?;
            let bits = code.field().bits();
            let text = fs::read_to_string(obs).with_context(|| format!("reading {obs:?}"))?;
            let frames = sim::parse_observations(&text, code.len() * bits)?;
            let nv = ChannelConfig::for_code(&code, *snr, g.seed)?.noise_var;
            let mut trace_out = match trace {
                Some(p) => Some(io::BufWriter::new(
                    fs::File::create(p).with_context(|| format!("creating {p:?}"))?,
                )),
                None => None,
            };
            let mut out = Vec::with_capacity(frames.len());
            for (f, y) in frames.iter().enumerate() {
                let llr = llr_from_channel(y, bits, nv, pt.permutation(), g.llr_max)?;
                let d = if *list == 1 {
                    sc_decode(&pt, &llr)?
                } else if let Some(w) = trace_out.as_mut() {
                    let mut failed = None;
                    let mut sink = |r: TraceRecord| {
                        if failed.is_none() {
                            if let Err(e) = serde_json::to_writer(&mut *w, &r)
                                .map_err(io::Error::from)
                                .and_then(|_| writeln!(w))
                            {
                                failed = Some(e);
                            }
                        }
                    };
                    let d = scl_decode_traced(&pt, &llr, *list, Some(&mut sink))?;
                    if let Some(e) = failed {
                        return Err(e.into());
                    }
                    d
                } else {
                    scl_decode_traced(&pt, &llr, *list, None)?
                };
                out.push(DecodeOut {
                    frame: f,
                    metric: d.metric,
                    message: symbols(&d.message),
                });
            }
            if let Some(mut w) = trace_out {
                w.flush()?;
            }
            if json(false) {
                emit_json(&out)?;
            } else {
                let rows: Vec<_> = out
                    .iter()
                    .map(|o| DecodeRow {
                        frame: o.frame,
                        metric: o.metric,
                        message: o
                            .message
                            .iter()
                            .map(u16::to_string)
                            .collect::<Vec<_>>()
                            .join(" "),
                    })
                    .collect();
                emit_csv(&rows)?;
            }
        }
        Cmd::TransformInfo { code: a, full } => {
            let code = build_code(g, a)?;
            let pt = build_transform(&code, a, g)?;
            let d = d_set(code.len(), code.k())?;
            let class_of = |c| {
                (0..code.len())
                    .filter(|&i| pt.classes()[i] == c)
                    .collect::<Vec<_>>()
            };
            if json(false) {
                emit_json(&TransformInfo {
                    n: a.n,
                    prim_poly: code.field().prim_poly(),
                    len: code.len(),
                    k: code.k(),
                    perm: a.perm.clone(),
                    perm_digest: pt.permutation().digest(),
                    pivots: pt.pivots().to_vec(),
                    static_frozen: class_of(SymbolClass::Static),
                    dynamic_frozen: class_of(SymbolClass::Dynamic),
                    a: d.a,
                    d_rank: rank_submatrix(code.field(), pt.m(), &d.indices),
                    d_in_pivots: d.indices.iter().all(|i| pt.pivots().contains(i)),
                    d_free_of_static: d
                        .indices
                        .iter()
                        .all(|&i| pt.classes()[i] != SymbolClass::Static),
                    d_set: d.indices,
                    detail: full.then(|| pt.export()),
                })?;
            } else {
                if *full {
                    usage_error(
                        ErrorKind::ArgumentConflict,
                        "--full is only available with --out json",
                    );
                }
                let rows: Vec<_> = (0..code.len())
                    .map(|i| TransformRow {
                        index: i,
                        class: class_name(pt.classes()[i]),
                        tau: pt.tau()[i],
                        in_d: d.indices.contains(&i),
                    })
                    .collect();
                emit_csv(&rows)?;
            }
        }
        Cmd::Profile {
            n,
            snr,
            rate,
            method,
            frames,
        } => {
            let len = checked_len(*n);
            let p = make_profile(len, *snr, *rate, *method, *frames, g.seed)?;
            if json(false) {
                emit_json(&p)?;
            } else {
                let rows: Vec<_> =
                    p.pe.iter()
                        .enumerate()
                        .map(|(i, &pe)| ProfileRow {
                            index: i,
                            pe,
                            ci_lo: p.wilson95.as_ref().map(|w| w[i].0),
                            ci_hi: p.wilson95.as_ref().map(|w| w[i].1),
                        })
                        .collect();
                emit_csv(&rows)?;
            }
        }
        Cmd::Bound {
            n,
            rate,
            snr,
            method,
            frames,
        } => {
            let mut rows = Vec::new();
            for &nn in n {
                let len = checked_len(nn);
                for &r in rate {
                    let k = (r * len as f64).round() as usize;
                    if k == 0 || k > len || ((k as f64 / len as f64) - r).abs() > 1e-9 {
                        usage_error(
                            ErrorKind::ValueValidation,
                            format!("--rate {r} does not give an integer K for N = {len}"),
                        );
                    }
                    for &s in snr {
                        let fr = frames.unwrap_or(if len <= 64 { 1_000_000 } else { 100_000 });
                        let p = make_profile(len, s, r, *method, fr, g.seed)?;
                        let b = analysis::lower_bound(&p, len, k)?;
                        rows.push(BoundRow {
                            len,
                            rate: r,
                            k,
                            snr_db: s,
                            method: method_name(*method),
                            frames: if *method == Method::Mc { fr } else { 0 },
                            a: b.a,
                            bound: b.bound,
                        });
                    }
                }
            }
            if json(true) {
                emit_json(&rows)?;
            } else {
                emit_csv(&rows)?;
            }
        }
        Cmd::Fer {
            code: a,
            snr,
            list,
            min_errors,
            max_frames,
            noiseless,
        } => {
            if *min_errors == 0 || *max_frames == 0 {
                usage_error(
                    ErrorKind::ValueValidation,
                    "--min-errors and --max-frames must be positive",
                );
            }
            let decoders = list
                .iter()
                .map(|t| match t.trim().to_ascii_lowercase().as_str() {
                    "sc" => DecoderSpec::Sc,
                    v => match v.parse::<usize>() {
                        Ok(l) if l >= 1 => DecoderSpec::Scl(l),
                        _ => usage_error(
                            ErrorKind::ValueValidation,
                            format!("--list entry {t:?} is neither `sc` nor a positive integer"),
                        ),
                    },
                })
                .collect::<Vec<_>>();
            let code = build_code(g, a)?;
            let pt = build_transform(&code, a, g)?;
            let stop = StopRule {
                min_errors: *min_errors,
                max_frames: *max_frames,
            };
            let mut results = Vec::new();
            for &s in snr {
                let mut cfg = ChannelConfig::for_code(&code, s, g.seed)?;
                cfg.noiseless = *noiseless;
                for &d in &decoders {
                    results.push(sim::run_fer(&code, &pt, d, &cfg, stop, g.llr_max)?);
                }
            }
            if json(false) {
                emit_json(&results)?;
            } else {
                emit_csv(&results.iter().map(|r| r.csv_row()).collect::<Vec<_>>())?;
            }
        }
    }
    Ok(())
}

fn checked_len(n: u32) -> usize {
    if !(MIN_ORDER..=MAX_ORDER).contains(&n) {
        usage_error(
            ErrorKind::ValueValidation,
            format!("--n {n} outside {}..={}", MIN_ORDER, MAX_ORDER),
        );
    }
    1 << n
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !cli.global.llr_max.is_finite() || cli.global.llr_max <= 0.0 {
        usage_error(
            ErrorKind::ValueValidation,
            "--llr-max must be a positive finite number",
        );
    }
    let pool = match cli.global.threads {
        Some(0) => usage_error(ErrorKind::ValueValidation, "--threads must be at least 1"),
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
