//! AWGN/BPSK channel and the frame error rate harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{wilson_interval, NOISE_CONVENTION};
use crate::decoder::{
    llr_from_channel, sc_decode, scl_decode, Decoded, OpCounters, DEFAULT_LLR_MAX,
};
use crate::error::{Error, Result};
use crate::ers_code::ErsCode;
use crate::galois::FieldElement;
use crate::transform::PreTransform;

/// `sigma^2 = 1 / (2 R 10^(snr_db / 10))` for `Eb/N0 = snr_db`.
pub fn noise_var(snr_db: f64, rate: f64) -> f64 {
    1.0 / (2.0 * rate * 10f64.powf(snr_db / 10.0))
}

/// Independent random streams carved out of one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamTag {
    Message = 0,
    Noise = 1,
    Genie = 2,
}

/// Generator for frame `frame` of stream `tag`. Frames never share state,
/// so any execution order gives the same draws.
pub fn frame_rng(seed: u64, tag: StreamTag, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame.wrapping_mul(4).wrapping_add(tag as u64));
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub rate: f64,
    pub seed: u64,
    pub noise_var: f64,
    /// Skip the noise draw; LLRs are still scaled with `noise_var`.
    pub noiseless: bool,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Invalid(format!("rate {rate} outside (0, 1]")));
        }
        let nv = noise_var(snr_db, rate);
        if !(nv > 0.0 && nv.is_finite()) {
            return Err(Error::Invalid(format!(
                "snr {snr_db} dB gives noise variance {nv}"
            )));
        }
        Ok(ChannelConfig {
            snr_db,
            rate,
            seed,
            noise_var: nv,
            noiseless: false,
        })
    }

    pub fn for_code(code: &ErsCode, snr_db: f64, seed: u64) -> Result<Self> {
        Self::new(snr_db, code.rate(), seed)
    }

    pub fn noiseless(mut self) -> Self {
        self.noiseless = true;
        self
    }
}

/// BPSK over AWGN: bit `b` of every symbol becomes `(1 - 2b) + N(0, sigma^2)`.
/// Output is symbol-major, `bits` observations per symbol.
pub fn transmit(
    codeword: &[FieldElement],
    bits: usize,
    cfg: &ChannelConfig,
    frame: u64,
) -> Vec<f64> {
    let mut rng = frame_rng(cfg.seed, StreamTag::Noise, frame);
    let sigma = cfg.noise_var.sqrt();
    let mut y = Vec::with_capacity(codeword.len() * bits);
    for c in codeword {
        for j in 0..bits {
            let x = 1.0 - 2.0 * c.bit(j) as f64;
            if cfg.noiseless {
                y.push(x);
            } else {
                let z: f64 = StandardNormal.sample(&mut rng);
                y.push(x + sigma * z);
            }
        }
    }
    y
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecoderSpec {
    Sc,
    Scl(usize),
}

impl DecoderSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderSpec::Sc => "SC",
            DecoderSpec::Scl(_) => "SCL",
        }
    }

    pub fn list(&self) -> usize {
        match *self {
            DecoderSpec::Sc => 1,
            DecoderSpec::Scl(l) => l,
        }
    }

    pub fn decode(&self, pt: &PreTransform, llr: &crate::decoder::LlrFrame) -> Result<Decoded> {
        match *self {
            DecoderSpec::Sc => sc_decode(pt, llr),
            DecoderSpec::Scl(l) => scl_decode(pt, llr, l),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_errors: 100,
            max_frames: 10_000_000,
        }
    }
}

/// Outcome of one simulated frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutcome {
    pub message: Vec<FieldElement>,
    pub decoded: Decoded,
    pub error: bool,
}

/// Uniform random message for frame `frame`.
pub fn random_message(code: &ErsCode, seed: u64, frame: u64) -> Vec<FieldElement> {
    let mut rng = frame_rng(seed, StreamTag::Message, frame);
    let q = code.field().size() as u16;
    (0..code.k())
        .map(|_| FieldElement(rng.random_range(0..q)))
        .collect()
}

/// Message, encode, transmit and decode for a single frame.
pub fn simulate_frame(
    code: &ErsCode,
    pt: &PreTransform,
    decoder: DecoderSpec,
    cfg: &ChannelConfig,
    frame: u64,
    llr_max: f64,
) -> Result<FrameOutcome> {
    let bits = code.field().bits();
    let message = random_message(code, cfg.seed, frame);
    let codeword = code.encode_poly(&message)?;
    let y = transmit(&codeword, bits, cfg, frame);
    let llr = llr_from_channel(&y, bits, cfg.noise_var, pt.permutation(), llr_max)?;
    let decoded = decoder.decode(pt, &llr)?;
    let error = decoded.message != message;
    Ok(FrameOutcome {
        message,
        decoded,
        error,
    })
}

/// Settings echoed into every result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub n: u32,
    pub prim_poly: u32,
    pub perm_digest: String,
    pub llr_max: f64,
    pub seed: u64,
    pub rate: f64,
    pub noise_var: f64,
    pub noiseless: bool,
    pub noise_convention: String,
    pub stop: StopRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FerResult {
    pub snr_db: f64,
    #[serde(rename = "N")]
    pub len: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub decoder: String,
    #[serde(rename = "L")]
    pub list: usize,
    pub frames: u64,
    pub frame_errors: u64,
    pub fer: f64,
    pub ci95: (f64, f64),
    pub gf_ops_mean: f64,
    pub flops_mean: f64,
    pub config: RunEcho,
}

/// One CSV line of the `fer` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FerCsvRow {
    pub snr_db: f64,
    #[serde(rename = "N")]
    pub len: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub decoder: String,
    #[serde(rename = "L")]
    pub list: usize,
    pub frames: u64,
    pub errors: u64,
    pub fer: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub gf_ops_mean: f64,
    pub flops_mean: f64,
}

impl FerResult {
    pub fn csv_row(&self) -> FerCsvRow {
        FerCsvRow {
            snr_db: self.snr_db,
            len: self.len,
            k: self.k,
            decoder: self.decoder.clone(),
            list: self.list,
            frames: self.frames,
            errors: self.frame_errors,
            fer: self.fer,
            ci_lo: self.ci95.0,
            ci_hi: self.ci95.1,
            gf_ops_mean: self.gf_ops_mean,
            flops_mean: self.flops_mean,
        }
    }
}

const CHUNK: u64 = 2048;

/// Monte-Carlo FER measurement.
///
/// Frames are simulated in fixed chunks in parallel and then scanned in
/// frame order, so the run stops at exactly the frame that reaches
/// `min_errors` (or at `max_frames`) whatever the worker count.
pub fn run_fer(
    code: &ErsCode,
    pt: &PreTransform,
    decoder: DecoderSpec,
    cfg: &ChannelConfig,
    stop: StopRule,
    llr_max: f64,
) -> Result<FerResult> {
    if stop.min_errors == 0 {
        return Err(Error::Invalid("min_errors must be at least 1".into()));
    }
    if stop.max_frames == 0 {
        return Err(Error::Invalid("max_frames must be at least 1".into()));
    }
    let mut frames = 0u64;
    let mut errors = 0u64;
    let mut ops = OpCounters::default();
    'outer: while frames < stop.max_frames {
        let end = (frames + CHUNK).min(stop.max_frames);
        let chunk: Vec<(bool, OpCounters)> = (frames..end)
            .into_par_iter()
            .map(|f| {
                simulate_frame(code, pt, decoder, cfg, f, llr_max)
                    .map(|o| (o.error, o.decoded.counters))
            })
            .collect::<Result<_>>()?;
        for (err, c) in chunk {
            frames += 1;
            errors += err as u64;
            ops += c;
            if errors >= stop.min_errors {
                break 'outer;
            }
        }
    }
    let field = code.field();
    let nf = frames as f64;
    Ok(FerResult {
        snr_db: cfg.snr_db,
        len: code.len(),
        k: code.k(),
        decoder: decoder.name().to_string(),
        list: decoder.list(),
        frames,
        frame_errors: errors,
        fer: errors as f64 / nf,
        ci95: wilson_interval(errors, frames, 1.959_963_984_540_054),
        gf_ops_mean: ops.gf_ops as f64 / nf,
        flops_mean: ops.flops as f64 / nf,
        config: RunEcho {
            n: field.n(),
            prim_poly: field.prim_poly(),
            perm_digest: pt.permutation().digest(),
            llr_max,
            seed: cfg.seed,
            rate: cfg.rate,
            noise_var: cfg.noise_var,
            noiseless: cfg.noiseless,
            noise_convention: NOISE_CONVENTION.to_string(),
            stop,
        },
    })
}

/// [`run_fer`] with the default LLR clip.
pub fn run_fer_default(
    code: &ErsCode,
    pt: &PreTransform,
    decoder: DecoderSpec,
    cfg: &ChannelConfig,
    stop: StopRule,
) -> Result<FerResult> {
    run_fer(code, pt, decoder, cfg, stop, DEFAULT_LLR_MAX)
}

/// Parses an observations file: one frame per line, `values_per_frame`
/// whitespace-separated reals. Blank lines and `#` comments are skipped.
pub fn parse_observations(text: &str, values_per_frame: usize) -> Result<Vec<Vec<f64>>> {
    let mut frames = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("line {}: bad value {t:?}", ln + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != values_per_frame {
            return Err(Error::Parse(format!(
                "line {}: expected {values_per_frame} values, found {}",
                ln + 1,
                row.len()
            )));
        }
        frames.push(row);
    }
    Ok(frames)
}
