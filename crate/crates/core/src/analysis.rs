//! Polarized subchannel error probabilities and SC performance predictions.
//!
//! Profiles come either from density evolution under the Gaussian
//! approximation or from genie-aided SC over the all-zero codeword. From a
//! profile we evaluate the SC frame error probability of a pivot set and the
//! lower bound obtained by placing the information symbols on the index set
//! `D` (see [`crate::transform::d_set`]).

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::decoder::{f_fun, DEFAULT_LLR_MAX};
use crate::error::{Error, Result};
use crate::sim::{frame_rng, noise_var, StreamTag};
use crate::transform::d_set;

/// Description of the GA check-node function, echoed in profile metadata.
pub const GA_PHI_DESCRIPTION: &str = "phi(x)=exp(-0.4527*x^0.86+0.0218) for x<10, \
sqrt(pi/x)*exp(-x/4)*(1-10/(7x)) for x>=10; inverse by bisection to 1e-12";

/// Noise convention echoed in metadata.
pub const NOISE_CONVENTION: &str = "sigma^2 = 1/(2*R*10^(EbN0_dB/10)), R = K/N, BPSK 0->+1 1->-1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMethod {
    GaussianApprox,
    MonteCarlo,
}

/// `P_e(W_i)` for every subchannel of a length-`N` polar code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubchannelProfile {
    pub method: ProfileMethod,
    pub len: usize,
    pub snr_db: f64,
    pub rate: f64,
    pub noise_var: f64,
    pub pe: Vec<f64>,
    /// Genie frames simulated (Monte-Carlo only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// First-error counts per index (Monte-Carlo only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<u64>>,
    /// 95% Wilson interval per index (Monte-Carlo only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wilson95: Option<Vec<(f64, f64)>>,
    pub convention: String,
}

impl SubchannelProfile {
    /// Standard error of `pe[i]` (zero for GA profiles).
    pub fn stderr(&self, i: usize) -> f64 {
        match self.frames {
            Some(f) if f > 0 => {
                let p = self.pe[i];
                (p * (1.0 - p) / f as f64).sqrt()
            }
            _ => 0.0,
        }
    }
}

fn check_len(len: usize) -> Result<u32> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Invalid(format!(
            "length {len} is not a power of two >= 2"
        )));
    }
    Ok(len.trailing_zeros())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Invalid(format!("rate {rate} outside (0, 1]")));
    }
    Ok(())
}

/// `ln phi(x)` for the two-piece approximation.
fn ln_phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < 10.0 {
        -0.4527 * x.powf(0.86) + 0.0218
    } else {
        0.5 * (std::f64::consts::PI / x).ln() - x / 4.0 + (1.0 - 10.0 / (7.0 * x)).ln()
    }
}

/// Solves `ln phi(x) = target` by bisection.
fn phi_inv_ln(target: f64) -> f64 {
    if target >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ln_phi(hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_phi(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean LLR after a check-node combination of two LLRs of mean `m`.
fn ga_check(m: f64) -> f64 {
    let lp = ln_phi(m);
    let p = lp.exp();
    // 1 - (1 - phi)^2 = phi (2 - phi)
    phi_inv_ln(lp + (2.0 - p).ln())
}

/// `Q(x)`, the standard normal tail.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Subchannel profile by Gaussian-approximation density evolution.
///
/// The index bits are consumed most significant first: a 0 bit is a
/// check-node step and a 1 bit doubles the mean.
pub fn ga_profile(len: usize, snr_db: f64, rate: f64) -> Result<SubchannelProfile> {
    let n = check_len(len)?;
    check_rate(rate)?;
    let sigma2 = noise_var(snr_db, rate);
    let m0 = 2.0 / sigma2;
    let pe = (0..len)
        .map(|i| {
            let mut m = m0;
            for b in (0..n).rev() {
                m = if (i >> b) & 1 == 1 {
                    2.0 * m
                } else {
                    ga_check(m)
                };
            }
            q_function((m / 2.0).sqrt())
        })
        .collect();
    Ok(SubchannelProfile {
        method: ProfileMethod::GaussianApprox,
        len,
        snr_db,
        rate,
        noise_var: sigma2,
        pe,
        frames: None,
        seed: None,
        errors: None,
        wilson95: None,
        convention: format!("{NOISE_CONVENTION}; GA {GA_PHI_DESCRIPTION}"),
    })
}

/// Leaf LLRs of a genie-aided SC pass over the all-zero codeword: every
/// partial sum is zero, so `g` reduces to a plain sum.
fn genie_leaves(src: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    let m = src.len();
    if m == 1 {
        out[0] = src[0];
        return;
    }
    let h = m / 2;
    let (tmp, rest) = scratch.split_at_mut(h);
    for t in 0..h {
        tmp[t] = f_fun(src[t], src[t + h]);
    }
    genie_leaves(tmp, &mut out[..h], rest);
    for t in 0..h {
        tmp[t] = src[t] + src[t + h];
    }
    genie_leaves(tmp, &mut out[h..], rest);
}

const MC_BLOCK: u64 = 1 << 12;

/// Subchannel profile by genie-aided SC simulation.
///
/// Frame `f` draws its noise from a generator keyed on `(seed, f)`, so the
/// counts do not depend on how frames are spread over threads. A
/// `noise_var` of zero simulates a noiseless channel.
pub fn mc_profile(
    len: usize,
    snr_db: f64,
    rate: f64,
    frames: u64,
    seed: u64,
) -> Result<SubchannelProfile> {
    check_rate(rate)?;
    let sigma2 = noise_var(snr_db, rate);
    mc_profile_with_noise(len, sigma2, frames, seed, DEFAULT_LLR_MAX).map(|mut p| {
        p.snr_db = snr_db;
        p.rate = rate;
        p
    })
}

/// [`mc_profile`] with an explicit noise variance and LLR clip.
pub fn mc_profile_with_noise(
    len: usize,
    sigma2: f64,
    frames: u64,
    seed: u64,
    llr_max: f64,
) -> Result<SubchannelProfile> {
    check_len(len)?;
    if frames == 0 {
        return Err(Error::Invalid("frame count must be positive".into()));
    }
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(Error::Invalid(format!("negative noise variance {sigma2}")));
    }
    let sigma = sigma2.sqrt();
    let scale = if sigma2 > 0.0 {
        2.0 / sigma2
    } else {
        f64::INFINITY
    };
    let blocks = frames.div_ceil(MC_BLOCK);
    let errors = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut counts = vec![0u64; len];
            let mut ch = vec![0.0; len];
            let mut leaves = vec![0.0; len];
            let mut scratch = vec![0.0; len];
            let end = ((b + 1) * MC_BLOCK).min(frames);
            for f in b * MC_BLOCK..end {
                let mut rng = frame_rng(seed, StreamTag::Genie, f);
                for c in ch.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let y = 1.0 + sigma * z;
                    *c = (scale * y).clamp(-llr_max, llr_max);
                }
                genie_leaves(&ch, &mut leaves, &mut scratch);
                for (cnt, &l) in counts.iter_mut().zip(&leaves) {
                    *cnt += (l < 0.0) as u64;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; len],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let pe: Vec<f64> = errors.iter().map(|&e| e as f64 / frames as f64).collect();
    let wilson95 = errors
        .iter()
        .map(|&e| wilson_interval(e, frames, 1.959_963_984_540_054))
        .collect();
    Ok(SubchannelProfile {
        method: ProfileMethod::MonteCarlo,
        len,
        snr_db: f64::NAN,
        rate: f64::NAN,
        noise_var: sigma2,
        pe,
        frames: Some(frames),
        seed: Some(seed),
        errors: Some(errors),
        wilson95: Some(wilson95),
        convention: format!(
            "{NOISE_CONVENTION}; genie-aided min-sum SC, all-zero codeword, llr_max {llr_max}"
        ),
    })
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn log_success(profile: &SubchannelProfile, set: &[usize]) -> Result<f64> {
    let mut acc = 0.0;
    for &i in set {
        let p = *profile.pe.get(i).ok_or(Error::Length {
            expected: profile.len,
            got: i + 1,
        })?;
        acc += (-p).ln_1p();
    }
    Ok(acc)
}

/// `1 - prod_{i in A} (1 - P_e(W_i))^n`, evaluated in the log domain.
pub fn sc_error_prob(profile: &SubchannelProfile, pivots: &[usize], bits: usize) -> Result<f64> {
    Ok(-(bits as f64 * log_success(profile, pivots)?).exp_m1())
}

/// [`sc_error_prob`] together with its delta-method standard error from the
/// Monte-Carlo sampling noise of the profile.
pub fn sc_error_prob_with_stderr(
    profile: &SubchannelProfile,
    pivots: &[usize],
    bits: usize,
) -> Result<(f64, f64)> {
    let p = sc_error_prob(profile, pivots, bits)?;
    let mut var = 0.0;
    for &i in pivots {
        let pe = profile.pe[i];
        if pe < 1.0 {
            let grad = bits as f64 * (1.0 - p) / (1.0 - pe);
            var += grad * grad * profile.stderr(i).powi(2);
        }
    }
    Ok((p, var.sqrt()))
}

/// The SC lower bound together with the set it is evaluated on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub len: usize,
    pub k: usize,
    pub a: u32,
    pub d: Vec<usize>,
    pub bound: f64,
}

/// `1 - prod_{i in D} (1 - P_e(W_i))^n` for an `(N, K)` code with `n = log2 N`.
pub fn lower_bound(profile: &SubchannelProfile, len: usize, k: usize) -> Result<BoundReport> {
    if profile.len != len {
        return Err(Error::Length {
            expected: len,
            got: profile.len,
        });
    }
    let bits = check_len(len)? as usize;
    let d = d_set(len, k)?;
    let bound = sc_error_prob(profile, &d.indices, bits)?;
    Ok(BoundReport {
        len,
        k,
        a: d.a,
        d: d.indices,
        bound,
    })
}

/// One failed comparison `P_e(W_{theta 2^a - 1}) <= P_e(W_{theta 2^a - delta})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationViolation {
    pub theta: usize,
    pub delta: usize,
    pub best_index: usize,
    pub other_index: usize,
    pub pe_best: f64,
    pub pe_other: f64,
    /// Difference in standard errors (Monte-Carlo only).
    pub z: Option<f64>,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationReport {
    pub a: u32,
    pub comparisons: usize,
    pub violations: Vec<DegradationViolation>,
}

impl DegradationReport {
    pub fn significant_violations(&self) -> usize {
        self.violations.iter().filter(|v| v.significant).count()
    }
}

/// Checks that the last subchannel of every length-`2^a` block is the most
/// reliable one in the block.
///
/// For Monte-Carlo profiles a violation counts as significant when the
/// difference exceeds `z_threshold` combined standard errors; GA violations
/// are always significant.
pub fn degradation_check(
    profile: &SubchannelProfile,
    a: u32,
    z_threshold: f64,
) -> Result<DegradationReport> {
    let n = check_len(profile.len)?;
    if a > n {
        return Err(Error::Invalid(format!("a = {a} exceeds n = {n}")));
    }
    let block = 1usize << a;
    let mut comparisons = 0;
    let mut violations = Vec::new();
    for theta in 1..=(profile.len >> a) {
        let best = theta * block - 1;
        for delta in 2..=block {
            let other = theta * block - delta;
            comparisons += 1;
            let (pb, po) = (profile.pe[best], profile.pe[other]);
            if pb <= po {
                continue;
            }
            let (z, significant) = match profile.method {
                ProfileMethod::GaussianApprox => (None, true),
                ProfileMethod::MonteCarlo => {
                    let se = (profile.stderr(best).powi(2) + profile.stderr(other).powi(2)).sqrt();
                    let z = if se > 0.0 {
                        (pb - po) / se
                    } else {
                        f64::INFINITY
                    };
                    (Some(z), z > z_threshold)
                }
            };
            violations.push(DegradationViolation {
                theta,
                delta,
                best_index: best,
                other_index: other,
                pe_best: pb,
                pe_other: po,
                z,
                significant,
            });
        }
    }
    Ok(DegradationReport {
        a,
        comparisons,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_inverse_round_trip() {
        // the two pieces do not meet at 10, so stay clear of the seam
        for &x in &[0.05, 0.7, 3.0, 9.0, 11.0, 25.0, 400.0, 5000.0] {
            let back = phi_inv_ln(ln_phi(x));
            assert!((back - x).abs() < 1e-9 * x.max(1.0), "{x} -> {back}");
        }
        assert_eq!(phi_inv_ln(0.0), 0.0);
    }

    #[test]
    fn check_node_reduces_mean() {
        for &m in &[0.5, 2.0, 8.0, 30.0, 1000.0] {
            let c = ga_check(m);
            assert!(c < m && c > 0.0);
        }
    }

    #[test]
    fn q_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(1.0) - 0.158_655_253_931_457).abs() < 1e-10);
        assert!((q_function(3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-12);
    }

    #[test]
    fn high_snr_vanishes() {
        let p = ga_profile(32, 60.0, 0.5).unwrap();
        assert!(p.pe.iter().all(|&x| x < 1e-100));
    }

    #[test]
    fn single_kernel_polarizes() {
        for snr in [-3.0, 0.0, 3.0, 8.0] {
            let p = ga_profile(2, snr, 0.5).unwrap();
            assert!(p.pe[1] < p.pe[0], "snr {snr}");
        }
    }

    #[test]
    fn ga_bound_n32_half() {
        let p = ga_profile(32, 11.0, 0.5).unwrap();
        let b = lower_bound(&p, 32, 16).unwrap();
        assert_eq!(b.a, 1);
        assert!((b.bound / 2.72e-4 - 1.0).abs() < 0.01, "{}", b.bound);
    }

    #[test]
    fn sc_error_prob_trivial_cases() {
        let mut p = ga_profile(8, 3.0, 0.5).unwrap();
        p.pe = vec![0.0; 8];
        assert_eq!(sc_error_prob(&p, &[1, 3, 5, 7], 3).unwrap(), 0.0);
        p.pe[5] = 1.0;
        assert_eq!(sc_error_prob(&p, &[1, 3, 5, 7], 3).unwrap(), 1.0);
        assert!(sc_error_prob(&p, &[9], 3).is_err());
    }

    #[test]
    fn sc_error_prob_matches_direct_product() {
        let p = ga_profile(16, 2.0, 0.5).unwrap();
        let set = [3, 7, 11, 13, 14, 15];
        let direct = 1.0
            - set
                .iter()
                .map(|&i| (1.0 - p.pe[i]).powi(4))
                .product::<f64>();
        let got = sc_error_prob(&p, &set, 4).unwrap();
        assert!((got - direct).abs() < 1e-12);
    }

    #[test]
    fn noiseless_mc_is_error_free() {
        let p = mc_profile_with_noise(32, 0.0, 5_000, 3, DEFAULT_LLR_MAX).unwrap();
        assert!(p.pe.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mc_is_reproducible() {
        let a = mc_profile(16, 1.0, 0.5, 20_000, 42).unwrap();
        let b = mc_profile(16, 1.0, 0.5, 20_000, 42).unwrap();
        assert_eq!(a.errors, b.errors);
        let c = mc_profile(16, 1.0, 0.5, 20_000, 43).unwrap();
        assert_ne!(a.errors, c.errors);
    }

    #[test]
    fn mc_worker_count_does_not_matter() {
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| mc_profile(32, 2.0, 0.5, 30_000, 5).unwrap());
        let b = four.install(|| mc_profile(32, 2.0, 0.5, 30_000, 5).unwrap());
        assert_eq!(a.errors, b.errors);
    }

    #[test]
    fn mc_agrees_with_ga_at_11db() {
        let ga = ga_profile(32, 11.0, 0.5).unwrap();
        let mc = mc_profile(32, 11.0, 0.5, 1_000_000, 9).unwrap();
        for i in 0..32 {
            let tol = (2.0 * mc.stderr(i)).max(0.5 * ga.pe[i]);
            // indices whose GA error probability is far below 1/frames are unobservable
            if ga.pe[i] * 1e6 < 1.0 && mc.pe[i] == 0.0 {
                continue;
            }
            assert!(
                (mc.pe[i] - ga.pe[i]).abs() <= tol,
                "i = {i}: mc {} ga {}",
                mc.pe[i],
                ga.pe[i]
            );
        }
    }

    #[test]
    fn wilson_shrinks_with_trials() {
        let (a, b) = wilson_interval(10, 1_000, 1.96);
        let (c, d) = wilson_interval(100, 10_000, 1.96);
        assert!(a < 0.01 && b > 0.01);
        assert!(d - c < b - a);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn degradation_ga_and_edge_cases() {
        let p = ga_profile(32, 11.0, 0.5).unwrap();
        let r = degradation_check(&p, 1, 3.0).unwrap();
        assert_eq!(r.comparisons, 16);
        assert!(r.violations.is_empty());
        let r = degradation_check(&p, 0, 3.0).unwrap();
        assert_eq!(r.comparisons, 0);
        assert!(degradation_check(&p, 6, 3.0).is_err());
    }

    #[test]
    fn undersampled_mc_violations_are_not_significant() {
        let p = mc_profile(64, 0.0, 0.5, 50, 17).unwrap();
        let mut total = 0;
        for a in 1..=3 {
            let r = degradation_check(&p, a, 3.0).unwrap();
            total += r.violations.len();
            assert_eq!(r.significant_violations(), 0, "a = {a}: {:?}", r.violations);
        }
        assert!(
            total > 0,
            "expected some sampling-noise violations at 50 frames"
        );
    }

    #[test]
    fn profile_json_round_trip() {
        let p = mc_profile(8, 2.0, 0.5, 1_000, 1).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: SubchannelProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
