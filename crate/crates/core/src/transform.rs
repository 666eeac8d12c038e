//! Re-interpretation of an eRS code as `n` permuted binary polar codes.
//!
//! The generator is rewritten as `G = E^{-1} M G_p P`, where `G_p` is the
//! `n`-fold Kronecker power of the Arikan kernel, `P` a permutation and `M`
//! the row-reduced echelon form of `G P^{-1} G_p`. Pivot columns of `M` carry
//! information symbols; every other column is a frozen symbol, static when
//! the column is zero and dynamic otherwise.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ers_code::ErsCode;
use crate::galois::{FieldElement, FieldSpec};
use crate::matrix::GfMatrix;

/// `F^{\otimes n}` as a dense 0/1 matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarKernelMatrix {
    n: u32,
    bits: Vec<u8>,
}

impl PolarKernelMatrix {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn size(&self) -> usize {
        1 << self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.size() + c]
    }

    pub fn as_bits(&self) -> &[u8] {
        &self.bits
    }

    /// Product with another 0/1 matrix of the same size, over GF(2).
    pub fn mul_gf2(&self, rhs: &PolarKernelMatrix) -> Vec<u8> {
        let s = self.size();
        let mut out = vec![0u8; s * s];
        for r in 0..s {
            for k in 0..s {
                if self.get(r, k) == 1 {
                    for c in 0..s {
                        out[r * s + c] ^= rhs.get(k, c);
                    }
                }
            }
        }
        out
    }

    pub fn to_gf(&self) -> GfMatrix {
        GfMatrix::from_binary(self.size(), self.size(), &self.bits)
    }
}

/// Builds `G_p = F^{\otimes n}` with `F = [[1, 0], [1, 1]]` by explicit Kronecker products.
pub fn gp_matrix(n: u32) -> PolarKernelMatrix {
    let mut cur = vec![1u8];
    let mut size = 1usize;
    const KERNEL: [[u8; 2]; 2] = [[1, 0], [1, 1]];
    for _ in 0..n {
        let next_size = size * 2;
        let mut next = vec![0u8; next_size * next_size];
        for (kr, krow) in KERNEL.iter().enumerate() {
            for (kc, &kv) in krow.iter().enumerate() {
                if kv == 0 {
                    continue;
                }
                for r in 0..size {
                    for c in 0..size {
                        next[(kr * size + r) * next_size + kc * size + c] = cur[r * size + c];
                    }
                }
            }
        }
        cur = next;
        size = next_size;
    }
    PolarKernelMatrix { n, bits: cur }
}

/// In-place `x = u G_p` over GF(2): `x_c` is the XOR of `u_r` over all `r`
/// whose bits contain the bits of `c`.
pub fn polar_encode_bits(u: &mut [u8]) {
    let len = u.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for i in 0..len {
            if i & h == 0 {
                u[i] ^= u[i | h];
            }
        }
        h <<= 1;
    }
}

/// In-place `X = U G_p` for a vector of field symbols (all planes at once).
pub fn polar_encode_symbols(u: &mut [FieldElement]) {
    let len = u.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for i in 0..len {
            if i & h == 0 {
                u[i].0 ^= u[i | h].0;
            }
        }
        h <<= 1;
    }
}

/// A permutation in vector form: position `i` is sent to column `map[i]`,
/// so `(x P)[map[i]] = x[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() {
                return Err(Error::Permutation(format!(
                    "entry {m} out of range 0..{}",
                    map.len()
                )));
            }
            if std::mem::replace(&mut seen[m], true) {
                return Err(Error::Permutation(format!("entry {m} repeated")));
            }
        }
        Ok(Permutation { map })
    }

    pub fn identity(len: usize) -> Self {
        Permutation {
            map: (0..len).collect(),
        }
    }

    /// Reverses the `log2(len)` index bits.
    pub fn bit_reversal(len: usize) -> Result<Self> {
        if !len.is_power_of_two() {
            return Err(Error::Permutation(format!(
                "length {len} is not a power of two"
            )));
        }
        let bits = len.trailing_zeros();
        let map = (0..len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        Ok(Permutation { map })
    }

    /// After de-permutation, position `i` evaluates the message polynomial
    /// at the field element whose integer value is `i`.
    pub fn natural_locator(code: &ErsCode) -> Self {
        let mut where_is = vec![0usize; code.len()];
        for (pos, loc) in code.locators().iter().enumerate() {
            where_is[loc.0 as usize] = pos;
        }
        Permutation { map: where_is }
    }

    /// Uniformly random permutation.
    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        let mut map: Vec<usize> = (0..len).collect();
        map.shuffle(rng);
        Permutation { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Permutation { map: inv }
    }

    /// `x P`.
    pub fn permute<T: Copy + Default>(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); x.len()];
        for (i, &m) in self.map.iter().enumerate() {
            out[m] = x[i];
        }
        out
    }

    /// `y P^{-1}`.
    pub fn depermute<T: Copy>(&self, y: &[T]) -> Vec<T> {
        self.map.iter().map(|&m| y[m]).collect()
    }

    /// 64-bit FNV-1a digest of the map, hex encoded; echoed in outputs.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &m in &self.map {
            for b in (m as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.map.swap(a, b);
    }
}

/// Knobs for the hill-climbing permutation search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Maximum number of candidate permutations evaluated.
    pub budget: usize,
    pub seed: u64,
    /// Random transpositions applied when the climb stalls.
    pub kick: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            budget: 20_000,
            seed: 1,
            kick: 3,
        }
    }
}

/// Permutation construction strategies.
#[derive(Clone, Debug, PartialEq)]
pub enum PermStrategy {
    Identity,
    BitReversal,
    NaturalLocator,
    /// Hill climb over transpositions using the given subchannel error
    /// probabilities.
    Greedy {
        pe: Vec<f64>,
        config: GreedyConfig,
    },
    Custom(Vec<usize>),
}

pub fn make_permutation(code: &ErsCode, strategy: &PermStrategy) -> Result<Permutation> {
    match strategy {
        PermStrategy::Identity => Ok(Permutation::identity(code.len())),
        PermStrategy::BitReversal => Permutation::bit_reversal(code.len()),
        PermStrategy::NaturalLocator => Ok(Permutation::natural_locator(code)),
        PermStrategy::Greedy { pe, config } => Ok(greedy_search(code, pe, config)?.permutation),
        PermStrategy::Custom(map) => {
            if map.len() != code.len() {
                return Err(Error::Permutation(format!(
                    "length {} does not match code length {}",
                    map.len(),
                    code.len()
                )));
            }
            Permutation::new(map.clone())
        }
    }
}

#[derive(Clone, Debug)]
pub struct GreedyOutcome {
    pub permutation: Permutation,
    pub pivots: Vec<usize>,
    /// `-sum_{i in A} ln(1 - P_e(W_i))` over the pivot set (lower is better).
    pub cost: f64,
    pub evaluations: usize,
}

/// Local search for a permutation whose pivot set sits on reliable
/// subchannels, i.e. maximizing `prod_{i in A} (1 - P_e(W_i))`.
///
/// Starts from the best of the identity, bit-reversal and natural-locator
/// permutations, then runs first-improvement descent over transpositions,
/// restarted from a kicked copy of the incumbent whenever a full sweep finds
/// nothing better.
pub fn greedy_search(code: &ErsCode, pe: &[f64], config: &GreedyConfig) -> Result<GreedyOutcome> {
    let len = code.len();
    if pe.len() != len {
        return Err(Error::Length {
            expected: len,
            got: pe.len(),
        });
    }
    let cost_of = |p: &Permutation| -> Result<(f64, Vec<usize>)> {
        let piv = pivot_set(code, p)?;
        Ok((piv.iter().map(|&i| -(-pe[i]).ln_1p()).sum(), piv))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best = Permutation::identity(len);
    let (mut best_cost, mut best_piv) = cost_of(&best)?;
    let mut evaluations = 1;
    for start in [
        Permutation::bit_reversal(len)?,
        Permutation::natural_locator(code),
    ] {
        let (c, piv) = cost_of(&start)?;
        evaluations += 1;
        if c < best_cost {
            (best, best_cost, best_piv) = (start, c, piv);
        }
    }

    let mut pairs: Vec<(usize, usize)> = (0..len)
        .flat_map(|a| (a + 1..len).map(move |b| (a, b)))
        .collect();

    let mut cur = best.clone();
    let mut cur_cost = best_cost;
    'outer: while evaluations < config.budget {
        pairs.shuffle(&mut rng);
        let mut improved = false;
        for &(a, b) in &pairs {
            if evaluations >= config.budget {
                break 'outer;
            }
            cur.swap(a, b);
            let (c, piv) = cost_of(&cur)?;
            evaluations += 1;
            if c < cur_cost {
                cur_cost = c;
                improved = true;
                if c < best_cost {
                    best_cost = c;
                    best = cur.clone();
                    best_piv = piv;
                }
            } else {
                cur.swap(a, b);
            }
        }
        if !improved {
            cur = best.clone();
            for _ in 0..config.kick {
                let a = rng.random_range(0..len);
                let b = rng.random_range(0..len);
                cur.swap(a, b);
            }
            cur_cost = cost_of(&cur)?.0;
            evaluations += 1;
        }
    }
    Ok(GreedyOutcome {
        permutation: best,
        pivots: best_piv,
        cost: best_cost,
        evaluations,
    })
}

/// Classification of a polar input position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolClass {
    Info,
    Static,
    Dynamic,
}

/// `G P^{-1} G_p`, computed column-permute then butterfly per row.
fn permuted_polar_generator(code: &ErsCode, perm: &Permutation) -> Result<GfMatrix> {
    if perm.len() != code.len() {
        return Err(Error::Length {
            expected: code.len(),
            got: perm.len(),
        });
    }
    let g = code.generator().select_columns(perm.map());
    let mut out = g;
    for r in 0..out.rows() {
        polar_encode_symbols(out.row_mut(r));
    }
    Ok(out)
}

fn pivot_set(code: &ErsCode, perm: &Permutation) -> Result<Vec<usize>> {
    let mut b = permuted_polar_generator(code, perm)?;
    let piv = b.rref(code.field(), None);
    if piv.len() != code.k() {
        return Err(Error::RankDeficient {
            rank: piv.len(),
            expected: code.k(),
        });
    }
    Ok(piv)
}

/// The pre-transformed view of an eRS code under a given permutation.
#[derive(Clone, Debug)]
pub struct PreTransform {
    field: Arc<FieldSpec>,
    perm: Permutation,
    m: GfMatrix,
    e: GfMatrix,
    e_inv: GfMatrix,
    pivots: Vec<usize>,
    classes: Vec<SymbolClass>,
    tau: Vec<usize>,
    /// Nonzero `(t, M[t][i])` for every position; empty for info and static positions.
    taps: Vec<Vec<(usize, FieldElement)>>,
}

impl PreTransform {
    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.m.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.m.cols() == 0
    }

    pub fn k(&self) -> usize {
        self.m.rows()
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    /// Row-reduced `M`.
    pub fn m(&self) -> &GfMatrix {
        &self.m
    }

    /// Elimination matrix with `M = E G P^{-1} G_p`.
    pub fn e(&self) -> &GfMatrix {
        &self.e
    }

    pub fn e_inv(&self) -> &GfMatrix {
        &self.e_inv
    }

    /// Pivot (information) positions `A`, ascending.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn classes(&self) -> &[SymbolClass] {
        &self.classes
    }

    /// `tau[i] = |A ∩ {0..i-1}|`.
    pub fn tau(&self) -> &[usize] {
        &self.tau
    }

    /// Nonzero coefficients defining frozen symbol `i` from the transformed message.
    pub fn taps(&self, i: usize) -> &[(usize, FieldElement)] {
        &self.taps[i]
    }

    /// Value of frozen position `i` given (a prefix of) the transformed message.
    pub fn frozen_value(&self, i: usize, f_prime: &[FieldElement]) -> FieldElement {
        let f = &*self.field;
        self.taps[i]
            .iter()
            .fold(FieldElement::ZERO, |acc, &(t, c)| {
                f.add(acc, f.mul(f_prime[t], c))
            })
    }

    pub fn count(&self, class: SymbolClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// `F' = F E^{-1}`.
    pub fn transformed_message(&self, msg: &[FieldElement]) -> Result<Vec<FieldElement>> {
        if msg.len() != self.k() {
            return Err(Error::Length {
                expected: self.k(),
                got: msg.len(),
            });
        }
        for m in msg {
            self.field.element(m.0 as u32)?;
        }
        Ok(self.e_inv.left_mul_vec(&self.field, msg))
    }

    /// `F = F' E`.
    pub fn message_from_transformed(&self, f_prime: &[FieldElement]) -> Vec<FieldElement> {
        self.e.left_mul_vec(&self.field, f_prime)
    }

    /// `U = F' M`.
    pub fn input_vector(&self, f_prime: &[FieldElement]) -> Vec<FieldElement> {
        self.m.left_mul_vec(&self.field, f_prime)
    }

    /// `C = U G_p P`, bit planes encoded together.
    pub fn codeword_from_input(&self, u: &[FieldElement]) -> Vec<FieldElement> {
        let mut x = u.to_vec();
        polar_encode_symbols(&mut x);
        self.perm.permute(&x)
    }

    pub fn export(&self) -> PreTransformExport {
        PreTransformExport {
            n: self.field.n(),
            prim_poly: self.field.prim_poly(),
            len: self.len(),
            k: self.k(),
            permutation: self.perm.map().to_vec(),
            m: self.m.to_rows(),
            e: self.e.to_rows(),
            pivots: self.pivots.clone(),
            classes: self.classes.clone(),
            tau: self.tau.clone(),
        }
    }
}

/// JSON view of a [`PreTransform`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreTransformExport {
    pub n: u32,
    pub prim_poly: u32,
    pub len: usize,
    pub k: usize,
    pub permutation: Vec<usize>,
    pub m: Vec<Vec<u16>>,
    pub e: Vec<Vec<u16>>,
    pub pivots: Vec<usize>,
    pub classes: Vec<SymbolClass>,
    pub tau: Vec<usize>,
}

/// Builds `M = E G P^{-1} G_p` in RREF together with `E`, `A` and the frozen classes.
pub fn pretransform(code: &ErsCode, perm: &Permutation) -> Result<PreTransform> {
    let field = code.field().clone();
    let k = code.k();
    let len = code.len();
    let mut m = permuted_polar_generator(code, perm)?;
    let mut e = GfMatrix::identity(k);
    let pivots = m.rref(&field, Some(&mut e));
    if pivots.len() != k {
        return Err(Error::RankDeficient {
            rank: pivots.len(),
            expected: k,
        });
    }
    let e_inv = e.inverse(&field)?;

    let mut classes = vec![SymbolClass::Static; len];
    let mut tau = vec![0usize; len];
    let mut taps = vec![Vec::new(); len];
    let mut seen = 0;
    let mut next_pivot = pivots.iter().peekable();
    for i in 0..len {
        tau[i] = seen;
        if next_pivot.peek() == Some(&&i) {
            next_pivot.next();
            classes[i] = SymbolClass::Info;
            seen += 1;
            continue;
        }
        let col: Vec<(usize, FieldElement)> = (0..k)
            .map(|t| (t, m[(t, i)]))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        debug_assert!(col.iter().all(|&(t, _)| t < tau[i]));
        if !col.is_empty() {
            classes[i] = SymbolClass::Dynamic;
        }
        taps[i] = col;
    }

    Ok(PreTransform {
        field,
        perm: perm.clone(),
        m,
        e,
        e_inv,
        pivots,
        classes,
        tau,
        taps,
    })
}

/// Encodes through the transform: `F' = F E^{-1}`, `U = F' M`, then each bit
/// plane `u_j` goes through `G_p` and `P`.
pub fn encode_via_transform(pt: &PreTransform, msg: &[FieldElement]) -> Result<Vec<FieldElement>> {
    let f_prime = pt.transformed_message(msg)?;
    let u = pt.input_vector(&f_prime);
    let nbits = pt.field().bits();
    let len = u.len();
    let mut out = vec![FieldElement::ZERO; len];
    let mut plane = vec![0u8; len];
    for j in 0..nbits {
        for (p, s) in plane.iter_mut().zip(&u) {
            *p = s.bit(j);
        }
        polar_encode_bits(&mut plane);
        let permuted = pt.permutation().permute(&plane);
        for (o, &b) in out.iter_mut().zip(&permuted) {
            o.0 |= (b as u16) << j;
        }
    }
    Ok(out)
}

/// The index set `D = {2^a - 1, 2*2^a - 1, ..., N - 1}` with `a = ceil(-log2(K/N))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DSet {
    pub a: u32,
    pub indices: Vec<usize>,
}

pub fn d_set(len: usize, k: usize) -> Result<DSet> {
    if k == 0 || k > len {
        return Err(Error::Dimension { k, len });
    }
    if !len.is_power_of_two() {
        return Err(Error::Invalid(format!(
            "length {len} is not a power of two"
        )));
    }
    // smallest a with K * 2^a >= N
    let mut a = 0u32;
    while k << a < len {
        a += 1;
    }
    let step = 1usize << a;
    Ok(DSet {
        a,
        indices: (step - 1..len).step_by(step).collect(),
    })
}

/// Rank of the columns `cols` of `m`.
pub fn rank_submatrix(field: &FieldSpec, m: &GfMatrix, cols: &[usize]) -> usize {
    m.select_columns(cols).rank(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ers_code::LocatorOrder;

    fn code(n: u32, k: usize) -> ErsCode {
        ErsCode::new(
            Arc::new(FieldSpec::new(n, None).unwrap()),
            k,
            LocatorOrder::AlphaPower,
        )
        .unwrap()
    }

    #[test]
    fn kernel_n1() {
        assert_eq!(gp_matrix(1).as_bits(), &[1, 0, 1, 1]);
    }

    #[test]
    fn kernel_row_weights_n3() {
        let g = gp_matrix(3);
        let w: Vec<usize> = (0..8)
            .map(|r| (0..8).map(|c| g.get(r, c) as usize).sum())
            .collect();
        assert_eq!(w, vec![1, 2, 2, 4, 2, 4, 4, 8]);
    }

    #[test]
    fn kernel_involution_and_shape() {
        for n in 1..=8 {
            let g = gp_matrix(n);
            let s = g.size();
            let sq = g.mul_gf2(&g);
            for r in 0..s {
                for c in 0..s {
                    assert_eq!(sq[r * s + c], (r == c) as u8);
                    if c > r {
                        assert_eq!(g.get(r, c), 0);
                    }
                }
                assert_eq!(g.get(r, s - 1), (r == s - 1) as u8);
            }
        }
    }

    #[test]
    fn butterfly_matches_dense_kernel() {
        let g = gp_matrix(5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u: Vec<u8> = (0..32).map(|_| rng.random_range(0..2)).collect();
            let mut fast = u.clone();
            polar_encode_bits(&mut fast);
            let slow: Vec<u8> = (0..32)
                .map(|c| (0..32).fold(0, |acc, r| acc ^ (u[r] & g.get(r, c))))
                .collect();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn permutation_basics() {
        assert_eq!(Permutation::identity(4).map(), &[0, 1, 2, 3]);
        assert_eq!(
            Permutation::bit_reversal(8).unwrap().map(),
            &[0, 4, 2, 6, 1, 5, 3, 7]
        );
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        let x = [10, 11, 12, 13];
        assert_eq!(p.permute(&x), vec![11, 13, 10, 12]);
        assert_eq!(p.depermute(&p.permute(&x)), x.to_vec());
        assert_eq!(p.inverse().inverse(), p);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[2,0,3,1]");
        assert_eq!(serde_json::from_str::<Permutation>(&json).unwrap(), p);
        assert!(serde_json::from_str::<Permutation>("[1,1]").is_err());
    }

    #[test]
    fn natural_locator_aligns_values() {
        let c = code(4, 5);
        let p = Permutation::natural_locator(&c);
        let locs = p.depermute(c.locators());
        assert!(locs.iter().enumerate().all(|(i, l)| l.0 as usize == i));
    }

    #[test]
    fn custom_strategy_validates_length() {
        let c = code(3, 2);
        assert!(make_permutation(&c, &PermStrategy::Custom(vec![0, 1, 2])).is_err());
        let p = make_permutation(&c, &PermStrategy::Custom(vec![7, 6, 5, 4, 3, 2, 1, 0])).unwrap();
        assert_eq!(p.map()[0], 7);
    }

    #[test]
    fn full_rate_is_identity() {
        let c = code(4, 16);
        let pt = pretransform(&c, &Permutation::identity(16)).unwrap();
        assert_eq!(pt.pivots(), (0..16).collect::<Vec<_>>().as_slice());
        assert_eq!(pt.m(), &GfMatrix::identity(16));
        assert_eq!(pt.count(SymbolClass::Info), 16);
    }

    #[test]
    fn reconstruction_recovers_generator() {
        let c = code(5, 11);
        let f = c.field().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let p = Permutation::random(32, &mut rng);
            let pt = pretransform(&c, &p).unwrap();
            // E^{-1} M G_p P, with P as a dense matrix
            let mut pm = GfMatrix::zeros(32, 32);
            for (i, &m) in p.map().iter().enumerate() {
                pm[(i, m)] = FieldElement::ONE;
            }
            let g = pt
                .e_inv()
                .mul(&f, pt.m())
                .unwrap()
                .mul(&f, &gp_matrix(5).to_gf())
                .unwrap()
                .mul(&f, &pm)
                .unwrap();
            assert_eq!(&g, c.generator());
        }
    }

    #[test]
    fn rref_structure_and_frozen_constraint() {
        let c = code(5, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = Permutation::random(32, &mut rng);
        let pt = pretransform(&c, &p).unwrap();
        for (i, &cls) in pt.classes().iter().enumerate() {
            if cls == SymbolClass::Info {
                continue;
            }
            for t in pt.tau()[i]..pt.k() {
                assert!(pt.m()[(t, i)].is_zero());
            }
            assert_eq!(
                cls == SymbolClass::Static,
                pt.m().column(i).iter().all(|x| x.is_zero())
            );
        }
        for _ in 0..100 {
            let msg: Vec<_> = (0..15)
                .map(|_| FieldElement(rng.random_range(0..32)))
                .collect();
            let fp = pt.transformed_message(&msg).unwrap();
            let u = pt.input_vector(&fp);
            for i in 0..32 {
                if pt.classes()[i] != SymbolClass::Info {
                    let sum = (0..pt.tau()[i]).fold(FieldElement::ZERO, |acc, t| {
                        c.field().add(acc, c.field().mul(fp[t], pt.m()[(t, i)]))
                    });
                    assert_eq!(u[i], sum);
                    assert_eq!(u[i], pt.frozen_value(i, &fp));
                } else {
                    assert_eq!(u[i], fp[pt.tau()[i]]);
                }
            }
        }
    }

    #[test]
    fn transform_encoder_matches_polynomial() {
        let c = code(5, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let p = Permutation::random(32, &mut rng);
        let pt = pretransform(&c, &p).unwrap();
        for _ in 0..2_000 {
            let msg: Vec<_> = (0..15)
                .map(|_| FieldElement(rng.random_range(0..32)))
                .collect();
            let a = c.encode_poly(&msg).unwrap();
            assert_eq!(encode_via_transform(&pt, &msg).unwrap(), a);
            let fp = pt.transformed_message(&msg).unwrap();
            assert_eq!(pt.codeword_from_input(&pt.input_vector(&fp)), a);
            assert_eq!(pt.message_from_transformed(&fp), msg);
        }
        let zero = vec![FieldElement::ZERO; 15];
        assert!(encode_via_transform(&pt, &zero)
            .unwrap()
            .iter()
            .all(|x| x.is_zero()));
    }

    #[test]
    fn d_set_examples() {
        let d = d_set(32, 16).unwrap();
        assert_eq!(d.a, 1);
        assert_eq!(d.indices, (1..32).step_by(2).collect::<Vec<_>>());
        let d = d_set(32, 8).unwrap();
        assert_eq!(d.a, 2);
        assert_eq!(d.indices, (3..32).step_by(4).collect::<Vec<_>>());
        let d = d_set(16, 16).unwrap();
        assert_eq!(d.a, 0);
        assert_eq!(d.indices, (0..16).collect::<Vec<_>>());
        // non power-of-two rate rounds a up
        let d = d_set(32, 15).unwrap();
        assert_eq!(d.a, 2);
        assert_eq!(d.indices.len(), 8);
        assert!(d_set(32, 0).is_err());
    }

    #[test]
    fn natural_locator_reaches_optimal_pivots() {
        for (n, k) in [(4u32, 4usize), (4, 8), (5, 8), (5, 16), (6, 16), (6, 32)] {
            let c = code(n, k);
            let pt = pretransform(&c, &Permutation::natural_locator(&c)).unwrap();
            assert_eq!(
                pt.pivots(),
                d_set(c.len(), k).unwrap().indices.as_slice(),
                "({}, {k})",
                c.len()
            );
        }
    }

    #[test]
    fn rank_submatrix_cases() {
        let c = code(5, 16);
        let pt = pretransform(&c, &Permutation::identity(32)).unwrap();
        assert_eq!(rank_submatrix(c.field(), pt.m(), pt.pivots()), 16);
        let nz = (0..32)
            .find(|&i| pt.m().column(i).iter().any(|x| !x.is_zero()))
            .unwrap();
        assert_eq!(rank_submatrix(c.field(), pt.m(), &[nz]), 1);
        let d = d_set(32, 16).unwrap();
        assert_eq!(rank_submatrix(c.field(), pt.m(), &d.indices), 16);
    }

    #[test]
    fn export_round_trips_through_json() {
        let c = code(3, 3);
        let pt = pretransform(&c, &Permutation::bit_reversal(8).unwrap()).unwrap();
        let ex = pt.export();
        let s = serde_json::to_string(&ex).unwrap();
        let back: PreTransformExport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ex);
        assert_eq!(back.tau.len(), 8);
    }
    #[test]
    fn greedy_never_worse_than_structured_starts() {
        let c = code(5, 16);
        let pe = crate::analysis::ga_profile(32, 6.0, 0.5).unwrap().pe;
        let cfg = GreedyConfig {
            budget: 2_000,
            ..GreedyConfig::default()
        };
        let g = greedy_search(&c, &pe, &cfg).unwrap();
        assert!(g.evaluations <= cfg.budget + 1);
        let d = d_set(32, 16).unwrap();
        assert!(d.indices.iter().all(|i| g.pivots.contains(i)));
        let nat = pretransform(&c, &Permutation::natural_locator(&c)).unwrap();
        let nat_cost: f64 = nat.pivots().iter().map(|&i| -(-pe[i]).ln_1p()).sum();
        assert!(g.cost <= nat_cost);
    }

    #[test]
    fn greedy_finds_exhaustive_optimum_on_tiny_code() {
        let c = code(2, 2);
        let pe = [0.4f64, 0.2, 0.1, 0.01];
        let cost = |piv: &[usize]| piv.iter().map(|&i| -(-pe[i]).ln_1p()).sum::<f64>();
        let mut best = f64::INFINITY;
        let mut map = vec![0, 1, 2, 3];
        // Heap's algorithm over all 24 permutations
        let mut stack = [0usize; 4];
        let mut i = 0;
        best = best.min(cost(
            pretransform(&c, &Permutation::new(map.clone()).unwrap())
                .unwrap()
                .pivots(),
        ));
        while i < 4 {
            if stack[i] < i {
                if i % 2 == 0 {
                    map.swap(0, i)
                } else {
                    map.swap(stack[i], i)
                }
                let pt = pretransform(&c, &Permutation::new(map.clone()).unwrap()).unwrap();
                best = best.min(cost(pt.pivots()));
                stack[i] += 1;
                i = 0;
            } else {
                stack[i] = 0;
                i += 1;
            }
        }
        let g = greedy_search(
            &c,
            &pe,
            &GreedyConfig {
                budget: 500,
                ..GreedyConfig::default()
            },
        )
        .unwrap();
        assert!((g.cost - best).abs() < 1e-15, "{} vs {best}", g.cost);
    }
}
