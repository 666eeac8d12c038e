//! Successive cancellation (SC) and SC list decoding of an eRS code viewed
//! as `n` binary polar codes that share symbol-level decisions.
//!
//! Each bit plane runs its own min-sum SC tree over the de-permuted channel
//! LLRs. At an information position the `n` leaf LLRs are decided jointly as
//! one field symbol; at a frozen position the symbol is the linear
//! combination of already decided transformed-message symbols given by `M`.

use std::cmp::Ordering;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::FieldElement;
use crate::transform::{Permutation, PreTransform, SymbolClass};

/// Default LLR clipping magnitude (natural-log units).
pub const DEFAULT_LLR_MAX: f64 = 40.0;

/// Channel LLRs for one frame, laid out symbol-major: entry `i * n + j` is
/// the LLR of bit `j` of de-permuted symbol `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrFrame {
    bits: usize,
    values: Vec<f64>,
}

impl LlrFrame {
    pub fn new(bits: usize, values: Vec<f64>) -> Result<Self> {
        if bits == 0 || !values.len().is_multiple_of(bits) || !(values.len() / bits).is_power_of_two() {
            return Err(Error::Invalid(format!(
                "{} LLRs cannot be split into a power-of-two number of {bits}-bit symbols",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite LLR {v}")));
        }
        Ok(LlrFrame { bits, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.bits + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// BPSK (0 -> +1, 1 -> -1) LLRs from channel observations.
///
/// `y` holds `N * n` observations in transmission order (symbol-major). The
/// frame is de-permuted at symbol granularity, scaled by `2 / noise_var`
/// and clipped to `[-llr_max, llr_max]`.
pub fn llr_from_channel(
    y: &[f64],
    bits: usize,
    noise_var: f64,
    perm: &Permutation,
    llr_max: f64,
) -> Result<LlrFrame> {
    if noise_var <= 0.0 || !noise_var.is_finite() {
        return Err(Error::Invalid(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    if y.len() != perm.len() * bits {
        return Err(Error::Length {
            expected: perm.len() * bits,
            got: y.len(),
        });
    }
    let scale = 2.0 / noise_var;
    let mut values = Vec::with_capacity(y.len());
    for &src in perm.map() {
        for j in 0..bits {
            values.push((scale * y[src * bits + j]).clamp(-llr_max, llr_max));
        }
    }
    LlrFrame::new(bits, values)
}

/// Check-node update, min-sum form.
#[inline]
pub fn f_fun(l1: f64, l2: f64) -> f64 {
    let m = l1.abs().min(l2.abs());
    if (l1 < 0.0) != (l2 < 0.0) {
        -m
    } else {
        m
    }
}

/// Variable-node update given the partial-sum bit `u` of the left branch.
#[inline]
pub fn g_fun(l1: f64, l2: f64, u: u8) -> f64 {
    if u == 0 {
        l2 + l1
    } else {
        l2 - l1
    }
}

/// Hard decision; a zero LLR decides 0.
#[inline]
fn hard(l: f64) -> u8 {
    (l < 0.0) as u8
}

/// Arithmetic performed during a decode.
///
/// Field: one GF(2^n) multiplication or addition is one `gf_op`. Real: one
/// addition, comparison, absolute value, sign or min is one `flop`. Under
/// that rule an `f` update is 4 flops (2 abs, 1 min, 1 sign) and a `g`
/// update is 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub gf_ops: u64,
    pub flops: u64,
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.gf_ops += rhs.gf_ops;
        self.flops += rhs.flops;
    }
}

const F_FLOPS: u64 = 4;
const G_FLOPS: u64 = 1;

/// Per-frame report of the counters, plus means when aggregated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterReport {
    pub frames: u64,
    pub gf_ops_total: u64,
    pub flops_total: u64,
    pub gf_ops_mean: f64,
    pub flops_mean: f64,
}

/// Summarizes counters accumulated over `frames` decodes.
pub fn counters_report(total: &OpCounters, frames: u64) -> CounterReport {
    let d = frames.max(1) as f64;
    CounterReport {
        frames,
        gf_ops_total: total.gf_ops,
        flops_total: total.flops,
        gf_ops_mean: total.gf_ops as f64 / d,
        flops_mean: total.flops as f64 / d,
    }
}

/// Layer geometry shared by all planes: depth `d` in `1..=n` holds
/// `N >> d` values starting at `offset[d]` inside a plane block of `N - 1`.
#[derive(Clone, Debug)]
struct Layout {
    len: usize,
    depth: usize,
    planes: usize,
    offset: Vec<usize>,
}

impl Layout {
    fn new(len: usize, planes: usize) -> Self {
        let depth = len.trailing_zeros() as usize;
        let mut offset = vec![0; depth + 1];
        let mut acc = 0;
        for (d, off) in offset.iter_mut().enumerate().skip(1) {
            *off = acc;
            acc += len >> d;
        }
        Layout {
            len,
            depth,
            planes,
            offset,
        }
    }

    #[inline]
    fn block(&self) -> usize {
        self.len - 1
    }
}

/// Channel LLRs reorganized plane-major for the SC trees.
struct ChannelPlanes {
    data: Vec<f64>,
}

impl ChannelPlanes {
    fn new(llr: &LlrFrame) -> Self {
        let (len, bits) = (llr.len(), llr.bits());
        let mut data = vec![0.0; len * bits];
        for i in 0..len {
            for j in 0..bits {
                data[j * len + i] = llr.get(i, j);
            }
        }
        ChannelPlanes { data }
    }
}

/// The SC tree state of one decoding hypothesis across all planes.
#[derive(Clone, Debug)]
struct TreeState {
    llr: Vec<f64>,
    /// Partial sums of completed left children, per depth.
    left_bits: Vec<u8>,
}

impl TreeState {
    fn new(layout: &Layout) -> Self {
        let size = layout.planes * layout.block().max(1);
        TreeState {
            llr: vec![0.0; size],
            left_bits: vec![0; size],
        }
    }

    /// Computes the leaf LLRs of position `i` for every plane into `leaf`.
    fn descend(
        &mut self,
        lay: &Layout,
        ch: &ChannelPlanes,
        i: usize,
        leaf: &mut [f64],
        ops: &mut OpCounters,
    ) {
        let n = lay.depth;
        if n == 0 {
            leaf.copy_from_slice(&ch.data[..lay.planes]);
            return;
        }
        let block = lay.block();
        // first depth whose node differs from the one used for position i - 1
        let start = if i == 0 {
            1
        } else {
            n - i.trailing_zeros() as usize
        };
        for j in 0..lay.planes {
            let base = j * block;
            for d in start..=n {
                let h = lay.len >> d;
                let dst = base + lay.offset[d];
                let right = d == start && i != 0;
                if d == 1 {
                    let src = &ch.data[j * lay.len..(j + 1) * lay.len];
                    if right {
                        for t in 0..h {
                            self.llr[dst + t] = g_fun(src[t], src[t + h], self.left_bits[dst + t]);
                        }
                    } else {
                        for t in 0..h {
                            self.llr[dst + t] = f_fun(src[t], src[t + h]);
                        }
                    }
                } else {
                    let src = base + lay.offset[d - 1];
                    if right {
                        for t in 0..h {
                            let (a, b) = (self.llr[src + t], self.llr[src + t + h]);
                            self.llr[dst + t] = g_fun(a, b, self.left_bits[dst + t]);
                        }
                    } else {
                        for t in 0..h {
                            let (a, b) = (self.llr[src + t], self.llr[src + t + h]);
                            self.llr[dst + t] = f_fun(a, b);
                        }
                    }
                }
                ops.flops += h as u64 * if right { G_FLOPS } else { F_FLOPS };
            }
            leaf[j] = self.llr[base + lay.offset[n]];
        }
    }

    /// Records the decided symbol at position `i` and propagates partial sums.
    fn commit(&mut self, lay: &Layout, i: usize, symbol: FieldElement, scratch: &mut [u8]) {
        let n = lay.depth;
        if n == 0 {
            return;
        }
        let block = lay.block();
        for j in 0..lay.planes {
            let base = j * block;
            scratch[0] = symbol.bit(j);
            let mut width = 1;
            for d in (1..=n).rev() {
                let dst = base + lay.offset[d];
                if (i >> (n - d)) & 1 == 0 {
                    self.left_bits[dst..dst + width].copy_from_slice(&scratch[..width]);
                    break;
                }
                // right child finished: parent = (left ^ right, right)
                for t in 0..width {
                    let r = scratch[t];
                    scratch[t + width] = r;
                    scratch[t] = self.left_bits[dst + t] ^ r;
                }
                width *= 2;
            }
        }
    }
}

fn check_dims(pt: &PreTransform, llr: &LlrFrame) -> Result<()> {
    if llr.len() != pt.len() {
        return Err(Error::Length {
            expected: pt.len(),
            got: llr.len(),
        });
    }
    if llr.bits() != pt.field().bits() {
        return Err(Error::Length {
            expected: pt.field().bits(),
            got: llr.bits(),
        });
    }
    Ok(())
}

/// Frozen symbol from the decided transformed-message prefix, counting GF work.
fn frozen_symbol(
    pt: &PreTransform,
    i: usize,
    f_prime: &[FieldElement],
    ops: &mut OpCounters,
) -> FieldElement {
    let taps = pt.taps(i);
    if !taps.is_empty() {
        ops.gf_ops += 2 * taps.len() as u64 - 1;
    }
    pt.frozen_value(i, f_prime)
}

/// `F = F' E`, counting GF work.
fn recover_message(
    pt: &PreTransform,
    f_prime: &[FieldElement],
    ops: &mut OpCounters,
) -> Vec<FieldElement> {
    let e = pt.e();
    let k = pt.k();
    for c in 0..k {
        let nnz = (0..k)
            .filter(|&r| !e[(r, c)].is_zero() && !f_prime[r].is_zero())
            .count() as u64;
        if nnz > 0 {
            ops.gf_ops += 2 * nnz - 1;
        }
    }
    pt.message_from_transformed(f_prime)
}

/// Result of a decode.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    /// Estimated polar input symbols `U`.
    pub u_hat: Vec<FieldElement>,
    /// Estimated transformed message `F'`.
    pub f_prime: Vec<FieldElement>,
    /// Estimated message `F`.
    pub message: Vec<FieldElement>,
    /// Path metric of the returned hypothesis (0 for plain SC).
    pub metric: f64,
    /// Per-position metric increments of the returned hypothesis.
    pub penalties: Vec<f64>,
    pub counters: OpCounters,
}

/// Plain SC decoding: hard decisions at information positions, frozen
/// symbols recomputed from earlier decisions.
pub fn sc_decode(pt: &PreTransform, llr: &LlrFrame) -> Result<Decoded> {
    check_dims(pt, llr)?;
    let len = pt.len();
    let bits = pt.field().bits();
    let lay = Layout::new(len, bits);
    let ch = ChannelPlanes::new(llr);
    let mut tree = TreeState::new(&lay);
    let mut scratch = vec![0u8; len];
    let mut leaf = vec![0.0; bits];
    let mut ops = OpCounters::default();
    let mut u_hat = vec![FieldElement::ZERO; len];
    let mut f_prime = vec![FieldElement::ZERO; pt.k()];

    for i in 0..len {
        tree.descend(&lay, &ch, i, &mut leaf, &mut ops);
        let sym = match pt.classes()[i] {
            SymbolClass::Info => {
                ops.flops += bits as u64;
                let v = leaf
                    .iter()
                    .enumerate()
                    .fold(0u16, |acc, (j, &l)| acc | ((hard(l) as u16) << j));
                let v = FieldElement(v);
                f_prime[pt.tau()[i]] = v;
                v
            }
            _ => frozen_symbol(pt, i, &f_prime, &mut ops),
        };
        u_hat[i] = sym;
        tree.commit(&lay, i, sym, &mut scratch);
    }
    let message = recover_message(pt, &f_prime, &mut ops);
    Ok(Decoded {
        u_hat,
        f_prime,
        message,
        metric: 0.0,
        penalties: vec![0.0; len],
        counters: ops,
    })
}

/// One line of the optional SCL trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub i: usize,
    pub class: SymbolClass,
    /// Symbol chosen at `i` by the best surviving path.
    pub symbol: u16,
    /// Metric increment of the best surviving path at `i`.
    pub penalty: f64,
    /// Metrics of all surviving paths, in list order.
    pub metrics: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Path {
    tree: TreeState,
    u_hat: Vec<FieldElement>,
    f_prime: Vec<FieldElement>,
    metric: f64,
    penalties: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    metric: f64,
    parent: usize,
    symbol: u16,
    penalty: f64,
}

/// Total order used for pruning: metric, then parent index, then symbol value.
#[inline]
fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    a.metric
        .total_cmp(&b.metric)
        .then(a.parent.cmp(&b.parent))
        .then(a.symbol.cmp(&b.symbol))
}

/// Keeps the `list` smallest candidates seen so far under [`candidate_order`],
/// as a binary max-heap. Every key comparison is one flop.
#[derive(Default)]
struct Selector {
    list: usize,
    heap: Vec<Candidate>,
}

impl Selector {
    fn reset(&mut self, list: usize) {
        self.list = list;
        self.heap.clear();
    }

    #[inline]
    fn full(&self) -> bool {
        self.heap.len() == self.list
    }

    /// True when every candidate with metric `m` or more is already excluded.
    #[inline]
    fn rejects_metric(&self, m: f64, ops: &mut OpCounters) -> bool {
        if !self.full() {
            return false;
        }
        ops.flops += 1;
        m > self.heap[0].metric
    }

    fn offer(&mut self, c: Candidate, ops: &mut OpCounters) {
        let mut cmps = 0u64;
        let mut less = |a: &Candidate, b: &Candidate| {
            cmps += 1;
            candidate_order(a, b) == Ordering::Less
        };
        if !self.full() {
            self.heap.push(c);
            let mut k = self.heap.len() - 1;
            while k > 0 {
                let up = (k - 1) / 2;
                if !less(&self.heap[up], &self.heap[k]) {
                    break;
                }
                self.heap.swap(up, k);
                k = up;
            }
        } else if less(&c, &self.heap[0]) {
            self.heap[0] = c;
            let len = self.heap.len();
            let mut k = 0;
            loop {
                let (a, b) = (2 * k + 1, 2 * k + 2);
                let mut big = k;
                if a < len && less(&self.heap[big], &self.heap[a]) {
                    big = a;
                }
                if b < len && less(&self.heap[big], &self.heap[b]) {
                    big = b;
                }
                if big == k {
                    break;
                }
                self.heap.swap(k, big);
                k = big;
            }
        }
        ops.flops += cmps;
    }

    fn drain_sorted(&mut self, out: &mut Vec<Candidate>, ops: &mut OpCounters) {
        out.clear();
        out.append(&mut self.heap);
        let mut cmps = 0u64;
        out.sort_by(|a, b| {
            cmps += 1;
            candidate_order(a, b)
        });
        ops.flops += cmps;
    }
}

struct ChildCtx<'a> {
    parent: usize,
    hard: u16,
    /// Bit positions sorted by increasing reliability.
    order: &'a [usize],
    weights: &'a [f64],
}

/// Offers the child that flips `mask`, then every extension of `mask` by
/// positions `from..` of the weight order. Weights are sorted, so once one
/// extension is excluded all later ones are too.
fn enumerate_children(
    ctx: &ChildCtx,
    from: usize,
    metric: f64,
    penalty: f64,
    mask: u16,
    sel: &mut Selector,
    ops: &mut OpCounters,
) {
    sel.offer(
        Candidate {
            metric,
            parent: ctx.parent,
            symbol: ctx.hard ^ mask,
            penalty,
        },
        ops,
    );
    for k in from..ctx.order.len() {
        let m = metric + ctx.weights[k];
        ops.flops += 1;
        if sel.rejects_metric(m, ops) {
            break;
        }
        enumerate_children(
            ctx,
            k + 1,
            m,
            penalty + ctx.weights[k],
            mask | (1 << ctx.order[k]),
            sel,
            ops,
        );
    }
}

/// SCL decoding with list size `list`.
pub fn scl_decode(pt: &PreTransform, llr: &LlrFrame, list: usize) -> Result<Decoded> {
    scl_decode_traced(pt, llr, list, None)
}

/// SCL decoding that reports each step to `trace`.
pub fn scl_decode_traced(
    pt: &PreTransform,
    llr: &LlrFrame,
    list: usize,
    mut trace: Option<&mut dyn FnMut(TraceRecord)>,
) -> Result<Decoded> {
    check_dims(pt, llr)?;
    if list == 0 {
        return Err(Error::Invalid("list size must be at least 1".into()));
    }
    let len = pt.len();
    let bits = pt.field().bits();
    let lay = Layout::new(len, bits);
    let ch = ChannelPlanes::new(llr);
    let mut scratch = vec![0u8; len];
    let mut ops = OpCounters::default();

    let mut paths = vec![Path {
        tree: TreeState::new(&lay),
        u_hat: vec![FieldElement::ZERO; len],
        f_prime: vec![FieldElement::ZERO; pt.k()],
        metric: 0.0,
        penalties: vec![0.0; len],
    }];
    let mut leaves = vec![0.0; bits * list];
    let mut weights = vec![0.0; bits];
    let mut sorted_w = Vec::with_capacity(bits);
    let mut by_weight = Vec::with_capacity(bits);
    let mut order = Vec::with_capacity(list);
    let mut selector = Selector::default();
    let mut candidates: Vec<Candidate> = Vec::with_capacity(list);

    for i in 0..len {
        if leaves.len() < bits * paths.len() {
            leaves.resize(bits * paths.len(), 0.0);
        }
        for (l, p) in paths.iter_mut().enumerate() {
            p.tree.descend(
                &lay,
                &ch,
                i,
                &mut leaves[l * bits..(l + 1) * bits],
                &mut ops,
            );
        }
        let class = pt.classes()[i];
        match class {
            SymbolClass::Info => {
                // visit parents best first so the admission threshold tightens early
                order.clear();
                order.extend(0..paths.len());
                let mut cmps = 0u64;
                order.sort_by(|&a, &b| {
                    cmps += 1;
                    paths[a].metric.total_cmp(&paths[b].metric).then(a.cmp(&b))
                });
                ops.flops += cmps;
                selector.reset(list);
                for &l in &order {
                    let parent = paths[l].metric;
                    if selector.rejects_metric(parent, &mut ops) {
                        break;
                    }
                    let leaf = &leaves[l * bits..(l + 1) * bits];
                    let mut hard_sym = 0u16;
                    for j in 0..bits {
                        weights[j] = leaf[j].abs();
                        hard_sym |= (hard(leaf[j]) as u16) << j;
                    }
                    ops.flops += 2 * bits as u64;
                    by_weight.clear();
                    by_weight.extend(0..bits);
                    let mut cmps = 0u64;
                    by_weight.sort_by(|&a, &b| {
                        cmps += 1;
                        weights[a].total_cmp(&weights[b]).then(a.cmp(&b))
                    });
                    ops.flops += cmps;
                    sorted_w.clear();
                    sorted_w.extend(by_weight.iter().map(|&j| weights[j]));
                    let ctx = ChildCtx {
                        parent: l,
                        hard: hard_sym,
                        order: &by_weight,
                        weights: &sorted_w,
                    };
                    enumerate_children(&ctx, 0, parent, 0.0, 0, &mut selector, &mut ops);
                }
                selector.drain_sorted(&mut candidates, &mut ops);

                let mut remaining = vec![0usize; paths.len()];
                for c in &candidates {
                    remaining[c.parent] += 1;
                }
                let mut old: Vec<Option<Path>> = paths.drain(..).map(Some).collect();
                for c in &candidates {
                    remaining[c.parent] -= 1;
                    let mut p = if remaining[c.parent] == 0 {
                        old[c.parent].take().expect("parent still present")
                    } else {
                        old[c.parent]
                            .as_ref()
                            .expect("parent still present")
                            .clone()
                    };
                    let sym = FieldElement(c.symbol);
                    p.u_hat[i] = sym;
                    p.f_prime[pt.tau()[i]] = sym;
                    p.metric = c.metric;
                    p.penalties[i] = c.penalty;
                    p.tree.commit(&lay, i, sym, &mut scratch);
                    paths.push(p);
                }
            }
            SymbolClass::Static | SymbolClass::Dynamic => {
                for (l, p) in paths.iter_mut().enumerate() {
                    let sym = frozen_symbol(pt, i, &p.f_prime, &mut ops);
                    let leaf = &leaves[l * bits..(l + 1) * bits];
                    let mut pen = 0.0;
                    for (j, &lj) in leaf.iter().enumerate() {
                        ops.flops += 1;
                        if hard(lj) != sym.bit(j) {
                            pen += lj.abs();
                            ops.flops += 2;
                        }
                    }
                    ops.flops += 1;
                    p.metric += pen;
                    p.penalties[i] = pen;
                    p.u_hat[i] = sym;
                    p.tree.commit(&lay, i, sym, &mut scratch);
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            let best = best_index(&paths);
            t(TraceRecord {
                i,
                class,
                symbol: paths[best].u_hat[i].0,
                penalty: paths[best].penalties[i],
                metrics: paths.iter().map(|p| p.metric).collect(),
            });
        }
    }

    ops.flops += paths.len() as u64 - 1;
    let best = best_index(&paths);
    let winner = paths.swap_remove(best);
    let message = recover_message(pt, &winner.f_prime, &mut ops);
    Ok(Decoded {
        u_hat: winner.u_hat,
        f_prime: winner.f_prime,
        message,
        metric: winner.metric,
        penalties: winner.penalties,
        counters: ops,
    })
}

/// Smallest metric, earliest list position on ties.
fn best_index(paths: &[Path]) -> usize {
    let mut best = 0;
    for (l, p) in paths.iter().enumerate().skip(1) {
        if p.metric < paths[best].metric {
            best = l;
        }
    }
    best
}
