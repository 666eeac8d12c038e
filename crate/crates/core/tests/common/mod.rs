//! Reference implementations used as oracles by the integration tests.
//! They recompute everything from scratch and share no code with the
//! decoder beyond the field arithmetic and the pre-transform.
#![allow(dead_code)]

use std::sync::Arc;

use ers_polar::decoder::LlrFrame;
use ers_polar::ers_code::{ErsCode, LocatorOrder};
use ers_polar::transform::{pretransform, Permutation, PreTransform, SymbolClass};
use ers_polar::{FieldElement, FieldSpec};

pub fn code(n: u32, k: usize) -> ErsCode {
    ErsCode::new(
        Arc::new(FieldSpec::new(n, None).unwrap()),
        k,
        LocatorOrder::AlphaPower,
    )
    .unwrap()
}

pub fn natural(code: &ErsCode) -> PreTransform {
    pretransform(code, &Permutation::natural_locator(code)).unwrap()
}

fn polar_bits(u: &[u8]) -> Vec<u8> {
    // x = u G_p with G_p[r][c] = 1 iff c is a bitwise subset of r
    (0..u.len())
        .map(|c| {
            (0..u.len())
                .filter(|&r| r & c == c)
                .fold(0, |acc, r| acc ^ u[r])
        })
        .collect()
}

/// Leaf LLR of position `i` for one bit plane given the decided prefix,
/// by direct recursion on the channel LLRs.
pub fn leaf_llr(llr: &[f64], prefix: &[u8], i: usize) -> f64 {
    let len = llr.len();
    if len == 1 {
        return llr[0];
    }
    let h = len / 2;
    if i < h {
        let next: Vec<f64> = (0..h)
            .map(|t| {
                let (a, b) = (llr[t], llr[t + h]);
                let m = a.abs().min(b.abs());
                if (a < 0.0) != (b < 0.0) {
                    -m
                } else {
                    m
                }
            })
            .collect();
        leaf_llr(&next, prefix, i)
    } else {
        let v = polar_bits(&prefix[..h]);
        let next: Vec<f64> = (0..h)
            .map(|t| {
                if v[t] == 1 {
                    llr[t + h] - llr[t]
                } else {
                    llr[t + h] + llr[t]
                }
            })
            .collect();
        leaf_llr(&next, &prefix[h..], i - h)
    }
}

fn plane(llr: &LlrFrame, j: usize) -> Vec<f64> {
    (0..llr.len()).map(|i| llr.get(i, j)).collect()
}

fn plane_bits(u: &[FieldElement], j: usize) -> Vec<u8> {
    u.iter().map(|s| s.bit(j)).collect()
}

/// Leaf LLRs of every plane at position `i` given the decided symbols `u[..i]`.
pub fn leaves(llr: &LlrFrame, u: &[FieldElement], i: usize) -> Vec<f64> {
    (0..llr.bits())
        .map(|j| {
            let mut prefix = plane_bits(&u[..i], j);
            prefix.resize(llr.len(), 0);
            leaf_llr(&plane(llr, j), &prefix, i)
        })
        .collect()
}

fn hard(l: f64) -> u8 {
    (l < 0.0) as u8
}

/// Per-position contradiction penalties of the input vector `u`.
pub fn penalties(llr: &LlrFrame, u: &[FieldElement]) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            leaves(llr, u, i)
                .iter()
                .enumerate()
                .filter(|&(j, &l)| hard(l) != u[i].bit(j))
                .map(|(_, l)| l.abs())
                .sum()
        })
        .collect()
}

/// Path metric of a complete input vector.
pub fn path_metric(llr: &LlrFrame, u: &[FieldElement]) -> f64 {
    penalties(llr, u).iter().sum()
}

pub struct RefDecoded {
    pub message: Vec<FieldElement>,
    pub u_hat: Vec<FieldElement>,
    pub metric: f64,
}

#[derive(Clone)]
struct RefPath {
    u: Vec<FieldElement>,
    f_prime: Vec<FieldElement>,
    metric: f64,
}

/// Textbook SCL: every path expands into all `2^n` children, the full
/// candidate list is sorted by (metric, parent, symbol) and cut to `list`.
/// Metrics are accumulated in the same floating-point order as the
/// decoder so the two can be compared exactly.
pub fn reference_scl(pt: &PreTransform, llr: &LlrFrame, list: usize) -> RefDecoded {
    let len = pt.len();
    let bits = llr.bits();
    let q = 1usize << bits;
    let mut paths = vec![RefPath {
        u: vec![FieldElement::ZERO; len],
        f_prime: vec![FieldElement::ZERO; pt.k()],
        metric: 0.0,
    }];
    for i in 0..len {
        let leaf: Vec<Vec<f64>> = paths.iter().map(|p| leaves(llr, &p.u, i)).collect();
        if pt.classes()[i] == SymbolClass::Info {
            let mut cands = Vec::new();
            for (l, p) in paths.iter().enumerate() {
                let w: Vec<f64> = leaf[l].iter().map(|x| x.abs()).collect();
                let hard_sym: u16 = (0..bits).map(|j| (hard(leaf[l][j]) as u16) << j).sum();
                let mut order: Vec<usize> = (0..bits).collect();
                order.sort_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)));
                for mask in 0..q as u16 {
                    let mut m = p.metric;
                    for &j in &order {
                        if (mask >> j) & 1 == 1 {
                            m += w[j];
                        }
                    }
                    cands.push((m, l, hard_sym ^ mask));
                }
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            cands.truncate(list);
            paths = cands
                .iter()
                .map(|&(m, l, s)| {
                    let mut p = paths[l].clone();
                    p.u[i] = FieldElement(s);
                    p.f_prime[pt.tau()[i]] = FieldElement(s);
                    p.metric = m;
                    p
                })
                .collect();
        } else {
            for (l, p) in paths.iter_mut().enumerate() {
                let sym = pt.frozen_value(i, &p.f_prime);
                let mut pen = 0.0;
                for (j, &x) in leaf[l].iter().enumerate() {
                    if hard(x) != sym.bit(j) {
                        pen += x.abs();
                    }
                }
                p.metric += pen;
                p.u[i] = sym;
            }
        }
    }
    let mut best = 0;
    for l in 1..paths.len() {
        if paths[l].metric < paths[best].metric {
            best = l;
        }
    }
    let p = &paths[best];
    RefDecoded {
        message: pt.message_from_transformed(&p.f_prime),
        u_hat: p.u.clone(),
        metric: p.metric,
    }
}

/// Every message of a small code, in lexicographic order.
pub fn all_messages(q: u16, k: usize) -> Vec<Vec<FieldElement>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|m: Vec<FieldElement>| {
                (0..q).map(move |s| {
                    let mut m = m.clone();
                    m.push(FieldElement(s));
                    m
                })
            })
            .collect();
    }
    out
}
