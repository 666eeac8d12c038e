//! Extended Reed-Solomon codes of length `N = 2^n` over GF(2^n).
//!
//! A message `F_0..F_{K-1}` is the polynomial `F(x) = F_0 + F_1 x + ...`,
//! and codeword symbol `i` is `F(locators[i])`. The zero element is always
//! the last locator, so the last symbol equals `F_0` and doubles as the
//! overall parity of the other `N - 1` symbols.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{FieldElement, FieldSpec};
use crate::matrix::GfMatrix;

/// How the `N` locators are laid out along the codeword.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocatorOrder {
    /// Position `i < N - 1` evaluates at `alpha^i`; zero last.
    AlphaPower,
    /// Position `i < N - 1` evaluates at the element with integer value `i + 1`; zero last.
    NaturalBinary,
    /// Explicit list; must be a permutation of the field with zero last.
    Custom(Vec<FieldElement>),
}

/// An `(N, K)` extended Reed-Solomon code.
#[derive(Clone, Debug)]
pub struct ErsCode {
    field: Arc<FieldSpec>,
    k: usize,
    locators: Vec<FieldElement>,
    generator: GfMatrix,
}

impl ErsCode {
    pub fn new(field: Arc<FieldSpec>, k: usize, order: LocatorOrder) -> Result<Self> {
        let len = field.size();
        if k == 0 || k > len {
            return Err(Error::Dimension { k, len });
        }
        let locators = match order {
            LocatorOrder::AlphaPower => {
                let mut l: Vec<_> = (0..len as i64 - 1).map(|i| field.exp(i)).collect();
                l.push(FieldElement::ZERO);
                l
            }
            LocatorOrder::NaturalBinary => {
                let mut l: Vec<_> = (1..len as u16).map(FieldElement).collect();
                l.push(FieldElement::ZERO);
                l
            }
            LocatorOrder::Custom(l) => {
                validate_locators(&field, &l)?;
                l
            }
        };
        let mut generator = GfMatrix::zeros(k, len);
        for (i, &loc) in locators.iter().enumerate() {
            let mut p = FieldElement::ONE;
            for row in 0..k {
                generator[(row, i)] = p;
                p = field.mul(p, loc);
            }
        }
        Ok(ErsCode {
            field,
            k,
            locators,
            generator,
        })
    }

    pub fn field(&self) -> &Arc<FieldSpec> {
        &self.field
    }

    /// Code length `N`.
    pub fn len(&self) -> usize {
        self.locators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locators.is_empty()
    }

    /// Dimension `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.len() as f64
    }

    pub fn locators(&self) -> &[FieldElement] {
        &self.locators
    }

    /// The `K x N` generator matrix, `G[k][i] = locators[i]^k`.
    pub fn generator(&self) -> &GfMatrix {
        &self.generator
    }

    fn check_message(&self, msg: &[FieldElement]) -> Result<()> {
        if msg.len() != self.k {
            return Err(Error::Length {
                expected: self.k,
                got: msg.len(),
            });
        }
        for m in msg {
            self.field.element(m.0 as u32)?;
        }
        Ok(())
    }

    /// Encodes by Horner evaluation of the message polynomial at each locator.
    pub fn encode_poly(&self, msg: &[FieldElement]) -> Result<Vec<FieldElement>> {
        self.check_message(msg)?;
        let f = &*self.field;
        Ok(self
            .locators
            .iter()
            .map(|&x| {
                msg.iter()
                    .rev()
                    .fold(FieldElement::ZERO, |acc, &c| f.add(f.mul(acc, x), c))
            })
            .collect())
    }

    /// Encodes as `C = F G`.
    pub fn encode_matrix(&self, msg: &[FieldElement]) -> Result<Vec<FieldElement>> {
        self.check_message(msg)?;
        Ok(self.generator.left_mul_vec(&self.field, msg))
    }

    /// Checks that every tested set of `K` columns of `G` is independent.
    pub fn mds_check(&self, mode: MdsMode) -> MdsReport {
        mds_check_matrix(&self.field, &self.generator, mode)
    }
}

fn validate_locators(field: &FieldSpec, l: &[FieldElement]) -> Result<()> {
    if l.len() != field.size() {
        return Err(Error::Locators(format!(
            "expected {} locators, got {}",
            field.size(),
            l.len()
        )));
    }
    let mut seen = vec![false; field.size()];
    for x in l {
        let idx = x.0 as usize;
        if idx >= field.size() {
            return Err(Error::Locators(format!("{} is not a field element", x.0)));
        }
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::Locators(format!("{} appears twice", x.0)));
        }
    }
    if !l[l.len() - 1].is_zero() {
        return Err(Error::Locators(
            "zero element must be the last locator".into(),
        ));
    }
    Ok(())
}

/// How many column subsets `mds_check` examines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdsMode {
    /// Every `K`-subset of columns.
    Exhaustive,
    /// `trials` uniformly drawn `K`-subsets.
    Sampled { trials: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MdsReport {
    pub mds: bool,
    pub subsets_tested: usize,
    /// First column set found with rank below `K`.
    pub failing_columns: Option<Vec<usize>>,
}

/// `mds_check` on an arbitrary `K x N` matrix.
pub fn mds_check_matrix(field: &FieldSpec, g: &GfMatrix, mode: MdsMode) -> MdsReport {
    let k = g.rows();
    let n = g.cols();
    let mut tested = 0;
    let mut check = |cols: &[usize]| -> bool {
        tested += 1;
        g.select_columns(cols).rank(field) == k
    };
    match mode {
        MdsMode::Exhaustive => {
            let mut comb: Vec<usize> = (0..k).collect();
            loop {
                if !check(&comb) {
                    return MdsReport {
                        mds: false,
                        subsets_tested: tested,
                        failing_columns: Some(comb),
                    };
                }
                // advance to the next k-combination in lexicographic order
                let Some(pos) = (0..k).rev().find(|&i| comb[i] != i + n - k) else {
                    break;
                };
                comb[pos] += 1;
                for i in pos + 1..k {
                    comb[i] = comb[i - 1] + 1;
                }
            }
        }
        MdsMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..trials {
                let mut cols = sample(&mut rng, n, k).into_vec();
                cols.sort_unstable();
                if !check(&cols) {
                    return MdsReport {
                        mds: false,
                        subsets_tested: tested,
                        failing_columns: Some(cols),
                    };
                }
            }
        }
    }
    MdsReport {
        mds: true,
        subsets_tested: tested,
        failing_columns: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn code(n: u32, k: usize) -> ErsCode {
        ErsCode::new(
            Arc::new(FieldSpec::new(n, None).unwrap()),
            k,
            LocatorOrder::AlphaPower,
        )
        .unwrap()
    }

    fn random_msg(rng: &mut impl Rng, c: &ErsCode) -> Vec<FieldElement> {
        (0..c.k())
            .map(|_| FieldElement(rng.random_range(0..c.len() as u16)))
            .collect()
    }

    #[test]
    fn generator_shape_n8_k3() {
        let c = code(3, 3);
        let g = c.generator();
        assert!(g.row(0).iter().all(|&x| x == FieldElement::ONE));
        assert_eq!(
            g.column(7),
            vec![FieldElement::ONE, FieldElement::ZERO, FieldElement::ZERO]
        );
        assert_eq!(c.locators()[1], c.field().alpha());
        assert!(c.locators()[7].is_zero());
    }

    #[test]
    fn dimension_and_locator_errors() {
        let f = Arc::new(FieldSpec::new(3, None).unwrap());
        let c = ErsCode::new(f.clone(), 2, LocatorOrder::AlphaPower).unwrap();
        assert!(matches!(
            c.encode_poly(&[FieldElement(1), FieldElement(8)]),
            Err(Error::NotAnElement { value: 8, n: 3 })
        ));
        assert!(c
            .encode_matrix(&[FieldElement(9), FieldElement(0)])
            .is_err());
        assert!(matches!(
            ErsCode::new(f.clone(), 0, LocatorOrder::AlphaPower),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            ErsCode::new(f.clone(), 9, LocatorOrder::AlphaPower),
            Err(Error::Dimension { .. })
        ));
        let zero_first: Vec<_> = (0..8).map(FieldElement).collect();
        assert!(matches!(
            ErsCode::new(f.clone(), 2, LocatorOrder::Custom(zero_first)),
            Err(Error::Locators(_))
        ));
        let dup = vec![1, 1, 2, 3, 4, 5, 6, 0]
            .into_iter()
            .map(FieldElement)
            .collect();
        assert!(ErsCode::new(f.clone(), 2, LocatorOrder::Custom(dup)).is_err());
        let ok = vec![7, 6, 5, 4, 3, 2, 1, 0]
            .into_iter()
            .map(FieldElement)
            .collect();
        assert!(ErsCode::new(f, 2, LocatorOrder::Custom(ok)).is_ok());
    }

    #[test]
    fn trivial_encodings() {
        let c = code(4, 5);
        let zero = vec![FieldElement::ZERO; 5];
        assert!(c.encode_poly(&zero).unwrap().iter().all(|x| x.is_zero()));
        assert!(c.encode_matrix(&zero).unwrap().iter().all(|x| x.is_zero()));
        let mut unit = zero.clone();
        unit[0] = FieldElement::ONE;
        assert!(c
            .encode_matrix(&unit)
            .unwrap()
            .iter()
            .all(|&x| x == FieldElement::ONE));
        assert!(c.encode_poly(&zero[..4]).is_err());

        let k1 = code(4, 1);
        let cw = k1.encode_poly(&[FieldElement(9)]).unwrap();
        assert!(cw.iter().all(|&x| x == FieldElement(9)));
    }

    #[test]
    fn poly_and_matrix_agree_and_parity_holds() {
        let c = code(5, 15);
        let f = c.field().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let m = random_msg(&mut rng, &c);
            let a = c.encode_poly(&m).unwrap();
            let b = c.encode_matrix(&m).unwrap();
            assert_eq!(a, b);
            let parity = a[..31]
                .iter()
                .fold(FieldElement::ZERO, |acc, &x| f.add(acc, x));
            assert_eq!(parity, a[31]);
            assert_eq!(a[31], m[0]);
        }
    }

    #[test]
    fn linearity() {
        let c = code(4, 6);
        let f = c.field().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = FieldElement(rng.random_range(0..16));
            let m1 = random_msg(&mut rng, &c);
            let m2 = random_msg(&mut rng, &c);
            let comb: Vec<_> = m1
                .iter()
                .zip(&m2)
                .map(|(&x, &y)| f.add(f.mul(a, x), y))
                .collect();
            let lhs = c.encode_poly(&comb).unwrap();
            let c1 = c.encode_poly(&m1).unwrap();
            let c2 = c.encode_poly(&m2).unwrap();
            let rhs: Vec<_> = c1
                .iter()
                .zip(&c2)
                .map(|(&x, &y)| f.add(f.mul(a, x), y))
                .collect();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn minimum_distance_by_enumeration() {
        for k in 1..=3 {
            let c = code(3, k);
            let mut dmin = usize::MAX;
            let total = 8usize.pow(k as u32);
            for idx in 1..total {
                let m: Vec<_> = (0..k)
                    .map(|t| FieldElement(((idx >> (3 * t)) & 7) as u16))
                    .collect();
                let w = c
                    .encode_poly(&m)
                    .unwrap()
                    .iter()
                    .filter(|x| !x.is_zero())
                    .count();
                dmin = dmin.min(w);
            }
            assert_eq!(dmin, 8 - k + 1, "K = {k}");
        }
    }

    #[test]
    fn mds_exhaustive() {
        let r = code(3, 4).mds_check(MdsMode::Exhaustive);
        assert!(r.mds);
        assert_eq!(r.subsets_tested, 70);
        let r = code(4, 15).mds_check(MdsMode::Exhaustive);
        assert!(r.mds);
        assert_eq!(r.subsets_tested, 16);
    }

    #[test]
    fn mds_exhaustive_16_8() {
        let r = code(4, 8).mds_check(MdsMode::Exhaustive);
        assert!(r.mds);
        assert_eq!(r.subsets_tested, 12_870);
    }

    #[test]
    fn mds_detects_corruption() {
        let c = code(3, 4);
        let mut g = c.generator().clone();
        for x in g.row_mut(2) {
            *x = FieldElement::ZERO;
        }
        let r = mds_check_matrix(c.field(), &g, MdsMode::Exhaustive);
        assert!(!r.mds);
        assert_eq!(r.failing_columns, Some(vec![0, 1, 2, 3]));
        let r = mds_check_matrix(c.field(), &g, MdsMode::Sampled { trials: 5, seed: 1 });
        assert!(!r.mds);
    }

    #[test]
    fn mds_sampled_large() {
        let r = code(6, 20).mds_check(MdsMode::Sampled {
            trials: 200,
            seed: 9,
        });
        assert!(r.mds);
        assert_eq!(r.subsets_tested, 200);
    }
}
