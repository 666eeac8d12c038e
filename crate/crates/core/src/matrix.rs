//! Dense matrices over GF(2^n) and the elimination routines the transform needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{FieldElement, FieldSpec};

/// Row-major dense matrix of field elements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GfMatrix {
    rows: usize,
    cols: usize,
    data: Vec<FieldElement>,
}

impl GfMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        GfMatrix {
            rows,
            cols,
            data: vec![FieldElement::ZERO; rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m[(i, i)] = FieldElement::ONE;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<FieldElement>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::Length {
                expected: c,
                got: bad.len(),
            });
        }
        Ok(GfMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Embeds a 0/1 matrix.
    pub fn from_binary(rows: usize, cols: usize, bits: &[u8]) -> Self {
        assert_eq!(bits.len(), rows * cols);
        GfMatrix {
            rows,
            cols,
            data: bits.iter().map(|&b| FieldElement(b as u16)).collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[FieldElement] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [FieldElement] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<FieldElement> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u16>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|x| x.0).collect())
            .collect()
    }

    /// Submatrix made of the given columns, in the order given.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (k, &c) in cols.iter().enumerate() {
                out[(r, k)] = self[(r, c)];
            }
        }
        out
    }

    pub fn mul(&self, field: &FieldSpec, rhs: &GfMatrix) -> Result<GfMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Length {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        let mut out = GfMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let p = field.mul(a, rhs[(k, c)]);
                    out[(r, c)] = field.add(out[(r, c)], p);
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, field: &FieldSpec, v: &[FieldElement]) -> Vec<FieldElement> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![FieldElement::ZERO; self.cols];
        for (r, &a) in v.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.row(r)) {
                *o = field.add(*o, field.mul(a, x));
            }
        }
        out
    }

    /// Reduced row echelon form in place.
    ///
    /// Pivoting takes the leftmost column with a nonzero entry at or below
    /// the current row, uses the first such row, and scales the pivot to 1.
    /// Every row operation is mirrored on `track` when supplied, so starting
    /// from the identity it accumulates the elimination matrix. Returns the
    /// pivot columns.
    pub fn rref(&mut self, field: &FieldSpec, mut track: Option<&mut GfMatrix>) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(p) = (row..self.rows).find(|&r| !self[(r, col)].is_zero()) else {
                continue;
            };
            if p != row {
                self.swap_rows(p, row);
                if let Some(t) = track.as_deref_mut() {
                    t.swap_rows(p, row);
                }
            }
            let inv = field.inv(self[(row, col)]).expect("pivot is nonzero");
            self.scale_row(field, row, inv);
            if let Some(t) = track.as_deref_mut() {
                t.scale_row(field, row, inv);
            }
            for r in 0..self.rows {
                let factor = self[(r, col)];
                if r != row && !factor.is_zero() {
                    self.add_scaled_row(field, r, row, factor);
                    if let Some(t) = track.as_deref_mut() {
                        t.add_scaled_row(field, r, row, factor);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self, field: &FieldSpec) -> usize {
        self.clone().rref(field, None).len()
    }

    /// Inverse of a square matrix by Gauss-Jordan elimination.
    pub fn inverse(&self, field: &FieldSpec) -> Result<GfMatrix> {
        if self.rows != self.cols {
            return Err(Error::Length {
                expected: self.rows,
                got: self.cols,
            });
        }
        let mut work = self.clone();
        let mut inv = GfMatrix::identity(self.rows);
        let pivots = work.rref(field, Some(&mut inv));
        if pivots.len() != self.rows {
            return Err(Error::RankDeficient {
                rank: pivots.len(),
                expected: self.rows,
            });
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn scale_row(&mut self, field: &FieldSpec, r: usize, s: FieldElement) {
        for x in self.row_mut(r) {
            *x = field.mul(*x, s);
        }
    }

    /// row[dst] += factor * row[src]
    fn add_scaled_row(&mut self, field: &FieldSpec, dst: usize, src: usize, factor: FieldElement) {
        for c in 0..self.cols {
            let v = field.mul(factor, self.data[src * self.cols + c]);
            let d = &mut self.data[dst * self.cols + c];
            *d = field.add(*d, v);
        }
    }
}

impl std::ops::Index<(usize, usize)> for GfMatrix {
    type Output = FieldElement;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &FieldElement {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for GfMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut FieldElement {
        &mut self.data[r * self.cols + c]
    }
}
