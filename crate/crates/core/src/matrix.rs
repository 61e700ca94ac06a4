//! Dense nonnegative rational matrices: primitive transition matrices and
//! their path products.

use crate::poly::{fmt_rat, rat_to_f64, Rat};
use num_traits::{One, Signed, Zero};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rat>,
}

impl RatMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Rat>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        RatMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        RatMatrix::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix::new(rows, cols, vec![Rat::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = RatMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Rat::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rat) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: &Rat) {
        self.data[i * self.cols + j] += v;
    }

    pub fn entries(&self) -> &[Rat] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Rat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix product; `None` on a dimension mismatch.
    pub fn checked_mul(&self, o: &RatMatrix) -> Option<RatMatrix> {
        if self.cols != o.rows {
            return None;
        }
        let mut out = RatMatrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        out.data[i * o.cols + j] += a * b;
                    }
                }
            }
        }
        Some(out)
    }

    pub fn mul(&self, o: &RatMatrix) -> RatMatrix {
        self.checked_mul(o).expect("matrix dimension mismatch")
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(v.len(), self.rows, "vector dimension mismatch");
        let mut out = vec![Rat::zero(); self.cols];
        for (i, a) in v.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                let b = self.get(i, j);
                if !b.is_zero() {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Entrywise sum, `𝟙ᵀ T 𝟙`.
    pub fn sum_norm(&self) -> Rat {
        self.data.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<Rat> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<Rat> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn min_entry(&self) -> Rat {
        self.data.iter().min().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|x| !x.is_negative())
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|x| x.is_positive())
    }

    /// Every column has a nonzero entry.
    pub fn columns_nonzero(&self) -> bool {
        (0..self.cols).all(|j| (0..self.rows).any(|i| !self.get(i, j).is_zero()))
    }

    pub fn kron(&self, o: &RatMatrix) -> RatMatrix {
        let (r, c) = (self.rows * o.rows, self.cols * o.cols);
        let mut out = RatMatrix::zeros(r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a.is_zero() {
                    continue;
                }
                for k in 0..o.rows {
                    for l in 0..o.cols {
                        out.data[(i * o.rows + k) * c + j * o.cols + l] = a * o.get(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(rat_to_f64).collect())
            .collect()
    }

    /// Reverses row and column order.
    pub fn reversed(&self) -> RatMatrix {
        let mut out = RatMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(self.rows - 1 - i, self.cols - 1 - j, self.get(i, j).clone());
            }
        }
        out
    }
}

impl fmt::Display for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(fmt_rat).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Product of a nonempty sequence of matrices, left to right.
pub fn product<'a>(ms: impl IntoIterator<Item = &'a RatMatrix>) -> Option<RatMatrix> {
    let mut it = ms.into_iter();
    let first = it.next()?.clone();
    it.try_fold(first, |acc, m| acc.checked_mul(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    fn m(rows: &[&[i64]], d: i64) -> RatMatrix {
        RatMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| rat(x, d)).collect()).collect())
    }

    #[test]
    fn cone_matrix_norm() {
        let t = m(&[&[4, 0, 0], &[0, 4, 4], &[4, 0, 1]], 17);
        assert_eq!(t.sum_norm(), rat(1, 1));
        assert!(t.columns_nonzero());
        assert_eq!(
            t.left_mul(&[rat(1, 1), rat(1, 1), rat(1, 1)]),
            vec![rat(8, 17), rat(4, 17), rat(5, 17)]
        );
    }

    #[test]
    fn kron_of_scalars_and_blocks() {
        let a = m(&[&[1, 2]], 1);
        let b = m(&[&[3], &[4]], 1);
        let k = a.kron(&b);
        assert_eq!(k, m(&[&[3, 6], &[4, 8]], 1));
        // (A⊗B)(C⊗D) = AC⊗BD
        let c = m(&[&[1], &[1]], 2);
        let d = m(&[&[5, 7]], 3);
        assert_eq!(a.kron(&b).mul(&c.kron(&d)), a.mul(&c).kron(&b.mul(&d)));
    }

    #[test]
    fn product_matches_fold() {
        let a = m(&[&[1, 1], &[0, 1]], 2);
        assert_eq!(product([&a, &a, &a]).unwrap(), a.mul(&a).mul(&a));
        assert!(product(std::iter::empty()).is_none());
        let b = m(&[&[1, 2, 3]], 1);
        assert!(a.checked_mul(&b).is_none());
    }
}
