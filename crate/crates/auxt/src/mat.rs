//! Small dense row-major matrices for the linear projections and reports.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn standard_normal(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline(always)]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *out.at_mut(c, r) = self.at(r, c);
            }
        }
        out
    }

    /// W^T W, a cols x cols Gram matrix.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                let vi = row[i];
                if vi == 0.0 {
                    continue;
                }
                let grow = g.row_mut(i);
                for (j, &vj) in row.iter().enumerate() {
                    grow[j] += vi * vj;
                }
            }
        }
        g
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// || self - I ||_F^2 for a square matrix.
    pub fn distance_from_identity_sq(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut acc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let d = self.at(r, c) - if r == c { 1.0 } else { 0.0 };
                acc += d * d;
            }
        }
        acc
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let v = self.at(r, k);
                if v == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let drow = out.row_mut(r);
                for (c, &o) in orow.iter().enumerate() {
                    drow[c] += v * o;
                }
            }
        }
        out
    }

    /// Orthonormalize the columns in place by modified Gram-Schmidt, run
    /// twice for exactness near machine precision. Requires cols <= rows.
    pub fn orthonormalize_columns(&mut self) {
        assert!(self.cols <= self.rows, "cannot orthonormalize {} columns in dimension {}", self.cols, self.rows);
        for _ in 0..2 {
            for j in 0..self.cols {
                for i in 0..j {
                    let mut dot = 0.0;
                    for r in 0..self.rows {
                        dot += self.at(r, i) * self.at(r, j);
                    }
                    for r in 0..self.rows {
                        *self.at_mut(r, j) = self.at(r, j) - dot * self.at(r, i);
                    }
                }
                let norm = (0..self.rows).map(|r| self.at(r, j) * self.at(r, j)).sum::<f64>().sqrt();
                assert!(norm > 1e-12, "rank-deficient matrix during orthonormalization");
                for r in 0..self.rows {
                    *self.at_mut(r, j) /= norm;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gram_of_orthonormalized_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, c) in [(8, 8), (64, 32), (5, 2)] {
            let mut m = Matrix::standard_normal(r, c, &mut rng);
            m.orthonormalize_columns();
            assert!(m.gram().distance_from_identity_sq() < 1e-24);
        }
    }

    #[test]
    fn matmul_against_hand_product() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }
}
