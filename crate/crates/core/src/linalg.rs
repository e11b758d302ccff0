//! Small dense matrices: products, LU solves and the matrix exponential.
//!
//! State-space models here have a handful of states, so a plain row-major
//! `Vec` beats pulling in a general linear-algebra crate.

use std::ops::{Index, IndexMut};

use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).fold(T::zero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    pub fn add(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| *a * s).collect(),
        }
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |acc, i| acc + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }

    /// Solves `self * X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Mat<T>) -> Option<Mat<T>> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let piv = (col..n).max_by(|&p, &q| {
                a[(p, col)]
                    .abs()
                    .partial_cmp(&a[(q, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a[(piv, col)] == T::zero() || !a[(piv, col)].is_finite() {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    let t = a[(col, j)];
                    a[(col, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                for j in 0..b.cols {
                    let t = b[(col, j)];
                    b[(col, j)] = b[(piv, j)];
                    b[(piv, j)] = t;
                }
            }
            let d = a[(col, col)];
            for r in col + 1..n {
                let f = a[(r, col)] / d;
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    a[(r, j)] = a[(r, j)] - f * a[(col, j)];
                }
                for j in 0..b.cols {
                    b[(r, j)] = b[(r, j)] - f * b[(col, j)];
                }
            }
        }
        for j in 0..b.cols {
            for r in (0..n).rev() {
                let mut v = b[(r, j)];
                for k in r + 1..n {
                    v = v - a[(r, k)] * b[(k, j)];
                }
                b[(r, j)] = v / a[(r, r)];
            }
        }
        Some(b)
    }

    /// Matrix exponential by scaling and squaring with a degree-8 Padé
    /// approximant.
    pub fn expm(&self) -> Mat<T> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let norm = self.norm1();
        let mut s = 0i32;
        if norm > T::of(0.5) {
            s = (norm / T::of(0.5)).log2().ceil().to_i32().unwrap_or(0).max(0);
        }
        let a = self.scale(T::of(0.5f64.powi(s)));
        const Q: usize = 8;
        let mut c = T::one();
        let mut num = Mat::identity(n);
        let mut den = Mat::identity(n);
        let mut power = Mat::identity(n);
        for k in 1..=Q {
            c = c * T::of(((Q - k + 1) as f64) / ((k * (2 * Q - k + 1)) as f64));
            power = power.mul(&a);
            let term = power.scale(c);
            num = num.add(&term);
            den = if k % 2 == 0 {
                den.add(&term)
            } else {
                den.add(&term.scale(-T::one()))
            };
        }
        let mut e = den
            .solve(&num)
            .expect("Pade denominator is nonsingular for ||A|| <= 1/2");
        for _ in 0..s {
            e = e.mul(&e);
        }
        e
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}
