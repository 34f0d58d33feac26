//! Small dense linear-algebra kernel over [`Scalar`].
//!
//! Vectors are plain slices; [`Matrix`] is row-major.

use crate::error::{check_dim, CoreError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_dim("matrix data length", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("matrix row length", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `A u`
    pub fn matvec(&self, u: &[T]) -> Vec<T> {
        debug_assert_eq!(u.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), u)).collect()
    }

    /// `Aᵀ v`
    pub fn t_matvec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != T::zero() {
                axpy(&mut out, vi, self.row(i));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim("matmul inner dimension", self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != T::zero() {
                    axpy(out.row_mut(i), a, other.row(k));
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_sq(&self) -> T {
        norm_sq(&self.data)
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: sub(&self.data, &other.data),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

/// `y += a x`
#[inline]
pub fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scale<T: Scalar>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

/// Arithmetic mean of equally sized vectors. Summation is left to right.
pub fn mean_of<T: Scalar>(vs: &[Vec<T>], dim: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); dim];
    for v in vs {
        for (a, &x) in acc.iter_mut().zip(v) {
            *a = *a + x;
        }
    }
    if !vs.is_empty() {
        let k = T::from_count(vs.len());
        for a in &mut acc {
            *a = *a / k;
        }
    }
    acc
}

pub fn all_finite<T: Scalar>(a: &[T]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> T {
    if a.rows() == 0 || a.cols() == 0 {
        return T::zero();
    }
    let n = a.cols();
    // Slightly uneven start vector so it is not orthogonal to the top singular vector by symmetry.
    let mut u: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.01) * T::from_count(i % 7))
        .collect();
    let mut sigma = T::zero();
    for _ in 0..500 {
        let nu = norm(&u);
        if nu == T::zero() {
            return T::zero();
        }
        for x in &mut u {
            *x = *x / nu;
        }
        let au = a.matvec(&u);
        let next_sigma = norm(&au);
        u = a.t_matvec(&au);
        if (next_sigma - sigma).abs() <= T::lit(1e-14) * next_sigma.max(T::one()) {
            sigma = next_sigma;
            break;
        }
        sigma = next_sigma;
    }
    sigma
}

/// Solves `M w = r` by Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(m: &Matrix<T>, r: &[T]) -> Result<Vec<T>> {
    let n = m.rows();
    check_dim("solve square", n, m.cols())?;
    check_dim("solve rhs", n, r.len())?;
    let mut a = m.clone();
    let mut b = r.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[(i, col)]
                    .abs()
                    .partial_cmp(&a[(j, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if a[(pivot, col)].abs() <= T::epsilon() {
            return Err(CoreError::InvalidData("singular system".into()));
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = tmp;
            }
            b.swap(col, pivot);
        }
        for i in col + 1..n {
            let f = a[(i, col)] / a[(col, col)];
            if f != T::zero() {
                for j in col..n {
                    let v = a[(col, j)];
                    a[(i, j)] = a[(i, j)] - f * v;
                }
                let bc = b[col];
                b[i] = b[i] - f * bc;
            }
        }
    }
    let mut w = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(b[i], |acc, j| acc - a[(i, j)] * w[j]);
        w[i] = s / a[(i, i)];
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -5.0], vec![0.0, 0.0]]).unwrap();
        assert!((spectral_norm(&a) - 5.0f64).abs() < 1e-10);
    }

    #[test]
    fn solve_small_system() {
        let m = Matrix::from_rows(&[vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let w = solve(&m, &[4.0f64, 3.0]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn transpose_matvec_agrees_with_explicit_transpose() {
        let a = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let v = [1.0, -2.0, 0.5];
        assert_eq!(a.t_matvec(&v), a.transpose().matvec(&v));
    }
}
