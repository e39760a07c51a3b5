//! Dense complex matrices, LU with partial pivoting, and a 1-norm condition
//! estimate (Hager/Higham).

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows * cols");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex<T>] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn scale(&mut self, a: T) {
        for v in &mut self.data {
            *v = *v * a;
        }
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).fold(Complex::zero(), |acc, (a, b)| acc + *a * *b))
            .collect()
    }

    /// `self * other`, parallel over rows.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let cols = other.cols;
        let mut out = Self::zeros(self.rows, cols);
        out.data.par_chunks_mut(cols.max(1)).enumerate().for_each(|(i, orow)| {
            for (q, a) in self.row(i).iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (o, b) in orow.iter_mut().zip(other.row(q)) {
                    *o += *a * *b;
                }
            }
        });
        out
    }

    /// `selfᴴ * other`.
    pub fn adjoint_mul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let (m, n) = (self.cols, other.cols);
        let mut out = Self::zeros(m, n);
        for p in 0..self.rows {
            let (a, b) = (self.row(p), other.row(p));
            for (i, ai) in a.iter().enumerate() {
                if ai.is_zero() {
                    continue;
                }
                let ai = ai.conj();
                for (o, bj) in out.row_mut(i).iter_mut().zip(b) {
                    *o += ai * *bj;
                }
            }
        }
        out
    }

    /// Submatrix on the given row and column index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (oi, &i) in rows.iter().enumerate() {
            let src = self.row(i);
            for (o, &j) in out.row_mut(oi).iter_mut().zip(cols) {
                *o = src[j];
            }
        }
        out
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        let mut sums = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v.norm();
            }
        }
        sums.into_iter().fold(T::zero(), T::max)
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::factor(self.clone())
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

pub fn vec_norm2<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// `PA = LU` with unit lower `L`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: CMatrix<T>,
    perm: Vec<usize>,
    norm1: T,
}

impl<T: Real> Lu<T> {
    pub fn factor(mut a: CMatrix<T>) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let norm1 = a.norm1();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut p, mut best) = (k, T::zero());
            for i in k..n {
                let v = a[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                }
            }
            let inv = Complex::new(T::one(), T::zero()) / a[(k, k)];
            let (head, tail) = a.data.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            tail.par_chunks_mut(n).for_each(|row| {
                let f = row[k] * inv;
                row[k] = f;
                if f.is_zero() {
                    return;
                }
                for (r, u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                    *r -= f * *u;
                }
            });
        }
        Ok(Self { lu: a, perm, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in 0..i {
                acc -= row[j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
        x
    }

    /// Solves `Aᴴ x = b`.
    pub fn solve_adjoint(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.dim();
        let mut w = b.to_vec();
        // Uᴴ w = b (lower triangular)
        for i in 0..n {
            let mut acc = w[i];
            for j in 0..i {
                acc -= self.lu[(j, i)].conj() * w[j];
            }
            w[i] = acc / self.lu[(i, i)].conj();
        }
        // Lᴴ v = w (unit upper triangular)
        for i in (0..n).rev() {
            let mut acc = w[i];
            for j in i + 1..n {
                acc -= self.lu[(j, i)].conj() * w[j];
            }
            w[i] = acc;
        }
        let mut x = vec![Complex::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Estimate of `‖A‖₁ ‖A⁻¹‖₁`.
    pub fn condition_estimate(&self) -> T {
        let n = self.dim();
        if n == 0 {
            return T::one();
        }
        let nf = T::from_usize_lossy(n);
        let mut x = vec![Complex::new(T::one() / nf, T::zero()); n];
        let mut est = T::zero();
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().fold(T::zero(), |a, v| a + v.norm());
            let xi: Vec<Complex<T>> = y
                .iter()
                .map(|v| {
                    let m = v.norm();
                    if m > T::zero() {
                        *v / m
                    } else {
                        Complex::new(T::one(), T::zero())
                    }
                })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z.iter().enumerate().fold((0, T::zero()), |(bj, bm), (j, v)| {
                if v.norm() > bm {
                    (j, v.norm())
                } else {
                    (bj, bm)
                }
            });
            let ztx = z.iter().zip(&x).fold(Complex::zero(), |a: Complex<T>, (zi, xi)| a + zi.conj() * *xi).re;
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![Complex::zero(); n];
            x[j] = Complex::new(T::one(), T::zero());
        }
        // Higham's alternative lower bound guards against unlucky starts.
        let alt: Vec<Complex<T>> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { T::one() } else { -T::one() };
                let v = T::one() + T::from_usize_lossy(i) / T::from_usize_lossy(n.max(2) - 1);
                Complex::new(sign * v, T::zero())
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = T::lit(2.0) * y.iter().fold(T::zero(), |a, v| a + v.norm()) / (T::lit(3.0) * nf);
        self.norm1 * est.max(alt_est)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn sample() -> CMatrix<f64> {
        CMatrix::from_rows(
            3,
            3,
            vec![c(0.0, 1.0), c(2.0, 0.0), c(1.0, -1.0), c(4.0, 0.5), c(-1.0, 0.0), c(0.0, 2.0), c(1.0, 1.0), c(0.5, 0.0), c(3.0, 0.0)],
        )
    }

    #[test]
    fn solves_and_adjoint_solves() {
        let a = sample();
        let lu = a.lu().unwrap();
        let x = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.25, -1.0)];
        let b = a.mul_vec(&x);
        let y = lu.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-13);
        }
        // adjoint
        let mut ah = CMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                ah[(i, j)] = a[(j, i)].conj();
            }
        }
        let b = ah.mul_vec(&x);
        let y = lu.solve_adjoint(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-13);
        }
    }

    #[test]
    fn singular_detected() {
        let a = CMatrix::from_rows(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(a.lu(), Err(Error::Singular { .. })));
    }

    #[test]
    fn condition_of_diagonal() {
        let mut a = CMatrix::<f64>::identity(4);
        a[(2, 2)] = c(1e-6, 0.0);
        let est = a.lu().unwrap().condition_estimate();
        assert!((est / 1e6 - 1.0).abs() < 1e-9, "{est}");
    }

    #[test]
    fn adjoint_mul_matches_explicit() {
        let a = sample();
        let g = a.adjoint_mul(&a);
        let mut expect = c(0.0, 0.0);
        for p in 0..3 {
            expect += a[(p, 0)].conj() * a[(p, 2)];
        }
        assert!((g[(0, 2)] - expect).norm() < 1e-14);
    }
}
