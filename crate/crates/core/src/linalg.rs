//! Fixed 4×4 matrices over a [`Scalar`], plus eigenvalue helpers.
//!
//! Eigenvalue routines are diagnostics: they convert to `f64` and go through
//! nalgebra's Schur and symmetric solvers.

use std::ops::{Index, IndexMut, Mul};

use nalgebra::Matrix4;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4<T>(pub [[T; 4]; 4]);

impl<T: Scalar> Mat4<T> {
    pub fn zeros() -> Self {
        Mat4([[T::zero(); 4]; 4])
    }

    pub fn from_diagonal(d: [T; 4]) -> Self {
        let mut m = Self::zeros();
        for (i, di) in d.into_iter().enumerate() {
            m.0[i][i] = di;
        }
        m
    }

    pub fn diagonal(&self) -> [T; 4] {
        [self.0[0][0], self.0[1][1], self.0[2][2], self.0[3][3]]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                t.0[j][i] = self.0[i][j];
            }
        }
        t
    }

    /// `(M + Mᵀ) / 2`
    pub fn symmetric_part(&self) -> Self {
        let half = T::lit(0.5);
        let mut s = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                s.0[i][j] = half * (self.0[i][j] + self.0[j][i]);
            }
        }
        s
    }

    pub fn mul_vec(&self, x: &[T; 4]) -> [T; 4] {
        let mut y = [T::zero(); 4];
        for (yi, row) in y.iter_mut().zip(self.0.iter()) {
            *yi = row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
        y
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .flatten()
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Largest absolute entry of `M − Mᵀ`.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..4 {
            for j in (i + 1)..4 {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn to_nalgebra(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.0[i][j].as_f64())
    }

    /// Eigenvalues `(re, im)` of a general matrix, sorted by real part.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let mut ev: Vec<(f64, f64)> = self
            .to_nalgebra()
            .complex_eigenvalues()
            .iter()
            // a repeated real eigenvalue can come back with a NaN imaginary
            // part (square root of a slightly negative discriminant)
            .map(|z| (z.re, if z.im.is_nan() && z.re.is_finite() { 0.0 } else { z.im }))
            .collect();
        ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        ev
    }

    pub fn spectral_radius(&self) -> T {
        let rho = self
            .eigenvalues()
            .into_iter()
            .map(|(re, im)| re.hypot(im))
            .fold(0.0, f64::max);
        T::lit(rho)
    }

    pub fn max_real_eigenvalue(&self) -> T {
        let m = self
            .eigenvalues()
            .into_iter()
            .map(|(re, _)| re)
            .fold(f64::NEG_INFINITY, f64::max);
        T::lit(m)
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> [T; 4] {
        let s = self.symmetric_part().to_nalgebra();
        let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [T::lit(ev[0]), T::lit(ev[1]), T::lit(ev[2]), T::lit(ev[3])]
    }
}

impl<T: Scalar> Mul for Mat4<T> {
    type Output = Mat4<T>;

    fn mul(self, rhs: Mat4<T>) -> Mat4<T> {
        let mut p = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = T::zero();
                for k in 0..4 {
                    acc += self.0[i][k] * rhs.0[k][j];
                }
                p.0[i][j] = acc;
            }
        }
        p
    }
}

impl<T> Index<(usize, usize)> for Mat4<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat4<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}
