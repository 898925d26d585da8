//! Sparse storage and direct solvers used by the assembly, time stepping and
//! resolvent code.

mod banded;
mod csr;
mod eigen;

pub use banded::{BandLayout, BandedCholesky, BandedLu};
pub use csr::{Csr, Triplets};
pub use eigen::{smallest_generalized_eigenpairs, EigenPairs};

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Field of matrix and vector entries: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Mul<f64, Output = Self>
    + From<f64>
    + 'static
{
    fn zero() -> Self {
        Self::from(0.0)
    }
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
    fn re(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
}

/// Euclidean norm.
pub fn norm<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.modulus().powi(2)).sum::<f64>().sqrt()
}

/// `Σ conj(x_i) y_i`.
pub fn dotc<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (a, b)| acc + a.conj() * *b)
}

pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

pub fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}
