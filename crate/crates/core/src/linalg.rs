//! Small dense linear algebra over real and complex scalars.
//!
//! The model is six-dimensional, so everything here works on stack arrays
//! with LU decomposition and partial pivoting. Condition numbers are
//! estimated exactly (via the explicit inverse), which is cheap at this size.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar field the solver is generic over: `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    /// Magnitude used for pivot selection and norms.
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Integer power by repeated squaring; exact for the small Hill exponents.
pub fn powi<T: Scalar>(x: T, n: u32) -> T {
    let mut result = T::one();
    let mut base = x;
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = result * base;
        }
        base = base * base;
        k >>= 1;
    }
    result
}

struct Lu<T: Scalar, const N: usize> {
    lu: [[T; N]; N],
    perm: [usize; N],
}

#[allow(clippy::needless_range_loop)] // index loops mirror the LU recurrences
fn factor<T: Scalar, const N: usize>(a: &[[T; N]; N]) -> Option<Lu<T, N>> {
    let mut lu = *a;
    let mut perm = [0usize; N];
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    for col in 0..N {
        let mut pivot = col;
        let mut best = lu[col][col].magnitude();
        for row in col + 1..N {
            let m = lu[row][col].magnitude();
            if m > best {
                best = m;
                pivot = row;
            }
        }
        if best == 0.0 {
            return None;
        }
        if pivot != col {
            lu.swap(pivot, col);
            perm.swap(pivot, col);
        }
        let d = lu[col][col];
        for row in col + 1..N {
            let factor = lu[row][col] / d;
            lu[row][col] = factor;
            for k in col + 1..N {
                lu[row][k] = lu[row][k] - factor * lu[col][k];
            }
        }
    }
    Some(Lu { lu, perm })
}

#[allow(clippy::needless_range_loop)] // index loops mirror the LU recurrences
fn solve_factored<T: Scalar, const N: usize>(f: &Lu<T, N>, b: &[T; N]) -> [T; N] {
    let mut y = [T::zero(); N];
    for i in 0..N {
        let mut acc = b[f.perm[i]];
        for (j, yj) in y.iter().enumerate().take(i) {
            acc = acc - f.lu[i][j] * *yj;
        }
        y[i] = acc;
    }
    let mut x = [T::zero(); N];
    for i in (0..N).rev() {
        let mut acc = y[i];
        for j in i + 1..N {
            acc = acc - f.lu[i][j] * x[j];
        }
        x[i] = acc / f.lu[i][i];
    }
    x
}

/// Solve `a x = b`; `None` when a pivot vanishes exactly.
pub fn solve<T: Scalar, const N: usize>(a: &[[T; N]; N], b: &[T; N]) -> Option<[T; N]> {
    let f = factor(a)?;
    Some(solve_factored(&f, b))
}

/// Explicit inverse via one factorization and N solves.
pub fn inverse<T: Scalar, const N: usize>(a: &[[T; N]; N]) -> Option<[[T; N]; N]> {
    let f = factor(a)?;
    let mut inv = [[T::zero(); N]; N];
    for col in 0..N {
        let mut e = [T::zero(); N];
        e[col] = T::one();
        let x = solve_factored(&f, &e);
        for row in 0..N {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

/// 1-norm (maximum absolute column sum).
pub fn norm1<T: Scalar, const N: usize>(a: &[[T; N]; N]) -> f64 {
    let mut best = 0.0f64;
    for col in 0..N {
        let mut sum = 0.0;
        for row in a.iter() {
            sum += row[col].magnitude();
        }
        best = best.max(sum);
    }
    best
}

/// Exact 1-norm condition number; infinite when singular.
pub fn condition_1<T: Scalar, const N: usize>(a: &[[T; N]; N]) -> f64 {
    match inverse(a) {
        Some(inv) => norm1(a) * norm1(&inv),
        None => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_real_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x_true = [1.0, -2.0, 3.0];
        let mut b = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += a[i][j] * x_true[j];
            }
        }
        let x = solve(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn solves_complex_system() {
        let i = Complex64::new(0.0, 1.0);
        let a = [
            [Complex64::new(2.0, 1.0), i],
            [Complex64::new(0.5, 0.0), Complex64::new(3.0, -1.0)],
        ];
        let x_true = [Complex64::new(1.0, -1.0), Complex64::new(-2.0, 0.5)];
        let mut b = [Complex64::new(0.0, 0.0); 2];
        for r in 0..2 {
            for c in 0..2 {
                b[r] += a[r][c] * x_true[c];
            }
        }
        let x = solve(&a, &b).unwrap();
        for r in 0..2 {
            assert!((x[r] - x_true[r]).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let a = [[1.0, 2.0], [2.0, 4.0]];
        assert!(solve(&a, &[1.0, 1.0]).is_none());
        assert!(condition_1(&a).is_infinite());
    }

    #[test]
    fn condition_identity_is_one() {
        let mut a = [[0.0; 4]; 4];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        assert!((condition_1(&a) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn powi_matches_std() {
        // Repeated squaring may round differently from std's powi; agreement
        // to a few ulps is the contract.
        for n in 0..8u32 {
            let (a, b) = (powi(1.7f64, n), 1.7f64.powi(n as i32));
            assert!(((a - b) / b).abs() <= 1e-14, "n = {n}: {a} vs {b}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn inverse_roundtrip() {
        let a = [[3.0, 1.0, 2.0], [0.5, 4.0, -1.0], [1.0, 0.0, 5.0]];
        let inv = inverse(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += a[i][k] * inv[k][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12);
            }
        }
    }
}
