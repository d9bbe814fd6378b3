use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Field element stored in a [`SparseMatrix`](super::SparseMatrix).
///
/// Implemented for `f64` and `Complex64`; the LU kernel is written once
/// against this trait so both scalar types run through identical code.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    /// Matrix Market field keyword.
    const MM_FIELD: &'static str;
    /// Number of value tokens per Matrix Market entry line.
    const MM_TOKENS: usize;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
    fn is_finite(self) -> bool;

    fn is_zero(self) -> bool {
        self == Self::zero()
    }

    fn format_mm(self) -> String;
    fn parse_mm(tokens: &[&str]) -> Option<Self>;

    /// `C ← C − A·B` on column-major blocks, `A` being `m×k` and `B` `k×n`.
    ///
    /// # Safety
    /// Each pointer must address a block of the stated shape and leading
    /// dimension, and `c` must not overlap `a` or `b`.
    unsafe fn gemm_sub(
        m: usize,
        n: usize,
        k: usize,
        a: *const Self,
        lda: usize,
        b: *const Self,
        ldb: usize,
        c: *mut Self,
        ldc: usize,
    ) {
        for j in 0..n {
            for p in 0..k {
                let bpj = *b.add(j * ldb + p);
                if bpj.is_zero() {
                    continue;
                }
                for i in 0..m {
                    *c.add(j * ldc + i) -= *a.add(p * lda + i) * bpj;
                }
            }
        }
    }
}

impl Scalar for f64 {
    const MM_FIELD: &'static str = "real";
    const MM_TOKENS: usize = 1;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn format_mm(self) -> String {
        format!("{self:e}")
    }
    fn parse_mm(tokens: &[&str]) -> Option<Self> {
        tokens.first()?.parse().ok()
    }
    unsafe fn gemm_sub(
        m: usize,
        n: usize,
        k: usize,
        a: *const Self,
        lda: usize,
        b: *const Self,
        ldb: usize,
        c: *mut Self,
        ldc: usize,
    ) {
        matrixmultiply::dgemm(
            m, k, n, -1.0, a, 1, lda as isize, b, 1, ldb as isize, 1.0, c, 1, ldc as isize,
        );
    }
}

impl Scalar for Complex64 {
    const MM_FIELD: &'static str = "complex";
    const MM_TOKENS: usize = 2;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn format_mm(self) -> String {
        format!("{:e} {:e}", self.re, self.im)
    }
    fn parse_mm(tokens: &[&str]) -> Option<Self> {
        let re = tokens.first()?.parse().ok()?;
        let im = tokens.get(1)?.parse().ok()?;
        Some(Complex64::new(re, im))
    }
}
