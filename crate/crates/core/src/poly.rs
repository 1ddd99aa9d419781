//! Dense univariate polynomials over a field: Sturm root counting and
//! Sylvester resultants.
//!
//! Coefficients are generic so the same code runs in floating point and in
//! exact rational arithmetic.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Num, Signed};

/// Coefficient field. `negligible` decides when a remainder coefficient is
/// treated as an exact zero; exact fields keep the default.
pub trait Coefficient: Clone + PartialOrd + Num + Signed + Debug {
    fn negligible(&self, _scale: &Self) -> bool {
        self.is_zero()
    }
}

impl Coefficient for f64 {
    fn negligible(&self, scale: &Self) -> bool {
        self.abs() <= 1e-13 * scale.abs()
    }
}

impl Coefficient for f32 {
    fn negligible(&self, scale: &Self) -> bool {
        self.abs() <= 1e-6 * scale.abs()
    }
}

/// Exact arithmetic: zero means zero.
impl Coefficient for Ratio<BigInt> {}

/// Coefficients in ascending order of degree; never has a zero leading term
/// (the zero polynomial has no coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Coefficient> Poly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&T> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn derivative(&self) -> Self {
        let mut out = Vec::with_capacity(self.coeffs.len().saturating_sub(1));
        let mut k = T::one();
        for c in self.coeffs.iter().skip(1) {
            out.push(c.clone() * k.clone());
            k = k + T::one();
        }
        Self::new(out)
    }

    fn max_abs(&self) -> T {
        self.coeffs
            .iter()
            .map(|c| c.abs())
            .fold(T::zero(), |m, c| if c > m { c } else { m })
    }

    /// Remainder of `self / divisor`, trimming negligible leading terms.
    pub fn rem(&self, divisor: &Self) -> Self {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead = divisor.leading().expect("non-zero divisor").clone();
        let scale = self.max_abs();
        let mut r = self.coeffs.clone();
        while r.len() > dd {
            let top = r.len() - 1;
            let f = r[top].clone() / lead.clone();
            for (i, dc) in divisor.coeffs.iter().enumerate() {
                let idx = top - dd + i;
                r[idx] = r[idx].clone() - f.clone() * dc.clone();
            }
            r.pop();
            while r.last().is_some_and(|c| c.negligible(&scale)) {
                r.pop();
            }
        }
        while r.last().is_some_and(|c| c.negligible(&scale)) {
            r.pop();
        }
        Self::new(r)
    }

    /// `p, p', -rem(p, p'), ...` until the remainder vanishes.
    pub fn sturm_sequence(&self) -> Vec<Self> {
        let mut seq = vec![self.clone()];
        if self.is_zero() {
            return seq;
        }
        let mut next = self.derivative();
        while !next.is_zero() {
            let r = seq.last().expect("non-empty").rem(&next);
            seq.push(next);
            next = Self::new(r.coeffs.into_iter().map(|c| -c).collect());
        }
        seq
    }

    /// Number of distinct real roots in `(a, b]`.
    pub fn count_roots(&self, a: &T, b: &T) -> usize {
        let seq = self.sturm_sequence();
        let va = sign_changes(seq.iter().map(|p| p.eval(a)));
        let vb = sign_changes(seq.iter().map(|p| p.eval(b)));
        va.saturating_sub(vb)
    }
}

fn sign_changes<T: Coefficient>(values: impl Iterator<Item = T>) -> usize {
    let mut last: Option<bool> = None;
    let mut changes = 0;
    for v in values {
        if v.is_zero() {
            continue;
        }
        let pos = v.is_positive();
        if last.is_some_and(|l| l != pos) {
            changes += 1;
        }
        last = Some(pos);
    }
    changes
}

/// Sylvester matrix of `p` (degree m) and `q` (degree n), size `(m+n)²`.
pub fn sylvester_matrix<T: Coefficient>(p: &Poly<T>, q: &Poly<T>) -> Vec<Vec<T>> {
    let m = p.degree().expect("non-zero p");
    let n = q.degree().expect("non-zero q");
    let size = m + n;
    let mut rows = vec![vec![T::zero(); size]; size];
    // rows hold coefficients in descending order, shifted right
    for (r, row) in rows.iter_mut().enumerate().take(n) {
        for (i, c) in p.coeffs.iter().rev().enumerate() {
            row[r + i] = c.clone();
        }
    }
    for (r, row) in rows.iter_mut().skip(n).enumerate() {
        for (i, c) in q.coeffs.iter().rev().enumerate() {
            row[r + i] = c.clone();
        }
    }
    rows
}

/// Determinant by Gaussian elimination with largest-magnitude pivoting.
pub fn determinant<T: Coefficient>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut det = T::one();
    for col in 0..n {
        let pivot = (col..n).fold(col, |best, r| {
            if a[r][col].abs() > a[best][col].abs() {
                r
            } else {
                best
            }
        });
        if a[pivot][col].is_zero() {
            return T::zero();
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det = det * p.clone();
        for r in (col + 1)..n {
            let f = a[r][col].clone() / p.clone();
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let sub = f.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - sub;
            }
        }
    }
    det
}

/// `Res(p, q) = det Syl(p, q)`.
pub fn resultant<T: Coefficient>(p: &Poly<T>, q: &Poly<T>) -> T {
    determinant(sylvester_matrix(p, q))
}
