//! Dense univariate polynomials over a field, plus a small bivariate type
//! with integer coefficients for the closed-form period-2 coefficients.
//!
//! With `BigRational` coefficients every operation is exact; with `f64` the
//! same code runs in floating point.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Coefficient field.
pub trait Field:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Magnitude used for norms and tolerance checks.
    fn magnitude(&self) -> f64;
}

impl Field for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Field for BigRational {
    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

/// Polynomial with ascending coefficients; trailing zeros are trimmed, so
/// the zero polynomial has no coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    coeffs: Vec<T>,
}

impl<T: Field> Polynomial<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Polynomial::new(vec![c])
    }

    /// The polynomial `u`.
    pub fn identity() -> Self {
        Polynomial::new(vec![T::zero(), T::one()])
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&T> {
        self.coeffs.last()
    }

    pub fn coeff(&self, i: usize) -> T {
        self.coeffs.get(i).cloned().unwrap_or_else(T::zero)
    }

    pub fn eval(&self, x: &T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn scale(&self, k: &T) -> Self {
        Polynomial::new(self.coeffs.iter().map(|c| c.clone() * k.clone()).collect())
    }

    /// `u * self`.
    pub fn shift(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(T::zero());
        coeffs.extend(self.coeffs.iter().cloned());
        Polynomial { coeffs }
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Polynomial::constant(T::one()), |acc, _| &acc * self)
    }

    /// Largest coefficient magnitude.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(Field::magnitude).fold(0.0, f64::max)
    }

    /// Homogeneous composition `Σ c_i num^i den^(d-i)` with `d` the degree of
    /// `self`: the numerator of `self(num/den)` after clearing `den^d`.
    pub fn compose_pair(&self, num: &Self, den: &Self) -> Self {
        let Some(d) = self.degree() else {
            return Self::zero();
        };
        let num_pows: Vec<Self> = (0..=d).map(|i| num.pow(i as u32)).collect();
        let den_pows: Vec<Self> = (0..=d).map(|i| den.pow(i as u32)).collect();
        self.coeffs.iter().enumerate().fold(Self::zero(), |acc, (i, c)| {
            &acc + &(&num_pows[i] * &den_pows[d - i]).scale(c)
        })
    }

    /// Euclidean division `self = q * divisor + r` with `deg r < deg divisor`.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self)> {
        let Some(dd) = divisor.degree() else {
            return Err(Error::DivisionByZero);
        };
        let lead = divisor.leading().expect("nonzero divisor").clone();
        let mut rem = self.coeffs.clone();
        let Some(nd) = self.degree() else {
            return Ok((Self::zero(), Self::zero()));
        };
        if nd < dd {
            return Ok((Self::zero(), self.clone()));
        }
        let mut quot = vec![T::zero(); nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let factor = rem[k + dd].clone() / lead.clone();
            for (j, c) in divisor.coeffs.iter().enumerate() {
                rem[k + j] = rem[k + j].clone() - factor.clone() * c.clone();
            }
            // The cancelled coefficient is exactly zero in exact arithmetic;
            // force it in floating point as well.
            rem[k + dd] = T::zero();
            quot[k] = factor;
        }
        rem.truncate(dd);
        Ok((Polynomial::new(quot), Polynomial::new(rem)))
    }
}

impl<T: Field> Add for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn add(self, rhs: Self) -> Polynomial<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl<T: Field> Sub for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn sub(self, rhs: Self) -> Polynomial<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl<T: Field> Mul for &Polynomial<T> {
    type Output = Polynomial<T>;

    fn mul(self, rhs: Self) -> Polynomial<T> {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Polynomial::new(out)
    }
}

/// Error-free transformation `a + b = s + e`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free transformation `a * b = p + e`.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated Horner evaluation of `Σ (hi_i + lo_i) x^i`; returns the
/// result as an unevaluated sum `(hi, lo)`.
fn comp_horner(coeffs: &[(f64, f64)], x: f64) -> (f64, f64) {
    let Some(&(mut s, mut c)) = coeffs.last() else {
        return (0.0, 0.0);
    };
    for &(hi, lo) in coeffs.iter().rev().skip(1) {
        let (p, pe) = two_prod(s, x);
        let (ns, se) = two_sum(p, hi);
        s = ns;
        c = c * x + (pe + se + lo);
    }
    two_sum(s, c)
}

/// Polynomial in `(θ, θ₁)` with integer coefficients; `coeffs[i][j]` is the
/// coefficient of `θ^i θ₁^j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BivariatePoly {
    coeffs: Vec<Vec<i64>>,
}

/// Evaluation in floating point with the scale `Σ |c_ij| θ^i θ₁^j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatedValue {
    pub value: f64,
    pub term_scale: f64,
}

impl BivariatePoly {
    /// Builds from `(coefficient, θ-degree, θ₁-degree)` terms; repeated
    /// monomials accumulate.
    pub fn from_terms(terms: &[(i64, usize, usize)]) -> Self {
        let di = terms.iter().map(|t| t.1).max().unwrap_or(0);
        let dj = terms.iter().map(|t| t.2).max().unwrap_or(0);
        let mut coeffs = vec![vec![0i64; dj + 1]; di + 1];
        for &(c, i, j) in terms {
            coeffs[i][j] += c;
        }
        BivariatePoly { coeffs }
    }

    pub fn coeff(&self, i: usize, j: usize) -> i64 {
        self.coeffs.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0)
    }

    pub fn degree_theta(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn degree_theta1(&self) -> usize {
        self.coeffs.iter().map(Vec::len).max().unwrap_or(1) - 1
    }

    /// Nonzero terms as `(coefficient, θ-degree, θ₁-degree)`.
    pub fn terms(&self) -> Vec<(i64, usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c != 0 {
                    out.push((c, i, j));
                }
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::new();
        for (a, i, j) in self.terms() {
            for (b, k, l) in other.terms() {
                terms.push((a.checked_mul(b).expect("coefficient overflow"), i + k, j + l));
            }
        }
        BivariatePoly::from_terms(&terms)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut terms = self.terms();
        terms.extend(other.terms().into_iter().map(|(c, i, j)| (-c, i, j)));
        BivariatePoly::from_terms(&terms)
    }

    pub fn scale(&self, k: i64) -> Self {
        let terms: Vec<_> = self.terms().into_iter().map(|(c, i, j)| (c * k, i, j)).collect();
        BivariatePoly::from_terms(&terms)
    }

    /// Plain Horner in `θ` over Horner in `θ₁`.
    pub fn eval(&self, theta: f64, theta1: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, row| {
            let inner = row.iter().rev().fold(0.0, |a, &c| a * theta1 + c as f64);
            acc * theta + inner
        })
    }

    /// Compensated Horner in both variables, with the absolute term scale.
    pub fn eval_compensated(&self, theta: f64, theta1: f64) -> CompensatedValue {
        let inner: Vec<(f64, f64)> = self
            .coeffs
            .iter()
            .map(|row| {
                let r: Vec<(f64, f64)> = row.iter().map(|&c| (c as f64, 0.0)).collect();
                comp_horner(&r, theta1)
            })
            .collect();
        let (hi, lo) = comp_horner(&inner, theta);
        let term_scale = self.coeffs.iter().rev().fold(0.0, |acc, row| {
            let inner = row.iter().rev().fold(0.0, |a, &c| a * theta1.abs() + (c as f64).abs());
            acc * theta.abs() + inner
        });
        CompensatedValue {
            value: hi + lo,
            term_scale,
        }
    }

    pub fn eval_exact(&self, theta: &BigRational, theta1: &BigRational) -> BigRational {
        self.coeffs.iter().rev().fold(BigRational::zero(), |acc, row| {
            let inner = row.iter().rev().fold(BigRational::zero(), |a, &c| {
                a * theta1 + BigRational::from_integer(BigInt::from(c))
            });
            acc * theta + inner
        })
    }
}

/// Parses a decimal literal such as `0.2`, `-3`, `1.5e-3` into the exact
/// rational it denotes.
pub fn parse_decimal(text: &str) -> Result<BigRational> {
    let err = || Error::Parse(text.to_string());
    let t = text.trim();
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let n: BigInt = all_digits.parse().map_err(|_| err())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(n, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        r = -r;
    }
    Ok(r)
}
