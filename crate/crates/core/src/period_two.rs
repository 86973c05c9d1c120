//! Period-2 points of `f` on the line `v = 1`.
//!
//! With `f = P/Q`, `f(f(u)) = N₂/D₂` where `N₂ = p₂P² + p₁PQ + p₀Q²` and
//! `D₂ = q₂P² + q₁PQ + q₀Q²`. Every fixed point of `f` is one of `f∘f`, so
//! `P − uQ` divides `N₂ − uD₂`, and the degree-2 quotient `Au² + Bu + C`
//! carries the genuine period-2 points. The closed forms of `A`, `B`, `C`
//! are kept as integer polynomials in `(θ, θ₁)` and checked against the
//! division.

use std::sync::OnceLock;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::RatioMap;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lattice::ThetaParams;
use crate::newton::{multi_start, SearchResult};
use crate::phase::quadratic_real_roots;
use crate::poly::{BivariatePoly, Field, Polynomial};

/// Relative remainder norm accepted by the floating-point division.
pub const FLOAT_REMAINDER_TOL: f64 = 1e-9;
/// Cells with `|B|` or `|D|` below this fraction of their term scale are
/// re-evaluated exactly.
pub const INDETERMINATE_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticSource {
    PrintedFormula,
    ExactDivision,
    FloatDivision,
}

/// `A u² + B u + C` with discriminant `D = B² − 4AC`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticABC {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub source: QuadraticSource,
}

impl QuadraticABC {
    /// Requires `a > 0` and `c > 0`, which hold for every positive
    /// `(θ, θ₁)`.
    pub fn new(a: f64, b: f64, c: f64, source: QuadraticSource) -> Result<Self> {
        if a.is_nan() || a <= 0.0 {
            return Err(Error::CoefficientSign("A must be positive"));
        }
        if c.is_nan() || c <= 0.0 {
            return Err(Error::CoefficientSign("C must be positive"));
        }
        Ok(QuadraticABC {
            a,
            b,
            c,
            d: b * b - 4.0 * a * c,
            source,
        })
    }
}

fn coefficient_polys() -> &'static [BivariatePoly; 4] {
    static POLYS: OnceLock<[BivariatePoly; 4]> = OnceLock::new();
    POLYS.get_or_init(|| {
        let a = BivariatePoly::from_terms(&[(1, 6, 0), (2, 4, 2), (2, 3, 1), (1, 2, 0), (2, 1, 1), (1, 0, 0)]);
        let b = BivariatePoly::from_terms(&[
            (2, 7, 1),
            (4, 5, 3),
            (2, 5, 1),
            (6, 4, 2),
            (4, 3, 3),
            (-1, 4, 0),
            (2, 3, 1),
            (10, 2, 2),
            (6, 1, 1),
            (1, 0, 0),
        ]);
        // The θ⁶ term is read as 4θ⁶θ₁².
        let c = BivariatePoly::from_terms(&[
            (1, 8, 0),
            (4, 6, 2),
            (4, 4, 4),
            (4, 5, 1),
            (8, 3, 3),
            (2, 4, 0),
            (6, 2, 2),
            (2, 2, 0),
            (4, 1, 1),
            (1, 0, 0),
        ]);
        let d = b.mul(&b).sub(&a.mul(&c).scale(4));
        [a, b, c, d]
    })
}

/// Closed form of `A(θ, θ₁)`.
pub fn printed_a_poly() -> &'static BivariatePoly {
    &coefficient_polys()[0]
}

/// Closed form of `B(θ, θ₁)`.
pub fn printed_b_poly() -> &'static BivariatePoly {
    &coefficient_polys()[1]
}

/// Closed form of `C(θ, θ₁)`.
pub fn printed_c_poly() -> &'static BivariatePoly {
    &coefficient_polys()[2]
}

/// `D = B² − 4AC` expanded in integer arithmetic.
pub fn discriminant_poly() -> &'static BivariatePoly {
    &coefficient_polys()[3]
}

/// Evaluates the closed-form `A`, `B`, `C`.
pub fn printed_abc(params: &ThetaParams) -> Result<QuadraticABC> {
    let (t, t1) = (params.theta(), params.theta1());
    let a = printed_a_poly().eval_compensated(t, t1).value;
    let b = printed_b_poly().eval_compensated(t, t1).value;
    let c = printed_c_poly().eval_compensated(t, t1).value;
    let mut q = QuadraticABC::new(a, b, c, QuadraticSource::PrintedFormula)?;
    q.d = discriminant_poly().eval_compensated(t, t1).value;
    Ok(q)
}

/// `(P, Q)` with `f = P/Q`, ascending coefficients.
pub fn f_as_rational<T: Field>(theta: &T, theta1: &T) -> (Polynomial<T>, Polynomial<T>) {
    let one = T::one();
    let two = one.clone() + one.clone();
    let four = two.clone() + two.clone();
    let t2 = theta.clone() * theta.clone();
    let s2 = theta1.clone() * theta1.clone();
    let p = Polynomial::new(vec![
        two.clone() * t2.clone() * (s2.clone() + one.clone()),
        four * theta.clone() * theta1.clone(),
        one.clone(),
    ]);
    let q = Polynomial::new(vec![
        t2.clone() * t2.clone() + two.clone() * t2.clone() * s2 + one.clone(),
        two * theta.clone() * theta1.clone() * (t2.clone() + one),
        t2,
    ]);
    (p, q)
}

/// `(P, Q)` in floating point.
pub fn f_as_rational_f64(params: &ThetaParams) -> (Polynomial<f64>, Polynomial<f64>) {
    f_as_rational(&params.theta(), &params.theta1())
}

/// The pieces of `(N₂ − uD₂) = (P − uQ)·quotient + remainder`.
#[derive(Debug, Clone, PartialEq)]
pub struct Period2Division<T> {
    pub dividend: Polynomial<T>,
    pub divisor: Polynomial<T>,
    pub quotient: Polynomial<T>,
    pub remainder: Polynomial<T>,
}

impl<T: Field> Period2Division<T> {
    pub fn relative_remainder(&self) -> f64 {
        let n = self.dividend.norm();
        if n == 0.0 {
            0.0
        } else {
            self.remainder.norm() / n
        }
    }
}

/// Forms `N₂ − uD₂` and divides it by `P − uQ`.
pub fn period2_division<T: Field>(theta: &T, theta1: &T) -> Result<Period2Division<T>> {
    let (p, q) = f_as_rational(theta, theta1);
    let u = Polynomial::identity();
    let n2 = p.compose_pair(&p, &q);
    let d2 = q.compose_pair(&p, &q);
    let dividend = &n2 - &(&u * &d2);
    let divisor = &p - &(&u * &q);
    let (quotient, remainder) = dividend.div_rem(&divisor)?;
    Ok(Period2Division {
        dividend,
        divisor,
        quotient,
        remainder,
    })
}

/// `(A, B, C)` from dividing in floating point; fails if the remainder is
/// not negligible.
pub fn extract_period2_quadratic(params: &ThetaParams) -> Result<QuadraticABC> {
    let div = period2_division(&params.theta(), &params.theta1())?;
    let rel = div.relative_remainder();
    if rel.is_nan() || rel > FLOAT_REMAINDER_TOL {
        return Err(Error::NonzeroRemainder { relative_norm: rel });
    }
    if div.quotient.degree() != Some(2) {
        return Err(Error::DegeneratePolynomial);
    }
    QuadraticABC::new(
        div.quotient.coeff(2),
        div.quotient.coeff(1),
        div.quotient.coeff(0),
        QuadraticSource::FloatDivision,
    )
}

/// Exact `(A, B, C, D)` over the rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactQuadratic {
    pub a: BigRational,
    pub b: BigRational,
    pub c: BigRational,
    pub d: BigRational,
}

impl ExactQuadratic {
    pub fn to_f64(&self) -> Result<QuadraticABC> {
        let f = |x: &BigRational| x.to_f64().unwrap_or(f64::NAN);
        let mut q = QuadraticABC::new(f(&self.a), f(&self.b), f(&self.c), QuadraticSource::ExactDivision)?;
        q.d = f(&self.d);
        Ok(q)
    }
}

/// `(A, B, C)` by exact division; any nonzero remainder is an error.
pub fn extract_period2_quadratic_exact(theta: &BigRational, theta1: &BigRational) -> Result<ExactQuadratic> {
    let div = period2_division(theta, theta1)?;
    if !div.remainder.is_zero() {
        return Err(Error::NonzeroRemainder {
            relative_norm: div.relative_remainder(),
        });
    }
    if div.quotient.degree() != Some(2) {
        return Err(Error::DegeneratePolynomial);
    }
    let a = div.quotient.coeff(2);
    let b = div.quotient.coeff(1);
    let c = div.quotient.coeff(0);
    let four = BigRational::from_integer(4.into());
    let d = b.clone() * b.clone() - four * a.clone() * c.clone();
    Ok(ExactQuadratic { a, b, c, d })
}

/// Closed forms evaluated exactly.
pub fn printed_abc_exact(theta: &BigRational, theta1: &BigRational) -> ExactQuadratic {
    ExactQuadratic {
        a: printed_a_poly().eval_exact(theta, theta1),
        b: printed_b_poly().eval_exact(theta, theta1),
        c: printed_c_poly().eval_exact(theta, theta1),
        d: discriminant_poly().eval_exact(theta, theta1),
    }
}

/// No sign change in `(A, B, C)` when `A, C > 0` and `B ≥ 0`, so by
/// Descartes' rule there is no positive root.
pub fn descartes_no_positive_roots(q: &QuadraticABC) -> bool {
    q.b >= 0.0
}

/// Positive real roots in ascending order; roots within `tol` (relative)
/// of each other are merged.
pub fn period2_positive_roots(q: &QuadraticABC, tol: f64) -> Vec<f64> {
    if q.d < 0.0 {
        return Vec::new();
    }
    let mut roots: Vec<f64> = quadratic_real_roots(q.a, q.b, q.c)
        .into_iter()
        .filter(|&r| r > 0.0)
        .collect();
    if roots.len() == 2 && (roots[1] - roots[0]).abs() <= tol * roots[1].abs() {
        roots.truncate(1);
    }
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "+")]
    Positive,
}

impl Sign {
    pub fn of(x: f64) -> Self {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn of_exact(x: &BigRational) -> Self {
        if x.is_zero() {
            Sign::Zero
        } else if x.is_positive() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Negative => '-',
            Sign::Zero => '0',
            Sign::Positive => '+',
        }
    }

    pub fn is_nonnegative(self) -> bool {
        self != Sign::Negative
    }
}

/// Which coefficients a scan evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPath {
    Printed,
    Division,
    /// Closed forms evaluated in rational arithmetic at every cell.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub theta: f64,
    pub theta1: f64,
    pub b: f64,
    pub d: f64,
    pub sign_b: Sign,
    pub sign_d: Sign,
    /// `|B|` or `|D|` was within roundoff of zero.
    pub indeterminate: bool,
    /// Signs came from exact rational evaluation.
    pub exact: bool,
    /// The division path failed and the closed form was used instead.
    pub fallback: bool,
}

impl CellResult {
    pub fn is_violation(&self) -> bool {
        self.sign_d.is_nonnegative() && self.sign_b == Sign::Negative
    }
}

/// A cell in `{D ≥ 0, B < 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    pub theta1: f64,
    pub b: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScanCounts {
    pub cells: usize,
    pub b_nonnegative: usize,
    pub b_negative: usize,
    pub d_nonnegative: usize,
    pub resolved_exactly: usize,
    pub unresolved: usize,
    pub division_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScanReport {
    pub grid: GridSpec,
    pub path: ScanPath,
    pub theta_values: Vec<f64>,
    pub theta1_values: Vec<f64>,
    /// Row-major cells, `θ` outer.
    #[serde(skip)]
    pub cells: Vec<CellResult>,
    pub violations: Vec<Violation>,
    pub counts: ScanCounts,
    pub empty: bool,
}

impl RegionScanReport {
    pub fn cell(&self, i: usize, j: usize) -> &CellResult {
        &self.cells[i * self.grid.theta1.points + j]
    }

    /// One string per `θ` row, one sign symbol per `θ₁` column.
    pub fn sign_rows(&self, pick: impl Fn(&CellResult) -> Sign) -> Vec<String> {
        self.cells
            .chunks(self.grid.theta1.points)
            .map(|row| row.iter().map(|c| pick(c).symbol()).collect())
            .collect()
    }
}

fn exact_b_d(theta: f64, theta1: f64) -> Option<(BigRational, BigRational)> {
    let t = BigRational::from_float(theta)?;
    let t1 = BigRational::from_float(theta1)?;
    Some((
        printed_b_poly().eval_exact(&t, &t1),
        discriminant_poly().eval_exact(&t, &t1),
    ))
}

fn exact_signs(theta: f64, theta1: f64) -> Option<(Sign, Sign)> {
    exact_b_d(theta, theta1).map(|(b, d)| (Sign::of_exact(&b), Sign::of_exact(&d)))
}

/// Signs of `B` and `D` at one parameter point, resolving near-zero values
/// exactly.
pub fn classify_cell(theta: f64, theta1: f64, path: ScanPath) -> CellResult {
    if path == ScanPath::Exact {
        if let Some((b, d)) = exact_b_d(theta, theta1) {
            return CellResult {
                theta,
                theta1,
                b: b.to_f64().unwrap_or(f64::NAN),
                d: d.to_f64().unwrap_or(f64::NAN),
                sign_b: Sign::of_exact(&b),
                sign_d: Sign::of_exact(&d),
                indeterminate: false,
                exact: true,
                fallback: false,
            };
        }
    }
    let bc = printed_b_poly().eval_compensated(theta, theta1);
    let dc = discriminant_poly().eval_compensated(theta, theta1);
    let (mut b, mut d) = (bc.value, dc.value);
    let mut b_scale = bc.term_scale;
    let mut d_scale = dc.term_scale;
    let mut fallback = false;

    if path == ScanPath::Division {
        match ThetaParams::new(theta, theta1).and_then(|p| extract_period2_quadratic(&p)) {
            Ok(q) => {
                b = q.b;
                d = q.d;
                b_scale = b_scale.max(q.b.abs());
                d_scale = d_scale.max(q.b * q.b + 4.0 * q.a * q.c);
            }
            Err(_) => fallback = true,
        }
    }

    let near = b.abs() < INDETERMINATE_FRACTION * b_scale || d.abs() < INDETERMINATE_FRACTION * d_scale;
    let (sign_b, sign_d, exact) = if near {
        match exact_signs(theta, theta1) {
            Some((sb, sd)) => (sb, sd, true),
            None => (Sign::of(b), Sign::of(d), false),
        }
    } else {
        (Sign::of(b), Sign::of(d), false)
    };
    CellResult {
        theta,
        theta1,
        b,
        d,
        sign_b,
        sign_d,
        indeterminate: near,
        exact,
        fallback,
    }
}

/// Evaluates `B` and `D` over the grid and collects cells with `D ≥ 0` and
/// `B < 0`. Cells are computed in parallel and assembled in row-major
/// order.
pub fn scan_region_s(grid: &GridSpec, path: ScanPath) -> Result<RegionScanReport> {
    grid.theta.validate()?;
    grid.theta1.validate()?;
    let theta_values = grid.theta.values();
    let theta1_values = grid.theta1.values();
    let n1 = theta1_values.len();
    let cells: Vec<CellResult> = (0..grid.cell_count())
        .into_par_iter()
        .map(|k| classify_cell(theta_values[k / n1], theta1_values[k % n1], path))
        .collect();

    let mut counts = ScanCounts {
        cells: cells.len(),
        ..Default::default()
    };
    let mut violations = Vec::new();
    for (k, c) in cells.iter().enumerate() {
        if c.sign_b.is_nonnegative() {
            counts.b_nonnegative += 1;
        } else {
            counts.b_negative += 1;
        }
        if c.sign_d.is_nonnegative() {
            counts.d_nonnegative += 1;
        }
        if c.exact {
            counts.resolved_exactly += 1;
        }
        if c.fallback {
            counts.division_fallbacks += 1;
        }
        if c.indeterminate && !c.exact {
            counts.unresolved += 1;
        }
        if c.is_violation() {
            violations.push(Violation {
                i: k / n1,
                j: k % n1,
                theta: c.theta,
                theta1: c.theta1,
                b: c.b,
                d: c.d,
            });
        }
    }
    Ok(RegionScanReport {
        grid: *grid,
        path,
        theta_values,
        theta1_values,
        empty: violations.is_empty(),
        cells,
        violations,
        counts,
    })
}

/// Genuine period-2 points of the full map: solutions of `F(F(x)) = x`
/// with `‖F(x) − x‖∞ > 100·tol`.
pub fn period2_search_2d(params: &ThetaParams, grid_density: usize, tol: f64) -> Result<SearchResult> {
    if grid_density < 2 {
        return Err(Error::InvalidParameter {
            name: "grid_density",
            value: grid_density as f64,
            reason: "must be at least 2",
        });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            reason: "must be positive",
        });
    }
    let map = RatioMap::new(params);
    Ok(multi_start(
        |u, v| map.linearize_twice(u, v),
        grid_density,
        tol,
        |[u, v]| {
            let [fu, fv] = map.apply_raw(u, v);
            (fu - u).abs().max((fv - v).abs()) > 100.0 * tol
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn params(t: f64, t1: f64) -> ThetaParams {
        ThetaParams::new(t, t1).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rational_form_at_trivial_point() {
        let (p, qq) = f_as_rational_f64(&params(1.0, 1.0));
        assert_eq!(p.coeffs(), &[4.0, 4.0, 1.0]);
        assert_eq!(qq.coeffs(), &[4.0, 4.0, 1.0]);
    }

    #[test]
    fn rational_form_at_reference_point() {
        let pr = params(0.2, 0.5);
        let (p, qq) = f_as_rational_f64(&pr);
        for (got, want) in p.coeffs().iter().zip([0.1, 0.4, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in qq.coeffs().iter().zip([1.0216, 0.208, 0.04]) {
            assert!((got - want).abs() < 1e-15);
        }
        let f = p.eval(&1.0) / qq.eval(&1.0);
        assert!((f - crate::dynamics::f_on_i(1.0, &pr)).abs() <= 1e-13 * f);
    }

    #[test]
    fn printed_coefficients_at_trivial_point() {
        let pq = printed_abc(&params(1.0, 1.0)).unwrap();
        assert_eq!((pq.a, pq.b, pq.c, pq.d), (9.0, 36.0, 36.0, 0.0));
    }

    #[test]
    fn exact_division_at_trivial_point() {
        let e = extract_period2_quadratic_exact(&q(1, 1), &q(1, 1)).unwrap();
        assert_eq!(
            (e.a.clone(), e.b.clone(), e.c.clone(), e.d.clone()),
            (q(9, 1), q(36, 1), q(36, 1), q(0, 1))
        );
        let fq = e.to_f64().unwrap();
        assert!(period2_positive_roots(&fq, 1e-12).is_empty());
    }

    #[test]
    fn float_division_matches_closed_form() {
        let pr = params(0.2, 0.5);
        let div = extract_period2_quadratic(&pr).unwrap();
        let printed = printed_abc(&pr).unwrap();
        for (x, y) in [(div.a, printed.a), (div.b, printed.b), (div.c, printed.c)] {
            assert!((x - y).abs() <= 1e-10 * y.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn descartes_examples() {
        let pos = |a, b, c| QuadraticABC::new(a, b, c, QuadraticSource::PrintedFormula).unwrap();
        assert!(descartes_no_positive_roots(&pos(9.0, 36.0, 36.0)));
        assert!(!descartes_no_positive_roots(&pos(1.0, -5.0, 6.0)));
        assert!(descartes_no_positive_roots(&pos(1.0, 0.0, 1.0)));
        assert_eq!(period2_positive_roots(&pos(1.0, -5.0, 6.0), 1e-12), vec![2.0, 3.0]);
        assert!(period2_positive_roots(&pos(9.0, 36.0, 36.0), 1e-12).is_empty());
    }

    #[test]
    fn quadratic_requires_positive_outer_coefficients() {
        assert!(QuadraticABC::new(0.0, 1.0, 1.0, QuadraticSource::PrintedFormula).is_err());
        assert!(QuadraticABC::new(1.0, 1.0, -1.0, QuadraticSource::PrintedFormula).is_err());
    }

    #[test]
    fn exact_signs_at_the_zero_of_d() {
        // D vanishes at θ = θ₁ = 1, so the cell needs the exact path.
        let c = classify_cell(1.0, 1.0, ScanPath::Printed);
        assert!(c.exact);
        assert_eq!(c.sign_d, Sign::Zero);
        assert_eq!(c.sign_b, Sign::Positive);
        assert!(!c.is_violation());
    }

    #[test]
    fn scan_small_grid() {
        let grid = crate::grid::GridRanges {
            theta: (0.5, 2.0, 2),
            theta1: (0.5, 2.0, 2),
        }
        .to_spec(crate::grid::Spacing::Linear, false)
        .unwrap();
        let r = scan_region_s(&grid, ScanPath::Printed).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert!(r.empty);
        assert_eq!(r.sign_rows(|c| c.sign_b).len(), 2);
        for path in [ScanPath::Division, ScanPath::Exact] {
            let r2 = scan_region_s(&grid, path).unwrap();
            for (a, b) in r.cells.iter().zip(&r2.cells) {
                assert_eq!((a.sign_b, a.sign_d), (b.sign_b, b.sign_d));
            }
        }
    }

    #[test]
    fn search_at_trivial_point_is_empty() {
        let r = period2_search_2d(&params(1.0, 1.0), 5, 1e-12).unwrap();
        assert!(r.points.is_empty());
    }
}
