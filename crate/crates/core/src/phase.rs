//! Translation-invariant fixed points on the invariant line `v = 1`.
//!
//! `u = f(u)` clears to the cubic
//!
//! ```text
//! θ²u³ + (2θθ₁(θ²+1) − 1)u² + (θ⁴ + 2θ²θ₁² + 1 − 4θθ₁)u − 2θ²(θ₁²+1) = 0
//! ```
//!
//! whose positive roots are the fixed points. Since `c3 > 0 > c0` there is
//! always at least one. More than one means more than one limiting Gibbs
//! measure, i.e. a phase transition; an unstable root (`f' > 1`) forces
//! exactly three.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{RatioMap, RootRatios, ScalarMap};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lattice::ThetaParams;
use crate::newton::{multi_start, SearchResult};

/// Relative residual tolerance for accepted cubic roots.
pub const ROOT_TOL: f64 = 1e-13;
/// `|f'|` within this distance of 1 is reported as neutral.
pub const STABILITY_MARGIN: f64 = 1e-9;
/// Roots closer than this are flagged as a near-tangency.
pub const NEAR_TANGENCY_SEPARATION: f64 = 1e-6;

/// Coefficients of `c3 u³ + c2 u² + c1 u + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoefficients {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CubicCoefficients {
    pub fn eval(&self, u: f64) -> f64 {
        ((self.c3 * u + self.c2) * u + self.c1) * u + self.c0
    }

    /// `Σ |c_i| u^i`, the magnitude against which roundoff is measured.
    pub fn eval_scale(&self, u: f64) -> f64 {
        let u = u.abs();
        ((self.c3.abs() * u + self.c2.abs()) * u + self.c1.abs()) * u + self.c0.abs()
    }

    pub fn scaled(&self, k: f64) -> Self {
        CubicCoefficients {
            c3: k * self.c3,
            c2: k * self.c2,
            c1: k * self.c1,
            c0: k * self.c0,
        }
    }

    fn derivative_roots(&self) -> Vec<f64> {
        quadratic_real_roots(3.0 * self.c3, 2.0 * self.c2, self.c1)
    }
}

/// Real roots of `a x² + b x + c` (`a ≠ 0`) by the cancellation-free form.
pub(crate) fn quadratic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        // b = 0 and c = 0.
        return vec![0.0];
    }
    let mut r = vec![q / a, c / q];
    r.sort_by(f64::total_cmp);
    r
}

pub fn cubic_coefficients(params: &ThetaParams) -> CubicCoefficients {
    let (t, t1) = (params.theta(), params.theta1());
    let t2 = t * t;
    CubicCoefficients {
        c3: t2,
        c2: 2.0 * t * t1 * (t2 + 1.0) - 1.0,
        c1: t2 * t2 + 2.0 * t2 * t1 * t1 + 1.0 - 4.0 * t * t1,
        c0: -2.0 * t2 * (t1 * t1 + 1.0),
    }
}

/// Positive roots of a cubic with multiplicity collapsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveRoots {
    pub roots: Vec<f64>,
    /// A double root was detected or two roots lie closer than
    /// [`NEAR_TANGENCY_SEPARATION`].
    pub near_tangency: bool,
}

/// Isolates the positive roots of a cubic.
///
/// The critical points split `(0, U]`, `U = 1 + (|c2|+|c1|+|c0|)/|c3|`, into
/// monotone pieces; each piece with a sign change holds one root, found by
/// bisection down to adjacent floats. A critical point where the cubic
/// vanishes to within tolerance is a double root. With three roots the
/// largest is deflated out and the remaining quadratic must reproduce the
/// other two.
pub fn positive_real_roots(coeffs: &CubicCoefficients, tol: f64) -> Result<PositiveRoots> {
    if coeffs.c3 == 0.0 || !coeffs.c3.is_finite() {
        return Err(Error::DegeneratePolynomial);
    }
    let lead = coeffs.c3.abs();
    let bound = 1.0 + (coeffs.c2.abs() + coeffs.c1.abs() + coeffs.c0.abs()) / lead;
    let accept = |u: f64| coeffs.eval(u).abs() <= tol * (coeffs.eval_scale(u) / lead).max(1.0) * lead;

    let mut breaks: Vec<f64> = coeffs
        .derivative_roots()
        .into_iter()
        .filter(|&c| c > 0.0 && c < bound)
        .collect();
    let tangent: Vec<f64> = breaks.iter().copied().filter(|&c| accept(c)).collect();

    breaks.insert(0, 0.0);
    breaks.push(bound);

    let sign_at = |u: f64| -> f64 {
        if u == 0.0 {
            // Sign of the lowest-order nonzero coefficient.
            [coeffs.c0, coeffs.c1, coeffs.c2, coeffs.c3]
                .into_iter()
                .find(|c| *c != 0.0)
                .map_or(0.0, f64::signum)
        } else {
            let v = coeffs.eval(u);
            if v == 0.0 {
                0.0
            } else {
                v.signum()
            }
        }
    };

    let mut roots = tangent.clone();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if tangent.contains(&a) || tangent.contains(&b) {
            continue;
        }
        let (sa, sb) = (sign_at(a), sign_at(b));
        if sb == 0.0 {
            roots.push(b);
        } else if sa != 0.0 && sa != sb {
            roots.push(bisect(coeffs, a, b, sa));
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup();

    for &r in &roots {
        if !accept(r) {
            return Err(Error::RootIsolation(format!(
                "root {r} leaves residual {:e}",
                coeffs.eval(r)
            )));
        }
    }

    let near_tangency = !tangent.is_empty()
        || roots
            .windows(2)
            .any(|w| w[1] - w[0] < NEAR_TANGENCY_SEPARATION * w[1].max(1.0));

    if roots.len() == 3 && !near_tangency {
        deflation_check(coeffs, &roots)?;
    }
    Ok(PositiveRoots { roots, near_tangency })
}

fn bisect(coeffs: &CubicCoefficients, mut a: f64, mut b: f64, sign_a: f64) -> f64 {
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            // Adjacent floats: take the endpoint with the smaller residual.
            return if coeffs.eval(a).abs() <= coeffs.eval(b).abs() && a > 0.0 {
                a
            } else {
                b
            };
        }
        let fm = coeffs.eval(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sign_a {
            a = m;
        } else {
            b = m;
        }
    }
}

fn deflation_check(coeffs: &CubicCoefficients, roots: &[f64]) -> Result<()> {
    let r = roots[2];
    // Synthetic division by (u - r).
    let q2 = coeffs.c3;
    let q1 = coeffs.c2 + r * q2;
    let q0 = coeffs.c1 + r * q1;
    let mut rest = quadratic_real_roots(q2, q1, q0);
    rest.sort_by(f64::total_cmp);
    let ok = rest.len() == 2
        && rest
            .iter()
            .zip(&roots[..2])
            .all(|(x, y)| (x - y).abs() <= 1e-6 * y.abs().max(1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::RootIsolation(format!(
            "deflation by {r} leaves {rest:?}, expected {:?}",
            &roots[..2]
        )))
    }
}

/// `f'(u)` by the quotient rule.
pub fn f_prime(u: f64, params: &ThetaParams) -> f64 {
    ScalarMap::new(params).derivative(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Neutral,
}

impl Stability {
    pub fn classify(derivative: f64) -> Self {
        let m = derivative.abs();
        if m > 1.0 + STABILITY_MARGIN {
            Stability::Unstable
        } else if m < 1.0 - STABILITY_MARGIN {
            Stability::Stable
        } else {
            Stability::Neutral
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOnI {
    pub u: f64,
    pub derivative: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnosis {
    pub params: ThetaParams,
    pub fixed_points: Vec<FixedPointOnI>,
    /// At least two translation-invariant measures on `v = 1`.
    pub transition: bool,
    /// Middle root with `f' > 1`, when there are three roots.
    pub criterion_witness: Option<f64>,
    pub near_tangency: bool,
}

impl PhaseDiagnosis {
    pub fn root_count(&self) -> usize {
        self.fixed_points.len()
    }

    pub fn max_derivative(&self) -> f64 {
        self.fixed_points
            .iter()
            .map(|p| p.derivative)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// With three roots: outer roots stable, middle root unstable.
    pub fn has_three_phase_pattern(&self) -> bool {
        matches!(
            self.fixed_points.iter().map(|p| p.stability).collect::<Vec<_>>()[..],
            [Stability::Stable, Stability::Unstable, Stability::Stable]
        )
    }
}

/// All fixed points on `v = 1` with their stability.
///
/// Two or more roots count as a transition even when no root has
/// `f' > 1`; the derivative condition is sufficient, not necessary.
pub fn diagnose_phase(params: &ThetaParams) -> Result<PhaseDiagnosis> {
    let roots = positive_real_roots(&cubic_coefficients(params), ROOT_TOL)?;
    let map = ScalarMap::new(params);
    let fixed_points: Vec<FixedPointOnI> = roots
        .roots
        .iter()
        .map(|&u| {
            let derivative = map.derivative(u);
            FixedPointOnI {
                u,
                derivative,
                stability: Stability::classify(derivative),
            }
        })
        .collect();
    let criterion_witness = match fixed_points[..] {
        [_, middle, _] if middle.derivative > 1.0 + STABILITY_MARGIN => Some(middle.u),
        _ => None,
    };
    Ok(PhaseDiagnosis {
        params: *params,
        transition: fixed_points.len() >= 2,
        fixed_points,
        criterion_witness,
        near_tangency: roots.near_tangency,
    })
}

/// Fixed points of the full map `F` found by multi-start damped Newton from
/// a `grid_density²` log grid of seeds.
pub fn fixed_points_2d(params: &ThetaParams, grid_density: usize, tol: f64) -> Result<SearchResult> {
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
    Ok(multi_start(|u, v| map.linearize(u, v), grid_density, tol, |_| true))
}

/// One cell of a phase-diagram scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScanRow {
    pub theta: f64,
    pub theta1: f64,
    pub root_count: usize,
    pub roots: Vec<f64>,
    pub fprime_at_roots: Vec<f64>,
    pub max_fprime: f64,
    pub transition: bool,
    pub near_tangency: bool,
}

impl From<&PhaseDiagnosis> for PhaseScanRow {
    fn from(d: &PhaseDiagnosis) -> Self {
        PhaseScanRow {
            theta: d.params.theta(),
            theta1: d.params.theta1(),
            root_count: d.root_count(),
            roots: d.fixed_points.iter().map(|p| p.u).collect(),
            fprime_at_roots: d.fixed_points.iter().map(|p| p.derivative).collect(),
            max_fprime: d.max_derivative(),
            transition: d.transition,
            near_tangency: d.near_tangency,
        }
    }
}

/// [`diagnose_phase`] at every grid cell, row-major with `θ` outer.
pub fn scan_phase(grid: &GridSpec) -> Result<Vec<PhaseScanRow>> {
    grid.theta.validate()?;
    grid.theta1.validate()?;
    grid.cells()
        .into_par_iter()
        .map(|(t, t1)| {
            let d = diagnose_phase(&ThetaParams::new(t, t1)?)?;
            Ok(PhaseScanRow::from(&d))
        })
        .collect()
}

/// Quoted fixed-point values for `θ = 0.2, θ₁ = 0.5`, kept to be checked
/// against `f` rather than trusted.
pub const REPORTED_PARAMS: (f64, f64) = (0.2, 0.5);
pub const REPORTED_ROOTS: [f64; 3] = [0.1461, 0.7085, 24.1453];

/// How one reported value relates to `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedRootEntry {
    pub reported: f64,
    pub f_value: f64,
    /// `f(u) - u`.
    pub residual: f64,
    pub nearest_derived: f64,
    /// `|f(u) - u| ≤ 1e-3 · max(1, u)`, generous for 4-5 printed digits.
    pub satisfies: bool,
}

/// Comparison of the reported fixed points with those derived from `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedRootCheck {
    pub params: ThetaParams,
    pub entries: Vec<ReportedRootEntry>,
    pub derived_roots: Vec<f64>,
    pub reported_sum: f64,
    pub derived_sum: f64,
    /// `-c2/c3`, the root sum from the cubic.
    pub vieta_sum: f64,
    pub reported_product: f64,
    pub derived_product: f64,
    /// `2(θ₁² + 1)`.
    pub vieta_product: f64,
    pub all_satisfy: bool,
}

pub fn check_reported_roots(params: &ThetaParams, reported: &[f64]) -> Result<ReportedRootCheck> {
    let diag = diagnose_phase(params)?;
    let derived: Vec<f64> = diag.fixed_points.iter().map(|p| p.u).collect();
    let map = ScalarMap::new(params);
    let entries: Vec<ReportedRootEntry> = reported
        .iter()
        .map(|&u| {
            let f_value = map.value(u);
            let residual = f_value - u;
            let nearest_derived = derived
                .iter()
                .copied()
                .min_by(|a, b| (a - u).abs().total_cmp(&(b - u).abs()))
                .unwrap_or(f64::NAN);
            ReportedRootEntry {
                reported: u,
                f_value,
                residual,
                nearest_derived,
                satisfies: residual.abs() <= 1e-3 * u.max(1.0),
            }
        })
        .collect();
    let c = cubic_coefficients(params);
    Ok(ReportedRootCheck {
        params: *params,
        all_satisfy: entries.iter().all(|e| e.satisfies),
        entries,
        reported_sum: reported.iter().sum(),
        derived_sum: derived.iter().sum(),
        vieta_sum: -c.c2 / c.c3,
        reported_product: reported.iter().product(),
        derived_product: derived.iter().product(),
        vieta_product: -c.c0 / c.c3,
        derived_roots: derived,
    })
}

/// Whether `params` is the parameter point of [`REPORTED_ROOTS`].
pub fn is_reported_point(params: &ThetaParams) -> bool {
    (params.theta() - REPORTED_PARAMS.0).abs() < 1e-12 && (params.theta1() - REPORTED_PARAMS.1).abs() < 1e-12
}

/// Fixed points of the full map restricted to the line `v = 1`.
pub fn on_line(points: &[RootRatios], tol: f64) -> Vec<RootRatios> {
    points.iter().copied().filter(|p| (p.v() - 1.0).abs() <= tol).collect()
}
