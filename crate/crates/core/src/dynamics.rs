//! The root-ratio map `F(u, v)` and its restriction `f` to the invariant line
//! `v = 1`, plus orbit iteration with convergence and short-cycle detection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ThetaParams;

/// Root probability ratios `u = Z1/Z0`, `v = Z2/Z0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootRatios {
    u: f64,
    v: f64,
}

impl RootRatios {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        for (name, value) in [("u", u), ("v", v)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "ratios must be positive and finite",
                });
            }
        }
        Ok(RootRatios { u, v })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.u, self.v]
    }

    pub fn sup_distance(&self, other: &RootRatios) -> f64 {
        (self.u - other.u).abs().max((self.v - other.v).abs())
    }
}

/// Precomputed coefficients of `F` for one parameter point.
///
/// ```text
/// u' = (θ² + 2θθ₁u + 2θ²θ₁²v + u² + 2θθ₁uv + θ²v²) / den
/// v' = (θ⁴ + 2θ³θ₁u + 2θ²θ₁²v + θ²u² + 2θθ₁uv + v²) / den
/// den = 1 + 2θθ₁u + 2θ²θ₁²v + θ²u² + 2θ³θ₁uv + θ⁴v²
/// ```
#[derive(Debug, Clone, Copy)]
pub struct RatioMap {
    t2: f64,
    t4: f64,
    a: f64, // 2θθ₁
    b: f64, // 2θ²θ₁²
    c: f64, // 2θ³θ₁
}

/// Value and Jacobian of a planar map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub value: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
}

impl RatioMap {
    pub fn new(params: &ThetaParams) -> Self {
        let (t, t1) = (params.theta(), params.theta1());
        RatioMap {
            t2: t * t,
            t4: t * t * t * t,
            a: 2.0 * t * t1,
            b: 2.0 * t * t * t1 * t1,
            c: 2.0 * t * t * t * t1,
        }
    }

    fn parts(&self, u: f64, v: f64) -> (f64, f64, f64) {
        let nu = self.t2 + self.a * u + self.b * v + u * u + self.a * u * v + self.t2 * v * v;
        let nv = self.t4 + self.c * u + self.b * v + self.t2 * u * u + self.a * u * v + v * v;
        let den = 1.0 + self.a * u + self.b * v + self.t2 * u * u + self.c * u * v + self.t4 * v * v;
        (nu, nv, den)
    }

    /// `F(u, v)` without domain checks.
    pub fn apply_raw(&self, u: f64, v: f64) -> [f64; 2] {
        let (nu, nv, den) = self.parts(u, v);
        [nu / den, self.v_quotient(u, v, nv, den)]
    }

    /// `nv/den`. Near `v' = 1` it is evaluated as `1 + (nv − den)/den` with
    /// `nv − den = (1 − v)(θ² − 1)((θ² + 1)(1 + v) + 2θθ₁u)`, which is
    /// exactly 1 on `v = 1`: fixed points on that line can repel in the `v`
    /// direction, and the plain quotient lets roundoff leave it.
    fn v_quotient(&self, u: f64, v: f64, nv: f64, den: f64) -> f64 {
        let r = self.v_offset(u, v) / den;
        if r.abs() <= 0.5 {
            1.0 + r
        } else {
            nv / den
        }
    }

    /// `nv − den`.
    fn v_offset(&self, u: f64, v: f64) -> f64 {
        (1.0 - v) * (self.t2 - 1.0) * ((self.t2 + 1.0) * (1.0 + v) + self.a * u)
    }

    /// `∂v'/∂v` on the line `v = 1`, the multiplier transverse to it.
    pub fn transverse_multiplier(&self, u: f64) -> f64 {
        let (_, _, den) = self.parts(u, 1.0);
        -(self.t2 - 1.0) * (2.0 * (self.t2 + 1.0) + self.a * u) / den
    }

    pub fn apply(&self, x: &RootRatios) -> Result<RootRatios> {
        let [u, v] = self.apply_raw(x.u, x.v);
        if !(u.is_finite() && v.is_finite()) || u <= 0.0 || v <= 0.0 {
            let (nu, nv, den) = self.parts(x.u, x.v);
            return Err(Error::NonFinite {
                context: "ratio map",
                magnitude: nu.abs().max(nv.abs()).max(den.abs()),
            });
        }
        Ok(RootRatios { u, v })
    }

    /// `F` and its Jacobian by the quotient rule.
    pub fn linearize(&self, u: f64, v: f64) -> Linearization {
        let (nu, nv, den) = self.parts(u, v);
        let nu_u = self.a + 2.0 * u + self.a * v;
        let nu_v = self.b + self.a * u + 2.0 * self.t2 * v;
        let nv_u = self.c + 2.0 * self.t2 * u + self.a * v;
        let nv_v = self.b + self.a * u + 2.0 * v;
        let d_u = self.a + 2.0 * self.t2 * u + self.c * v;
        let d_v = self.b + self.c * u + 2.0 * self.t4 * v;
        let d2 = den * den;
        Linearization {
            value: [nu / den, self.v_quotient(u, v, nv, den)],
            jacobian: [
                [(nu_u * den - nu * d_u) / d2, (nu_v * den - nu * d_v) / d2],
                [(nv_u * den - nv * d_u) / d2, (nv_v * den - nv * d_v) / d2],
            ],
        }
    }

    /// `F∘F` and its Jacobian by the chain rule.
    pub fn linearize_twice(&self, u: f64, v: f64) -> Linearization {
        let first = self.linearize(u, v);
        let second = self.linearize(first.value[0], first.value[1]);
        Linearization {
            value: second.value,
            jacobian: mat_mul(&second.jacobian, &first.jacobian),
        }
    }
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// One step of the ratio recursion.
pub fn step_f(x: &RootRatios, params: &ThetaParams) -> Result<RootRatios> {
    RatioMap::new(params).apply(x)
}

/// `f(u) = P(u)/Q(u)` on the line `v = 1`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarMap {
    /// `P(u) = p[0] + p[1] u + p[2] u²`
    pub p: [f64; 3],
    /// `Q(u) = q[0] + q[1] u + q[2] u²`
    pub q: [f64; 3],
}

impl ScalarMap {
    pub fn new(params: &ThetaParams) -> Self {
        let (t, t1) = (params.theta(), params.theta1());
        let t2 = t * t;
        ScalarMap {
            p: [2.0 * t2 * (t1 * t1 + 1.0), 4.0 * t * t1, 1.0],
            q: [t2 * t2 + 2.0 * t2 * t1 * t1 + 1.0, 2.0 * t * t1 * (t2 + 1.0), t2],
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        let p = (self.p[2] * u + self.p[1]) * u + self.p[0];
        let q = (self.q[2] * u + self.q[1]) * u + self.q[0];
        p / q
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let p = (self.p[2] * u + self.p[1]) * u + self.p[0];
        let q = (self.q[2] * u + self.q[1]) * u + self.q[0];
        let dp = 2.0 * self.p[2] * u + self.p[1];
        let dq = 2.0 * self.q[2] * u + self.q[1];
        (dp * q - p * dq) / (q * q)
    }

    /// `lim_{u→0⁺} f(u)`.
    pub fn at_zero(&self) -> f64 {
        self.p[0] / self.q[0]
    }

    /// `lim_{u→∞} f(u) = 1/θ²`.
    pub fn at_infinity(&self) -> f64 {
        self.p[2] / self.q[2]
    }
}

/// `f(u)`, the restriction of `F` to `v = 1`.
pub fn f_on_i(u: f64, params: &ThetaParams) -> f64 {
    ScalarMap::new(params).value(u)
}

/// Residuals between `F` at `θ₁ = 1` and the squared-fraction form
///
/// ```text
/// u = ((u + θv + θ) / (θ²v + θu + 1))²
/// v = ((θu + v + θ²) / (θ²v + θu + 1))²
/// ```
///
/// Each residual is relative to the larger magnitude of the two sides.
pub fn classical_reduction_residual(u: f64, v: f64, theta: f64) -> Result<(f64, f64)> {
    let params = ThetaParams::new(theta, 1.0)?;
    let x = RootRatios::new(u, v)?;
    let fx = step_f(&x, &params)?;
    let den = theta * theta * v + theta * u + 1.0;
    let cu = ((u + theta * v + theta) / den).powi(2);
    let cv = ((theta * u + v + theta * theta) / den).powi(2);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    Ok((rel(fx.u, cu), rel(fx.v, cv)))
}

pub const DEFAULT_ORBIT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Longest period the cycle detector looks for.
pub const MAX_CYCLE_PERIOD: usize = 4;
const TAIL_LEN: usize = 64;
const SAMPLE_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrbitStatus {
    Converged { limit: RootRatios },
    Cycle { period: usize, points: Vec<RootRatios> },
    MaxIterations,
}

/// A recorded state together with its iteration index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub step: usize,
    pub state: RootRatios,
}

/// Orbit of `F`. Only step 0, every 100th step and the last 64 steps are
/// kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub initial: RootRatios,
    pub iterations: usize,
    pub status: OrbitStatus,
    sampled: Vec<OrbitPoint>,
    tail: VecDeque<OrbitPoint>,
}

impl Orbit {
    /// Retained states in step order.
    pub fn states(&self) -> Vec<OrbitPoint> {
        let first_tail = self.tail.front().map_or(usize::MAX, |p| p.step);
        self.sampled
            .iter()
            .filter(|p| p.step < first_tail)
            .chain(self.tail.iter())
            .copied()
            .collect()
    }

    pub fn last(&self) -> RootRatios {
        self.tail.back().map_or(self.initial, |p| p.state)
    }

    fn record(&mut self, step: usize, state: RootRatios) {
        let point = OrbitPoint { step, state };
        if step.is_multiple_of(SAMPLE_EVERY) {
            self.sampled.push(point);
        }
        if self.tail.len() == TAIL_LEN {
            self.tail.pop_front();
        }
        self.tail.push_back(point);
    }
}

/// Iterates `F` from `x0` until successive states agree to `tol` in the sup
/// norm, a cycle of period 2..=4 closes to `tol`, or `max_iter` steps pass.
pub fn iterate_orbit(x0: RootRatios, params: &ThetaParams, max_iter: usize, tol: f64) -> Result<Orbit> {
    if max_iter == 0 {
        return Err(Error::InvalidParameter {
            name: "max_iter",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
            reason: "must be positive",
        });
    }
    let map = RatioMap::new(params);
    let mut orbit = Orbit {
        initial: x0,
        iterations: 0,
        status: OrbitStatus::MaxIterations,
        sampled: Vec::new(),
        tail: VecDeque::with_capacity(TAIL_LEN),
    };
    orbit.record(0, x0);
    let mut x = x0;
    for n in 0..max_iter {
        let next = map.apply(&x)?;
        if next.sup_distance(&x) <= tol {
            orbit.status = OrbitStatus::Converged { limit: x };
            return Ok(orbit);
        }
        if let Some((period, points)) = closed_cycle(&orbit.tail, &next, tol) {
            let genuine = points.iter().all(|p| {
                let [fu, fv] = map.apply_raw(p.u, p.v);
                (fu - p.u).abs().max((fv - p.v).abs()) > tol
            });
            if genuine {
                orbit.status = OrbitStatus::Cycle { period, points };
                return Ok(orbit);
            }
        }
        orbit.record(n + 1, next);
        orbit.iterations = n + 1;
        x = next;
    }
    Ok(orbit)
}

fn closed_cycle(tail: &VecDeque<OrbitPoint>, next: &RootRatios, tol: f64) -> Option<(usize, Vec<RootRatios>)> {
    (2..=MAX_CYCLE_PERIOD).find_map(|p| {
        if tail.len() < p {
            return None;
        }
        let start = tail.len() - p;
        if tail[start].state.sup_distance(next) <= tol {
            Some((p, tail.iter().skip(start).map(|pt| pt.state).collect()))
        } else {
            None
        }
    })
}
