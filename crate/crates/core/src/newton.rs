//! Multi-start damped Newton for `Φ(x) = x` on the positive quadrant, where
//! `Φ` is `F` or `F∘F`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Linearization, RootRatios};

/// Seeds are log-spaced over `[SEED_MIN, SEED_MAX]²`.
pub const SEED_MIN: f64 = 1e-3;
pub const SEED_MAX: f64 = 1e3;
const MAX_NEWTON_STEPS: usize = 200;
const MIN_DAMPING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub seeds: usize,
    pub converged: usize,
    pub singular: usize,
    pub stalled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub points: Vec<RootRatios>,
    pub diagnostics: SearchDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NewtonOutcome {
    Converged([f64; 2]),
    Singular,
    Stalled,
}

/// `density × density` log-spaced seeds, row-major with `u` outer.
pub fn log_seed_grid(density: usize) -> Vec<[f64; 2]> {
    let axis: Vec<f64> = (0..density)
        .map(|i| {
            let t = i as f64 / (density - 1) as f64;
            10f64.powf(SEED_MIN.log10() + t * (SEED_MAX.log10() - SEED_MIN.log10()))
        })
        .collect();
    axis.iter().flat_map(|&u| axis.iter().map(move |&v| [u, v])).collect()
}

fn residual(lin: &Linearization, x: [f64; 2]) -> [f64; 2] {
    [lin.value[0] - x[0], lin.value[1] - x[1]]
}

fn sup(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

/// Damped Newton on `G(x) = Φ(x) - x` with step halving that keeps iterates
/// positive and decreases `‖G‖∞`.
pub fn damped_newton<M>(map: &M, seed: [f64; 2], tol: f64) -> NewtonOutcome
where
    M: Fn(f64, f64) -> Linearization,
{
    let mut x = seed;
    let mut lin = map(x[0], x[1]);
    let mut g = residual(&lin, x);
    for _ in 0..MAX_NEWTON_STEPS {
        let norm = sup(g);
        if !norm.is_finite() {
            return NewtonOutcome::Stalled;
        }
        if norm <= tol {
            return NewtonOutcome::Converged(x);
        }
        let j = lin.jacobian;
        let (a, b, c, d) = (j[0][0] - 1.0, j[0][1], j[1][0], j[1][1] - 1.0);
        let det = a * d - b * c;
        let scale = (a.abs() + b.abs()) * (c.abs() + d.abs());
        if !det.is_finite() || det.abs() <= 1e-14 * scale || scale == 0.0 {
            return NewtonOutcome::Singular;
        }
        let step = [(-d * g[0] + b * g[1]) / det, (c * g[0] - a * g[1]) / det];
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= MIN_DAMPING {
            let trial = [x[0] + lambda * step[0], x[1] + lambda * step[1]];
            if trial[0] > 0.0 && trial[1] > 0.0 && trial.iter().all(|t| t.is_finite()) {
                let tl = map(trial[0], trial[1]);
                let tg = residual(&tl, trial);
                if sup(tg) < (1.0 - 1e-4 * lambda) * norm {
                    x = trial;
                    lin = tl;
                    g = tg;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Stagnation at roundoff level still counts if within tolerance.
            return if norm <= tol {
                NewtonOutcome::Converged(x)
            } else {
                NewtonOutcome::Stalled
            };
        }
    }
    if sup(g) <= tol {
        NewtonOutcome::Converged(x)
    } else {
        NewtonOutcome::Stalled
    }
}

/// Runs [`damped_newton`] from every seed of [`log_seed_grid`] and keeps
/// converged points accepted by `keep`, deduplicated at sup distance
/// `100 * tol` and sorted by `(u, v)`.
pub fn multi_start<M, K>(map: M, density: usize, tol: f64, keep: K) -> SearchResult
where
    M: Fn(f64, f64) -> Linearization + Sync,
    K: Fn([f64; 2]) -> bool,
{
    let seeds = log_seed_grid(density);
    let outcomes: Vec<NewtonOutcome> = seeds.par_iter().map(|&s| damped_newton(&map, s, tol)).collect();

    let mut diagnostics = SearchDiagnostics {
        seeds: seeds.len(),
        ..Default::default()
    };
    let mut points: Vec<[f64; 2]> = Vec::new();
    for outcome in outcomes {
        match outcome {
            NewtonOutcome::Converged(x) => {
                diagnostics.converged += 1;
                if keep(x) && points.iter().all(|p| sup([p[0] - x[0], p[1] - x[1]]) > 100.0 * tol) {
                    points.push(x);
                }
            }
            NewtonOutcome::Singular => diagnostics.singular += 1,
            NewtonOutcome::Stalled => diagnostics.stalled += 1,
        }
    }
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    SearchResult {
        points: points
            .into_iter()
            .filter_map(|[u, v]| RootRatios::new(u, v).ok())
            .collect(),
        diagnostics,
    }
}
