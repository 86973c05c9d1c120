//! Finite binary Cayley tree, the SOS Hamiltonian with nearest-neighbour and
//! one-level next-nearest-neighbour couplings, and the brute-force partition
//! function used as ground truth for every recursion in the crate.
//!
//! Vertices use heap numbering: the root is `0`, the successors of `x` are
//! `2x + 1` and `2x + 2`, and level `m` occupies `2^m - 1 .. 2^(m+1) - 1`.
//! The only next-nearest-neighbour pairs on one level that interact are
//! siblings, i.e. the two successors of a common parent.

use std::ops::Range;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::RootRatios;
use crate::error::{Error, Result};

/// Largest depth accepted by [`build_tree`].
pub const MAX_TREE_DEPTH: usize = 12;

/// Full enumeration is allowed while `3^|V_n|` stays at or below this bound.
pub const ENUMERATION_LIMIT: u64 = 100_000_000;

/// A spin value in `{0, 1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Spin(u8);

impl Spin {
    pub const ALL: [Spin; 3] = [Spin(0), Spin(1), Spin(2)];

    pub fn new(value: i64) -> Result<Self> {
        match value {
            0..=2 => Ok(Spin(value as u8)),
            _ => Err(Error::InvalidSpin(value)),
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// `|self - other|`, the SOS interaction distance.
    pub fn distance(self, other: Spin) -> u32 {
        self.0.abs_diff(other.0) as u32
    }
}

impl TryFrom<i64> for Spin {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        Spin::new(value)
    }
}

/// The semi-infinite binary tree truncated at a fixed depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteTree {
    depth: usize,
    levels: Vec<Range<usize>>,
    parent: Vec<Option<usize>>,
    successors: Vec<Vec<usize>>,
    sibling_pairs: Vec<(usize, usize)>,
}

/// Builds the binary tree `V_depth`: the root has two successors, as does
/// every other non-leaf vertex.
pub fn build_tree(depth: usize) -> Result<FiniteTree> {
    if depth > MAX_TREE_DEPTH {
        return Err(Error::DepthTooLarge {
            depth,
            max: MAX_TREE_DEPTH,
        });
    }
    let vertex_count = (1usize << (depth + 1)) - 1;
    let levels = (0..=depth)
        .map(|m| ((1usize << m) - 1)..((1usize << (m + 1)) - 1))
        .collect();
    let parent = (0..vertex_count)
        .map(|x| if x == 0 { None } else { Some((x - 1) / 2) })
        .collect();
    let interior = if depth == 0 { 0 } else { (1usize << depth) - 1 };
    let successors = (0..vertex_count)
        .map(|x| {
            if x < interior {
                vec![2 * x + 1, 2 * x + 2]
            } else {
                Vec::new()
            }
        })
        .collect();
    let sibling_pairs = (0..interior).map(|x| (2 * x + 1, 2 * x + 2)).collect();
    Ok(FiniteTree {
        depth,
        levels,
        parent,
        successors,
        sibling_pairs,
    })
}

impl FiniteTree {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    /// Vertex range of the level set `W_m`.
    pub fn level(&self, m: usize) -> Range<usize> {
        self.levels[m].clone()
    }

    pub fn levels(&self) -> &[Range<usize>] {
        &self.levels
    }

    /// `|x|`, the distance from the root.
    pub fn level_of(&self, x: usize) -> usize {
        (usize::BITS - (x + 1).leading_zeros() - 1) as usize
    }

    pub fn parent(&self, x: usize) -> Option<usize> {
        self.parent[x]
    }

    /// Direct successors `S(x)`; empty for leaves.
    pub fn successors(&self, x: usize) -> &[usize] {
        &self.successors[x]
    }

    /// Parent-child edges as `(parent, child)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent.iter().enumerate().filter_map(|(x, p)| p.map(|p| (p, x)))
    }

    pub fn edge_count(&self) -> usize {
        self.vertex_count() - 1
    }

    /// One-level next-nearest-neighbour pairs.
    pub fn sibling_pairs(&self) -> &[(usize, usize)] {
        &self.sibling_pairs
    }

    /// Graph distance `d(x, y)`.
    pub fn distance(&self, mut x: usize, mut y: usize) -> usize {
        let mut d = 0;
        while x != y {
            if x > y {
                x = (x - 1) / 2;
            } else {
                y = (y - 1) / 2;
            }
            d += 1;
        }
        d
    }
}

/// Physical couplings `J`, `J1` and inverse temperature `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub j: f64,
    pub j1: f64,
    pub beta: f64,
}

impl CouplingParams {
    pub fn new(j: f64, j1: f64, beta: f64) -> Result<Self> {
        if !j.is_finite() {
            return Err(Error::InvalidParameter {
                name: "J",
                value: j,
                reason: "must be finite",
            });
        }
        if !j1.is_finite() {
            return Err(Error::InvalidParameter {
                name: "J1",
                value: j1,
                reason: "must be finite",
            });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be positive and finite",
            });
        }
        Ok(CouplingParams { j, j1, beta })
    }
}

/// Boltzmann weights `theta = exp(beta J)` and `theta1 = exp(beta J1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    theta: f64,
    theta1: f64,
}

impl ThetaParams {
    pub fn new(theta: f64, theta1: f64) -> Result<Self> {
        for (name, value) in [("theta", theta), ("theta1", theta1)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive and finite",
                });
            }
        }
        Ok(ThetaParams { theta, theta1 })
    }

    pub fn from_coupling(c: &CouplingParams) -> Result<Self> {
        ThetaParams::new((c.beta * c.j).exp(), (c.beta * c.j1).exp())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }
}

/// A spin on every vertex of a tree, indexed by vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    spins: Vec<Spin>,
}

impl Configuration {
    pub fn new(spins: Vec<Spin>) -> Self {
        Configuration { spins }
    }

    pub fn uniform(tree: &FiniteTree, spin: Spin) -> Self {
        Configuration {
            spins: vec![spin; tree.vertex_count()],
        }
    }

    pub fn from_values(values: &[i64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| Spin::new(v))
            .collect::<Result<Vec<_>>>()
            .map(Configuration::new)
    }

    pub fn get(&self, x: usize) -> Option<Spin> {
        self.spins.get(x).copied()
    }

    pub fn set(&mut self, x: usize, spin: Spin) {
        self.spins[x] = spin;
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }
}

/// Total `|σ(x) - σ(y)|` over edges and over sibling pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteractionCounts {
    pub edge: u32,
    pub sibling: u32,
}

pub fn interaction_counts(config: &Configuration, tree: &FiniteTree) -> Result<InteractionCounts> {
    if config.len() < tree.vertex_count() {
        return Err(Error::MissingSpin { vertex: config.len() });
    }
    let s = config.spins();
    let edge = tree.edges().map(|(x, y)| s[x].distance(s[y])).sum();
    let sibling = tree.sibling_pairs().iter().map(|&(x, y)| s[x].distance(s[y])).sum();
    Ok(InteractionCounts { edge, sibling })
}

/// Free-boundary energy `-J Σ_edges |Δσ| - J1 Σ_siblings |Δσ|`.
pub fn energy(config: &Configuration, tree: &FiniteTree, params: &CouplingParams) -> Result<f64> {
    let c = interaction_counts(config, tree)?;
    Ok(-params.j * c.edge as f64 - params.j1 * c.sibling as f64)
}

/// `exp(-beta H) = theta^edge * theta1^sibling`.
pub fn boltzmann_weight(config: &Configuration, tree: &FiniteTree, params: &ThetaParams) -> Result<f64> {
    let c = interaction_counts(config, tree)?;
    Ok(params.theta.powi(c.edge as i32) * params.theta1.powi(c.sibling as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    /// Sum over every configuration.
    Enumeration,
    /// Level-by-level recursion from the free-boundary seed; not an oracle.
    Recursion,
}

/// Partition functions conditioned on the root spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionVector {
    pub z: [f64; 3],
    pub depth: usize,
    pub method: PartitionMethod,
}

impl PartitionVector {
    pub fn total(&self) -> f64 {
        self.z.iter().sum()
    }

    /// `(Z1/Z0, Z2/Z0)`.
    pub fn ratios(&self) -> Result<RootRatios> {
        RootRatios::new(self.z[1] / self.z[0], self.z[2] / self.z[0])
    }
}

/// Exact configuration counts grouped by root spin and by the pair of
/// exponents `(edge, sibling)` of `theta^edge * theta1^sibling`.
///
/// The table does not depend on the parameters, so one enumeration serves
/// every `(theta, theta1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightTable {
    depth: usize,
    max_edge: usize,
    max_sibling: usize,
    counts: [Vec<u64>; 3],
}

impl WeightTable {
    fn empty(tree: &FiniteTree) -> Self {
        let max_edge = 2 * tree.edge_count();
        let max_sibling = 2 * tree.sibling_pairs().len();
        let len = (max_edge + 1) * (max_sibling + 1);
        WeightTable {
            depth: tree.depth(),
            max_edge,
            max_sibling,
            counts: [vec![0; len], vec![0; len], vec![0; len]],
        }
    }

    fn index(&self, edge: usize, sibling: usize) -> usize {
        edge * (self.max_sibling + 1) + sibling
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of configurations with the given root spin and exponents.
    pub fn count(&self, root: Spin, edge: usize, sibling: usize) -> u64 {
        if edge > self.max_edge || sibling > self.max_sibling {
            return 0;
        }
        self.counts[root.value() as usize][self.index(edge, sibling)]
    }

    /// Number of configurations with the given root spin.
    pub fn configurations(&self, root: Spin) -> u64 {
        self.counts[root.value() as usize].iter().sum()
    }

    pub fn evaluate(&self, params: &ThetaParams) -> [f64; 3] {
        let theta_pow: Vec<f64> = (0..=self.max_edge).map(|a| params.theta.powi(a as i32)).collect();
        let theta1_pow: Vec<f64> = (0..=self.max_sibling).map(|b| params.theta1.powi(b as i32)).collect();
        let mut z = [0.0; 3];
        for (zi, table) in z.iter_mut().zip(&self.counts) {
            for a in 0..=self.max_edge {
                let row = &table[a * (self.max_sibling + 1)..(a + 1) * (self.max_sibling + 1)];
                let inner: f64 = row.iter().zip(&theta1_pow).map(|(&n, p)| n as f64 * p).sum();
                *zi += theta_pow[a] * inner;
            }
        }
        z
    }

    fn merge(&mut self, other: &WeightTable) {
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
    }
}

fn check_enumeration_guard(depth: usize) -> Result<()> {
    let vertices = (1usize << (depth.min(40) + 1)) - 1;
    let feasible = 3u64
        .checked_pow(vertices as u32)
        .is_some_and(|n| n <= ENUMERATION_LIMIT);
    if depth > MAX_TREE_DEPTH || !feasible {
        return Err(Error::OracleInfeasible { depth, vertices });
    }
    Ok(())
}

/// Enumerates every configuration on `V_depth`.
///
/// Vertices are assigned in heap order, so when vertex `x` is assigned its
/// parent and (for a right child) its left sibling already carry spins. The
/// first few vertices form prefixes that are enumerated in parallel; counts
/// are integers, so the merge is exact.
pub fn enumerate_weight_table(depth: usize) -> Result<WeightTable> {
    check_enumeration_guard(depth)?;
    let tree = build_tree(depth)?;
    let n = tree.vertex_count();
    let prefix_len = n.min(3);
    let prefixes = 3usize.pow(prefix_len as u32);

    let partials: Vec<WeightTable> = (0..prefixes)
        .into_par_iter()
        .map(|code| {
            let mut table = WeightTable::empty(&tree);
            let mut spins = vec![0u8; n];
            let mut c = code;
            for s in spins.iter_mut().take(prefix_len) {
                *s = (c % 3) as u8;
                c /= 3;
            }
            let (mut edge, mut sibling) = (0usize, 0usize);
            for x in 1..prefix_len {
                let (de, ds) = local_terms(&spins, x);
                edge += de;
                sibling += ds;
            }
            visit(&mut table, &mut spins, prefix_len, edge, sibling);
            table
        })
        .collect();

    let mut table = WeightTable::empty(&tree);
    for p in &partials {
        table.merge(p);
    }
    Ok(table)
}

/// Terms created by assigning vertex `x` given all earlier vertices.
#[inline]
fn local_terms(spins: &[u8], x: usize) -> (usize, usize) {
    let s = spins[x];
    let parent = (x - 1) / 2;
    let edge = s.abs_diff(spins[parent]) as usize;
    let sibling = if x.is_multiple_of(2) {
        s.abs_diff(spins[x - 1]) as usize
    } else {
        0
    };
    (edge, sibling)
}

fn visit(table: &mut WeightTable, spins: &mut [u8], x: usize, edge: usize, sibling: usize) {
    if x == spins.len() {
        let idx = table.index(edge, sibling);
        table.counts[spins[0] as usize][idx] += 1;
        return;
    }
    for s in 0..3u8 {
        spins[x] = s;
        let (de, ds) = local_terms(spins, x);
        visit(table, spins, x + 1, edge + de, sibling + ds);
    }
}

static WEIGHT_TABLES: [OnceLock<WeightTable>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];

/// Cached [`enumerate_weight_table`] for the feasible depths.
pub fn weight_table(depth: usize) -> Result<&'static WeightTable> {
    check_enumeration_guard(depth)?;
    let cell = &WEIGHT_TABLES[depth];
    if let Some(t) = cell.get() {
        return Ok(t);
    }
    let table = enumerate_weight_table(depth)?;
    Ok(cell.get_or_init(|| table))
}

/// Root-conditioned partition functions by summing the Boltzmann weight of
/// every configuration (free boundary).
pub fn partition_vector_bruteforce(depth: usize, params: &ThetaParams) -> Result<PartitionVector> {
    let table = weight_table(depth)?;
    Ok(PartitionVector {
        z: table.evaluate(params),
        depth,
        method: PartitionMethod::Enumeration,
    })
}

/// Pair weight `theta^(|i-j| + |i-m|) * theta1^|j-m|` for a parent with spin
/// `i` and successors with spins `j`, `m`.
pub fn successor_pair_weight(params: &ThetaParams, i: Spin, j: Spin, m: Spin) -> f64 {
    params.theta.powi((i.distance(j) + i.distance(m)) as i32) * params.theta1.powi(j.distance(m) as i32)
}

/// Partition functions by the level recursion
/// `Z_i(n) = Σ_{j,m} w(i; j, m) Z_j(n-1) Z_m(n-1)` with `Z_i(0) = 1`.
///
/// Works for any depth up to [`MAX_TREE_DEPTH`] but is the thing the oracle
/// checks, so the result is tagged [`PartitionMethod::Recursion`].
pub fn partition_vector_recursive(depth: usize, params: &ThetaParams) -> Result<PartitionVector> {
    if depth > MAX_TREE_DEPTH {
        return Err(Error::DepthTooLarge {
            depth,
            max: MAX_TREE_DEPTH,
        });
    }
    let mut z = [1.0f64; 3];
    for _ in 0..depth {
        let mut next = [0.0; 3];
        for i in Spin::ALL {
            next[i.value() as usize] = Spin::ALL
                .iter()
                .flat_map(|&j| Spin::ALL.iter().map(move |&m| (j, m)))
                .map(|(j, m)| successor_pair_weight(params, i, j, m) * z[j.value() as usize] * z[m.value() as usize])
                .sum();
        }
        let magnitude = next.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !magnitude.is_finite() || next.iter().any(|v| *v <= 0.0) {
            return Err(Error::NonFinite {
                context: "partition recursion",
                magnitude,
            });
        }
        z = next;
    }
    Ok(PartitionVector {
        z,
        depth,
        method: PartitionMethod::Recursion,
    })
}

/// Root probabilities `(1, u, v) / (1 + u + v)`.
pub fn root_marginal(ratios: &RootRatios) -> [f64; 3] {
    let norm = 1.0 + ratios.u() + ratios.v();
    [1.0 / norm, ratios.u() / norm, ratios.v() / norm]
}
