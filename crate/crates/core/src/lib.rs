//! Three-state SOS model with nearest-neighbour and one-level
//! next-nearest-neighbour interactions on the binary Cayley tree.
//!
//! The crate computes root-ratio recursions and their brute-force ground
//! truth, translation-invariant fixed points and their stability, and the
//! period-2 analysis on the invariant line `v = 1`.

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod newton;
pub mod period_two;
pub mod phase;
pub mod poly;
pub mod report;
pub mod svg;

pub use dynamics::{
    classical_reduction_residual, f_on_i, iterate_orbit, step_f, Orbit, OrbitStatus, RatioMap, RootRatios, ScalarMap,
};
pub use error::{Error, Result};
pub use lattice::{
    build_tree, energy, partition_vector_bruteforce, partition_vector_recursive, root_marginal, Configuration,
    CouplingParams, FiniteTree, PartitionVector, Spin, ThetaParams,
};
pub use period_two::{
    descartes_no_positive_roots, extract_period2_quadratic, extract_period2_quadratic_exact, period2_positive_roots,
    period2_search_2d, printed_abc, scan_region_s, QuadraticABC, RegionScanReport,
};
pub use phase::{
    cubic_coefficients, diagnose_phase, f_prime, fixed_points_2d, positive_real_roots, scan_phase, CubicCoefficients,
    FixedPointOnI, PhaseDiagnosis, PhaseScanRow, Stability,
};
