use proptest::prelude::*;

use sos_tree::lattice::{
    build_tree, energy, interaction_counts, partition_vector_bruteforce, partition_vector_recursive, root_marginal,
    weight_table, Configuration, CouplingParams, FiniteTree, Spin, ThetaParams,
};
use sos_tree::Error;

fn params(t: f64, t1: f64) -> ThetaParams {
    ThetaParams::new(t, t1).unwrap()
}

// Z_i at depth 1 written out: the root has two leaves j, m that are siblings.
fn depth_one_by_hand(t: f64, t1: f64) -> [f64; 3] {
    let mut z = [0.0; 3];
    for (i, zi) in z.iter_mut().enumerate() {
        for j in 0..3i32 {
            for m in 0..3i32 {
                let i = i as i32;
                let edge = (i - j).abs() + (i - m).abs();
                let sib = (j - m).abs();
                *zi += t.powi(edge) * t1.powi(sib);
            }
        }
    }
    z
}

#[test]
fn depth_one_matches_hand_sum() {
    for (t, t1) in [(0.2, 0.5), (2.0, 1.0), (1.3, 0.1)] {
        let z = partition_vector_bruteforce(1, &params(t, t1)).unwrap().z;
        let hand = depth_one_by_hand(t, t1);
        for k in 0..3 {
            assert!((z[k] - hand[k]).abs() <= 1e-14 * hand[k], "{t} {t1}: {z:?} vs {hand:?}");
        }
    }
}

#[test]
fn weight_tables_count_every_configuration() {
    for depth in 0..=3 {
        let tree = build_tree(depth).unwrap();
        let table = weight_table(depth).unwrap();
        let per_root = 3u64.pow(tree.vertex_count() as u32 - 1);
        for s in Spin::ALL {
            assert_eq!(table.configurations(s), per_root);
        }
    }
}

#[test]
fn uniform_parameters_give_unit_ratios() {
    for depth in 1..=3 {
        let p = params(1.0, 1.0);
        let a = partition_vector_bruteforce(depth, &p).unwrap().ratios().unwrap();
        let b = partition_vector_recursive(depth, &p).unwrap().ratios().unwrap();
        assert_eq!((a.u(), a.v()), (1.0, 1.0));
        assert_eq!((b.u(), b.v()), (1.0, 1.0));
    }
}

#[test]
fn enumeration_guard() {
    assert!(matches!(
        partition_vector_bruteforce(4, &params(1.0, 1.0)),
        Err(Error::OracleInfeasible { depth: 4, .. })
    ));
    assert!(partition_vector_recursive(6, &params(0.5, 0.5)).is_ok());
}

#[test]
fn recursion_is_symmetric_under_spin_flip() {
    // σ ↦ 2 − σ preserves every |Δσ|, so Z_0 = Z_2 at every depth.
    let z = partition_vector_recursive(8, &params(0.7, 1.9)).unwrap().z;
    assert!((z[0] - z[2]).abs() <= 1e-13 * z[0]);
}

fn mirror_at(tree: &FiniteTree, config: &Configuration, x: usize) -> Configuration {
    let mut out = config.clone();
    let (left, right) = (2 * x + 1, 2 * x + 2);
    let mut k = 0;
    loop {
        let width = 1usize << k;
        let l0 = (left + 1) * width - 1;
        let r0 = (right + 1) * width - 1;
        if r0 + width > tree.vertex_count() {
            break;
        }
        for off in 0..width {
            out.set(l0 + off, config.get(r0 + off).unwrap());
            out.set(r0 + off, config.get(l0 + off).unwrap());
        }
        k += 1;
    }
    out
}

fn config_strategy(n: usize) -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::vec(0i64..3, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn recursion_matches_enumeration(t in 0.05f64..20.0, t1 in 0.05f64..20.0, depth in 1usize..=3) {
        let p = params(t, t1);
        let a = partition_vector_bruteforce(depth, &p).unwrap().ratios().unwrap();
        let b = partition_vector_recursive(depth, &p).unwrap().ratios().unwrap();
        prop_assert!((a.u() - b.u()).abs() <= 1e-10 * a.u());
        prop_assert!((a.v() - b.v()).abs() <= 1e-10 * a.v());
    }

    #[test]
    fn energy_is_invariant_under_subtree_swap(values in config_strategy(15), x in 0usize..3, j in -2.0f64..2.0, j1 in -2.0f64..2.0) {
        let tree = build_tree(3).unwrap();
        let c = Configuration::from_values(&values).unwrap();
        let m = mirror_at(&tree, &c, x);
        let cp = CouplingParams::new(j, j1, 1.0).unwrap();
        let e1 = energy(&c, &tree, &cp).unwrap();
        let e2 = energy(&m, &tree, &cp).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-12);
        prop_assert_eq!(interaction_counts(&c, &tree).unwrap(), interaction_counts(&m, &tree).unwrap());
    }

    #[test]
    fn energy_is_invariant_under_spin_flip(values in config_strategy(7)) {
        let tree = build_tree(2).unwrap();
        let c = Configuration::from_values(&values).unwrap();
        let flipped: Vec<i64> = values.iter().map(|v| 2 - v).collect();
        let f = Configuration::from_values(&flipped).unwrap();
        let cp = CouplingParams::new(0.7, -1.3, 2.0).unwrap();
        prop_assert_eq!(energy(&c, &tree, &cp).unwrap(), energy(&f, &tree, &cp).unwrap());
    }

    #[test]
    fn marginals_are_a_distribution(u in 1e-3f64..1e3, v in 1e-3f64..1e3) {
        let m = root_marginal(&sos_tree::RootRatios::new(u, v).unwrap());
        prop_assert!(m.iter().all(|&p| p > 0.0));
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
    }
}
