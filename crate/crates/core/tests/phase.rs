use proptest::prelude::*;

use sos_tree::dynamics::{f_on_i, RatioMap};
use sos_tree::grid::{GridRanges, Spacing};
use sos_tree::lattice::ThetaParams;
use sos_tree::phase::{
    check_reported_roots, cubic_coefficients, diagnose_phase, f_prime, fixed_points_2d, on_line, positive_real_roots,
    scan_phase, CubicCoefficients, Stability, REPORTED_ROOTS, ROOT_TOL,
};

fn params(t: f64, t1: f64) -> ThetaParams {
    ThetaParams::new(t, t1).unwrap()
}

#[test]
fn trivial_point_has_one_fixed_point() {
    let d = diagnose_phase(&params(1.0, 1.0)).unwrap();
    assert_eq!(d.root_count(), 1);
    assert!((d.fixed_points[0].u - 1.0).abs() <= 1e-14);
    assert!(!d.transition);
}

#[test]
fn three_roots_at_the_transition_point() {
    let d = diagnose_phase(&params(0.2, 0.5)).unwrap();
    assert_eq!(d.root_count(), 3);
    assert!(d.transition && d.has_three_phase_pattern());
    let product: f64 = d.fixed_points.iter().map(|p| p.u).product();
    assert!((product - 2.5).abs() <= 1e-9);
    let sum: f64 = d.fixed_points.iter().map(|p| p.u).sum();
    assert!((sum - 19.8).abs() <= 1e-9);
    assert_eq!(d.criterion_witness, Some(d.fixed_points[1].u));
}

#[test]
fn reported_values_are_compared_not_trusted() {
    let check = check_reported_roots(&params(0.2, 0.5), &REPORTED_ROOTS).unwrap();
    assert_eq!(check.entries.len(), 3);
    // The reported product agrees with Vieta to the printed precision; the
    // individual values do not solve u = f(u).
    assert!((check.reported_product - check.vieta_product).abs() <= 1e-3 * check.vieta_product);
    assert!(!check.all_satisfy);
    assert!((check.derived_sum - check.vieta_sum).abs() <= 1e-9);
}

#[test]
fn two_dimensional_search_contains_the_line_roots() {
    let p = params(0.2, 0.5);
    let found = fixed_points_2d(&p, 16, 1e-12).unwrap();
    let line = on_line(&found.points, 1e-9);
    let d = diagnose_phase(&p).unwrap();
    assert_eq!(line.len(), 3);
    for (a, b) in line.iter().zip(&d.fixed_points) {
        assert!((a.u() - b.u).abs() <= 1e-9 * b.u.max(1.0));
    }
    let map = RatioMap::new(&p);
    for x in &found.points {
        let y = map.apply_raw(x.u(), x.v());
        assert!((y[0] - x.u()).abs().max((y[1] - x.v()).abs()) <= 1e-10 * x.u().max(x.v()));
    }
}

#[test]
fn scan_rows_follow_grid_order() {
    let spec = "0.1:0.5:5,0.1:1.0:10"
        .parse::<GridRanges>()
        .unwrap()
        .to_spec(Spacing::Linear, false)
        .unwrap();
    let rows = scan_phase(&spec).unwrap();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().any(|r| r.root_count == 3));
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r.theta, spec.theta.value(k / 10));
        assert_eq!(r.theta1, spec.theta1.value(k % 10));
        assert_eq!(r.roots.len(), r.root_count);
        assert_eq!(r.transition, r.root_count >= 2);
    }
}

#[test]
fn double_root_is_flagged() {
    // (u − 1)²(u − 3) = u³ − 5u² + 7u − 3
    let c = CubicCoefficients {
        c3: 1.0,
        c2: -5.0,
        c1: 7.0,
        c0: -3.0,
    };
    let r = positive_real_roots(&c, ROOT_TOL).unwrap();
    assert_eq!(r.roots.len(), 2);
    assert!(r.near_tangency);
}

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn fprime_matches_central_differences(u in log_range(1e-3, 1e3), t in log_range(0.05, 20.0), t1 in log_range(0.05, 20.0)) {
        let p = params(t, t1);
        let h = 1e-5 * u;
        let fd = (f_on_i(u + h, &p) - f_on_i(u - h, &p)) / (2.0 * h);
        let exact = f_prime(u, &p);
        prop_assert!((fd - exact).abs() <= 1e-6 * (exact.abs() + f_on_i(u, &p) / u), "{fd} {exact}");
    }

    #[test]
    fn roots_are_fixed_points_and_satisfy_vieta(t in log_range(0.02, 50.0), t1 in log_range(0.02, 50.0)) {
        let p = params(t, t1);
        let d = diagnose_phase(&p).unwrap();
        prop_assert!(d.root_count() >= 1 && d.root_count() <= 3);
        for fp in &d.fixed_points {
            let f = f_on_i(fp.u, &p);
            prop_assert!((f - fp.u).abs() <= 1e-9 * fp.u.max(1.0));
            prop_assert_eq!(fp.stability, Stability::classify(fp.derivative));
        }
        if d.root_count() == 3 && !d.near_tangency {
            let c = cubic_coefficients(&p);
            let product: f64 = d.fixed_points.iter().map(|x| x.u).product();
            prop_assert!((product - (-c.c0 / c.c3)).abs() <= 1e-8 * product);
            // An unstable middle root forces stable outer roots.
            if d.fixed_points[1].derivative > 1.0 {
                prop_assert!(d.fixed_points[0].derivative < 1.0 && d.fixed_points[2].derivative < 1.0);
            }
        }
    }

    #[test]
    fn roots_ignore_cubic_scaling(t in log_range(0.05, 20.0), t1 in log_range(0.05, 20.0), k in log_range(1e-6, 1e6)) {
        let c = cubic_coefficients(&params(t, t1));
        let a = positive_real_roots(&c, ROOT_TOL).unwrap();
        let b = positive_real_roots(&c.scaled(k), ROOT_TOL).unwrap();
        prop_assert_eq!(a.roots.len(), b.roots.len());
        for (x, y) in a.roots.iter().zip(&b.roots) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }
}
