use proptest::prelude::*;
use sgm_core::feasibility::*;
use sgm_core::model::hessian_with;
use sgm_core::FrequencySet;

fn standard2() -> FrequencySet {
    FrequencySet::standard(2).unwrap()
}

/// Rescales `dir` onto the boundary of `Θ_1^lit`.
fn onto_lit_boundary(f: &FrequencySet, dir: &[f64]) -> Vec<f64> {
    let load = axis_loads(f, dir).into_iter().fold(0.0, f64::max);
    dir.iter().map(|d| d / load).collect()
}

/// Largest `s` with `s·dir ∈ Θ_M°`, by bisection on `[0, hi]`.
fn lattice_edge(f: &FrequencySet, dir: &[f64], m: u32, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let t: Vec<f64> = dir.iter().map(|d| d * mid).collect();
        if lattice_feasible(f, &t, m).unwrap().feasible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn nonzero_dir(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lit_boundary_is_inside_closure(dir in nonzero_dir(7)) {
        let f = standard2();
        let theta = onto_lit_boundary(&f, &dir);
        prop_assert!(lit_margin(&f, &theta, 1.0).unwrap().abs() < 1e-12);
        prop_assert!(min_eig_grid(&f, &theta, 201).unwrap() >= -1e-8);
    }

    #[test]
    fn lattice_members_are_interior(dir in nonzero_dir(7), extra in 0u32..4, frac in 0.05f64..0.999) {
        let f = standard2();
        let m = f.u_max() + 1 + extra;
        let edge = lattice_edge(&f, &dir, m, 4.0);
        let theta: Vec<f64> = dir.iter().map(|d| d * edge * frac).collect();
        prop_assert!(lattice_feasible(&f, &theta, m).unwrap().feasible);
        prop_assert!(min_eig_grid(&f, &theta, 401).unwrap() > 0.0);
    }

    #[test]
    fn lit_margin_is_affine_in_tau(dir in nonzero_dir(7), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let f = standard2();
        let ma = lit_margin(&f, &dir, a).unwrap();
        let mb = lit_margin(&f, &dir, b).unwrap();
        prop_assert!((mb - ma - (b - a)).abs() < 1e-12);
    }

    #[test]
    fn km_scaling_inverts(dir in nonzero_dir(7), m in 3u32..40) {
        let f = standard2();
        let s = scale_km(&f, &dir, m).unwrap();
        let back: Vec<f64> = s.iter().zip(km_factors(&f, m).unwrap()).map(|(v, k)| v * k).collect();
        for (x, y) in back.iter().zip(&dir) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn fejer_identity(
        theta in proptest::collection::vec(-0.3f64..0.3, 7),
        x in proptest::collection::vec(0.0f64..1.0, 2),
        extra in prop::sample::select(vec![0u32, 2]),
    ) {
        let f = standard2();
        let m = f.u_max() + 1 + extra;
        let r = fejer_reconstruct(&f, &theta, m, &x).unwrap();
        prop_assert!((r - hessian_with(&f, &theta, &x)).amax() < 1e-10);
    }

    #[test]
    fn fejer_weights_are_a_probability_vector(m in 1u32..12, x in -1.0f64..2.0) {
        let w: Vec<f64> = reconstruction_nodes(m).iter().map(|&xi| fejer_kernel(m, x - xi)).collect();
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_frequency_boundary_is_tight() {
    let f = standard2();
    for u in f.iter() {
        let g = FrequencySet::new(2, vec![u.to_vec()]).unwrap();
        let peak = *u.iter().max().unwrap() as f64;
        for sign in [1.0, -1.0] {
            let v = min_eig_grid(&g, &[sign / (peak * peak)], 201).unwrap();
            assert!(v.abs() <= 1e-6, "u = {u:?}, sign {sign}: {v}");
        }
    }
}

#[test]
fn ma2_region_matches_grid_sign() {
    let f = FrequencySet::new(2, vec![vec![1, 1], vec![2, 2]]).unwrap();
    let mut checked = 0;
    for i in 0..41 {
        for k in 0..41 {
            let t1 = -1.2 + 2.4 * i as f64 / 40.0;
            let t2 = -0.4 + 0.8 * k as f64 / 40.0;
            if ma2_margin(t1, t2).abs() < 1e-3 {
                continue;
            }
            let grid = min_eig_grid(&f, &[t1, t2], 201).unwrap();
            assert_eq!(ma2_feasible(t1, t2), grid >= 0.0, "({t1}, {t2}): {grid}");
            checked += 1;
        }
    }
    assert!(checked > 1500);
}

#[test]
fn example7_lit_margin() {
    let f = FrequencySet::new(3, vec![vec![1, 2, 0], vec![0, 1, 1], vec![1, 1, 1]]).unwrap();
    let m = lit_margin(&f, &[0.1, 0.3, 0.2], 1.0).unwrap();
    assert!((m - 0.1).abs() < 1e-14);
}

#[test]
fn validation_errors() {
    let f = standard2();
    assert!(RegionSpec::Lattice { m: 2 }.validate(&f).is_err());
    assert!(RegionSpec::Lattice { m: 3 }.validate(&f).is_ok());
    assert!(RegionSpec::Lit { tau: -0.1 }.validate(&f).is_err());
    assert!(lit_margin(&f, &[0.0; 3], 1.0).is_err());
    let five = FrequencySet::standard(5).unwrap();
    assert!(matches!(
        lattice_feasible(&five, &vec![0.0; five.len()], 40),
        Err(sgm_core::Error::ResourceCap { .. })
    ));
}
