mod common;

use common::{mean_se, rng};
use hml_core::heavy_tail::{sample_omega, sample_pd, sample_ppp};
use hml_core::linalg::FaerBackend;
use hml_core::measure::linear_grid;
use hml_core::pwit::*;
use hml_core::{Complex64, Error};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn exhaustive(b: usize, h: usize) -> TreeBudget {
    let mut t = TreeBudget::new(b, h);
    t.prune_tol = 0.0;
    t
}

#[test]
fn t0_root_edges_are_ranked_ppp() {
    let tree = build_tree_keyed(0.5, TreeVariant::T0, exhaustive(2, 1), None, 11).unwrap();
    assert_eq!(tree.len(), 3);
    let w: Vec<f64> = tree.children(0).map(|k| tree.nodes[k].weight.re).collect();
    assert!(w[0] >= w[1] && w[1] > 0.0);
    let tree = build_tree_keyed(0.5, TreeVariant::T0, exhaustive(3, 2), None, 11).unwrap();
    assert_eq!(tree.len(), 1 + 3 + 9);
    for k in 0..tree.len() {
        let w: Vec<f64> = tree.children(k).map(|j| tree.nodes[j].weight.re).collect();
        assert!(w.windows(2).all(|p| p[0] >= p[1]));
        for j in tree.children(k) {
            assert_eq!(tree.nodes[j].weight.re, tree.nodes[j].xi_in);
        }
    }
}

#[test]
fn hat_plus_root_edges_are_pd() {
    for seed in 0..50 {
        let tree = build_tree_keyed(0.5, TreeVariant::HatPlus, exhaustive(3, 2), None, seed).unwrap();
        let s = tree.nodes[0].row_sum;
        let mut total = 0.0;
        for j in tree.children(0) {
            let n = &tree.nodes[j];
            assert!((n.weight.re - n.xi_in / s).abs() < 1e-15);
            total += n.weight.re;
        }
        assert!(total < 1.0);
    }
    // Pooled top weight against a direct PD sampler.
    let mut r = rng(5);
    let direct: Vec<f64> = (0..4000).map(|_| sample_pd(0.5, 2000, &mut r).unwrap().zeta[0]).collect();
    let tree: Vec<f64> = (0..4000)
        .map(|k| {
            let t = build_tree_keyed(0.5, TreeVariant::HatPlus, TreeBudget::new(1, 1), None, 100_000 + k).unwrap();
            t.nodes[1].weight.re
        })
        .collect();
    let d = hml_core::spectra::kolmogorov_distance(&direct, &tree).unwrap();
    assert!(d < 1.63 * (2.0f64 / 4000.0).sqrt(), "KS {d}");
}

#[test]
fn weights_lie_in_unit_interval_and_identity_holds() {
    for variant in [TreeVariant::HatPlus, TreeVariant::HatMinus, TreeVariant::RankedPlus, TreeVariant::RankedMinus] {
        for (alpha, z) in [(0.3, None), (0.5, Some(c(0.4, 0.2))), (0.8, None)] {
            let tree = build_tree_keyed(alpha, variant, TreeBudget::new(20, 4), z, 3).unwrap();
            assert!(tree.consistency_residual() < 1e-12);
            for n in tree.nodes.iter().skip(1).filter(|n| n.child_index != 0) {
                assert!(n.weight.re > 0.0 && n.weight.re < 1.0 && n.weight.im == 0.0);
            }
            for k in 0..tree.len() {
                if tree.nodes[k].role == hml_core::pwit::Role::Row {
                    let s: f64 = tree.children(k).filter(|&j| tree.nodes[j].child_index != 0).map(|j| tree.nodes[j].weight.re).sum();
                    assert!(s < 1.0);
                }
            }
        }
    }
}

#[test]
fn shift_edges_follow_parity() {
    let z = c(0.3, 0.7);
    let tree = build_tree_keyed(0.5, TreeVariant::HatPlus, TreeBudget::new(5, 3), Some(z), 9).unwrap();
    let mut seen = 0;
    for k in 0..tree.len() {
        let n = &tree.nodes[k];
        if n.child_index != 0 || n.parent.is_none() {
            continue;
        }
        seen += 1;
        let parent = &tree.nodes[n.parent.unwrap() as usize];
        let want = match parent.role {
            hml_core::pwit::Role::Row => -z,
            hml_core::pwit::Role::Column => -z.conj(),
        };
        assert_eq!(n.weight, want);
    }
    assert!(seen > 5);
}

#[test]
fn ranked_minus_children_are_sorted() {
    let tree = build_tree_keyed(0.5, TreeVariant::RankedMinus, TreeBudget::new(10, 3), None, 4).unwrap();
    let w: Vec<f64> = tree.children(0).map(|j| tree.nodes[j].weight.re).collect();
    assert_eq!(w.len(), 10);
    assert!(w.windows(2).all(|p| p[0] >= p[1]));
}

#[test]
fn resolvent_small_cases() {
    let single = build_tree_keyed(0.5, TreeVariant::T0, TreeBudget::new(1, 1), None, 0).unwrap();
    let mut lone = single.clone();
    lone.nodes.truncate(1);
    let eta = c(0.3, 1.2);
    assert!((root_resolvent(&lone, eta).unwrap() + eta.inv()).norm() < 1e-15);
    let mut one = single;
    one.nodes[1].weight = c(1.0, 0.0);
    let r = root_resolvent(&one, c(0.0, 1.0)).unwrap();
    assert!((r - c(0.0, 0.5)).norm() < 1e-15);
    assert!(matches!(root_resolvent(&one, c(1.0, 0.0)), Err(Error::Domain { .. })));
}

#[test]
fn recursion_matches_dense_solve_at_full_size() {
    let tree = build_tree_keyed(0.5, TreeVariant::HatPlus, TreeBudget::new(50, 4), Some(c(0.5, 0.0)), 1).unwrap();
    assert!(tree.len() > 100);
    for eta in [c(0.0, 1.0), c(0.7, 0.05), c(-2.0, 0.3)] {
        let r = root_resolvent(&tree, eta).unwrap();
        let d = dense_root_resolvent(&tree, eta, &FaerBackend).unwrap();
        assert!((r - d).norm() < 1e-9, "{r} vs {d}");
    }
}

#[test]
fn truncation_stability() {
    let eta = c(0.0, 2.0);
    let mut worst = 0.0f64;
    for key in 0..20 {
        let base = build_tree_keyed(0.5, TreeVariant::HatPlus, TreeBudget::new(100, 6), None, key).unwrap();
        let wide = build_tree_keyed(0.5, TreeVariant::HatPlus, TreeBudget::new(150, 6), None, key).unwrap();
        let deep = build_tree_keyed(0.5, TreeVariant::HatPlus, TreeBudget::new(100, 8), None, key).unwrap();
        let r = root_resolvent(&base, eta).unwrap();
        worst = worst
            .max((root_resolvent(&wide, eta).unwrap() - r).norm())
            .max((root_resolvent(&deep, eta).unwrap() - r).norm());
    }
    assert!(worst < 1e-3, "max change {worst}");
}

#[test]
fn unbounded_support_event_frequency() {
    let mut r = rng(8);
    let trials = 20_000;
    let hits: Vec<f64> = (0..trials)
        .map(|_| {
            let p = sample_ppp(0.5, 1, &mut r).unwrap();
            if p.xi[0] >= 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let (m, se) = mean_se(&hits);
    let bound = (-1.0f64).exp();
    assert!(m > bound - 3.0 * se, "{m} vs {bound}");
}

#[test]
fn catalan_and_moment_bound() {
    assert_eq!(catalan(2), 2);
    assert_eq!(catalan(3), 5);
    let b = moment_bound_c(0.5, c(0.0, 0.0), 1, 20_000, 2000, 1).unwrap();
    assert!(b.c_estimate.mean >= 1.0);
    assert!(b.c_estimate.mean <= 2.0 + 3.0 * b.c_estimate.se);
    assert!(moment_bound_c(0.5, c(0.0, 0.0), 0, 10, 10, 1).is_err());
}

#[test]
fn limit_measure_moments_and_symmetry() {
    let grid = linear_grid(-4.0, 4.0, 81).unwrap();
    let mut budget = TreeBudget::new(100, 8);
    budget.series_terms = 500;
    let est = expected_limit_measure(0.5, c(0.0, 0.0), 800, budget, &grid, 0.05, 3).unwrap();
    est.validate().unwrap();
    for k in 0..grid.len() {
        assert!((est.density[k] - est.density[grid.len() - 1 - k]).abs() < 1e-12);
    }
    // Sampler oracle for the second moment: ½(E Σζ² + E Σω²).
    let mut r = rng(4);
    let s: Vec<f64> = (0..20_000)
        .map(|_| {
            let z2: f64 = sample_pd(0.5, 2000, &mut r).unwrap().zeta.iter().map(|x| x * x).sum();
            let w2: f64 = sample_omega(0.5, 2000, &mut r).unwrap().iter().map(|x| x * x).sum();
            0.5 * (z2 + w2)
        })
        .collect();
    let (oracle, ose) = mean_se(&s);
    let m2 = est.moments.iter().find(|m| m.0 == 2).unwrap().1;
    assert!((m2.mean - oracle).abs() < 3.0 * (m2.se.powi(2) + ose * ose).sqrt(), "{m2:?} vs {oracle}±{ose}");
    let m4 = est.moments.iter().find(|m| m.0 == 4).unwrap().1;
    let b = moment_bound_c(0.5, c(0.0, 0.0), 2, 20_000, 2000, 6).unwrap();
    let slack = 3.0 * (m4.se.powi(2) + (2.0 * b.c_estimate.se).powi(2)).sqrt();
    assert!(m4.mean <= b.path_bound + slack, "m4 {m4:?} vs {:?}", b);
}

#[test]
fn limit_measure_is_radial() {
    let grid = linear_grid(0.0, 4.0, 41).unwrap();
    let mut budget = TreeBudget::new(100, 6);
    budget.series_terms = 500;
    let a = expected_limit_measure(0.5, c(0.0, 0.6), 400, budget, &grid, 0.1, 21).unwrap();
    let b = expected_limit_measure(0.5, c(0.6, 0.0), 400, budget, &grid, 0.1, 22).unwrap();
    for k in 0..grid.len() {
        let tol = 4.0 * (a.standard_error[k].powi(2) + b.standard_error[k].powi(2)).sqrt();
        assert!((a.density[k] - b.density[k]).abs() <= tol, "x {} : {} vs {}", grid[k], a.density[k], b.density[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn recursion_matches_dense(alpha in 0.1f64..0.9, b in 1usize..=50, h in 1usize..=4, key in any::<u64>(),
                               er in -3.0f64..3.0, ei in 0.05f64..3.0, zr in -1.0f64..1.0, zi in -1.0f64..1.0, shift in any::<bool>()) {
        let mut budget = TreeBudget::new(b, h);
        budget.max_nodes = 800;
        let z = shift.then(|| c(zr, zi));
        match build_tree_keyed(alpha, TreeVariant::HatPlus, budget, z, key) {
            Ok(tree) => {
                let eta = c(er, ei);
                let r = root_resolvent(&tree, eta).unwrap();
                let d = dense_root_resolvent(&tree, eta, &FaerBackend).unwrap();
                prop_assert!((r - d).norm() < 1e-9);
                prop_assert!(r.im > 0.0);
                prop_assert!(tree.consistency_residual() < 1e-12);
            }
            Err(Error::Capacity(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn resolvent_stays_in_upper_half_plane(alpha in 0.1f64..0.9, key in any::<u64>(), er in -10.0f64..10.0, ei in 1e-6f64..10.0) {
        let tree = build_tree_keyed(alpha, TreeVariant::HatMinus, TreeBudget::new(30, 4), Some(c(0.5, 0.5)), key).unwrap();
        prop_assert!(root_resolvent(&tree, c(er, ei)).unwrap().im > 0.0);
    }
}
