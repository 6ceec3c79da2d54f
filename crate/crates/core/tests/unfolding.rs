use hml_core::ensemble::generate;
use hml_core::heavy_tail::TailLaw;
use hml_core::unfolding::*;
use proptest::prelude::*;

fn table(map: &UnfoldMap) -> Vec<(String, usize)> {
    map.addresses
        .iter()
        .zip(&map.phi)
        .map(|(a, &p)| (a.iter().map(|d| d.to_string()).collect::<String>(), p + 1))
        .collect()
}

fn want(rows: &[(&str, usize)]) -> Vec<(String, usize)> {
    rows.iter().map(|&(a, p)| (a.to_string(), p)).collect()
}

#[test]
fn worked_example_plus() {
    let x = example_fixture();
    let map = unfold(&x, 2, 2, 2, Direction::Plus).unwrap();
    assert_eq!(
        table(&map),
        want(&[("", 3), ("1", 2), ("2", 5), ("11", 5), ("12", 1), ("21", 4), ("22", 2)])
    );
}

#[test]
fn worked_example_minus() {
    let x = example_fixture();
    let map = unfold(&x, 2, 2, 2, Direction::Minus).unwrap();
    assert_eq!(
        table(&map),
        want(&[("", 3), ("1", 2), ("2", 1), ("11", 4), ("12", 5), ("21", 2), ("22", 1)])
    );
}

#[test]
fn worked_example_network() {
    let x = example_fixture();
    let map = unfold(&x, 2, 2, 2, Direction::Plus).unwrap();
    let w = network_weights(&x, &map, NetworkScaling::Raw).unwrap();
    let cases: [(&[u32], &[u32], f64); 10] = [
        (&[], &[1], 10.3),
        (&[], &[2], 3.0),
        (&[1], &[1, 1], 4.7),
        (&[1], &[1, 2], 3.2),
        (&[2], &[2, 1], 11.0),
        (&[2], &[2, 2], 1.7),
        (&[1], &[2, 1], 3.1),
        (&[1], &[2, 2], 1.2),
        (&[2], &[1, 1], 2.0),
        (&[2], &[1, 2], 0.2),
    ];
    for (a, b, v) in cases {
        assert_eq!(w.weight(a, b), v, "{a:?}-{b:?}");
        assert_eq!(w.weight(b, a), v);
    }
    let bended: Vec<f64> = w.bended().map(|e| e.weight).collect();
    for v in [3.1, 1.2, 2.0, 0.2] {
        assert!(bended.contains(&v));
    }
}

#[test]
fn parity_rule_for_psi() {
    let x = example_fixture();
    let map = unfold(&x, 2, 2, 2, Direction::Plus).unwrap();
    for (k, a) in map.addresses.iter().enumerate() {
        let want = if a.len() % 2 == 0 { map.phi[k] } else { map.phi[k] + 5 };
        assert_eq!(map.psi[k], want);
        assert_eq!(map.is_row(k), a.len() % 2 == 0);
    }
}

#[test]
fn single_step_is_row_argmax() {
    let x = example_fixture();
    for i0 in 0..5 {
        let map = unfold(&x, i0, 1, 1, Direction::Plus).unwrap();
        let best = (0..5)
            .filter(|&j| j != i0)
            .max_by(|&a, &b| x.get(i0, a).total_cmp(&x.get(i0, b)).then(b.cmp(&a)))
            .unwrap();
        assert_eq!(map.phi_at(&[1]), Some(best));
    }
}

#[test]
fn bended_edges_shrink_with_n() {
    let r = local_convergence_report(0.5, &[500, 2000], 3, 2, 200, LocalTarget::AToT0, 2000, 12).unwrap();
    let small = r.value(500, "median_max_bended_edge").unwrap();
    let large = r.value(2000, "median_max_bended_edge").unwrap();
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn root_edge_law_matches_tree_at_each_n() {
    let r = local_convergence_report(0.5, &[500, 1000, 2000], 2, 2, 400, LocalTarget::BToHatT, 2000, 13).unwrap();
    let crit = 1.63 * (2.0f64 / 400.0).sqrt();
    for n in [500, 1000, 2000] {
        let ks = r.value(n, "ks_root_top_edge").unwrap();
        assert!(ks < crit, "n={n}: {ks}");
    }
}

// The finite-n bias of the top normalized entry is O(1/n), far below the
// two-sample noise floor at any affordable trial count, so the ordering
// of the three distances is decided by noise. Run with --ignored.
#[test]
#[ignore = "trend below Monte Carlo resolution"]
fn root_edge_law_approaches_tree() {
    let r = local_convergence_report(0.5, &[500, 1000, 2000], 2, 2, 400, LocalTarget::BToHatT, 2000, 13).unwrap();
    let ks: Vec<f64> = [500, 1000, 2000].iter().map(|&n| r.value(n, "ks_root_top_edge").unwrap()).collect();
    assert!(ks.windows(2).all(|w| w[1] < w[0]), "{ks:?}");
}

#[test]
fn large_matrix_top_edge_is_pd_top() {
    // At n = 10⁴ the top normalized entry of a row is close to the top PD(α) weight.
    let r = local_convergence_report(0.5, &[10_000], 1, 2, 300, LocalTarget::BToHatT, 2000, 14).unwrap();
    let ks = r.value(10_000, "ks_root_top_edge").unwrap();
    assert!(ks < 1.63 * (2.0f64 / 300.0).sqrt(), "{ks}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn maps_are_consistent(alpha in 0.1f64..0.9, seed in any::<u64>(), b in 1usize..4, h in 1usize..4, i0 in 0usize..40) {
        let n = 40;
        let law = TailLaw::inverse_power(alpha).unwrap();
        let x = generate(n, &law, seed).unwrap().x;
        let plus = unfold(&x, i0, b, h, Direction::Plus).unwrap();
        prop_assert_eq!(plus.phi[0], i0);
        let minus = unfold(&x, i0, b, h, Direction::Minus).unwrap();
        let flipped = unfold(&x.transpose(), i0, b, h, Direction::Plus).unwrap();
        prop_assert_eq!(&minus.phi, &flipped.phi);
        // Vertices of one type are revealed injectively.
        for row in [true, false] {
            let mut seen: Vec<usize> = (0..plus.phi.len()).filter(|&k| plus.is_row(k) == row).map(|k| plus.phi[k]).collect();
            let m = seen.len();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen.len(), m);
        }
        let w = network_weights(&x, &plus, NetworkScaling::Raw).unwrap();
        for e in &w.edges {
            let (a, b) = (&plus.addresses[e.u], &plus.addresses[e.v]);
            prop_assert_eq!(w.weight(a, b), w.weight(b, a));
        }
    }
}
