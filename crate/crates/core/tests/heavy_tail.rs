mod common;

use common::*;
use hml_core::ensemble::{WeightAccess, WeightField};
use hml_core::heavy_tail::*;
use hml_core::spectra::{kolmogorov_distance, kolmogorov_distance_to};
use proptest::prelude::*;
use rand::Rng;
use statrs::function::gamma::gamma;

#[test]
fn q_and_gamma_match_reflection_formula() {
    let pi = std::f64::consts::PI;
    assert!((q_constant(0.5).unwrap() - 2.467401100272340).abs() < 1e-12);
    assert!((gamma_constant(0.5).unwrap() - 0.636619772367581).abs() < 1e-12);
    assert!((q_constant(0.5).unwrap() - (pi / 2.0).powi(2)).abs() < 1e-12);
    for k in 1..20 {
        let a = k as f64 / 20.0;
        let p = reflection_product(a);
        assert!((gamma_constant(a).unwrap() - 1.0 / p).abs() < 1e-12 * (1.0 / p));
        let q = p.powf(1.0 / a);
        assert!((q_constant(a).unwrap() - q).abs() < 1e-12 * q, "alpha {a}");
    }
}

#[test]
fn inverse_power_tail_frequency() {
    let law = TailLaw::inverse_power(0.5).unwrap();
    let mut r = rng(1);
    let draws = sample_heavy(&law, 1_000_000, &mut r);
    for (t, p) in [(100.0, 0.1), (1e4, 0.01)] {
        let hits = draws.iter().filter(|&&x| x >= t).count() as f64 / 1e6;
        let se = (p * (1.0 - p) / 1e6f64).sqrt();
        assert!((hits - p).abs() < 3.0 * se, "t={t}: {hits}");
    }
    assert!(draws.iter().all(|&x| x >= 1.0));
}

#[test]
fn inverse_power_tail_is_exact() {
    for a in [0.2, 0.5, 0.9] {
        let law = TailLaw::inverse_power(a).unwrap();
        for t in [1.0f64, 2.5, 40.0, 1e6] {
            // P(x >= t) = P(U <= t^{-α}), and the map is decreasing in U.
            let u = t.powf(-a);
            assert!((law.from_uniform(u) - t).abs() < 1e-9 * t);
        }
    }
}

#[test]
fn ppp_mean_count_above_one() {
    let mut r = rng(2);
    let trials = 100_000;
    let counts: Vec<f64> = (0..trials)
        .map(|_| {
            let p = sample_ppp(0.5, 2000, &mut r).unwrap();
            p.xi.iter().filter(|&&x| x >= 1.0).count() as f64
        })
        .collect();
    let (m, se) = mean_se(&counts);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn stable_laplace_transform() {
    let mut r = rng(3);
    let s = StableSampler::new(0.5).unwrap();
    let v: Vec<f64> = (0..1_000_000).map(|_| (-s.draw(&mut r)).exp()).collect();
    let (m, se) = mean_se(&v);
    let want = (-std::f64::consts::PI.sqrt()).exp();
    assert!((want - 0.169916).abs() < 1e-6);
    assert!((m - want).abs() < 3.0 * se, "{m} vs {want} ± {se}");
    assert!((stable_laplace(0.5, 1.0).unwrap() - want).abs() < 1e-15);
}

#[test]
fn stable_draws_positive_and_sum_stable() {
    for a in [0.2, 0.5, 0.8] {
        let mut r = rng(4);
        let s = StableSampler::new(a).unwrap();
        let v: Vec<f64> = (0..400_000)
            .map(|_| {
                let (x, y) = (s.draw(&mut r), s.draw(&mut r));
                assert!(x > 0.0 && y > 0.0);
                (-(x + y) / 2f64.powf(1.0 / a)).exp()
            })
            .collect();
        let (m, se) = mean_se(&v);
        let want = stable_laplace(a, 1.0).unwrap();
        assert!((m - want).abs() < 3.0 * se, "alpha {a}: {m} vs {want}");
    }
}

#[test]
fn compensated_ppp_sum_matches_stable_law() {
    for a in [0.3, 0.5, 0.8] {
        let mut r = rng(5);
        let v: Vec<f64> = (0..60_000)
            .map(|_| (-sample_ppp(a, 2000, &mut r).unwrap().compensated_sum()).exp())
            .collect();
        let (m, se) = mean_se(&v);
        let want = stable_laplace(a, 1.0).unwrap();
        assert!((m - want).abs() < 3.0 * se, "alpha {a}: {m} vs {want} ± {se}");
    }
}

#[test]
fn tail_compensation_mean_matches_simulation() {
    // Given x_N, the tail is a PPP on (x_N, ∞); simulate a long stretch of it.
    let a = 0.6;
    let idx = TailIndex::new(a).unwrap();
    let mut r = rng(6);
    let xn = 50.0;
    let v: Vec<f64> = (0..4000)
        .map(|_| {
            let mut t = xn;
            let mut s = 0.0;
            for _ in 0..200_000 {
                t += -r.random::<f64>().ln();
                s += idx.inv_pow(t);
            }
            s + idx.tail_mean(t)
        })
        .collect();
    let (m, se) = mean_se(&v);
    let want = a / (1.0 - a) * xn.powf(-(1.0 - a) / a);
    assert!((idx.tail_mean(xn) - want).abs() < 1e-14);
    assert!((m - want).abs() < 3.0 * se + 1e-9, "{m} vs {want}");
}

fn pd_second_moment_quadrature(a: f64) -> f64 {
    // E Σ ζ² = ∫ θ E[e^{-θS}] ∫ t² e^{-θt} α t^{-α-1} dt dθ
    //        = α Γ(2-α) ∫ θ^{α-1} exp(-Γ(1-α) θ^α) dθ.
    let c = gamma(1.0 - a);
    a * gamma(2.0 - a) * half_line(|th| th.powf(a - 1.0) * (-c * th.powf(a)).exp(), -200.0, 30.0)
}

#[test]
fn pd_second_moment_against_quadrature() {
    let a = 0.5;
    let oracle = pd_second_moment_quadrature(a);
    assert!((oracle - (1.0 - a)).abs() < 1e-6, "{oracle}");
    let mut r = rng(7);
    let v: Vec<f64> = (0..100_000)
        .map(|_| sample_pd(a, 2000, &mut r).unwrap().zeta.iter().map(|z| z * z).sum())
        .collect();
    let (m, se) = mean_se(&v);
    assert!((m - oracle).abs() < 3.0 * se, "{m} vs {oracle} ± {se}");
}

#[test]
fn omega_mean_sum_is_one() {
    let mut r = rng(8);
    let v: Vec<f64> = (0..100_000)
        .map(|_| sample_omega(0.5, 2000, &mut r).unwrap().iter().sum())
        .collect();
    let (m, se) = mean_se(&v);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn omega_exponential_moment_matches_campbell() {
    let (a, lambda) = (0.5, 0.1);
    let q = q_constant(a).unwrap();
    let integral = half_line(
        |t| ((2.0 * lambda * t / (t + q)).exp() - 1.0) * a * t.powf(-1.0 - a),
        -80.0,
        80.0,
    );
    let want = integral.exp();
    let mut r = rng(9);
    let v: Vec<f64> = (0..100_000)
        .map(|_| {
            let w = sample_omega(a, 2000, &mut r).unwrap();
            (2.0 * lambda * w.iter().sum::<f64>()).exp()
        })
        .collect();
    let (m, se) = mean_se(&v);
    assert!((m - want).abs() < 3.0 * se, "{m} vs {want} ± {se}");
}

#[test]
fn omega_entries_ranked_in_unit_interval() {
    let mut r = rng(10);
    let w = sample_omega(0.7, 500, &mut r).unwrap();
    assert!(w.iter().all(|&x| x > 0.0 && x < 1.0));
    assert!(w.windows(2).all(|p| p[0] > p[1]));
}

#[test]
fn scaled_row_order_statistics_match_ppp() {
    let (a, n, trials) = (0.5, 10_000usize, 10_000u64);
    let law = TailLaw::inverse_power(a).unwrap();
    let an = law.scale(n);
    let mut tops: Vec<Vec<f64>> = vec![Vec::new(); 5];
    let mut row = vec![0.0; n];
    for t in 0..trials {
        let mut r = rng(1000 + t);
        for x in row.iter_mut() {
            *x = law.from_uniform(1.0 - r.random::<f64>());
        }
        row.select_nth_unstable_by(5, |x, y| y.total_cmp(x));
        let mut top5 = row[..5].to_vec();
        top5.sort_by(|x, y| y.total_cmp(x));
        for k in 0..5 {
            tops[k].push(top5[k] / an);
        }
    }
    for (k, sample) in tops.iter().enumerate() {
        // ξ_k = x_k^{-1/α} with x_k ~ Gamma(k, 1).
        let d = kolmogorov_distance_to(sample, |t| gamma_q_int(k as u32 + 1, t.powf(-a))).unwrap();
        assert!(d < 0.05, "order statistic {}: KS {d}", k + 1);
    }
}

#[test]
fn lemma_scale_probability_of_dominant_entry() {
    // n P(X₁₁ > (t/(1+t)) ρ₁) with ρ₁ = X₁₁ + ρ̂; conditioning on ρ̂ gives
    // n E[min(1, (t ρ̂)^{-α})] exactly for the inverse-power law.
    let (a, n, t) = (0.5, 10_000usize, 1.0);
    let law = TailLaw::inverse_power(a).unwrap();
    let field = WeightField::new(4000, law, 11).unwrap();
    let v: Vec<f64> = (0..4000)
        .map(|i| {
            let rest: f64 = (1..n).map(|j| field.weight(i, j)).sum();
            n as f64 * (t * rest).powf(-a).min(1.0)
        })
        .collect();
    let (m, _) = mean_se(&v);
    let want = gamma_constant(a).unwrap() * t.powf(-a);
    assert!((m - want).abs() < 0.1 * want, "{m} vs {want}");
}

#[test]
fn column_top_entry_of_markov_matrix_matches_omega() {
    let (a, n, trials) = (0.5, 10_000usize, 10_000u64);
    let law = TailLaw::inverse_power(a).unwrap();
    let q = q_constant(a).unwrap();
    let tops: Vec<f64> = (0..trials)
        .map(|t| {
            let f = WeightField::new(n, law.clone(), 50_000 + t).unwrap();
            column_top(&f, n)
        })
        .collect();
    // ω₁ = ξ₁/(ξ₁+q) and P(ξ₁ ≤ s) = exp(-s^{-α}).
    let d = kolmogorov_distance_to(&tops, |w| {
        if w <= 0.0 {
            0.0
        } else if w >= 1.0 {
            1.0
        } else {
            (-(q * w / (1.0 - w)).powf(-a)).exp()
        }
    })
    .unwrap();
    assert!(d < 0.05, "KS {d}");
}

/// Exact `max_i X_{i0}/ρ_i` using partial row sums as lower bounds on `ρ_i`.
fn column_top(f: &WeightField, n: usize) -> f64 {
    let mut cand: Vec<(f64, usize)> = (0..n).map(|i| (f.weight(i, 0), i)).collect();
    cand.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut best = 0.0f64;
    for &(x, i) in &cand {
        // Every weight is at least 1, so ρ_i ≥ x + (n - 1).
        if x / (x + (n - 1) as f64) <= best {
            break;
        }
        let mut partial = x;
        let mut done = true;
        for j in 1..n {
            partial += f.weight(i, j);
            if x / (partial + (n - 1 - j) as f64) <= best {
                done = false;
                break;
            }
        }
        if done {
            best = best.max(x / partial);
        }
    }
    best
}

#[test]
fn samplers_are_deterministic() {
    let run = |seed| {
        let mut r = rng(seed);
        let law = TailLaw::inverse_power(0.4).unwrap();
        let a = sample_heavy(&law, 100, &mut r);
        let b = sample_ppp(0.4, 100, &mut r).unwrap();
        let c = sample_stable(0.4, &mut r).unwrap();
        let d = sample_pd(0.4, 100, &mut r).unwrap();
        let e = sample_omega(0.4, 100, &mut r).unwrap();
        (a, b, c, d, e)
    };
    assert_eq!(run(12), run(12));
    assert_ne!(run(12).0, run(13).0);
}

#[test]
fn two_sample_sanity_for_order_statistics() {
    let mut r = rng(14);
    let a: Vec<f64> = (0..5000).map(|_| sample_ppp(0.5, 3, &mut r).unwrap().xi[0]).collect();
    let b: Vec<f64> = (0..5000).map(|_| sample_ppp(0.5, 3, &mut r).unwrap().xi[0]).collect();
    assert!(kolmogorov_distance(&a, &b).unwrap() < 0.04);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pd_vector_normalized(alpha in 0.02f64..0.98, n in 1usize..400, seed in any::<u64>()) {
        let mut r = rng(seed);
        let pd = sample_pd(alpha, n, &mut r).unwrap();
        let total: f64 = pd.zeta.iter().sum::<f64>() + pd.remainder_mass;
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(pd.remainder_mass >= 0.0);
        prop_assert!(pd.zeta.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn ppp_is_ranked(alpha in 0.02f64..0.98, n in 1usize..400, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = sample_ppp(alpha, n, &mut r).unwrap();
        prop_assert!(p.arrival_times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(p.xi.windows(2).all(|w| w[0] >= w[1]));
        for (x, t) in p.xi.iter().zip(&p.arrival_times) {
            prop_assert!((x - t.powf(-1.0 / alpha)).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn stable_draws_positive(alpha in 0.05f64..0.95, seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = sample_stable(alpha, &mut r).unwrap();
        prop_assert!(s.s > 0.0 && s.s.is_finite());
    }

    #[test]
    fn gamma_identity(alpha in 0.01f64..0.99) {
        let g = gamma_constant(alpha).unwrap();
        prop_assert!((g * gamma(1.0 + alpha) * gamma(1.0 - alpha) - 1.0).abs() < 1e-12);
    }
}
