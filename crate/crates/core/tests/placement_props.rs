use ltcache::netmodel::{zipf_popularity, CacheSystem, Placement};
use ltcache::placement::{objective_relaxed, objective_tup, optimize_integer, optimize_relaxed, PlacementProblem};
use proptest::prelude::*;

fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Instances small enough to enumerate: n ≤ 4, M k ≤ 12, h_max ≤ 2.
fn small_problem() -> impl Strategy<Value = PlacementProblem<f64>> {
    (1usize..=4, 1usize..=2, 1usize..=6)
        .prop_flat_map(|(n, h, k)| {
            let max_m = (12 / k).min(n);
            (
                prop::collection::vec(0.01f64..1.0, n),
                prop::collection::vec(0.05f64..1.0, h),
                Just(k),
                0..=max_m,
                0.0f64..50.0,
            )
        })
        .prop_map(|(theta, gamma, k, m, e_delta)| {
            let mut theta = normalized(theta);
            theta.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let sys = CacheSystem::new(k, m, theta, normalized(gamma)).unwrap();
            PlacementProblem::new(sys, e_delta).unwrap()
        })
}

fn brute_force(p: &PlacementProblem<f64>) -> f64 {
    compositions(p.sys().budget(), p.sys().n())
        .into_iter()
        .map(|w| objective_tup(p, &Placement::new(w)).unwrap())
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn greedy_matches_exhaustive_search(p in small_problem()) {
        let s = optimize_integer(&p).unwrap();
        prop_assert_eq!(s.placement.total(), p.sys().budget());
        prop_assert!((s.objective - brute_force(&p)).abs() < 1e-12);
    }

    #[test]
    fn relaxation_lower_bounds_integer(p in small_problem()) {
        let s = optimize_integer(&p).unwrap();
        let r = optimize_relaxed(&p);
        prop_assert!(r.objective <= s.objective + 1e-12);
        prop_assert!(r.is_certified(), "transfer gap {}", r.transfer_gap);
        let total: f64 = r.w.iter().sum();
        prop_assert!((total - p.sys().budget() as f64).abs() < 1e-9);
        prop_assert!((objective_relaxed(&p, &r.w) - r.objective).abs() < 1e-12);
        // Gap is at most one marginal step: max_j θ_j Σ_h γ_h h.
        let step = p.sys().theta()[0] * p.sys().gamma().iter().enumerate().map(|(h, g)| g * (h + 1) as f64).sum::<f64>();
        prop_assert!(s.objective - r.objective <= step + 1e-12);
    }

    #[test]
    fn popular_files_get_at_least_as_much(p in small_problem()) {
        let s = optimize_integer(&p).unwrap();
        let theta = p.sys().theta();
        let w = s.placement.w();
        for i in 0..theta.len() {
            for j in 0..theta.len() {
                if theta[i] > theta[j] {
                    prop_assert!(w[i] >= w[j], "θ {:?}, w {:?}", theta, w);
                }
            }
        }
    }

    #[test]
    fn constant_offset_does_not_move_the_argmin(p in small_problem(), shift in 0.0f64..1000.0) {
        let shifted = PlacementProblem::new(p.sys().clone(), p.e_delta() + shift).unwrap();
        prop_assert_eq!(
            optimize_integer(&p).unwrap().placement,
            optimize_integer(&shifted).unwrap().placement
        );
    }
}

#[test]
fn symmetric_library_is_cached_uniformly_at_scale() {
    for (n, m, k) in [(100, 10, 100), (10, 3, 1000)] {
        let sys = CacheSystem::new(k, m, zipf_popularity(n, 0.0).unwrap(), vec![0.2907, 0.6591, 0.0430, 0.0072]).unwrap();
        let p = PlacementProblem::new(sys, 12.5).unwrap();
        let s = optimize_integer(&p).unwrap();
        assert!(s.placement.w().iter().all(|&w| w == (m * k / n) as u64), "{:?}", s.placement.w());
        let r = optimize_relaxed(&p);
        assert!(r.w.iter().all(|&w| (w - (m * k) as f64 / n as f64).abs() < 1e-9));
        assert!(r.is_certified());
    }
}

#[test]
fn budget_violation_is_an_error() {
    let sys = CacheSystem::new(5, 1, vec![0.6, 0.4], vec![1.0]).unwrap();
    let p = PlacementProblem::new(sys, 0.0).unwrap();
    assert!(matches!(
        objective_tup(&p, &Placement::new(vec![5, 1])),
        Err(ltcache::Error::BudgetViolated { stored: 6, budget: 5 })
    ));
}
