mod common;

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::brute_force;
use dotswarm::dynamics::StateLayout;
use dotswarm::engine::{run_engagement, EngagementConfig};
use dotswarm::riccati_lqt::{care_residual, is_symmetric_psd, solve_care, PolicyCache, QuadraticCost};
use dotswarm::scenarios::{derive_seed, generate, monte_carlo, MonteCarloSettings, ScenarioSpec, World};
use dotswarm::transport::{euclidean_cost, solve_kantorovich, solve_matching, Coupling, CostMatrix, Metric};
use dotswarm::Execution;

fn square(max_n: usize, values: impl Strategy<Value = f64> + Clone) -> impl Strategy<Value = CostMatrix> {
    (1..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(values.clone(), n * n).prop_map(move |e| CostMatrix::new(n, n, e, Metric::Dynamics).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matching_is_the_first_optimal_permutation(c in square(6, (0u8..6).prop_map(f64::from))) {
        let (best, sigma) = brute_force(&c);
        let m = solve_matching(&c).unwrap();
        prop_assert_eq!(m.total, best);
        prop_assert_eq!(m.sigma, sigma);
    }

    #[test]
    fn kantorovich_relaxation_is_tight(c in square(5, 0.0..1e6f64)) {
        let n = c.rows();
        let w = vec![1.0 / n as f64; n];
        let plan = solve_kantorovich(&c, &w, &w).unwrap();
        let m = solve_matching(&c).unwrap();
        prop_assert!((plan.objective * n as f64 - m.total).abs() <= 1e-9 * (1.0 + m.total));
        prop_assert_eq!(plan.coupling.as_permutation(1e-9), Some(m.sigma));
    }

    #[test]
    fn permutation_couplings_round_trip(sigma in (1usize..8).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle())) {
        let c = Coupling::from_permutation(&sigma).unwrap();
        let n = sigma.len() as f64;
        for (i, s) in c.matrix().row_iter().enumerate() {
            prop_assert!((s.sum() - 1.0 / n).abs() < 1e-15, "row {}", i);
        }
        prop_assert_eq!(c.as_permutation(1e-12), Some(sigma));
    }

    #[test]
    fn euclidean_cost_is_a_metric(points in prop::collection::vec(prop::array::uniform3(-1e3..1e3f64), 3..6)) {
        let layout = StateLayout::new(3, vec![("position", 0..3)]).unwrap();
        let xs: Vec<DVector<f64>> = points.iter().map(|p| DVector::from_row_slice(p)).collect();
        let c = euclidean_cost(&xs, &layout, &xs, &layout, 1.0).unwrap();
        let n = xs.len();
        for i in 0..n {
            prop_assert_eq!(c.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(c.get(i, j), c.get(j, i));
                for k in 0..n {
                    prop_assert!(c.get(i, k) <= c.get(i, j) + c.get(j, k) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn care_solutions_satisfy_the_equation(
        (d, a, b) in (1usize..7).prop_flat_map(|d| (
            Just(d),
            prop::collection::vec(-2.0..2.0f64, d * d),
            prop::collection::vec(-2.0..2.0f64, d),
        )),
        q_diag in prop::collection::vec(0.1..100.0f64, 6),
        r in 0.01..10.0f64,
    ) {
        let a = DMatrix::from_row_slice(d, d, &a);
        // a generic single-input pair is controllable
        let b = DMatrix::from_row_slice(d, 1, &b);
        let cost = QuadraticCost::diagonal(&q_diag[..d], &[r]).unwrap();
        if let Ok(p) = solve_care(&a, &b, &cost) {
            let res = care_residual(&a, &b, cost.state_weight(), cost.control_weight(), &p);
            prop_assert!(res <= 1e-9 * (1.0 + p.norm()), "residual {}", res);
            prop_assert!(is_symmetric_psd(&p));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn traces_are_consistent(seed in any::<u64>(), n in 1usize..5, euclid in any::<bool>()) {
        let s = generate(&ScenarioSpec::benchmark(World::DoubleIntegrator, n, seed)).unwrap();
        let metric = if euclid { Metric::Euclidean { exponent: 1.0 } } else { Metric::Dynamics };
        let t = run_engagement(&s.engagement, &EngagementConfig::new(metric, 1.0, 10.0), &PolicyCache::new()).unwrap();
        let len = t.times.len();
        prop_assert!(t.agents.iter().all(|s| s.len() == len));
        prop_assert!(t.targets.iter().all(|s| s.len() == len));
        for (i, series) in t.agents.iter().enumerate() {
            // the active set only shrinks
            let flips = series.windows(2).filter(|w| w[0].active != w[1].active).count();
            prop_assert!(flips <= 1 && (flips == 0 || !series[len - 1].active));
            prop_assert_eq!(t.exit_times[i].is_some(), !series[len - 1].active);
        }
        prop_assert_eq!(t.total_cost(), *t.cumulative_cost_series().last().unwrap());
        if !euclid {
            prop_assert_eq!(t.assignment_history.len(), 1);
            prop_assert_eq!(t.assignment_solves, 1);
            prop_assert_eq!(t.total_switches(), 0);
        }
        let mut used: Vec<usize> = t.assignment_history[0].sigma.iter().flatten().copied().collect();
        used.sort_unstable();
        prop_assert_eq!(used, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn derived_seeds_do_not_collide() {
    let seeds: HashSet<u64> = (0..10_000).map(|k| derive_seed(2024, k)).collect();
    assert_eq!(seeds.len(), 10_000);
}

#[test]
fn sampled_coordinates_follow_their_bounds() {
    let n = 10_000;
    let s = generate(&ScenarioSpec::benchmark(World::DoubleIntegrator, n, 31)).unwrap();
    let check = |values: Vec<f64>, half: f64| {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= -half && hi < half, "[{lo}, {hi}] outside ±{half}");
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        // σ of the mean of n uniforms on [−h, h] is h / √(3n)
        let sigma = half / (3.0 * values.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean}, 3σ {}", 3.0 * sigma);
    };
    let coord = |states: &[DVector<f64>], k: usize| states.iter().map(|x| x[k]).collect::<Vec<_>>();
    let init = &s.engagement.initial;
    for k in 0..3 {
        check(coord(&init.agent_states, k), 1000.0);
        check(coord(&init.agent_states, k + 3), 5000.0);
        check(coord(&init.target_states, k), 1000.0);
        check(coord(&init.target_states, k + 3), 1000.0);
        check(coord(&s.locations, k), 1000.0);
    }
    let mut perm = s.location_of.clone();
    perm.sort_unstable();
    assert_eq!(perm, (0..n).collect::<Vec<_>>());
}

#[test]
fn report_aggregates_are_recomputable() {
    let spec = ScenarioSpec::benchmark(World::DoubleIntegrator, 3, 5);
    let settings = MonteCarloSettings::for_world(World::DoubleIntegrator, 12);
    let report = monte_carlo(&spec, &settings).unwrap();
    assert_eq!(report.runs.len(), 12);
    let gaps: Vec<f64> = report.runs.iter().filter_map(|r| r.paired.as_ref()).map(|p| p.j_emd - p.j_dyn).collect();
    let m = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / m;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let a = &report.aggregates;
    assert!((a.mean_gap.unwrap() - mean).abs() <= 1e-12 * mean.abs());
    assert!((a.std_gap.unwrap() - var.sqrt()).abs() <= 1e-12 * var.sqrt());
    assert_eq!(report.histogram.counts.iter().sum::<usize>(), gaps.len());
    assert_eq!(report.histogram.edges.len(), settings.histogram_bins + 1);

    let single = monte_carlo(&spec, &MonteCarloSettings::for_world(World::DoubleIntegrator, 1)).unwrap();
    assert_eq!(single.runs.len(), 1);
    assert!(single.runs[0].paired.is_some());
}

#[test]
fn execution_mode_does_not_change_results() {
    let spec = ScenarioSpec::benchmark(World::DoubleIntegrator, 4, 9);
    let mut settings = MonteCarloSettings::for_world(World::DoubleIntegrator, 6);
    let parallel = monte_carlo(&spec, &settings).unwrap();
    settings.execution = Execution::Sequential;
    let sequential = monte_carlo(&spec, &settings).unwrap();
    assert_eq!(parallel.runs, sequential.runs);
    assert_eq!(parallel.aggregates, sequential.aggregates);
}

#[test]
fn quadcopter_bounds_are_applied() {
    let s = generate(&ScenarioSpec::benchmark(World::Quadcopter, 200, 4)).unwrap();
    for x in &s.engagement.initial.agent_states {
        assert!(x.rows(0, 3).amax() <= 100.0);
        assert!(x.rows(3, 3).amax() <= 2.0 * std::f64::consts::PI);
        assert!(x.rows(6, 3).amax() <= 500.0);
        assert!(x.rows(9, 3).amax() <= 25.0);
    }
    for y in &s.engagement.initial.target_states {
        assert!(y.rows(6, 3).amax() <= 50.0);
    }
}
