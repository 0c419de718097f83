mod common;

use nalgebra::{DMatrix, DVector};

use common::{affine_flow, brute_force, trapezoid};
use dotswarm::dynamics::{closed_loop_about, double_integrator_3d, integrate, integrate_grid, Flow, OdeConfig};
use dotswarm::riccati_lqt::{care_residual, solve_care, LinearSystem, PolicyCache, QuadraticCost};
use dotswarm::scenarios::{generate, ScenarioRng, ScenarioSpec, World};
use dotswarm::transport::{solve_kantorovich, solve_matching, CostMatrix, Metric};

#[test]
fn care_double_integrator_closed_form() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let cost = QuadraticCost::diagonal(&[1.0, 1.0], &[1.0]).unwrap();
    let p = solve_care(&a, &b, &cost).unwrap();
    let s3 = 3f64.sqrt();
    let expected = DMatrix::from_row_slice(2, 2, &[s3, 1.0, 1.0, s3]);
    assert!((&p - &expected).amax() < 1e-12, "{p}");
    assert!(care_residual(&a, &b, cost.state_weight(), cost.control_weight(), &expected) < 1e-14);
}

#[test]
fn ode_matches_matrix_exponential() {
    let m = double_integrator_3d();
    let cost = QuadraticCost::diagonal(&[1e3, 1e3, 1e3, 0.0, 0.0, 0.0], &[1.0; 3]).unwrap();
    let r = DVector::from_vec(vec![300.0, -120.0, 45.0, 0.0, 0.0, 0.0]);
    let sys = closed_loop_about(&m.system, &cost, &r, &PolicyCache::new()).unwrap();
    let y0 = DVector::from_vec(vec![-800.0, 650.0, 10.0, 900.0, -400.0, 20.0]);
    let config = OdeConfig::default();
    let mut got = Vec::new();
    integrate_grid(
        |_, y, dy| {
            let v = sys.drift() * DVector::from_column_slice(y) + sys.offset();
            dy.copy_from_slice(v.as_slice());
        },
        0.0,
        y0.as_slice(),
        3.0,
        &config,
        |k, _, y| {
            if k % 50 == 0 {
                got.push(DVector::from_column_slice(y));
            }
            Flow::Continue
        },
    )
    .unwrap();
    let (phi, gamma) = affine_flow(sys.drift(), sys.offset(), 0.5);
    let mut y = y0.clone();
    for (k, g) in got.iter().enumerate() {
        let err = (g - &y).amax() / (1.0 + y.amax());
        assert!(err < 1e-6, "sample {k}: relative error {err}");
        y = &phi * &y + &gamma;
    }
}

#[test]
fn cost_to_go_matches_exponential_quadrature() {
    let dt = 1e-3;
    for seed in 0..5 {
        let s = generate(&ScenarioSpec::benchmark(World::DoubleIntegrator, 1, 100 + seed)).unwrap();
        let e = &s.engagement;
        let policy = PolicyCache::new()
            .tracker(&e.agent_model.system, &e.target_systems[0], &e.cost, &e.error_map)
            .unwrap();
        let (x0, y0) = (&e.initial.agent_states[0], &e.initial.target_states[0]);
        let closed = policy.cost_to_go(x0, y0).unwrap();
        let steady = policy.steady_state(y0).unwrap();
        let (f, f0) = policy.closed_loop_joint();
        let (phi, gamma) = affine_flow(&f, &f0, dt);
        let mut z: DVector<f64> = DVector::from_iterator(12, x0.iter().chain(y0.iter()).copied());
        let mut g = Vec::new();
        for _ in 0..=15_000 {
            let (x, y) = (z.rows(0, 6).into_owned(), z.rows(6, 6).into_owned());
            let u = policy.control(&x, &y);
            g.push(policy.stage_cost(&x, &y, &u, &steady));
            z = &phi * &z + &gamma;
        }
        let integrated = trapezoid(&g, dt);
        let rel = (integrated - closed).abs() / closed.abs();
        assert!(rel < 1e-3, "seed {seed}: quadrature {integrated}, closed form {closed}");
    }
}

#[test]
fn integrated_cost_matches_quadrature_of_samples() {
    // the augmented cost state and a trapezoid sum over the samples agree
    let plant = LinearSystem::controlled(DMatrix::from_element(1, 1, -0.5), DMatrix::identity(1, 1)).unwrap();
    let x0 = DVector::from_element(1, 2.0);
    let config = OdeConfig {
        output_dt: 1e-3,
        ..OdeConfig::default()
    };
    let traj = integrate(
        &plant,
        |_, x: &DVector<f64>| -x * 1.5,
        &x0,
        (0.0, 4.0),
        Some(|x: &DVector<f64>, u: &DVector<f64>| x.norm_squared() + u.norm_squared()),
        &config,
    )
    .unwrap();
    let samples: Vec<f64> = traj
        .states
        .iter()
        .zip(&traj.controls)
        .map(|(x, u)| x.norm_squared() + u.norm_squared())
        .collect();
    let quad = trapezoid(&samples, 1e-3);
    // ẋ = −2x, integrand 3.25 x² → 3.25·4·(1 − e^{−16})/4
    let exact = 3.25 * 4.0 * (1.0 - (-16f64).exp()) / 4.0;
    assert!((traj.cumulative_cost.last().unwrap() - exact).abs() < 1e-6);
    assert!((quad - exact).abs() < 1e-5);
}

#[test]
fn matching_and_kantorovich_agree_with_enumeration() {
    let mut rng = ScenarioRng::new(77);
    for n in 2..=6 {
        for _ in 0..10 {
            let entries: Vec<f64> = (0..n * n).map(|_| rng.uniform(0.0, 100.0)).collect();
            let c = CostMatrix::new(n, n, entries, Metric::Dynamics).unwrap();
            let (best, sigma) = brute_force(&c);
            let m = solve_matching(&c).unwrap();
            assert_eq!(m.sigma, sigma);
            assert_eq!(m.total, best);
            let w = vec![1.0 / n as f64; n];
            let plan = solve_kantorovich(&c, &w, &w).unwrap();
            assert_eq!(plan.coupling.as_permutation(1e-9), Some(sigma));
            assert!((plan.objective * n as f64 - best).abs() <= 1e-9 * best);
        }
    }
}
