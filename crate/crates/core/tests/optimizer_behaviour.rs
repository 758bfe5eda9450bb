mod common;

use mosse::maps::{synth_gaussian_map, GaussianPeak, WeightVector};
use mosse::optimizer::{
    descend, rollout, DecisionVars, DynamicsModel, LambdaProjection, PlanObjective, Problem, SolverConfig,
};
use mosse::sparse::SensorMask;
use mosse::spectral::BasisConfig;
use mosse::{solve, TeamScenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn single_map_scenario(map: mosse::ObjectiveMap, horizon: usize, budget: f64, start: [f64; 2]) -> TeamScenario {
    TeamScenario {
        maps: vec![map],
        starts: vec![start.to_vec()],
        mask: SensorMask::homogeneous(1, 1).unwrap(),
        budget_percent: budget,
        dynamics: DynamicsModel::default(),
        horizon,
        seed: 0,
        basis: BasisConfig::new(2, 8).unwrap(),
        l1_weight: 0.1,
        combination: WeightVector::equal(1).unwrap(),
    }
}

#[test]
fn centred_agent_on_centred_peak_has_no_control_gradient() {
    let sc = single_map_scenario(common::gaussian([0.5, 0.5], 0.1, 40), 20, 50.0, [0.5, 0.5]);
    let problem = Problem::new(&sc, PlanObjective::Mosse).unwrap();
    let mut vars = DecisionVars::zeros(1, 20, 2, 1);
    vars.lambda.fill(1.0);
    let (_, g) = problem.value_and_gradient(&vars).unwrap();
    assert!(g.controls.iter().all(|v| v.abs() < 1e-12), "{:?}", g.controls);
}

#[test]
fn penalty_contributes_its_weight_to_every_decision() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut sc = common::small_scenario(&mut rng, 2, 1, 16, 4, 25.0);
    let problem_a = Problem::new(&sc, PlanObjective::Mosse).unwrap();
    let vars = problem_a.initialize(3, None).unwrap();
    sc.l1_weight = 0.0;
    let problem_b = Problem::new(&sc, PlanObjective::Mosse).unwrap();
    let (_, ga) = problem_a.value_and_gradient(&vars).unwrap();
    let (_, gb) = problem_b.value_and_gradient(&vars).unwrap();
    for (a, b) in ga.lambda.iter().zip(&gb.lambda) {
        assert!((a - b - 0.1).abs() < 1e-12);
    }
}

#[test]
fn initialization_rules() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    // 100 states, one sensor, half the budget.
    let sc = common::small_scenario(&mut rng, 1, 1, 99, 4, 50.0);
    let p = Problem::new(&sc, PlanObjective::Mosse).unwrap();
    let a = p.initialize(5, None).unwrap();
    assert_eq!(a, p.initialize(5, None).unwrap());
    assert_ne!(a, p.initialize(6, None).unwrap());
    assert!(a.lambda.iter().all(|&v| v == 0.5));
    let bound = 0.1 * sc.dynamics.u_max;
    assert!(a.controls.iter().all(|u| u.abs() <= bound));

    let mut het = common::small_scenario(&mut rng, 2, 2, 30, 4, 50.0);
    het.mask = SensorMask::round_robin(2, 2).unwrap();
    let p = Problem::new(&het, PlanObjective::Mosse).unwrap();
    let v = p.initialize(1, None).unwrap();
    let steps = 31;
    assert!(v.agent_lambda(0)[steps..].iter().all(|&x| x == 0.0));
    assert!(v.agent_lambda(1)[..steps].iter().all(|&x| x == 0.0));
    assert!(v.agent_lambda(0)[..steps].iter().all(|&x| x > 0.0));
}

#[test]
fn solve_is_deterministic_and_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let sc = common::small_scenario(&mut rng, 3, 2, 48, 5, 25.0);
    let cfg = SolverConfig { max_iters: 40, seed: 9, ..Default::default() };
    let a = solve(&sc, &cfg).unwrap();
    let b = solve(&sc, &cfg).unwrap();
    assert_eq!(a, b);
    for traj in &a.trajectories {
        for u in traj.controls() {
            assert!((u[0] * u[0] + u[1] * u[1]).sqrt() <= sc.dynamics.u_max + 1e-12);
        }
    }
    for (s, budget) in a.binary_schedules.iter().zip(sc.budgets().unwrap()) {
        assert!(s.satisfies_budget(&budget));
    }
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<mosse::PlanResult>(&json).unwrap(), a);
}

#[test]
fn zero_iteration_cap_returns_projected_initialization() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let sc = common::small_scenario(&mut rng, 2, 1, 24, 4, 25.0);
    let cfg = SolverConfig { max_iters: 0, seed: 2, ..Default::default() };
    let plan = solve(&sc, &cfg).unwrap();
    assert_eq!(plan.iterations, 0);
    assert_eq!(plan.objective_trace.len(), 1);
    let p = Problem::new(&sc, PlanObjective::Mosse).unwrap();
    let init = p.initialize(2, None).unwrap();
    let d = sc.dynamics;
    let controls: Vec<Vec<f64>> = init.agent_controls(0).chunks(2).map(<[f64]>::to_vec).collect();
    assert_eq!(plan.trajectories[0], rollout(&sc.starts[0], &controls, &d).unwrap());
    assert_eq!(plan.continuous_schedules[0].row(0), init.schedule(0).row(0));
}

#[test]
fn single_peak_solve_descends() {
    let sc = single_map_scenario(common::gaussian([0.6, 0.4], 0.12, 40), 64, 50.0, [0.3, 0.7]);
    let plan = solve(&sc, &SolverConfig { max_iters: 80, ..Default::default() }).unwrap();
    assert!(plan.final_objective < plan.objective_trace[0]);
}

#[test]
fn empty_decisions_restart_at_budget_fraction() {
    let sc = single_map_scenario(common::gaussian([0.5, 0.5], 0.15, 30), 30, 20.0, [0.5, 0.5]);
    let p = Problem::new(&sc, PlanObjective::Mosse).unwrap();
    let vars = DecisionVars::zeros(1, 30, 2, 1);
    let cfg = SolverConfig { max_iters: 5, lambda_projection: LambdaProjection::Box, ..Default::default() };
    let out = descend(&p, vars, &cfg).unwrap();
    assert!(out.restarted);
    assert!(out.trace[0].is_finite());
}

#[test]
fn agents_permute_with_their_seeds() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let sc = common::small_scenario(&mut rng, 2, 2, 32, 4, 25.0);
    let mut swapped = sc.clone();
    swapped.starts.reverse();
    let cfg = SolverConfig { max_iters: 25, agent_seeds: Some(vec![11, 22]), ..Default::default() };
    let cfg_swapped = SolverConfig { agent_seeds: Some(vec![22, 11]), ..cfg.clone() };
    let a = solve(&sc, &cfg).unwrap();
    let b = solve(&swapped, &cfg_swapped).unwrap();
    for m in 0..2 {
        let (ta, tb) = (&a.trajectories[m], &b.trajectories[1 - m]);
        for (x, y) in ta.states().iter().zip(tb.states()) {
            assert!((x[0] - y[0]).abs() < 1e-6 && (x[1] - y[1]).abs() < 1e-6);
        }
    }
    assert!((a.final_objective - b.final_objective).abs() < 1e-9);
}

#[test]
fn bimodal_map_gets_both_modes_visited() {
    let peaks = [[0.3, 0.3], [0.7, 0.7]];
    let map = synth_gaussian_map(
        &peaks.map(|c| GaussianPeak { center: c, sigma: 0.07, amplitude: 1.0 }),
        (50, 50),
        "bimodal",
    )
    .unwrap();
    let sc = single_map_scenario(map, 128, 50.0, [0.5, 0.5]);
    let plan = solve(&sc, &SolverConfig::default()).unwrap();
    let states = plan.trajectories[0].states();
    for p in peaks {
        let near = states
            .iter()
            .filter(|s| ((s[0] - p[0]).powi(2) + (s[1] - p[1]).powi(2)).sqrt() <= 0.15)
            .count() as f64
            / states.len() as f64;
        assert!(near > 0.2, "only {near} of the time near {p:?}");
    }
}

mod projection {
    use mosse::optimizer::project_capped_simplex;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn capped_simplex_hits_mass_inside_box(
            row in prop::collection::vec(-2.0..3.0f64, 1..60),
            frac in 0.0..=1.0f64,
        ) {
            let mass = (frac * row.len() as f64).floor();
            let mut out = row.clone();
            project_capped_simplex(&mut out, mass);
            prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((out.iter().sum::<f64>() - mass).abs() < 1e-9);
            // Order is preserved by a common shift.
            for i in 0..row.len() {
                for j in 0..row.len() {
                    if row[i] < row[j] {
                        prop_assert!(out[i] <= out[j]);
                    }
                }
            }
            let mut again = out.clone();
            project_capped_simplex(&mut again, mass);
            prop_assert_eq!(again, out);
        }
    }
}
