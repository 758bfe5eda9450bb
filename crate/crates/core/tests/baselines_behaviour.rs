mod common;

use std::collections::HashMap;

use mosse::baselines::{evaluate_coverage, plan_standard_ergodic, probabilistic_schedule, uniform_schedule};
use mosse::maps::ObjectiveMap;
use mosse::optimizer::SolverConfig;
use mosse::sparse::{Budget, SensingSchedule};
use mosse::spectral::{ergodic_metric, map_coefficients, trajectory_coefficients, BasisConfig, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn line(steps: usize) -> Trajectory {
    let states = (0..steps).map(|t| vec![0.05 + 0.9 * t as f64 / (steps - 1) as f64, 0.5]).collect();
    Trajectory::from_states(states, 0.1).unwrap()
}

#[test]
fn flat_map_draws_every_subset_equally_often() {
    let traj = line(10);
    let map = ObjectiveMap::uniform(20, 20, "flat").unwrap();
    let budget = Budget::new(vec![3]);
    let draws = 10_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for seed in 0..draws {
        let s = probabilistic_schedule(&traj, std::slice::from_ref(&map), &budget, seed).unwrap();
        *counts.entry(s.selected_times(0)).or_default() += 1;
    }
    assert!(counts.keys().all(|k| k.len() == 3));
    let subsets = 120;
    assert_eq!(counts.len(), subsets);
    let expected = draws as f64 / subsets as f64;
    let stat: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((subsets - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat}, p = {p}");
}

#[test]
fn peaked_map_favours_the_hot_state() {
    let traj = line(10);
    let hot = 7;
    let target = traj.states()[hot].clone();
    let map = ObjectiveMap::from_fn(50, 50, "peak", |x, y| {
        let d2 = (x - target[0]).powi(2) + (y - target[1]).powi(2);
        0.01 + (-d2 / (2.0 * 0.03f64.powi(2))).exp()
    })
    .unwrap()
    .normalized()
    .unwrap();
    let mut hits = [0usize; 10];
    for seed in 0..500 {
        let s = probabilistic_schedule(&traj, std::slice::from_ref(&map), &Budget::new(vec![1]), seed).unwrap();
        hits[s.selected_times(0)[0]] += 1;
    }
    let best = (0..10).max_by_key(|&t| hits[t]).unwrap();
    assert_eq!(best, hot, "{hits:?}");
}

#[test]
fn probabilistic_schedule_is_seeded() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let traj = Trajectory::from_states((0..50).map(|_| vec![rng.gen(), rng.gen()]).collect(), 0.1).unwrap();
    let maps = [common::random_map(&mut rng, 20, "a"), common::random_map(&mut rng, 20, "b")];
    let budget = Budget::new(vec![8, 5]);
    let a = probabilistic_schedule(&traj, &maps, &budget, 3).unwrap();
    assert_eq!(a, probabilistic_schedule(&traj, &maps, &budget, 3).unwrap());
    assert!(a.satisfies_budget(&budget));
    for t in 0..50 {
        assert!(a.column_sum(t) <= 1.0);
    }
    let others = (4..20).filter(|&s| probabilistic_schedule(&traj, &maps, &budget, s).unwrap() != a).count();
    assert!(others > 0);
}

/// Coverage equals the plain metric of the concatenated measured states.
#[test]
fn coverage_matches_concatenated_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = BasisConfig::new(2, 6).unwrap();
    let trajs: Vec<Trajectory> = (0..2)
        .map(|_| Trajectory::from_states((0..30).map(|_| vec![rng.gen(), rng.gen()]).collect(), 0.1).unwrap())
        .collect();
    let xis: Vec<_> = (0..2)
        .map(|i| map_coefficients(&common::random_map(&mut rng, 20, &format!("m{i}")), &cfg).unwrap())
        .collect();
    let schedules: Vec<SensingSchedule> = (0..2)
        .map(|_| {
            // At most one sensor per step.
            let mut rows = vec![vec![0.0; 30]; 2];
            for t in 0..30 {
                match rng.gen_range(0..4) {
                    0 => rows[0][t] = 1.0,
                    1 => rows[1][t] = 1.0,
                    _ => {}
                }
            }
            SensingSchedule::binary(rows).unwrap()
        })
        .collect();
    let got = evaluate_coverage(&trajs, &schedules, &xis).unwrap();
    for i in 0..2 {
        let picked: Vec<Vec<f64>> = trajs
            .iter()
            .zip(&schedules)
            .flat_map(|(tr, s)| s.selected_times(i).into_iter().map(move |t| tr.states()[t].clone()))
            .collect();
        let c = trajectory_coefficients(&Trajectory::from_states(picked, 0.1).unwrap(), &cfg).unwrap();
        let oracle = ergodic_metric(&c, &xis[i]).unwrap();
        assert!((got[i].unwrap() - oracle).abs() < 1e-12);
    }

    let empty = vec![SensingSchedule::binary(vec![vec![0.0; 30]; 2]).unwrap(); 2];
    assert_eq!(evaluate_coverage(&trajs, &empty, &xis).unwrap(), vec![None, None]);
}

#[test]
fn measuring_the_peak_beats_measuring_the_trough() {
    let cfg = BasisConfig::default();
    let map = common::gaussian([0.3, 0.3], 0.08, 40);
    let xi = map_coefficients(&map, &cfg).unwrap();
    let traj = Trajectory::from_states(vec![vec![0.3, 0.3], vec![0.95, 0.95]], 0.1).unwrap();
    let score = |row: Vec<f64>| {
        let s = SensingSchedule::binary(vec![row]).unwrap();
        evaluate_coverage(std::slice::from_ref(&traj), &[s], std::slice::from_ref(&xi)).unwrap()[0].unwrap()
    };
    assert!(score(vec![1.0, 0.0]) < score(vec![0.0, 1.0]));
}

#[test]
fn full_budget_coverage_is_the_trajectory_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let cfg = BasisConfig::default();
    let traj = Trajectory::from_states((0..40).map(|_| vec![rng.gen(), rng.gen()]).collect(), 0.1).unwrap();
    let xi = map_coefficients(&common::random_map(&mut rng, 30, "m"), &cfg).unwrap();
    let all = uniform_schedule(40, &Budget::new(vec![40]), 1).unwrap();
    let got = evaluate_coverage(std::slice::from_ref(&traj), &[all], std::slice::from_ref(&xi)).unwrap()[0].unwrap();
    let plain = ergodic_metric(&trajectory_coefficients(&traj, &cfg).unwrap(), &xi).unwrap();
    assert!((got - plain).abs() < 1e-12);
}

#[test]
fn standard_ergodic_plan_is_seeded_and_descends() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let sc = common::small_scenario(&mut rng, 2, 2, 40, 5, 25.0);
    let cfg = SolverConfig { max_iters: 60, seed: 4, ..Default::default() };
    let a = plan_standard_ergodic(&sc, &cfg).unwrap();
    assert_eq!(a, plan_standard_ergodic(&sc, &cfg).unwrap());
    assert!(a.binary_schedules.is_empty());
    assert!(a.final_objective < a.objective_trace[0]);
}
