#![allow(dead_code)]

use mosse::maps::{synth_gaussian_map, GaussianPeak, ObjectiveMap, WeightVector};
use mosse::optimizer::DynamicsModel;
use mosse::sparse::SensorMask;
use mosse::spectral::BasisConfig;
use mosse::TeamScenario;
use rand::Rng;

pub fn random_map(rng: &mut impl Rng, res: usize, name: &str) -> ObjectiveMap {
    let peaks: Vec<GaussianPeak> = (0..rng.gen_range(1..=3))
        .map(|_| GaussianPeak {
            center: [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)],
            sigma: rng.gen_range(0.08..0.2),
            amplitude: rng.gen_range(0.5..1.5),
        })
        .collect();
    synth_gaussian_map(&peaks, (res, res), name).unwrap()
}

pub fn gaussian(center: [f64; 2], sigma: f64, res: usize) -> ObjectiveMap {
    synth_gaussian_map(&[GaussianPeak { center, sigma, amplitude: 1.0 }], (res, res), "g").unwrap()
}

/// A small team scenario with random maps and starts.
pub fn small_scenario(
    rng: &mut impl Rng,
    sensors: usize,
    agents: usize,
    horizon: usize,
    modes: usize,
    budget_percent: f64,
) -> TeamScenario {
    TeamScenario {
        maps: (0..sensors).map(|i| random_map(rng, 24, &format!("m{i}"))).collect(),
        starts: (0..agents)
            .map(|_| vec![rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)])
            .collect(),
        mask: SensorMask::homogeneous(agents, sensors).unwrap(),
        budget_percent,
        dynamics: DynamicsModel::default(),
        horizon,
        seed: 0,
        basis: BasisConfig::new(2, modes).unwrap(),
        l1_weight: 0.1,
        combination: WeightVector::equal(sensors).unwrap(),
    }
}
