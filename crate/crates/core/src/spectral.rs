//! Normalized cosine basis on the unit box, spectral coefficients of maps and
//! trajectories, and the ergodic metric.
//!
//! Basis functions are `F_k(x) = (1/h_k) * prod_j cos(k_j * pi * x_j)` with `h_k`
//! chosen so every `F_k` has unit L2 norm on `[0,1]^d`. Along one axis the
//! squared norm of `cos(k pi x)` is 1 for `k = 0` and 1/2 otherwise, so
//! `1/h_k = sqrt(2)^(number of nonzero components of k)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::ObjectiveMap;

/// Largest supported domain dimension.
pub const MAX_DIMS: usize = 3;

/// Truncation of the cosine basis: `modes_per_dim` modes along each of `dims` axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisConfig {
    pub dims: usize,
    pub modes_per_dim: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            dims: 2,
            modes_per_dim: 10,
        }
    }
}

impl BasisConfig {
    pub fn new(dims: usize, modes_per_dim: usize) -> Result<Self> {
        let cfg = BasisConfig {
            dims,
            modes_per_dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.dims > MAX_DIMS {
            return Err(Error::precondition(format!(
                "dims must be in 1..={MAX_DIMS}, got {}",
                self.dims
            )));
        }
        if self.modes_per_dim == 0 {
            return Err(Error::precondition("modes_per_dim must be at least 1"));
        }
        Ok(())
    }

    /// Number of multi-indices, `modes_per_dim^dims`.
    pub fn num_coefficients(&self) -> usize {
        self.modes_per_dim.pow(self.dims as u32)
    }

    /// Multi-index at flat position `flat`; the last axis varies fastest.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut k = vec![0; self.dims];
        let mut rem = flat;
        for j in (0..self.dims).rev() {
            k[j] = rem % self.modes_per_dim;
            rem /= self.modes_per_dim;
        }
        k
    }

    /// Flat position of a multi-index, or `None` if any component is out of range.
    pub fn flat_index(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.dims || k.iter().any(|&kj| kj >= self.modes_per_dim) {
            return None;
        }
        Some(k.iter().fold(0, |acc, &kj| acc * self.modes_per_dim + kj))
    }
}

fn check_point(x: &[f64], dims: usize) -> Result<()> {
    if x.len() != dims {
        return Err(Error::shape(format!(
            "point has {} coordinates, basis expects {dims}",
            x.len()
        )));
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain { point: x.to_vec() });
    }
    Ok(())
}

fn inverse_norm(k: &[usize]) -> f64 {
    let nonzero = k.iter().filter(|&&kj| kj != 0).count();
    std::f64::consts::SQRT_2.powi(nonzero as i32)
}

/// Evaluates the single basis function `F_k` at `x`.
pub fn evaluate_basis(x: &[f64], k: &[usize], cfg: &BasisConfig) -> Result<f64> {
    cfg.validate()?;
    check_point(x, cfg.dims)?;
    if k.len() != cfg.dims {
        return Err(Error::shape(format!(
            "multi-index has {} components, basis expects {}",
            k.len(),
            cfg.dims
        )));
    }
    let prod: f64 = k
        .iter()
        .zip(x)
        .map(|(&kj, &xj)| (kj as f64 * PI * xj).cos())
        .product();
    Ok(inverse_norm(k) * prod)
}

/// Sobolev weights `(1 + |k|^2)^(-(d+1)/2)`, in flat index order.
pub fn coefficient_weights(cfg: &BasisConfig) -> Vec<f64> {
    let exponent = -((cfg.dims as f64) + 1.0) / 2.0;
    (0..cfg.num_coefficients())
        .map(|flat| {
            let norm_sq: f64 = cfg
                .multi_index(flat)
                .iter()
                .map(|&kj| (kj * kj) as f64)
                .sum();
            (1.0 + norm_sq).powf(exponent)
        })
        .collect()
}

/// A truncated basis with its normalization constants and metric weights
/// precomputed, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Basis {
    cfg: BasisConfig,
    /// Flattened multi-indices, `dims` entries per coefficient.
    indices: Vec<usize>,
    inv_norms: Vec<f64>,
    weights: Vec<f64>,
}

impl Basis {
    pub fn new(cfg: BasisConfig) -> Result<Self> {
        cfg.validate()?;
        let count = cfg.num_coefficients();
        let mut indices = Vec::with_capacity(count * cfg.dims);
        let mut inv_norms = Vec::with_capacity(count);
        for flat in 0..count {
            let k = cfg.multi_index(flat);
            inv_norms.push(inverse_norm(&k));
            indices.extend_from_slice(&k);
        }
        Ok(Basis {
            cfg,
            indices,
            inv_norms,
            weights: coefficient_weights(&cfg),
        })
    }

    pub fn config(&self) -> &BasisConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.inv_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_norms.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coefficients(&self, values: Vec<f64>) -> Result<SpectralCoefficients> {
        if values.len() != self.len() {
            return Err(Error::shape(format!(
                "{} coefficient values for a basis of {}",
                values.len(),
                self.len()
            )));
        }
        Ok(SpectralCoefficients {
            values,
            weights: self.weights.clone(),
            basis: self.cfg,
        })
    }

    /// Evaluates every basis function (and optionally its spatial gradient) at
    /// each point. Points must already be validated.
    pub(crate) fn tabulate(&self, points: &[Vec<f64>], with_gradient: bool) -> BasisTable {
        let d = self.cfg.dims;
        let modes = self.cfg.modes_per_dim;
        let k_count = self.len();
        let mut values = vec![0.0; points.len() * k_count];
        let mut gradients = if with_gradient {
            vec![0.0; points.len() * k_count * d]
        } else {
            Vec::new()
        };
        let mut cos_tab = vec![0.0; d * modes];
        let mut dcos_tab = vec![0.0; d * modes];
        for (p, x) in points.iter().enumerate() {
            for j in 0..d {
                for m in 0..modes {
                    let w = m as f64 * PI;
                    let (s, c) = (w * x[j]).sin_cos();
                    cos_tab[j * modes + m] = c;
                    dcos_tab[j * modes + m] = -w * s;
                }
            }
            let row = &mut values[p * k_count..(p + 1) * k_count];
            for (flat, out) in row.iter_mut().enumerate() {
                let k = &self.indices[flat * d..(flat + 1) * d];
                let mut prod = self.inv_norms[flat];
                for j in 0..d {
                    prod *= cos_tab[j * modes + k[j]];
                }
                *out = prod;
            }
            if with_gradient {
                let grow = &mut gradients[p * k_count * d..(p + 1) * k_count * d];
                for flat in 0..k_count {
                    let k = &self.indices[flat * d..(flat + 1) * d];
                    for j in 0..d {
                        let mut prod = self.inv_norms[flat];
                        for (l, &kl) in k.iter().enumerate() {
                            prod *= if l == j {
                                dcos_tab[l * modes + kl]
                            } else {
                                cos_tab[l * modes + kl]
                            };
                        }
                        grow[flat * d + j] = prod;
                    }
                }
            }
        }
        BasisTable {
            k_count,
            dims: d,
            values,
            gradients,
        }
    }
}

/// Basis values (and gradients) at a sequence of points.
#[derive(Debug, Clone)]
pub(crate) struct BasisTable {
    pub k_count: usize,
    pub dims: usize,
    values: Vec<f64>,
    gradients: Vec<f64>,
}

impl BasisTable {
    pub fn point_values(&self, p: usize) -> &[f64] {
        &self.values[p * self.k_count..(p + 1) * self.k_count]
    }

    /// `grad[k * dims + j] = dF_k/dx_j` at point `p`.
    pub fn point_gradients(&self, p: usize) -> &[f64] {
        let stride = self.k_count * self.dims;
        &self.gradients[p * stride..(p + 1) * stride]
    }
}

/// Coefficients `c_k` (or `xi_k`) on a truncated basis together with the
/// metric weights `alpha_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoefficients {
    values: Vec<f64>,
    weights: Vec<f64>,
    basis: BasisConfig,
}

impl SpectralCoefficients {
    pub fn new(values: Vec<f64>, basis: BasisConfig) -> Result<Self> {
        basis.validate()?;
        if values.len() != basis.num_coefficients() {
            return Err(Error::shape(format!(
                "{} values for {} basis functions",
                values.len(),
                basis.num_coefficients()
            )));
        }
        Ok(SpectralCoefficients {
            values,
            weights: coefficient_weights(&basis),
            basis,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self) -> &BasisConfig {
        &self.basis
    }

    pub fn get(&self, k: &[usize]) -> Option<f64> {
        self.basis.flat_index(k).map(|i| self.values[i])
    }
}

/// A discrete-time state sequence with the controls that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
    controls: Vec<Vec<f64>>,
    dt: f64,
}

impl Trajectory {
    pub fn new(states: Vec<Vec<f64>>, controls: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::precondition("trajectory has no states"));
        }
        if states.len() != controls.len() + 1 {
            return Err(Error::shape(format!(
                "{} states require {} controls, got {}",
                states.len(),
                states.len() - 1,
                controls.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::precondition("dt must be positive"));
        }
        let dims = states[0].len();
        if dims == 0 {
            return Err(Error::shape("states must have at least one coordinate"));
        }
        for s in &states {
            check_point(s, dims)?;
        }
        if controls.iter().any(|u| u.len() != dims) {
            return Err(Error::shape("control dimension differs from state dimension"));
        }
        Ok(Trajectory {
            states,
            controls,
            dt,
        })
    }

    /// A trajectory that stays at `x` for `steps` states.
    pub fn stationary(x: Vec<f64>, steps: usize, dt: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::precondition("trajectory has no states"));
        }
        let zero = vec![0.0; x.len()];
        Trajectory::new(vec![x; steps], vec![zero; steps - 1], dt)
    }

    /// Builds a trajectory through the given states, inferring controls by
    /// finite differences.
    pub fn from_states(states: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        let controls = states
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| (b - a) / dt).collect())
            .collect();
        Trajectory::new(states, controls, dt)
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dims(&self) -> usize {
        self.states[0].len()
    }

    /// Number of states, `T + 1`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Midpoint-rule coefficients `xi_k` of a normalized 2-D map.
pub fn map_coefficients(map: &ObjectiveMap, cfg: &BasisConfig) -> Result<SpectralCoefficients> {
    cfg.validate()?;
    if cfg.dims != 2 {
        return Err(Error::shape(format!(
            "objective maps are two-dimensional, basis has {} dims",
            cfg.dims
        )));
    }
    let integral = map.integral();
    if (integral - 1.0).abs() > 1e-9 {
        return Err(Error::precondition(format!(
            "map `{}` integrates to {integral}, expected 1",
            map.name()
        )));
    }
    let (nx, ny) = map.resolution();
    let modes = cfg.modes_per_dim;
    let axis_table = |n: usize| -> Vec<f64> {
        let mut t = vec![0.0; modes * n];
        for m in 0..modes {
            for i in 0..n {
                let center = (i as f64 + 0.5) / n as f64;
                t[m * n + i] = (m as f64 * PI * center).cos();
            }
        }
        t
    };
    let cos_x = axis_table(nx);
    let cos_y = axis_table(ny);
    let grid = map.grid();

    // Separable sum: project each row onto the x modes, then the rows onto the y modes.
    let mut row_proj = vec![0.0; modes * ny];
    for r in 0..ny {
        let row = &grid[r * nx..(r + 1) * nx];
        for kx in 0..modes {
            let tab = &cos_x[kx * nx..(kx + 1) * nx];
            row_proj[kx * ny + r] = row.iter().zip(tab).map(|(g, c)| g * c).sum();
        }
    }
    let area = map.cell_area();
    let mut values = vec![0.0; cfg.num_coefficients()];
    for kx in 0..modes {
        for ky in 0..modes {
            let tab = &cos_y[ky * ny..(ky + 1) * ny];
            let proj = &row_proj[kx * ny..(kx + 1) * ny];
            let s: f64 = proj.iter().zip(tab).map(|(p, c)| p * c).sum();
            let k = [kx, ky];
            values[kx * modes + ky] = inverse_norm(&k) * s * area;
        }
    }
    SpectralCoefficients::new(values, *cfg)
}

/// Time-average coefficients `c_k = (1/(T+1)) sum_t F_k(x(t))`.
pub fn trajectory_coefficients(
    traj: &Trajectory,
    cfg: &BasisConfig,
) -> Result<SpectralCoefficients> {
    let basis = Basis::new(*cfg)?;
    trajectory_coefficients_with(&basis, traj)
}

pub(crate) fn trajectory_coefficients_with(
    basis: &Basis,
    traj: &Trajectory,
) -> Result<SpectralCoefficients> {
    if traj.dims() != basis.config().dims {
        return Err(Error::shape(format!(
            "trajectory has {} dims, basis has {}",
            traj.dims(),
            basis.config().dims
        )));
    }
    let table = basis.tabulate(traj.states(), false);
    let mut values = vec![0.0; basis.len()];
    for p in 0..traj.len() {
        for (acc, f) in values.iter_mut().zip(table.point_values(p)) {
            *acc += f;
        }
    }
    let n = traj.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    basis.coefficients(values)
}

fn check_compatible(a: &SpectralCoefficients, b: &SpectralCoefficients) -> Result<()> {
    if a.basis != b.basis || a.values.len() != b.values.len() {
        return Err(Error::shape(format!(
            "coefficient bases differ: {:?} vs {:?}",
            a.basis, b.basis
        )));
    }
    if a.weights != b.weights {
        return Err(Error::shape("coefficient weights differ"));
    }
    Ok(())
}

/// `sum_k alpha_k |c_k - xi_k|^2`.
pub fn ergodic_metric(c: &SpectralCoefficients, xi: &SpectralCoefficients) -> Result<f64> {
    check_compatible(c, xi)?;
    Ok(weighted_distance(&c.weights, &c.values, &xi.values))
}

pub(crate) fn weighted_distance(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * (x - y) * (x - y))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg2(modes: usize) -> BasisConfig {
        BasisConfig::new(2, modes).unwrap()
    }

    #[test]
    fn constant_basis_is_one() {
        let v = evaluate_basis(&[0.3, 0.7], &[0, 0], &cfg2(10)).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn corner_value_of_first_mixed_mode() {
        // Each nonzero mode has squared norm 1/2; integrate cos^2 numerically to confirm.
        let n = 200_000;
        let h = 1.0 / n as f64;
        let sq_norm: f64 = (0..n)
            .map(|i| ((i as f64 + 0.5) * h * PI).cos().powi(2) * h)
            .sum();
        assert_abs_diff_eq!(sq_norm, 0.5, epsilon = 1e-9);
        let expected = 1.0 / (sq_norm.sqrt() * sq_norm.sqrt());
        let v = evaluate_basis(&[0.0, 0.0], &[1, 1], &cfg2(10)).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-8);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn node_of_first_mode() {
        let v = evaluate_basis(&[0.5, 0.5], &[1, 0], &cfg2(10)).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_domain_point_rejected() {
        let err = evaluate_basis(&[1.2, 0.5], &[1, 0], &cfg2(4)).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
        let err = evaluate_basis(&[-0.01, 0.5], &[0, 0], &cfg2(4)).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(BasisConfig::new(0, 3).is_err());
        assert!(BasisConfig::new(4, 3).is_err());
        assert!(BasisConfig::new(2, 0).is_err());
    }

    #[test]
    fn weights_follow_sobolev_law() {
        let w = coefficient_weights(&cfg2(10));
        let cfg = cfg2(10);
        assert_eq!(w[cfg.flat_index(&[0, 0]).unwrap()], 1.0);
        assert_abs_diff_eq!(
            w[cfg.flat_index(&[1, 0]).unwrap()],
            0.353_553_390_593_273_8,
            epsilon = 1e-15
        );
        for kx in 0..10 {
            for ky in 0..9 {
                let a = w[cfg.flat_index(&[kx, ky]).unwrap()];
                let b = w[cfg.flat_index(&[kx, ky + 1]).unwrap()];
                let c = w[cfg.flat_index(&[ky, kx]).unwrap()];
                let d = w[cfg.flat_index(&[ky + 1, kx]).unwrap()];
                assert!(a > 0.0 && b <= a && d <= c);
            }
        }
    }

    #[test]
    fn flat_index_round_trips() {
        let cfg = BasisConfig::new(3, 4).unwrap();
        for flat in 0..cfg.num_coefficients() {
            assert_eq!(cfg.flat_index(&cfg.multi_index(flat)), Some(flat));
        }
        assert_eq!(cfg.flat_index(&[0, 0, 4]), None);
    }

    #[test]
    fn tabulated_gradient_matches_finite_difference() {
        let basis = Basis::new(cfg2(5)).unwrap();
        let x = vec![0.31, 0.67];
        let table = basis.tabulate(std::slice::from_ref(&x), true);
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let tp = basis.tabulate(&[xp], false);
            let tm = basis.tabulate(&[xm], false);
            for k in 0..basis.len() {
                let fd = (tp.point_values(0)[k] - tm.point_values(0)[k]) / (2.0 * h);
                assert_abs_diff_eq!(table.point_gradients(0)[k * 2 + j], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn stationary_trajectory_coefficients_are_basis_values() {
        let cfg = cfg2(6);
        let x = vec![0.2, 0.85];
        let traj = Trajectory::stationary(x.clone(), 17, 0.1).unwrap();
        let c = trajectory_coefficients(&traj, &cfg).unwrap();
        for flat in 0..cfg.num_coefficients() {
            let f = evaluate_basis(&x, &cfg.multi_index(flat), &cfg).unwrap();
            assert_abs_diff_eq!(c.values()[flat], f, epsilon = 1e-12);
        }
        assert_eq!(c.values()[0], 1.0);
    }

    #[test]
    fn two_point_trajectory_is_mean() {
        let cfg = cfg2(4);
        let a = vec![0.1, 0.4];
        let b = vec![0.9, 0.3];
        let traj = Trajectory::from_states(vec![a.clone(), b.clone()], 0.1).unwrap();
        let c = trajectory_coefficients(&traj, &cfg).unwrap();
        for flat in 0..cfg.num_coefficients() {
            let k = cfg.multi_index(flat);
            let fa = evaluate_basis(&a, &k, &cfg).unwrap();
            let fb = evaluate_basis(&b, &k, &cfg).unwrap();
            assert_abs_diff_eq!(c.values()[flat], (fa + fb) / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn trajectory_rejects_bad_shapes() {
        assert!(Trajectory::new(vec![], vec![], 0.1).is_err());
        assert!(Trajectory::new(vec![vec![0.5, 0.5]], vec![vec![0.0, 0.0]], 0.1).is_err());
        assert!(matches!(
            Trajectory::new(vec![vec![1.5, 0.5]], vec![], 0.1),
            Err(Error::Domain { .. })
        ));
        assert!(Trajectory::stationary(vec![0.5, 0.5], 0, 0.1).is_err());
    }

    #[test]
    fn metric_single_term() {
        let cfg = cfg2(3);
        let xi = SpectralCoefficients::new(vec![0.5; 9], cfg).unwrap();
        let mut cv = vec![0.5; 9];
        cv[0] += 0.25;
        let c = SpectralCoefficients::new(cv, cfg).unwrap();
        assert_abs_diff_eq!(ergodic_metric(&c, &xi).unwrap(), 0.0625, epsilon = 1e-15);
        assert_eq!(ergodic_metric(&xi, &xi).unwrap(), 0.0);
    }

    #[test]
    fn metric_rejects_basis_mismatch() {
        let a = SpectralCoefficients::new(vec![0.0; 9], cfg2(3)).unwrap();
        let b = SpectralCoefficients::new(vec![0.0; 16], cfg2(4)).unwrap();
        assert!(matches!(ergodic_metric(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn unnormalized_map_rejected() {
        let map = ObjectiveMap::new(vec![1.0; 16], 4, 4, "raw").unwrap();
        let scaled = ObjectiveMap::new(vec![2.0; 16], 4, 4, "raw").unwrap();
        assert!(map_coefficients(&map, &cfg2(3)).is_ok());
        assert!(matches!(
            map_coefficients(&scaled, &cfg2(3)),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            map_coefficients(&map, &BasisConfig::new(3, 3).unwrap()),
            Err(Error::Shape(_))
        ));
    }
}
