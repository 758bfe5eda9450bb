//! Objective maps over the unit square, synthetic Gaussian maps, weighted-sum
//! scalarization, simplex weight grids and TOPSIS selection.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the integral of a normalized map.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Nonnegative grid over `[0,1]^2`, stored row-major with rows along `y`
/// (row 0 at the lowest `y`) and columns along `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveMap {
    grid: Vec<f64>,
    nx: usize,
    ny: usize,
    name: String,
}

impl ObjectiveMap {
    pub fn new(grid: Vec<f64>, nx: usize, ny: usize, name: impl Into<String>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::shape(format!(
                "maps need at least 2x2 cells, got {nx}x{ny}"
            )));
        }
        if grid.len() != nx * ny {
            return Err(Error::shape(format!(
                "{} cells for a {nx}x{ny} map",
                grid.len()
            )));
        }
        if let Some(bad) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::precondition(format!(
                "map cells must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(ObjectiveMap {
            grid,
            nx,
            ny,
            name: name.into(),
        })
    }

    /// Fills a map by evaluating `f` at every cell center.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        name: impl Into<String>,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut grid = Vec::with_capacity(nx * ny);
        for r in 0..ny {
            for c in 0..nx {
                let (x, y) = cell_center(c, r, nx, ny);
                grid.push(f(x, y));
            }
        }
        ObjectiveMap::new(grid, nx, ny, name)
    }

    pub fn uniform(nx: usize, ny: usize, name: impl Into<String>) -> Result<Self> {
        ObjectiveMap::new(vec![1.0; nx * ny], nx, ny, name)?.normalized()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn cell_area(&self) -> f64 {
        1.0 / (self.nx * self.ny) as f64
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.grid[row * self.nx + col]
    }

    pub fn integral(&self) -> f64 {
        self.grid.iter().sum::<f64>() * self.cell_area()
    }

    pub fn max_value(&self) -> f64 {
        self.grid.iter().cloned().fold(0.0, f64::max)
    }

    /// Index `(col, row)` of the largest cell (first on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.grid.iter().enumerate() {
            if *v > self.grid[best] {
                best = i;
            }
        }
        (best % self.nx, best / self.nx)
    }

    /// Cell containing a point of the unit square; the upper boundary maps to the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let col = ((x * self.nx as f64).floor().max(0.0) as usize).min(self.nx - 1);
        let row = ((y * self.ny as f64).floor().max(0.0) as usize).min(self.ny - 1);
        (col, row)
    }

    /// Value of the cell containing `(x, y)`.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let (c, r) = self.cell_of(x, y);
        self.get(c, r)
    }

    pub fn is_normalized(&self) -> bool {
        (self.integral() - 1.0).abs() <= NORMALIZATION_TOL
    }

    /// Rescales so the map integrates to 1 over the unit square.
    pub fn normalized(mut self) -> Result<Self> {
        let integral = self.integral();
        if !(integral > 0.0 && integral.is_finite()) {
            return Err(Error::degenerate(format!(
                "map `{}` has no mass to normalize",
                self.name
            )));
        }
        self.grid.iter_mut().for_each(|v| *v /= integral);
        Ok(self)
    }

    /// Nearest-cell resampling onto a new resolution; the result is renormalized.
    pub fn resample(&self, nx: usize, ny: usize) -> Result<Self> {
        if (nx, ny) == (self.nx, self.ny) {
            return self.clone().normalized();
        }
        ObjectiveMap::from_fn(nx, ny, self.name.clone(), |x, y| self.value_at(x, y))?.normalized()
    }

    /// Plain-text form: a `nx,ny` header then `ny` rows of `nx` comma-separated values.
    pub fn to_text(&self) -> String {
        let mut out = format!("{},{}\n", self.nx, self.ny);
        for r in 0..self.ny {
            let row = &self.grid[r * self.nx..(r + 1) * self.nx];
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                // `{:?}` prints the shortest representation that round-trips.
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let ctx = format!("map `{name}`");
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(&ctx, "missing `nx,ny` header"))?;
        let dims: Vec<&str> = header.split(',').map(str::trim).collect();
        if dims.len() != 2 {
            return Err(Error::parse(&ctx, format!("bad header `{header}`")));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::parse(&ctx, format!("bad dimension `{s}`: {e}")))
        };
        let nx = parse_dim(dims[0])?;
        let ny = parse_dim(dims[1])?;
        let mut grid = Vec::with_capacity(nx * ny);
        let mut rows = 0;
        for line in lines {
            let before = grid.len();
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(&ctx, format!("bad value `{field}`: {e}")))?;
                if v < 0.0 {
                    return Err(Error::parse(&ctx, format!("negative value {v}")));
                }
                grid.push(v);
            }
            if grid.len() - before != nx {
                return Err(Error::parse(
                    &ctx,
                    format!("row {rows} has {} values, expected {nx}", grid.len() - before),
                ));
            }
            rows += 1;
        }
        if rows != ny {
            return Err(Error::parse(&ctx, format!("{rows} rows, expected {ny}")));
        }
        ObjectiveMap::new(grid, nx, ny, name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        ObjectiveMap::from_text(&text, name)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn cell_center(col: usize, row: usize, nx: usize, ny: usize) -> (f64, f64) {
    (
        (col as f64 + 0.5) / nx as f64,
        (row as f64 + 0.5) / ny as f64,
    )
}

/// Nonnegative weights summing to one, one per objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::precondition("weight vector is empty"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::precondition("weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::precondition(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector(weights))
    }

    /// All weight on objective `index`.
    pub fn one_hot(len: usize, index: usize) -> Result<Self> {
        let mut w = vec![0.0; len];
        *w.get_mut(index)
            .ok_or_else(|| Error::precondition("one-hot index out of range"))? = 1.0;
        WeightVector::new(w)
    }

    pub fn equal(len: usize) -> Result<Self> {
        WeightVector::new(vec![1.0 / len as f64; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// One isotropic Gaussian bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPeak {
    pub center: [f64; 2],
    pub sigma: f64,
    pub amplitude: f64,
}

/// Sum of Gaussian peaks sampled at cell centers, normalized to integrate to 1.
pub fn synth_gaussian_map(
    peaks: &[GaussianPeak],
    resolution: (usize, usize),
    name: impl Into<String>,
) -> Result<ObjectiveMap> {
    if peaks.is_empty() {
        return Err(Error::precondition("at least one Gaussian peak is required"));
    }
    for p in peaks {
        if p.center.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::precondition(format!(
                "peak center {:?} outside the unit square",
                p.center
            )));
        }
        if !(p.sigma > 0.0 && p.amplitude > 0.0) {
            return Err(Error::precondition("peak sigma and amplitude must be positive"));
        }
    }
    let (nx, ny) = resolution;
    ObjectiveMap::from_fn(nx, ny, name, |x, y| {
        peaks
            .iter()
            .map(|p| {
                let dx = x - p.center[0];
                let dy = y - p.center[1];
                p.amplitude * (-(dx * dx + dy * dy) / (2.0 * p.sigma * p.sigma)).exp()
            })
            .sum()
    })?
    .normalized()
}

/// Cellwise weighted sum of normalized maps, renormalized.
pub fn scalarize(maps: &[ObjectiveMap], w: &WeightVector) -> Result<ObjectiveMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::precondition("no maps to scalarize"))?;
    if maps.len() != w.len() {
        return Err(Error::shape(format!(
            "{} maps but {} weights",
            maps.len(),
            w.len()
        )));
    }
    let (nx, ny) = first.resolution();
    for m in maps {
        if m.resolution() != (nx, ny) {
            return Err(Error::shape(format!(
                "map `{}` is {:?}, expected {:?}",
                m.name(),
                m.resolution(),
                (nx, ny)
            )));
        }
        if !m.is_normalized() {
            return Err(Error::precondition(format!(
                "map `{}` is not normalized",
                m.name()
            )));
        }
    }
    let mut grid = vec![0.0; nx * ny];
    for (m, &wi) in maps.iter().zip(w.as_slice()) {
        if wi == 0.0 {
            continue;
        }
        for (acc, v) in grid.iter_mut().zip(m.grid()) {
            *acc += wi * v;
        }
    }
    ObjectiveMap::new(grid, nx, ny, "scalarized")?.normalized()
}

/// Every point of the simplex lattice with denominator `steps`, ordered with
/// the first weight ascending (then the next, and so on).
pub fn weight_grid(n: usize, steps: usize) -> Result<Vec<WeightVector>> {
    if n == 0 || steps == 0 {
        return Err(Error::precondition("weight grid needs n >= 1 and steps >= 1"));
    }
    fn compose(remaining: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=remaining {
            prefix.push(first);
            compose(remaining - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut parts = Vec::new();
    compose(steps, n, &mut Vec::with_capacity(n), &mut parts);
    parts
        .into_iter()
        .map(|p| WeightVector::new(p.into_iter().map(|c| c as f64 / steps as f64).collect()))
        .collect()
}

/// Outcome of [`topsis_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct TopsisChoice {
    pub index: usize,
    pub weights: WeightVector,
    /// Closeness coefficient of every candidate.
    pub closeness: Vec<f64>,
}

/// Scores within this relative distance count as tied.
const TIE_TOL: f64 = 1e-12;

/// TOPSIS closeness coefficients for cost criteria (lower is better), with
/// vector normalization and equal criterion weights.
pub fn topsis_closeness(criteria: &[Vec<f64>]) -> Result<Vec<f64>> {
    let cols = criteria
        .first()
        .ok_or_else(|| Error::precondition("no TOPSIS candidates"))?
        .len();
    if criteria.iter().any(|r| r.len() != cols) {
        return Err(Error::shape("criteria rows have different lengths"));
    }
    if criteria.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::precondition("criteria must be finite"));
    }
    let norms: Vec<f64> = (0..cols)
        .map(|j| criteria.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .collect();
    let normalized: Vec<Vec<f64>> = criteria
        .iter()
        .map(|r| {
            r.iter()
                .zip(&norms)
                .map(|(v, n)| if *n > 0.0 { v / n } else { 0.0 })
                .collect()
        })
        .collect();
    let ideal: Vec<f64> = (0..cols)
        .map(|j| normalized.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let anti: Vec<f64> = (0..cols)
        .map(|j| normalized.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let dist = |r: &[f64], p: &[f64]| -> f64 {
        r.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    Ok(normalized
        .iter()
        .map(|r| {
            let d_ideal = dist(r, &ideal);
            let d_anti = dist(r, &anti);
            let denom = d_ideal + d_anti;
            if denom > 0.0 {
                d_anti / denom
            } else {
                0.0
            }
        })
        .collect())
}

/// Picks the candidate with the highest TOPSIS closeness; ties go to the lowest index.
pub fn topsis_select(candidates: &[WeightVector], criteria: &[Vec<f64>]) -> Result<TopsisChoice> {
    if candidates.is_empty() {
        return Err(Error::precondition("no TOPSIS candidates"));
    }
    if candidates.len() != criteria.len() {
        return Err(Error::shape(format!(
            "{} candidates but {} criteria rows",
            candidates.len(),
            criteria.len()
        )));
    }
    let closeness = topsis_closeness(criteria)?;
    let mut best = 0;
    for (i, &s) in closeness.iter().enumerate().skip(1) {
        let top = closeness[best];
        if s > top + TIE_TOL * top.abs().max(1.0) {
            best = i;
        }
    }
    Ok(TopsisChoice {
        index: best,
        weights: candidates[best].clone(),
        closeness,
    })
}
