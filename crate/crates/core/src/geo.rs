//! Terrain-derived objective maps: thresholded entropy, raycast shade and
//! Sobel slope.
//!
//! DEM rows run south to north (row 0 is the lowest `y`), matching
//! [`ObjectiveMap`]. Loading an ESRI ASCII grid flips its north-first rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::ObjectiveMap;

/// Value assigned to shadowed cells before normalization.
pub const SHADE_FLOOR: f64 = 0.05;
/// Value assigned to sunlit cells before normalization.
pub const SUNLIT: f64 = 1.0;

/// Elevation grid in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dem {
    elevations: Vec<f64>,
    ncols: usize,
    nrows: usize,
    cell_size: f64,
}

impl Dem {
    pub fn new(elevations: Vec<f64>, ncols: usize, nrows: usize, cell_size: f64) -> Result<Self> {
        if ncols < 3 || nrows < 3 {
            return Err(Error::shape(format!(
                "DEM needs at least 3x3 cells, got {ncols}x{nrows}"
            )));
        }
        if elevations.len() != ncols * nrows {
            return Err(Error::shape(format!(
                "{} elevations for a {ncols}x{nrows} DEM",
                elevations.len()
            )));
        }
        if elevations.iter().any(|z| !z.is_finite()) {
            return Err(Error::precondition("DEM elevations must be finite"));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::precondition("DEM cell size must be positive"));
        }
        Ok(Dem {
            elevations,
            ncols,
            nrows,
            cell_size,
        })
    }

    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        cell_size: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut z = Vec::with_capacity(ncols * nrows);
        for r in 0..nrows {
            for c in 0..ncols {
                z.push(f(c, r));
            }
        }
        Dem::new(z, ncols, nrows, cell_size)
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.elevations[row * self.ncols + col]
    }

    fn clamped(&self, col: isize, row: isize) -> f64 {
        let c = col.clamp(0, self.ncols as isize - 1) as usize;
        let r = row.clamp(0, self.nrows as isize - 1) as usize;
        self.at(c, r)
    }

    /// Swaps rows and columns.
    pub fn transposed(&self) -> Dem {
        Dem::from_fn(self.nrows, self.ncols, self.cell_size, |c, r| self.at(r, c))
            .expect("transposing a valid DEM")
    }

    /// Bilinear interpolation at fractional `(col, row)`; caller keeps the point inside the grid.
    fn bilinear(&self, col: f64, row: f64) -> f64 {
        let c0 = (col.floor() as usize).min(self.ncols - 2);
        let r0 = (row.floor() as usize).min(self.nrows - 2);
        let fc = col - c0 as f64;
        let fr = row - r0 as f64;
        let z00 = self.at(c0, r0);
        let z10 = self.at(c0 + 1, r0);
        let z01 = self.at(c0, r0 + 1);
        let z11 = self.at(c0 + 1, r0 + 1);
        let bottom = z00 + fc * (z10 - z00);
        let top = z01 + fc * (z11 - z01);
        bottom + fr * (top - bottom)
    }

    /// Parses the ESRI ASCII grid subset: `ncols`, `nrows`, `cellsize` headers
    /// (optional corner and `NODATA_value` headers are accepted), then rows from
    /// north to south.
    pub fn from_esri_ascii(text: &str) -> Result<Self> {
        let ctx = "ESRI ASCII grid";
        let mut ncols = None;
        let mut nrows = None;
        let mut cell_size = None;
        let mut nodata = None;
        let mut values = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let first = line.split_whitespace().next().unwrap_or_default();
            if first.starts_with(|ch: char| ch.is_ascii_alphabetic()) {
                let mut parts = line.split_whitespace();
                let key = parts.next().unwrap_or_default().to_ascii_lowercase();
                let value = parts
                    .next()
                    .ok_or_else(|| Error::parse(ctx, format!("header `{key}` has no value")))?;
                let num = |v: &str| {
                    v.parse::<f64>()
                        .map_err(|e| Error::parse(ctx, format!("header `{key}`: {e}")))
                };
                match key.as_str() {
                    "ncols" => ncols = Some(num(value)? as usize),
                    "nrows" => nrows = Some(num(value)? as usize),
                    "cellsize" => cell_size = Some(num(value)?),
                    "nodata_value" => nodata = Some(num(value)?),
                    "xllcorner" | "yllcorner" | "xllcenter" | "yllcenter" => {}
                    _ => return Err(Error::parse(ctx, format!("unknown header `{key}`"))),
                }
                continue;
            }
            for tok in line.split_whitespace() {
                let z: f64 = tok
                    .parse()
                    .map_err(|e| Error::parse(ctx, format!("bad elevation `{tok}`: {e}")))?;
                if nodata == Some(z) {
                    return Err(Error::parse(ctx, "NODATA cells are not supported"));
                }
                values.push(z);
            }
        }
        let ncols = ncols.ok_or_else(|| Error::parse(ctx, "missing ncols"))?;
        let nrows = nrows.ok_or_else(|| Error::parse(ctx, "missing nrows"))?;
        let cell_size = cell_size.ok_or_else(|| Error::parse(ctx, "missing cellsize"))?;
        if values.len() != ncols * nrows {
            return Err(Error::parse(
                ctx,
                format!("{} elevations, expected {}", values.len(), ncols * nrows),
            ));
        }
        let mut south_first = Vec::with_capacity(values.len());
        for r in (0..nrows).rev() {
            south_first.extend_from_slice(&values[r * ncols..(r + 1) * ncols]);
        }
        Dem::new(south_first, ncols, nrows, cell_size)
    }

    pub fn to_esri_ascii(&self) -> String {
        let mut out = format!(
            "ncols {}\nnrows {}\ncellsize {:?}\n",
            self.ncols, self.nrows, self.cell_size
        );
        for r in (0..self.nrows).rev() {
            let row: Vec<String> = (0..self.ncols)
                .map(|c| format!("{:?}", self.at(c, r)))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dem::from_esri_ascii(&text)
    }
}

/// Direction to the sun. Azimuth is clockwise from north (+row) in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunVector {
    azimuth: f64,
    elevation_angle: f64,
}

impl SunVector {
    pub fn new(azimuth: f64, elevation_angle: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::TAU).contains(&azimuth) {
            return Err(Error::precondition(format!(
                "sun azimuth {azimuth} outside [0, 2pi)"
            )));
        }
        if !(elevation_angle > 0.0 && elevation_angle <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::precondition(format!(
                "sun elevation {elevation_angle} outside (0, pi/2]"
            )));
        }
        Ok(SunVector {
            azimuth,
            elevation_angle,
        })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        SunVector::new(
            azimuth_deg.rem_euclid(360.0).to_radians(),
            elevation_deg.to_radians(),
        )
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation_angle(&self) -> f64 {
        self.elevation_angle
    }
}

/// How the slope map becomes a coverage objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeMode {
    /// Prefer gentle terrain: `max - slope`.
    #[default]
    Invert,
    /// Cover steep terrain directly.
    Cover,
}

/// Rescales the entropy grid by its maximum, sets every cell strictly above
/// `fraction` of the maximum to 1, and renormalizes.
pub fn threshold_entropy(entropy: &ObjectiveMap, fraction: f64) -> Result<ObjectiveMap> {
    let raw = threshold_entropy_raw(entropy, fraction)?;
    raw.normalized()
}

/// [`threshold_entropy`] without the final normalization (cells in `[0, 1]`).
pub fn threshold_entropy_raw(entropy: &ObjectiveMap, fraction: f64) -> Result<ObjectiveMap> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::precondition(format!(
            "threshold fraction {fraction} outside (0, 1)"
        )));
    }
    let max = entropy.max_value();
    if max <= 0.0 {
        return Err(Error::degenerate("entropy map is identically zero"));
    }
    let grid = entropy
        .grid()
        .iter()
        .map(|v| {
            let rel = v / max;
            if rel > fraction {
                1.0
            } else {
                rel
            }
        })
        .collect();
    let (nx, ny) = entropy.resolution();
    ObjectiveMap::new(grid, nx, ny, "entropy")
}

/// Per-cell Sobel gradient magnitude in elevation units per meter
/// (unnormalized; all zeros on flat terrain).
pub fn sobel_slope(dem: &Dem) -> ObjectiveMap {
    let scale = 1.0 / (8.0 * dem.cell_size);
    let mut grid = Vec::with_capacity(dem.ncols * dem.nrows);
    for r in 0..dem.nrows as isize {
        for c in 0..dem.ncols as isize {
            let z = |dc: isize, dr: isize| dem.clamped(c + dc, r + dr);
            let gx = (z(1, -1) + 2.0 * z(1, 0) + z(1, 1)) - (z(-1, -1) + 2.0 * z(-1, 0) + z(-1, 1));
            let gy = (z(-1, 1) + 2.0 * z(0, 1) + z(1, 1)) - (z(-1, -1) + 2.0 * z(0, -1) + z(1, -1));
            let gx = gx * scale;
            let gy = gy * scale;
            grid.push((gx * gx + gy * gy).sqrt());
        }
    }
    ObjectiveMap::new(grid, dem.ncols, dem.nrows, "slope").expect("sobel output is a valid grid")
}

/// Turns a slope magnitude map into a normalized coverage objective. A map
/// without any contrast becomes uniform.
pub fn slope_objective(slope: &ObjectiveMap, mode: SlopeMode) -> Result<ObjectiveMap> {
    let max = slope.max_value();
    let min = slope.grid().iter().cloned().fold(f64::INFINITY, f64::min);
    let (nx, ny) = slope.resolution();
    if max - min <= 0.0 {
        return ObjectiveMap::uniform(nx, ny, "slope");
    }
    let grid = match mode {
        SlopeMode::Invert => slope.grid().iter().map(|s| max - s).collect(),
        SlopeMode::Cover => slope.grid().to_vec(),
    };
    ObjectiveMap::new(grid, nx, ny, "slope")?.normalized()
}

/// Binary shade mask: [`SHADE_FLOOR`] where the ray toward the sun is
/// occluded, [`SUNLIT`] elsewhere (unnormalized).
pub fn shade_mask(dem: &Dem, sun: SunVector) -> ObjectiveMap {
    let (dx, dy) = (sun.azimuth.sin(), sun.azimuth.cos());
    let rise_per_step = 0.5 * dem.cell_size * sun.elevation_angle.tan();
    let z_max = dem.elevations.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_col = (dem.ncols - 1) as f64;
    let max_row = (dem.nrows - 1) as f64;
    let mut grid = Vec::with_capacity(dem.ncols * dem.nrows);
    for r in 0..dem.nrows {
        for c in 0..dem.ncols {
            let z0 = dem.at(c, r);
            let mut shaded = false;
            let mut i = 1usize;
            loop {
                let t = 0.5 * i as f64;
                let px = c as f64 + t * dx;
                let py = r as f64 + t * dy;
                if px < 0.0 || py < 0.0 || px > max_col || py > max_row {
                    break;
                }
                let ray = z0 + i as f64 * rise_per_step;
                if ray >= z_max {
                    break;
                }
                if dem.bilinear(px, py) > ray {
                    shaded = true;
                    break;
                }
                i += 1;
            }
            grid.push(if shaded { SHADE_FLOOR } else { SUNLIT });
        }
    }
    ObjectiveMap::new(grid, dem.ncols, dem.nrows, "shade").expect("shade output is a valid grid")
}

/// Normalized shade objective: sunlit cells are preferred.
pub fn raycast_shade(dem: &Dem, sun: SunVector) -> Result<ObjectiveMap> {
    shade_mask(dem, sun).normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn map(grid: Vec<f64>, nx: usize, ny: usize) -> ObjectiveMap {
        ObjectiveMap::new(grid, nx, ny, "t").unwrap()
    }

    #[test]
    fn high_entropy_cell_saturates() {
        let m = map(vec![1.0, 0.8, 0.5, 0.2], 2, 2);
        let raw = threshold_entropy_raw(&m, 0.75).unwrap();
        assert_eq!(raw.grid(), &[1.0, 1.0, 0.5, 0.2]);
        let norm = threshold_entropy(&m, 0.75).unwrap();
        assert_abs_diff_eq!(norm.integral(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_entropy_becomes_uniform() {
        let m = map(vec![0.3; 9], 3, 3);
        let out = threshold_entropy(&m, 0.75).unwrap();
        let u = ObjectiveMap::uniform(3, 3, "u").unwrap();
        for (a, b) in out.grid().iter().zip(u.grid()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn entropy_threshold_errors() {
        assert!(matches!(
            threshold_entropy(&map(vec![0.0; 4], 2, 2), 0.75),
            Err(Error::Degenerate(_))
        ));
        assert!(threshold_entropy(&map(vec![1.0; 4], 2, 2), 1.0).is_err());
        assert!(threshold_entropy(&map(vec![1.0; 4], 2, 2), 0.0).is_err());
    }

    #[test]
    fn flat_dem_has_zero_slope_and_full_sun() {
        let dem = Dem::from_fn(6, 5, 2.0, |_, _| 12.5).unwrap();
        assert!(sobel_slope(&dem).grid().iter().all(|&s| s == 0.0));
        let sun = SunVector::from_degrees(135.0, 20.0).unwrap();
        assert!(shade_mask(&dem, sun).grid().iter().all(|&v| v == SUNLIT));
        let obj = slope_objective(&sobel_slope(&dem), SlopeMode::Invert).unwrap();
        assert_abs_diff_eq!(obj.integral(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn plane_slope_matches_gradient_on_interior() {
        // z = 0.1 * x with x in meters, cell_size 1: each Sobel column difference
        // spans 2 m, weights sum to 4, so (4 * 0.2) / 8 = 0.1.
        let dem = Dem::from_fn(5, 5, 1.0, |c, _| 0.1 * c as f64).unwrap();
        let s = sobel_slope(&dem);
        for r in 1..4 {
            for c in 1..4 {
                assert_abs_diff_eq!(s.get(c, r), 0.1, epsilon = 1e-12);
            }
        }
        // Replicated edges see half the span.
        assert_abs_diff_eq!(s.get(0, 2), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn slope_scales_with_cell_size() {
        let dem = Dem::from_fn(5, 5, 2.0, |_, r| 0.3 * 2.0 * r as f64).unwrap();
        assert_abs_diff_eq!(sobel_slope(&dem).get(2, 2), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn slope_rotates_with_dem() {
        let dem = Dem::from_fn(7, 5, 1.0, |c, r| ((c * c) as f64).sin() + (r as f64 * 0.7).cos() * 3.0)
            .unwrap();
        // 90 degree counter-clockwise rotation: new(c, r) = old(r, ncols-1-c).
        let rot = Dem::from_fn(5, 7, 1.0, |c, r| dem.at(6 - r, c)).unwrap();
        let s = sobel_slope(&dem);
        let sr = sobel_slope(&rot);
        for r in 0..7 {
            for c in 0..5 {
                assert_abs_diff_eq!(sr.get(c, r), s.get(6 - r, c), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spike_casts_shadow_down_sun() {
        // Sun due east at 45 degrees; a 100 m spike at column 150 shades row cells
        // to its west up to 99 m away (ray height equals horizontal distance).
        let dem = Dem::from_fn(160, 5, 1.0, |c, r| if c == 150 && r == 2 { 100.0 } else { 0.0 })
            .unwrap();
        let sun = SunVector::from_degrees(90.0, 45.0).unwrap();
        let m = shade_mask(&dem, sun);
        assert_eq!(m.get(149, 2), SHADE_FLOOR);
        assert_eq!(m.get(51, 2), SHADE_FLOOR);
        assert_eq!(m.get(50, 2), SUNLIT);
        assert_eq!(m.get(151, 2), SUNLIT);
        assert_eq!(m.get(120, 0), SUNLIT);
        let shaded = m.grid().iter().filter(|&&v| v == SHADE_FLOOR).count();
        assert_eq!(shaded, 99);
    }

    #[test]
    fn steeper_sun_shrinks_shadows() {
        let dem = Dem::from_fn(40, 40, 1.0, |c, r| {
            let (x, y) = (c as f64 - 20.0, r as f64 - 18.0);
            30.0 * (-(x * x + y * y) / 20.0).exp()
        })
        .unwrap();
        let low = shade_mask(&dem, SunVector::from_degrees(200.0, 45.0).unwrap());
        let high = shade_mask(&dem, SunVector::from_degrees(200.0, 89.0).unwrap());
        let count = |m: &ObjectiveMap| m.grid().iter().filter(|&&v| v == SHADE_FLOOR).count();
        assert!(count(&low) > 0);
        assert!(count(&high) <= count(&low));
        for (h, l) in high.grid().iter().zip(low.grid()) {
            if *h == SHADE_FLOOR {
                assert_eq!(*l, SHADE_FLOOR);
            }
        }
        let vertical = shade_mask(&dem, SunVector::new(0.0, std::f64::consts::FRAC_PI_2).unwrap());
        assert_eq!(count(&vertical), 0);
    }

    #[test]
    fn sun_vector_validation() {
        assert!(SunVector::new(0.0, 0.0).is_err());
        assert!(SunVector::new(-0.1, 0.5).is_err());
        assert!(SunVector::new(0.0, 1.6).is_err());
        assert!(SunVector::from_degrees(370.0, 30.0).is_ok());
    }

    #[test]
    fn esri_round_trip_flips_rows() {
        let text = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 2.5\n7 8 9\n4 5 6\n1 2 3\n";
        let dem = Dem::from_esri_ascii(text).unwrap();
        assert_eq!(dem.at(0, 0), 1.0);
        assert_eq!(dem.at(2, 2), 9.0);
        assert_eq!(dem.cell_size(), 2.5);
        let back = Dem::from_esri_ascii(&dem.to_esri_ascii()).unwrap();
        assert_eq!(back, dem);
        assert!(Dem::from_esri_ascii("ncols 3\nnrows 3\ncellsize 1\n1 2 3\n").is_err());
        assert!(Dem::from_esri_ascii("ncols 3\nnrows 3\n1 2 3\n4 5 6\n7 8 9\n").is_err());
        assert!(Dem::new(vec![0.0; 4], 2, 2, 1.0).is_err());
    }
}
