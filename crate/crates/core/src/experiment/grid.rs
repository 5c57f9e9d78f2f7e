use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_features::RffMap;
use crate::learner::{Decision, ModelState};

/// A rectangular grid of 2-D raw-space points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            x_min: -4.0,
            x_max: 4.0,
            y_min: -4.0,
            y_max: 4.0,
            nx: 81,
            ny: 81,
        }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::config("grid needs at least 2 points per axis"));
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::config("grid bounds must be increasing"));
        }
        Ok(())
    }

    /// Points in row-major order (y outer, x inner).
    pub fn points(&self) -> Vec<[f64; 2]> {
        let step = |lo: f64, hi: f64, n: usize, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        (0..self.ny)
            .flat_map(|j| {
                (0..self.nx).map(move |i| {
                    [
                        step(self.x_min, self.x_max, self.nx, i),
                        step(self.y_min, self.y_max, self.ny, j),
                    ]
                })
            })
            .collect()
    }
}

/// Classifies every grid point with a fixed state.
pub fn acceptance_grid(state: &ModelState, map: &RffMap, epsilon: f64, grid: &Grid) -> Result<Vec<Decision>> {
    grid.validate()?;
    if map.config().input_dim != 2 {
        return Err(Error::config(format!(
            "grid export needs 2-D inputs, the feature map expects {}",
            map.config().input_dim
        )));
    }
    grid.points()
        .iter()
        .map(|p| Ok(state.classify(&map.embed(p)?, epsilon)))
        .collect()
}

/// Fraction of cells on which two decision grids differ.
pub fn disagreement(a: &[Decision], b: &[Decision]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::input("decision grids must be nonempty and equally sized"));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64)
}

pub fn write_grid_csv(path: impl AsRef<Path>, grid: &Grid, decisions: &[Decision]) -> Result<()> {
    let mut text = String::from("x,y,outlier\n");
    for (p, d) in grid.points().iter().zip(decisions) {
        text.push_str(&format!("{:?},{:?},{}\n", p[0], p[1], d.is_outlier() as u8));
    }
    std::fs::write(path, text)?;
    Ok(())
}
