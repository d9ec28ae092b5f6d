//! Direct-threshold baseline and threshold sweeps for both counting methods.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{compute_persistence, count_from_diagram};
use crate::volume_io::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Persistence,
    DirectThreshold,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Persistence => "persistence",
            Method::DirectThreshold => "direct_threshold",
        }
    }

    pub fn default_grid(self) -> Grid {
        match self {
            Method::Persistence => Grid::default_persistence(),
            Method::DirectThreshold => Grid::default_direct(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Strictly increasing, non-empty list of thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(Vec<f64>);

/// Slack when deciding whether the end of an `A:B:STEP` range is reached.
const GRID_EPS: f64 = 1e-9;

impl Grid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("threshold grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "threshold grid has non-finite values".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "threshold grid must be strictly increasing".into(),
            ));
        }
        Ok(Grid(values))
    }

    /// `start, start + step, ...` up to `end`, including `end` when the span
    /// is a whole number of steps within 1e-9. Points are rounded to 12
    /// decimals so `0.1 * 3` reads back as `0.3`.
    pub fn range(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if !(start.is_finite() && end.is_finite()) || end < start {
            return Err(Error::InvalidArgument(format!(
                "bad grid range {start}:{end}"
            )));
        }
        let steps = ((end - start) / step + GRID_EPS).floor() as usize;
        let values = (0..=steps)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Grid::new(values)
    }

    /// `{0, 0.004, ..., 0.04}`.
    pub fn default_persistence() -> Self {
        Grid::range(0.0, 0.04, 0.004).expect("valid default grid")
    }

    /// `{0.1, 0.2, ..., 1.0}`.
    pub fn default_direct() -> Self {
        Grid::range(0.1, 1.0, 0.1).expect("valid default grid")
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// Parses `A:B:STEP`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(Error::InvalidArgument(format!(
                "grid {s:?} is not A:B:STEP"
            )));
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number {t:?} in grid {s:?}")))
        };
        Grid::range(num(a)?, num(b)?, num(step)?)
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

/// Number of 6-connected components of `{p >= tau}`. Small components are
/// kept. `tau` is compared at float32 precision, the precision voxels are
/// stored in, so a voxel written as 0.9 survives `tau = 0.9`.
pub fn direct_threshold_count(vol: &Volume, tau: f64) -> usize {
    let [nx, ny, _] = vol.dims();
    let plane = nx * ny;
    let data = vol.data();
    let tau = tau as f32;
    let inside = |i: usize| data[i] >= tau;
    let mut parent: Vec<u32> = (0..vol.len() as u32).collect();
    let mut count = 0usize;
    // Raster scan: each voxel links to its already-visited -x, -y, -z
    // neighbours; every fresh voxel adds a component and every successful
    // union removes one.
    for i in 0..vol.len() {
        if !inside(i) {
            continue;
        }
        count += 1;
        let x = i % nx;
        let y = (i / nx) % ny;
        let back = [
            (x > 0).then(|| i - 1),
            (y > 0).then(|| i - nx),
            (i >= plane).then(|| i - plane),
        ];
        for n in back.into_iter().flatten() {
            if !inside(n) {
                continue;
            }
            let a = find(&mut parent, i as u32);
            let b = find(&mut parent, n as u32);
            if a != b {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi as usize] = lo;
                count -= 1;
            }
        }
    }
    count
}

/// Counts along a threshold grid for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub method: Method,
    pub thresholds: Vec<f64>,
    pub counts: Vec<usize>,
}

impl SweepResult {
    /// `method,threshold,count` rows, thresholds with 6 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,threshold,count\n");
        for (t, c) in self.thresholds.iter().zip(&self.counts) {
            let _ = writeln!(out, "{},{:.6},{}", self.method, t, c);
        }
        out
    }
}

pub fn sweep_direct(vol: &Volume, taus: &Grid) -> SweepResult {
    let counts = taus
        .values()
        .par_iter()
        .map(|&tau| direct_threshold_count(vol, tau))
        .collect();
    SweepResult {
        method: Method::DirectThreshold,
        thresholds: taus.values().to_vec(),
        counts,
    }
}

/// One diagram, read at every grid point.
pub fn sweep_persistence(vol: &Volume, thetas: &Grid, mask_eps: f32) -> SweepResult {
    assert!(
        thetas.values()[0] >= 0.0,
        "persistence thresholds must be non-negative"
    );
    let pd = compute_persistence(vol, mask_eps);
    SweepResult {
        method: Method::Persistence,
        thresholds: thetas.values().to_vec(),
        counts: thetas
            .values()
            .iter()
            .map(|&t| count_from_diagram(&pd, t))
            .collect(),
    }
}

pub fn sweep(vol: &Volume, method: Method, grid: &Grid, mask_eps: f32) -> SweepResult {
    match method {
        Method::Persistence => sweep_persistence(vol, grid, mask_eps),
        Method::DirectThreshold => sweep_direct(vol, grid),
    }
}
