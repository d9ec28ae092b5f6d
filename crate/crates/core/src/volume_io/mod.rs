//! Loading, validation and preprocessing of 3D probability volumes.
//!
//! Voxels are linearized with x fastest: `index = x + nx * (y + ny * z)`.
//! Every index that leaves this crate (diagram birth vertices, labels,
//! oracle component ids) uses that convention.

mod nifti;
mod preprocess;
mod raw;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nifti::{load_nifti, read_nifti, NIFTI1_HEADER_SIZE};
pub use preprocess::{crop_to_foreground, downsample};
pub use raw::{load_raw_json, write_raw_json, RawJsonHeader};

/// Values below this (before clamping) mark a file as not being a probability map.
pub const RANGE_LOW: f64 = -0.01;
/// Values above this (before clamping) mark a file as not being a probability map.
pub const RANGE_HIGH: f64 = 1.01;

/// A dense 3D field of lesion probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    voxel_size_mm: [f32; 3],
    data: Vec<f32>,
}

impl Volume {
    /// Builds a volume, checking geometry and that every value is a finite
    /// probability in `[0, 1]`.
    pub fn new(dims: [usize; 3], voxel_size_mm: [f32; 3], data: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Geometry(format!(
                "dims must be positive, got {dims:?}"
            )));
        }
        if voxel_size_mm.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Geometry(format!(
                "voxel size must be positive, got {voxel_size_mm:?}"
            )));
        }
        let expected = dims[0]
            .checked_mul(dims[1])
            .and_then(|n| n.checked_mul(dims[2]))
            .ok_or_else(|| Error::Geometry(format!("dims {dims:?} overflow")))?;
        if expected != data.len() {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    index: i,
                    value: v as f64,
                });
            }
        }
        Ok(Volume {
            dims,
            voxel_size_mm,
            data,
        })
    }

    /// Builds a volume from values as stored on disk: values within
    /// `[RANGE_LOW, RANGE_HIGH]` are clamped into `[0, 1]`, anything further
    /// out is rejected.
    pub fn from_loaded(dims: [usize; 3], voxel_size_mm: [f32; 3], raw: Vec<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(raw.len());
        for (i, v) in raw.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if !(RANGE_LOW..=RANGE_HIGH).contains(&v) {
                return Err(Error::OutOfRange { index: i, value: v });
            }
            data.push(v.clamp(0.0, 1.0) as f32);
        }
        Volume::new(dims, voxel_size_mm, data)
    }

    /// Volume of zeros with unit voxels.
    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        let n = dims.iter().product();
        Volume::new(dims, [1.0; 3], vec![0.0; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size_mm(&self) -> [f32; 3] {
        self.voxel_size_mm
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// Visits the 6-connected face neighbours of `index`.
    #[inline]
    pub fn for_each_neighbor(&self, index: usize, f: impl FnMut(usize)) {
        for_each_neighbor(self.dims, index, f)
    }
}

/// Visits the 6-connected face neighbours of `index` in a grid of `dims`.
#[inline]
pub fn for_each_neighbor(dims: [usize; 3], index: usize, mut f: impl FnMut(usize)) {
    let [nx, ny, nz] = dims;
    let plane = nx * ny;
    let x = index % nx;
    let y = (index / nx) % ny;
    let z = index / plane;
    if x > 0 {
        f(index - 1);
    }
    if x + 1 < nx {
        f(index + 1);
    }
    if y > 0 {
        f(index - nx);
    }
    if y + 1 < ny {
        f(index + nx);
    }
    if z > 0 {
        f(index - plane);
    }
    if z + 1 < nz {
        f(index + plane);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    Nifti1,
    RawJson,
}

/// What the loader saw on disk before preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeaderInfo {
    pub source_format: SourceFormat,
    pub original_dims: [usize; 3],
    /// `(slope, intercept)` when a scaling was applied; slope is never zero.
    pub scale_applied: Option<(f64, f64)>,
}

/// Loads a volume, choosing the reader from the file name: `.json` is the
/// raw sidecar format, anything else is read as NIfTI-1 (optionally gzipped).
pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        load_raw_json(path)
    } else {
        load_nifti(path)
    }
}
