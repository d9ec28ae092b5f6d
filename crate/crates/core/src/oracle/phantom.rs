//! Synthetic lesion phantoms with known counts.
//!
//! A lesion is a Gaussian bump `peak * exp(-d^2 / (2 s^2))` with
//! `s = FALLOFF * radius`, cut to zero beyond `HALO * s`. Lesions combine by
//! maximum. Speckles perturb single voxels of the lesion support; background
//! voxels stay exactly zero.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{LongitudinalManifest, SubjectEntry, TimepointEntry};
use crate::error::{Error, Result};
use crate::volume_io::{write_raw_json, Volume};

/// Gaussian width in units of the lesion radius.
pub const FALLOFF: f64 = 1.4;
/// Support cutoff in units of the Gaussian width.
pub const HALO: f64 = 2.5;
/// Lesion peaks are drawn from this range.
pub const PEAK_RANGE: (f64, f64) = (0.7, 1.0);
/// Center draws attempted per lesion before giving up.
pub const PLACEMENT_ATTEMPTS: usize = 1000;

/// How lesion centers are spread out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Placement {
    /// The `{p >= 0.5}` balls of any two lesions are at least one voxel
    /// apart, so thresholding at 0.5 (before speckles) finds every lesion.
    Separated,
    /// Cores (radius balls) never intersect, but with the given probability
    /// a lesion is placed right next to an existing one. Neighbouring bumps
    /// then share high saddles.
    Clustered { probability: f64 },
}

/// What a speckle does to its voxel, with `u` uniform in `[0, amplitude]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeckleMode {
    /// `v * (1 - u)`
    Dropout,
    /// `min(v + u, 1)`
    Lift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub n_lesions: usize,
    /// Inclusive range of lesion radii, in voxels.
    pub lesion_radius_range: (f64, f64),
    pub noise_speckles: usize,
    pub noise_amplitude: f32,
    pub speckle_mode: SpeckleMode,
    pub placement: Placement,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [40, 80, 40],
            n_lesions: 10,
            lesion_radius_range: (2.0, 4.0),
            noise_speckles: 40,
            noise_amplitude: 0.3,
            speckle_mode: SpeckleMode::Dropout,
            placement: Placement::Separated,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lesion {
    pub center: [f64; 3],
    pub radius: f64,
    pub peak: f64,
}

impl Lesion {
    pub fn sigma(&self) -> f64 {
        FALLOFF * self.radius
    }

    /// Radius of the `{value >= 0.5}` ball.
    pub fn half_level_radius(&self) -> f64 {
        self.sigma() * (2.0 * (2.0 * self.peak).ln()).max(0.0).sqrt()
    }

    fn value_at_sq(&self, d2: f64) -> f32 {
        let s = self.sigma();
        let reach = HALO * s;
        if d2 > reach * reach {
            0.0
        } else {
            (self.peak * (-d2 / (2.0 * s * s)).exp()) as f32
        }
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [(); 3].map(|_| rng.gen_range(-1.0..=1.0));
        let n = v.iter().map(|c: &f64| c * c).sum::<f64>().sqrt();
        if n > 1e-6 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

/// Rejection-samples `n` lesions whose cores fit inside `dims`.
pub fn place_lesions(
    dims: [usize; 3],
    n: usize,
    radius_range: (f64, f64),
    placement: Placement,
    rng: &mut impl Rng,
) -> Result<Vec<Lesion>> {
    let (rmin, rmax) = radius_range;
    if !(rmin > 0.0 && rmin <= rmax) {
        return Err(Error::InvalidArgument(format!(
            "bad lesion radius range {radius_range:?}"
        )));
    }
    if let Placement::Clustered { probability } = placement {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::InvalidArgument(format!(
                "cluster probability {probability} outside [0, 1]"
            )));
        }
    }
    let mut lesions: Vec<Lesion> = Vec::with_capacity(n);
    for placed in 0..n {
        let mut ok = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let radius = if rmin == rmax {
                rmin
            } else {
                rng.gen_range(rmin..=rmax)
            };
            let margin = radius.ceil();
            let lo = margin;
            let hi = dims.map(|d| d as f64 - 1.0 - margin);
            if hi.iter().any(|&h| h <= lo) {
                continue;
            }
            let mut center = [0, 1, 2].map(|k| rng.gen_range(lo..hi[k]));
            if let Placement::Clustered { probability } = placement {
                if !lesions.is_empty() && rng.gen_bool(probability) {
                    let other = lesions[rng.gen_range(0..lesions.len())];
                    let dist = other.radius + radius + rng.gen_range(0.0..1.5);
                    let dir = unit_vector(rng);
                    center = [0, 1, 2].map(|k| other.center[k] + dir[k] * dist);
                    if (0..3).any(|k| center[k] < lo || center[k] > hi[k]) {
                        continue;
                    }
                }
            }
            let cand = Lesion {
                center,
                radius,
                peak: rng.gen_range(PEAK_RANGE.0..=PEAK_RANGE.1),
            };
            let clear = lesions.iter().all(|l| {
                let d = distance(l.center, cand.center);
                match placement {
                    Placement::Separated => {
                        d >= l.half_level_radius() + cand.half_level_radius() + 1.0
                    }
                    Placement::Clustered { .. } => d >= l.radius + cand.radius,
                }
            });
            if clear {
                ok = Some(cand);
                break;
            }
        }
        match ok {
            Some(l) => lesions.push(l),
            None => {
                return Err(Error::Placement {
                    placed,
                    requested: n,
                    attempts: PLACEMENT_ATTEMPTS,
                })
            }
        }
    }
    Ok(lesions)
}

/// Renders lesions (combined by maximum) and then applies speckles to
/// randomly chosen support voxels.
pub fn render(
    dims: [usize; 3],
    lesions: &[Lesion],
    speckles: usize,
    amplitude: f32,
    mode: SpeckleMode,
    rng: &mut impl Rng,
) -> Volume {
    let [nx, ny, nz] = dims;
    let mut data = vec![0.0f32; nx * ny * nz];
    for l in lesions {
        let reach = HALO * l.sigma();
        let lo = l.center.map(|c| (c - reach).ceil().max(0.0) as usize);
        let hi =
            [0, 1, 2].map(|k| ((l.center[k] + reach).floor() as isize).min(dims[k] as isize - 1));
        if hi.iter().any(|&h| h < 0) {
            continue;
        }
        for z in lo[2]..=hi[2] as usize {
            for y in lo[1]..=hi[1] as usize {
                for x in lo[0]..=hi[0] as usize {
                    let d2 = distance([x as f64, y as f64, z as f64], l.center).powi(2);
                    let v = l.value_at_sq(d2);
                    let i = x + nx * (y + ny * z);
                    data[i] = data[i].max(v);
                }
            }
        }
    }

    if speckles > 0 && amplitude > 0.0 {
        let support: Vec<usize> = (0..data.len()).filter(|&i| data[i] > 0.0).collect();
        if !support.is_empty() {
            for _ in 0..speckles {
                let &i = support.choose(rng).expect("non-empty support");
                let u = rng.gen_range(0.0..=amplitude);
                data[i] = match mode {
                    SpeckleMode::Dropout => data[i] * (1.0 - u),
                    SpeckleMode::Lift => (data[i] + u).min(1.0),
                };
            }
        }
    }
    Volume::new(dims, [1.0; 3], data).expect("phantom values are probabilities")
}

fn check_amplitude(amplitude: f32) -> Result<()> {
    if (0.0..=1.0).contains(&amplitude) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "noise amplitude {amplitude} outside [0, 1]"
        )))
    }
}

/// A phantom volume and its true lesion count.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(Volume, usize)> {
    check_amplitude(spec.noise_amplitude)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lesions = place_lesions(
        spec.dims,
        spec.n_lesions,
        spec.lesion_radius_range,
        spec.placement,
        &mut rng,
    )?;
    let vol = render(
        spec.dims,
        &lesions,
        spec.noise_speckles,
        spec.noise_amplitude,
        spec.speckle_mode,
        &mut rng,
    );
    Ok((vol, spec.n_lesions))
}

/// Lesion counts per timepoint for one subject.
#[derive(Debug, Clone, PartialEq)]
pub enum LesionSchedule {
    /// The same non-decreasing counts for every subject.
    Fixed(Vec<usize>),
    /// Starts uniformly in the lower half of `[min, max]` and grows by 0 to 2
    /// lesions per timepoint, capped at `max`.
    Random { min: usize, max: usize },
}

impl LesionSchedule {
    fn draw(&self, timepoints: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        match self {
            LesionSchedule::Fixed(v) => {
                if v.len() != timepoints {
                    return Err(Error::InvalidArgument(format!(
                        "schedule has {} entries for {timepoints} timepoints",
                        v.len()
                    )));
                }
                if v.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidArgument(format!("schedule {v:?} decreases")));
                }
                Ok(v.clone())
            }
            &LesionSchedule::Random { min, max } => {
                if min > max {
                    return Err(Error::InvalidArgument(format!(
                        "schedule range {min}..{max} is empty"
                    )));
                }
                let mut out = vec![rng.gen_range(min..=min + (max - min) / 2)];
                for _ in 1..timepoints {
                    let last = out[out.len() - 1];
                    out.push((last + rng.gen_range(0..=2)).min(max));
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalSpec {
    pub n_subjects: usize,
    pub timepoints: usize,
    pub lesion_schedule: LesionSchedule,
    /// Geometry, radii, noise and placement; `n_lesions` and `seed` are
    /// ignored.
    pub phantom: PhantomSpec,
    pub seed: u64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn subject_id(i: usize) -> String {
    format!("subject_{i:03}")
}

/// Writes one raw_json volume per (subject, timepoint) under `out_dir`,
/// plus `manifest.json` with volume paths relative to `out_dir`.
///
/// Each subject draws from its own ChaCha stream of `seed`. A subject's
/// lesions are placed once; timepoint `t` shows the first `schedule[t]` of
/// them, with fresh speckles.
pub fn generate_longitudinal(
    spec: &LongitudinalSpec,
    out_dir: &Path,
) -> Result<LongitudinalManifest> {
    if spec.timepoints < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 timepoints, got {}",
            spec.timepoints
        )));
    }
    check_amplitude(spec.phantom.noise_amplitude)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let p = &spec.phantom;
    let mut subjects = Vec::with_capacity(spec.n_subjects);
    for i in 0..spec.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        let schedule = spec.lesion_schedule.draw(spec.timepoints, &mut rng)?;
        let total = schedule.last().copied().unwrap_or(0);
        let lesions = place_lesions(p.dims, total, p.lesion_radius_range, p.placement, &mut rng)?;
        let id = subject_id(i);
        let dir = out_dir.join(&id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut timepoints = Vec::with_capacity(spec.timepoints);
        for (t, &k) in schedule.iter().enumerate() {
            let vol = render(
                p.dims,
                &lesions[..k],
                p.noise_speckles,
                p.noise_amplitude,
                p.speckle_mode,
                &mut rng,
            );
            let name = format!("t{}.json", t + 1);
            write_raw_json(&vol, dir.join(&name))?;
            timepoints.push(TimepointEntry {
                t_index: t as u32 + 1,
                volume_path: PathBuf::from(&id).join(&name),
                gt_count: Some(k),
            });
        }
        subjects.push(SubjectEntry {
            subject_id: id,
            timepoints,
        });
    }
    let manifest = LongitudinalManifest { subjects };
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
