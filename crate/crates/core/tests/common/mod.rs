#![allow(dead_code)]

use lesion_count::volume_io::Volume;
use proptest::prelude::*;
use rand::Rng;

pub const QUANTUM: u32 = 32;

/// `{0, 1/32, ..., 1}`.
pub fn quantized_grid() -> Vec<f64> {
    (0..=QUANTUM).map(|k| k as f64 / QUANTUM as f64).collect()
}

/// A volume of at most `max_side` per axis whose values are multiples of
/// 1/32, drawn from a small palette (with background) so that ties and
/// plateaus are common.
pub fn random_quantized(rng: &mut impl Rng, max_side: usize) -> Volume {
    let dims = [(); 3].map(|_| rng.gen_range(1..=max_side));
    let n: usize = dims.iter().product();
    let levels = rng.gen_range(2..=8);
    let palette: Vec<u32> = (0..levels).map(|_| rng.gen_range(1..=QUANTUM)).collect();
    let background = rng.gen_range(0.0..0.6);
    let data = (0..n)
        .map(|_| {
            if rng.gen_bool(background) {
                0.0
            } else {
                palette[rng.gen_range(0..levels)] as f32 / QUANTUM as f32
            }
        })
        .collect();
    Volume::new(dims, [1.0; 3], data).unwrap()
}

/// Proptest strategy for small quantized volumes.
pub fn quantized_volume(max_side: usize) -> impl Strategy<Value = Volume> {
    [1..=max_side, 1..=max_side, 1..=max_side].prop_flat_map(|dims| {
        let n = dims[0] * dims[1] * dims[2];
        (
            Just(dims),
            prop::collection::vec(
                prop_oneof![2 => Just(0u32), 5 => 0..=QUANTUM, 1 => 30..=QUANTUM],
                n,
            ),
        )
            .prop_map(|(dims, ks)| {
                let data = ks.iter().map(|&k| k as f32 / QUANTUM as f32).collect();
                Volume::new(dims, [1.0; 3], data).unwrap()
            })
    })
}

/// Places `a` and `b` side by side along x with one background slab between
/// them.
pub fn embed_pair(a: &Volume, b: &Volume) -> Volume {
    let [ax, ay, az] = a.dims();
    let [bx, by, bz] = b.dims();
    let dims = [ax + 1 + bx, ay.max(by), az.max(bz)];
    let mut data = vec![0.0f32; dims.iter().product()];
    let idx = |x: usize, y: usize, z: usize| x + dims[0] * (y + dims[1] * z);
    for z in 0..az {
        for y in 0..ay {
            for x in 0..ax {
                data[idx(x, y, z)] = a.get(x, y, z);
            }
        }
    }
    for z in 0..bz {
        for y in 0..by {
            for x in 0..bx {
                data[idx(ax + 1 + x, y, z)] = b.get(x, y, z);
            }
        }
    }
    Volume::new(dims, [1.0; 3], data).unwrap()
}

/// Distinct values present in the volume, descending.
pub fn distinct_levels(vol: &Volume) -> Vec<f32> {
    let mut v: Vec<f32> = vol.data().iter().copied().filter(|&p| p > 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

/// `(birth, death)` pairs of positive-persistence dots, sorted.
pub fn positive_pairs(pd: &lesion_count::filtration::PersistenceDiagram) -> Vec<(f32, f32)> {
    let mut v: Vec<(f32, f32)> = pd
        .dots
        .iter()
        .filter(|d| d.birth > d.death)
        .map(|d| (d.birth, d.death))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

pub fn essential_births(pd: &lesion_count::filtration::PersistenceDiagram) -> Vec<(f32, usize)> {
    let mut v: Vec<(f32, usize)> = pd
        .essentials
        .iter()
        .map(|e| (e.birth, e.birth_vertex))
        .collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    v
}
