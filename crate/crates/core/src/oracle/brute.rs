//! Flood-fill reference implementations. Slow and direct: every level of
//! the filtration is labelled from scratch.

use std::collections::{BTreeMap, VecDeque};

use crate::filtration::{Dot, Essential, PersistenceDiagram};
use crate::volume_io::Volume;

/// Components keyed by their minimum linear index, each listing its voxels
/// in ascending order.
pub type Components = BTreeMap<usize, Vec<usize>>;

/// Breadth-first labelling of `{p >= tau}` under 6-connectivity, with `tau`
/// rounded to float32 like the stored voxels.
pub fn brute_force_components(vol: &Volume, tau: f64) -> Components {
    let tau = tau as f32;
    let inside = |i: usize| vol.data()[i] >= tau;
    let mut seen = vec![false; vol.len()];
    let mut out = Components::new();
    let mut queue = VecDeque::new();
    for start in 0..vol.len() {
        if seen[start] || !inside(start) {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            vol.for_each_neighbor(i, |n| {
                if !seen[n] && inside(n) {
                    seen[n] = true;
                    queue.push_back(n);
                }
            });
        }
        members.sort_unstable();
        // start is the smallest unvisited index, so it is the canonical id
        out.insert(start, members);
    }
    out
}

/// Every distinct foreground level, from the top down, with the components
/// of the superlevel set at that level.
#[derive(Debug, Clone)]
pub struct LevelSweepTrace {
    pub levels: Vec<f32>,
    pub components_at_level: Vec<Components>,
}

impl LevelSweepTrace {
    /// Each component at a level lies inside exactly one component at every
    /// lower level.
    pub fn is_nested(&self) -> bool {
        self.components_at_level.windows(2).all(|pair| {
            let (upper, lower) = (&pair[0], &pair[1]);
            let mut owner = BTreeMap::new();
            for (&id, voxels) in lower {
                for &v in voxels {
                    owner.insert(v, id);
                }
            }
            upper.values().all(|voxels| {
                let first = owner.get(&voxels[0]);
                first.is_some() && voxels.iter().all(|v| owner.get(v) == first)
            })
        })
    }
}

pub fn level_sweep_trace(vol: &Volume, mask_eps: f32) -> LevelSweepTrace {
    let mut levels: Vec<f32> = vol
        .data()
        .iter()
        .copied()
        .filter(|&p| p > mask_eps)
        .collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let components_at_level = levels
        .iter()
        .map(|&l| brute_force_components(vol, l as f64))
        .collect();
    LevelSweepTrace {
        levels,
        components_at_level,
    }
}

/// Persistence diagram read off the level trace.
///
/// A component is born at the highest level where it appears with no older
/// birth voxel inside it; its birth voxel is its smallest index at that
/// level. When several live components share one region, all but the eldest
/// (highest birth, then smallest birth voxel) die at the current level.
/// Merges inside a single level are invisible here, so zero-persistence
/// pairs are never produced.
pub fn brute_force_diagram(vol: &Volume, mask_eps: f32) -> PersistenceDiagram {
    let trace = level_sweep_trace(vol, mask_eps);
    let mut alive: Vec<Essential> = Vec::new();
    let mut dots = Vec::new();
    for (&level, comps) in trace.levels.iter().zip(&trace.components_at_level) {
        let mut next_alive = Vec::new();
        for voxels in comps.values() {
            let mut members: Vec<Essential> = alive
                .iter()
                .filter(|e| voxels.binary_search(&e.birth_vertex).is_ok())
                .copied()
                .collect();
            if members.is_empty() {
                next_alive.push(Essential {
                    birth: level,
                    birth_vertex: voxels[0],
                });
                continue;
            }
            members.sort_by(|a, b| {
                b.birth
                    .total_cmp(&a.birth)
                    .then(a.birth_vertex.cmp(&b.birth_vertex))
            });
            next_alive.push(members[0]);
            for e in &members[1..] {
                dots.push(Dot {
                    birth: e.birth,
                    death: level,
                    birth_vertex: e.birth_vertex,
                });
            }
        }
        alive = next_alive;
    }
    PersistenceDiagram {
        dots,
        essentials: alive,
    }
}
