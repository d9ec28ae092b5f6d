//! Superlevel-set 0-dimensional persistence on the 6-connected voxel grid,
//! and persistence-thresholded lesion counting.
//!
//! Vertices are the foreground voxels (`p > mask_eps`), swept from the most
//! to the least probable. Ties are broken by ascending linear index, which
//! makes the order total; a vertex's lower star is the set of edges to
//! neighbours earlier in that order. When an edge joins two components the
//! younger one (lower birth, or equal birth and later birth vertex) is the
//! candidate to die, with persistence `younger.birth - level`.

mod diagram;
mod forest;

pub use diagram::{count_from_diagram, persistence, Dot, Essential, PersistenceDiagram};
pub use forest::MergeForest;

use forest::NO_SLOT;

use crate::volume_io::{for_each_neighbor, Volume};

/// Foreground voxels in filtration order, with implicit 6-connectivity.
#[derive(Debug, Clone)]
pub struct ForegroundGraph {
    dims: [usize; 3],
    vertex_ids: Vec<u32>,
    vertex_values: Vec<f32>,
    /// Filtration slot per voxel; `NO_SLOT` for background.
    slot_of: Vec<u32>,
}

impl ForegroundGraph {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Linear voxel indices in filtration order.
    pub fn vertex_ids(&self) -> &[u32] {
        &self.vertex_ids
    }

    /// Probabilities in filtration order.
    pub fn vertex_values(&self) -> &[f32] {
        &self.vertex_values
    }

    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    /// Slot of a voxel in the filtration order, if it is foreground.
    pub fn slot(&self, voxel: usize) -> Option<u32> {
        match self.slot_of[voxel] {
            NO_SLOT => None,
            s => Some(s),
        }
    }

    /// Calls `f` with the slot of every neighbour earlier in the order.
    #[inline]
    pub fn for_each_lower_neighbor(&self, slot: u32, mut f: impl FnMut(u32)) {
        let voxel = self.vertex_ids[slot as usize] as usize;
        for_each_neighbor(self.dims, voxel, |n| {
            let s = self.slot_of[n];
            if s < slot {
                f(s);
            }
        });
    }
}

/// Sorts the foreground voxels by probability descending, ties by linear
/// index ascending.
pub fn build_filtration_order(vol: &Volume, mask_eps: f32) -> ForegroundGraph {
    assert!(
        vol.len() < NO_SLOT as usize,
        "volume too large for 32-bit voxel indices"
    );
    // Non-negative floats order like their bit patterns, so one u64 key
    // (inverted value bits, then index) sorts both criteria at once.
    let mut keys: Vec<u64> = vol
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > mask_eps)
        .map(|(i, &p)| ((!p.to_bits() as u64) << 32) | i as u64)
        .collect();
    keys.sort_unstable();

    let mut slot_of = vec![NO_SLOT; vol.len()];
    let mut vertex_ids = Vec::with_capacity(keys.len());
    let mut vertex_values = Vec::with_capacity(keys.len());
    for (slot, key) in keys.iter().enumerate() {
        let voxel = (*key & 0xffff_ffff) as u32;
        slot_of[voxel as usize] = slot as u32;
        vertex_ids.push(voxel);
        vertex_values.push(vol.data()[voxel as usize]);
    }
    ForegroundGraph {
        dims: vol.dims(),
        vertex_ids,
        vertex_values,
        slot_of,
    }
}

/// Outcome of a persistence-thresholded count.
#[derive(Debug, Clone)]
pub struct PCountResult {
    pub count: usize,
    /// Per voxel: `1 + linear index of the surviving component's birth
    /// voxel`, or 0 for background.
    pub labels: Vec<u32>,
    /// Dots as recorded during the thresholded sweep (one per attempted
    /// merge, suppressed or not) and the essentials of the foreground.
    pub diagram: PersistenceDiagram,
}

/// Distinct component roots among the lower neighbours of `slot`, sorted
/// oldest first.
#[inline]
fn lower_roots(graph: &ForegroundGraph, forest: &mut MergeForest, slot: u32) -> ([u32; 6], usize) {
    let mut roots = [0u32; 6];
    let mut n = 0;
    graph.for_each_lower_neighbor(slot, |s| {
        let r = forest.find(s);
        if !roots[..n].contains(&r) {
            roots[n] = r;
            n += 1;
        }
    });
    roots[..n].sort_unstable();
    (roots, n)
}

fn essentials_of(forest: &MergeForest) -> Vec<Essential> {
    forest
        .roots()
        .map(|r| Essential {
            birth: forest.root_birth(r),
            birth_vertex: forest.root_vertex(r) as usize,
        })
        .collect()
}

/// Full elder-rule sweep: every merge is performed.
fn sweep_all(graph: &ForegroundGraph) -> (MergeForest, Vec<Dot>) {
    let mut forest = MergeForest::new(&graph.vertex_values, &graph.vertex_ids);
    let mut dots = Vec::new();
    for slot in 0..graph.len() as u32 {
        let (roots, n) = lower_roots(graph, &mut forest, slot);
        if n == 0 {
            forest.make_root(slot);
            continue;
        }
        let level = graph.vertex_values[slot as usize];
        let oldest = roots[0];
        forest.attach(slot, oldest);
        for &younger in &roots[1..n] {
            dots.push(Dot {
                birth: forest.root_birth(younger),
                death: level,
                birth_vertex: forest.root_vertex(younger) as usize,
            });
            forest.attach(younger, oldest);
        }
    }
    (forest, dots)
}

/// Canonical persistence diagram of the foreground `{p > mask_eps}`.
///
/// Zero-persistence dots from plateaus are kept; see [`Dot::is_plateau`].
pub fn compute_persistence(vol: &Volume, mask_eps: f32) -> PersistenceDiagram {
    let graph = build_filtration_order(vol, mask_eps);
    let (forest, dots) = sweep_all(&graph);
    PersistenceDiagram {
        dots,
        essentials: essentials_of(&forest),
    }
}

/// Counts lesions by merging every component whose persistence is at most
/// `theta` into its elder neighbour.
pub fn pcount_merge(vol: &Volume, theta: f64, mask_eps: f32) -> PCountResult {
    assert!(theta >= 0.0, "persistence threshold must be non-negative");
    let graph = build_filtration_order(vol, mask_eps);
    // `lesions` applies the threshold; `support` performs every merge and
    // only tracks foreground connectivity for the essentials.
    let mut lesions = MergeForest::new(&graph.vertex_values, &graph.vertex_ids);
    let mut support = MergeForest::new(&graph.vertex_values, &graph.vertex_ids);
    let mut dots = Vec::new();

    for slot in 0..graph.len() as u32 {
        let level = graph.vertex_values[slot as usize];

        let (roots, n) = lower_roots(&graph, &mut support, slot);
        if n == 0 {
            support.make_root(slot);
        } else {
            support.attach(slot, roots[0]);
            for &r in &roots[1..n] {
                support.attach(r, roots[0]);
            }
        }

        let (roots, n) = lower_roots(&graph, &mut lesions, slot);
        if n == 0 {
            lesions.make_root(slot);
            continue;
        }
        let oldest = roots[0];
        lesions.attach(slot, oldest);
        for &younger in &roots[1..n] {
            let birth = lesions.root_birth(younger);
            dots.push(Dot {
                birth,
                death: level,
                birth_vertex: lesions.root_vertex(younger) as usize,
            });
            if persistence(birth, level) <= theta {
                lesions.attach(younger, oldest);
            }
        }
    }

    let mut labels = vec![0u32; vol.len()];
    let mut count = 0;
    for slot in 0..graph.len() as u32 {
        let root = lesions.find(slot);
        if root == slot {
            count += 1;
        }
        labels[graph.vertex_ids[slot as usize] as usize] = lesions.root_vertex(root) + 1;
    }

    PCountResult {
        count,
        labels,
        diagram: PersistenceDiagram {
            dots,
            essentials: essentials_of(&support),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(values: &[f32]) -> Volume {
        Volume::new([values.len(), 1, 1], [1.0; 3], values.to_vec()).unwrap()
    }

    const STRIP: [f32; 5] = [0.2, 0.9, 0.3, 0.6, 0.1];

    #[test]
    fn order_breaks_ties_by_index() {
        let g = build_filtration_order(&strip(&[0.3, 0.9, 0.3]), 0.0);
        assert_eq!(g.vertex_ids(), &[1, 0, 2]);
        let g = build_filtration_order(&strip(&STRIP), 0.0);
        assert_eq!(g.vertex_ids(), &[1, 3, 2, 0, 4]);
        let g = build_filtration_order(&strip(&[0.1, 0.05, 0.0]), 0.1);
        assert!(g.is_empty());
    }

    #[test]
    fn strip_counts() {
        let vol = strip(&STRIP);
        let r = pcount_merge(&vol, 0.2, 0.0);
        assert_eq!(r.count, 2);
        assert_eq!(
            r.diagram.essentials,
            vec![Essential {
                birth: 0.9,
                birth_vertex: 1
            }]
        );
        assert_eq!(r.diagram.dots.len(), 1);
        let d = r.diagram.dots[0];
        assert_eq!((d.birth, d.death, d.birth_vertex), (0.6, 0.3, 3));
        assert_eq!(r.labels, vec![2, 2, 2, 4, 4]);

        let r = pcount_merge(&vol, 0.35, 0.0);
        assert_eq!(r.count, 1);
        assert_eq!(r.labels, vec![2; 5]);
    }

    #[test]
    fn strip_diagram() {
        let pd = compute_persistence(&strip(&STRIP), 0.0);
        assert_eq!(
            pd.dots,
            vec![Dot {
                birth: 0.6,
                death: 0.3,
                birth_vertex: 3
            }]
        );
        assert_eq!(
            pd.essentials,
            vec![Essential {
                birth: 0.9,
                birth_vertex: 1
            }]
        );
    }

    #[test]
    fn empty_foreground() {
        let vol = Volume::zeros([4, 4, 4]).unwrap();
        let r = pcount_merge(&vol, 0.01, 0.0);
        assert_eq!(r.count, 0);
        assert!(r.diagram.is_empty());
        assert!(r.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn disjoint_blobs_never_merge() {
        let mut data = vec![0.0; 7];
        data[0..3].fill(0.8);
        data[4..7].fill(0.8);
        let vol = strip(&data);
        for theta in [0.0, 0.5, 1.0, 10.0] {
            assert_eq!(pcount_merge(&vol, theta, 0.0).count, 2);
        }
    }

    #[test]
    fn plateau_and_ramp() {
        let plateau = Volume::new([3, 3, 3], [1.0; 3], vec![0.5; 27]).unwrap();
        let pd = compute_persistence(&plateau, 0.0);
        assert_eq!(pd.essentials.len(), 1);
        assert_eq!(pd.essentials[0].birth, 0.5);
        assert_eq!(pd.positive_dots().count(), 0);

        let ramp = strip(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let pd = compute_persistence(&ramp, 0.0);
        assert_eq!(pd.essentials.len(), 1);
        assert_eq!(pd.positive_dots().count(), 0);
    }

    #[test]
    fn plateau_entered_from_two_sides_gives_flagged_dot() {
        // 2x2 slice: voxels 1 and 2 are born separately, voxel 3 joins them
        // at the same level.
        let vol = Volume::new([2, 2, 1], [1.0; 3], vec![0.0, 0.5, 0.5, 0.5]).unwrap();
        let pd = compute_persistence(&vol, 0.0);
        assert_eq!(pd.dots.len(), 1);
        assert!(pd.dots[0].is_plateau());
        assert_eq!(pd.dots[0].birth_vertex, 2);
        assert_eq!(pcount_merge(&vol, 0.0, 0.0).count, 1);
    }

    #[test]
    fn mask_excludes_low_voxels() {
        let vol = strip(&[0.9, 0.05, 0.9]);
        assert_eq!(pcount_merge(&vol, 1.0, 0.0).count, 1);
        assert_eq!(pcount_merge(&vol, 1.0, 0.1).count, 2);
    }
}
