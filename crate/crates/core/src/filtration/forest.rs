//! Union-find over filtration slots.
//!
//! Slots are positions in the filtration order, so a smaller slot is always
//! born earlier (higher probability, or equal probability and smaller voxel
//! index). Unions keep the smaller root, which makes the root of every
//! component its birth vertex and the elder rule a plain integer comparison.

pub const NO_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct MergeForest {
    parent: Vec<u32>,
    /// Probability of each slot's vertex; at a root this is the component's birth.
    birth: Vec<f32>,
    /// Linear voxel index of each slot's vertex.
    voxel: Vec<u32>,
}

impl MergeForest {
    pub fn new(values: &[f32], voxels: &[u32]) -> Self {
        debug_assert_eq!(values.len(), voxels.len());
        MergeForest {
            parent: vec![NO_SLOT; values.len()],
            birth: values.to_vec(),
            voxel: voxels.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Adds `slot` as a new singleton component.
    #[inline]
    pub fn make_root(&mut self, slot: u32) {
        self.parent[slot as usize] = slot;
    }

    #[inline]
    pub fn is_present(&self, slot: u32) -> bool {
        self.parent[slot as usize] != NO_SLOT
    }

    /// Root of `slot`'s component, with path halving.
    #[inline]
    pub fn find(&mut self, mut slot: u32) -> u32 {
        debug_assert!(self.is_present(slot));
        loop {
            let p = self.parent[slot as usize];
            if p == slot {
                return slot;
            }
            let gp = self.parent[p as usize];
            self.parent[slot as usize] = gp;
            slot = gp;
        }
    }

    /// Hangs `child` (a root or a fresh slot) under `root`.
    #[inline]
    pub fn attach(&mut self, child: u32, root: u32) {
        debug_assert!(root < child, "older root must have the smaller slot");
        self.parent[child as usize] = root;
    }

    #[inline]
    pub fn root_birth(&self, root: u32) -> f32 {
        self.birth[root as usize]
    }

    #[inline]
    pub fn root_vertex(&self, root: u32) -> u32 {
        self.voxel[root as usize]
    }

    pub fn is_root(&self, slot: u32) -> bool {
        self.parent[slot as usize] == slot
    }

    pub fn roots(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.parent.len() as u32).filter(move |&s| self.parent[s as usize] == s)
    }
}
