use std::cmp::Ordering;
use std::fmt::Write as _;

/// Persistence of a (birth, death) pair in probability units.
///
/// Every comparison against a persistence threshold goes through this one
/// function so the merge test and the diagram count agree bit for bit.
#[inline]
pub fn persistence(birth: f32, death: f32) -> f64 {
    birth as f64 - death as f64
}

/// A finite pair: the component born at `birth` (at voxel `birth_vertex`)
/// merged into an older one at level `death`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dot {
    pub birth: f32,
    pub death: f32,
    pub birth_vertex: usize,
}

impl Dot {
    pub fn persistence(&self) -> f64 {
        persistence(self.birth, self.death)
    }

    /// Zero-persistence pair, produced when a plateau is entered from two
    /// sides at once.
    pub fn is_plateau(&self) -> bool {
        self.birth == self.death
    }
}

/// A component that never merges inside the foreground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Essential {
    pub birth: f32,
    pub birth_vertex: usize,
}

/// Superlevel 0-dimensional persistence diagram of a foreground.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub dots: Vec<Dot>,
    pub essentials: Vec<Essential>,
}

impl PersistenceDiagram {
    pub fn is_empty(&self) -> bool {
        self.dots.is_empty() && self.essentials.is_empty()
    }

    /// Number of components whose persistence exceeds `theta`; essentials
    /// always count.
    pub fn count(&self, theta: f64) -> usize {
        self.essentials.len() + self.dots.iter().filter(|d| d.persistence() > theta).count()
    }

    /// Number of classes alive at level `tau`: born at or above `tau` and not
    /// yet dead, i.e. the component count of `{p >= tau}`. Levels are
    /// compared at float32 precision.
    pub fn alive_at(&self, tau: f64) -> usize {
        let tau = tau as f32;
        let ess = self.essentials.iter().filter(|e| e.birth >= tau).count();
        let dots = self
            .dots
            .iter()
            .filter(|d| d.birth >= tau && tau > d.death)
            .count();
        ess + dots
    }

    pub fn positive_dots(&self) -> impl Iterator<Item = &Dot> {
        self.dots.iter().filter(|d| !d.is_plateau())
    }

    /// CSV export: essentials first (birth descending), then dots
    /// (persistence descending); ties by birth index ascending.
    pub fn to_csv(&self) -> String {
        let mut essentials = self.essentials.clone();
        essentials.sort_by(|a, b| {
            b.birth
                .total_cmp(&a.birth)
                .then(a.birth_vertex.cmp(&b.birth_vertex))
        });
        let mut dots = self.dots.clone();
        dots.sort_by(|a, b| {
            b.persistence()
                .partial_cmp(&a.persistence())
                .unwrap_or(Ordering::Equal)
                .then(a.birth_vertex.cmp(&b.birth_vertex))
                .then(b.death.total_cmp(&a.death))
        });

        let mut out = String::from("birth,death,persistence,birth_index,essential\n");
        for e in &essentials {
            let _ = writeln!(out, "{:.6},inf,inf,{},true", e.birth, e.birth_vertex);
        }
        for d in &dots {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{},false",
                d.birth,
                d.death,
                d.persistence(),
                d.birth_vertex
            );
        }
        out
    }
}

/// Lesion count implied by a diagram at persistence threshold `theta`.
pub fn count_from_diagram(pd: &PersistenceDiagram, theta: f64) -> usize {
    pd.count(theta)
}
