//! Reference implementations and synthetic data.
//!
//! The brute-force routines recompute everything level by level and are only
//! meant for tests and benchmarks on small, quantized volumes. The phantom
//! generators stand in for real probability maps with known lesion counts.

mod brute;

pub use brute::{
    brute_force_components, brute_force_diagram, level_sweep_trace, Components, LevelSweepTrace,
};

mod phantom;

pub use phantom::{
    generate_longitudinal, generate_phantom, place_lesions, render, subject_id, Lesion,
    LesionSchedule, LongitudinalSpec, PhantomSpec, Placement, SpeckleMode, FALLOFF, HALO,
    MANIFEST_FILE, PEAK_RANGE, PLACEMENT_ATTEMPTS,
};
