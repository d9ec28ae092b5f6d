//! Lesion counting in 3D probability maps by persistence-thresholded
//! merging of connected components.

pub mod error;
pub mod filtration;
pub mod volume_io;

pub use error::{Error, Result};
pub mod calibration;
pub mod cli;
pub mod counting;
pub mod oracle;
