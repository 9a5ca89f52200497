//! Real-time highway perception: a dense sliding-window CNN mask detector for
//! vehicles and lane boundaries, its post-processing, lidar lane
//! auto-labeling from point-cloud maps, and the evaluation protocol.

pub mod autolabel;
pub mod detector;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod pipeline;
pub mod postprocess;
pub mod rect;

pub use error::{Error, Result};
