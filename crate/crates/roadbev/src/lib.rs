//! IO, parallel drivers, renders and the command line for `roadbev-core`.
//!
//! * [`scene_file`] – TOML scenes and detection sets, ROI loading.
//! * [`pgm`] – binary PGM ROI masks.
//! * [`binary`] – `BMAP`, `FMAP` and `BEVF` little-endian formats.
//! * [`parallel`] – thread-count-independent parallel mapping and aggregation.
//! * [`render`] – PPM rasters and SVG diagrams with range circles.
//! * [`report`] – text reports.
//! * [`cli`] – the `roadbev` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binary;
pub mod cli;
mod error;
pub mod parallel;
pub mod pgm;
pub mod render;
pub mod report;
pub mod scene_file;

pub use error::{Error, Result};
pub use roadbev_core as core;
