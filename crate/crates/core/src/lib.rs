//! Pole-based LiDAR localization.
//!
//! Scans are projected into range images ([`geometry`]), poles are extracted
//! from the images ([`extractor`]), aggregated into a global map
//! ([`mapping`], [`map`]) and used as landmarks by a particle filter
//! ([`mcl`]). [`sim`] provides ray-cast ground truth, [`eval`] the metrics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod extractor;
pub mod geometry;
pub mod io;
pub mod kdtree;
pub mod map;
pub mod mcl;
pub mod mapping;
pub mod motion;
pub mod pose;
pub mod sim;
pub mod textfmt;

pub use error::{Error, Result};
