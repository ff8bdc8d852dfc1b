//! Parchment versus papyrus classification of manuscript fragment images from
//! log-magnitude 2-D DFT texture features.
//!
//! The pipeline runs in stages: [`segment`] isolates fragments on a plate,
//! [`inpaint`] fills text and holes, [`spectral`] turns sample patches into
//! feature vectors and [`classify`] scores them with leave-one-fragment-out
//! nearest-neighbour voting. [`pipeline`] wires the stages together on disk.

pub mod classify;
pub mod error;
pub mod fft;
pub mod imaging;
pub mod inpaint;
pub mod par;
pub mod pipeline;
pub mod report;
pub mod segment;
pub mod spectral;
pub mod store;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{ImageSet, Material};
