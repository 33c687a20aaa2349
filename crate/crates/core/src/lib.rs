//! Fully convolutional networks for raw eye-tracking streams.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation:
//!
//! * [`tensor`], [`layers`], [`loss`], [`optim`]: a small reverse-mode
//!   differentiation engine over rank-3 `depth × 1 × height` tensors, with
//!   exactly the layers the three networks use.
//! * [`gaze`]: gaze samples and sequences, sanitation, tensor encodings,
//!   augmentation, batching and subject-disjoint fold plans.
//! * [`segnet`], [`reconnet`], [`genvae`]: the segmentation network, the
//!   reconstruction network and the convolutional variational autoencoder,
//!   each with its training loop.
//! * [`eval`]: confusion matrices, cross validation, scanpath rasterization
//!   and the distribution statistics used by the benchmarks.
//! * [`model_file`]: the versioned binary model container.
//! * [`synth`]: toy corpora with known ground truth.
//! * [`gradcheck`]: finite-difference checks of every backward pass.
//!
//! File IO, PNG encoding and the command-line interface live in the
//! `gazeconv` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod gaze;
pub mod genvae;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model_file;
pub mod optim;
pub mod reconnet;
pub mod schedule;
pub mod segnet;
pub mod stack;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;

/// Divisor applied to raw pixel/millisecond values before they enter a network.
pub const INPUT_SCALE: f64 = 100.0;

/// Number of eye-movement classes predicted by the segmentation network.
pub const NUM_CLASSES: usize = 5;
