//! Fan-beam CT reconstruction toolkit.
//!
//! Classical pieces (Siddon ray tracing, filtered backprojection, OS-SQS,
//! smoothed total variation) plus a small self-contained convolutional
//! network engine and a greedy, iteration-wise, patch-based trainer for
//! unrolled proximal-gradient reconstruction, with image-quality metrics and
//! a training-cost model. Everything is deterministic for a fixed seed.

pub mod error;
pub mod fbp;
pub mod geom;
pub mod image;
pub mod noise;
pub mod phantom;
pub mod projector;
pub mod sinogram;
pub mod sqs;
pub mod tv;

pub use error::{Error, Result};
pub use geom::{FanBeamGeometry, SamplingKind, SamplingPattern};
pub use image::{GridSpec, Image, MU_WATER};
pub use sinogram::{apply_sampling, Sinogram};
