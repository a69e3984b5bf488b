//! Allocation-only augmentation kernels for joint-embedding self-supervised
//! learning.
//!
//! The crate is `no_std` (it needs `alloc`) so the same kernels can run in
//! data-loader workers, embedded preprocessing, or wasm. File formats, the
//! benchmark harness and the CLI live in the `viewmix` companion crate.
//!
//! Module map:
//!
//! * [`image`]: pixel buffers, depth conversion, bilinear resize.
//! * [`rng`]: counter-based, hierarchically derivable random streams.
//! * [`transforms`]: crop/flip/jitter/grayscale/blur/solarize and the
//!   probability-gated pipeline built from them.
//! * [`regional`]: mask geometry plus ViewMix, Cutout and CutMix.
//! * [`multiview`]: n-view generation with view reuse, batch driver and
//!   invocation accounting.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod image;
pub mod multiview;
pub mod regional;
pub mod rng;
pub mod transforms;

pub use error::{Error, Result};
pub use image::{Dataset, DatasetSource, Depth, Image, LabeledImage, Pixels};
pub use multiview::{
    generate_batch, generate_batch_on, generate_views, Executor, GateScope, MultiViewConfig,
    Sequential, Strategy, ViewBatch, ViewProvenance,
};
pub use regional::{BBox, LambdaMode, Mask, Rect};
pub use rng::RngStream;
pub use transforms::{PipelineSpec, Transform, TransformKind, TransformSpec};
