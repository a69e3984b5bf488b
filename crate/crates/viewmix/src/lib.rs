//! IO, file formats, parallel execution and the command-line front end for
//! the `viewmix-core` augmentation engine.

pub mod bench;
pub mod cifar;
pub mod cli;
pub mod config;
pub mod error;
pub mod folder;
pub mod parallel;
pub mod preview;
pub mod provenance;
pub mod stats;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use parallel::RayonExecutor;
