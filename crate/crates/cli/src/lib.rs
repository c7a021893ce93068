//! File formats, the toy-data generator, CSV reports and the command line
//! for `smoothntf-core`.
//!
//! - [`dnt`]: `DNT1` binary tensors, bit-exact.
//! - [`netpbm`]: binary PPM/PGM images.
//! - [`mask`]: uniform, pixelwise and image-defined missing-data masks.
//! - [`toy`]: smooth synthetic instances built from cubic B-splines.
//! - [`model_io`]: normalized models as a directory of tensors.
//! - [`report`]: CSV emission and a wall clock for the solvers.
//! - [`cli`]: the `smoothntf` command.
//!
//! Every randomized routine draws from `ChaCha8Rng` seeded explicitly.

pub mod cli;
pub mod dnt;
mod error;
mod fsutil;
pub mod mask;
pub mod model_io;
pub mod netpbm;
pub mod report;
pub mod toy;

pub use error::{IoError, IoResult};
pub use fsutil::write_atomic;
