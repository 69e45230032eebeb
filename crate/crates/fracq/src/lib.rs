//! Iterated function systems with certified bi-Lipschitz bookkeeping,
//! code-space addressing, fractal transformations, invariant-measure
//! sampling, order-r quantization, and dimension solvers/estimators.
//!
//! The crate is organized bottom-up:
//!
//! - [`code_space`]: words, truncated codes, antichains.
//! - [`ifs`]: contraction maps, systems, attractor sampling, products.
//! - [`transform`]: tops codes and fractal transformations between systems.
//! - [`measure`]: chaos-game sampling and empirical measure queries.
//! - [`quant`]: Lloyd and exact 1-D quantizers, dimension-slope fits.
//! - [`dimension`]: Moran/exponent solvers, bounds, box-counting.
//!
//! Built with the `parallel` feature (default) the hot loops run on rayon;
//! reductions combine fixed-size chunks in index order, so outputs are
//! identical with any thread count, or with the feature disabled.

pub mod code_space;
pub mod dimension;
mod error;
mod exec;
pub mod geom;
pub mod ifs;
pub mod measure;
pub mod quant;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use exec::parallelism_enabled;
