//! Vectorized stencil sweeps over a block-transposed data layout.
//!
//! The crate provides five single-step methods (a scalar oracle, multiple
//! loads, register reorganization, dimension-lifted transpose and the
//! block-transpose layout), an in-register multi-step pipeline for the
//! block-transpose layout, tessellated temporal tiling, and a benchmark
//! harness.

pub mod error;
pub mod exec;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod simd;
pub mod stencil;
pub mod tiling;
pub mod timejam;
pub mod transpose;
pub mod vset;

pub use error::{Error, Result};
pub use grid::{alloc_grid, max_relative_error, GridBuffer, Layout};
pub use stencil::{make_stencil_spec, StencilSpec};
pub use vset::VectorSet;
