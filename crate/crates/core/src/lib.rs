//! Block-structured mesh data on a single level with logical tiling.
//!
//! The building blocks mirror the usual AMR-framework vocabulary:
//!
//! * [`IndexBox`] / [`IntVect`]: index-space boxes with cell or face centering.
//! * [`FArrayBox`]: contiguous multi-component storage over one grown box.
//! * [`MultiFab`]: data over a [`BoxArray`] of disjoint grids, stored either
//!   one allocation per grid or one per region of a grid.
//! * [`FillPlan`]: precomputed, threaded ghost-cell exchange with periodic images.
//! * [`TileSchedule`]: the flattened (grid, tile) loop, statically partitioned
//!   over workers by [`parallel_for_tiles`].
//! * [`kernels`]: a flux-form heat-equation step and an 8th-order wide stencil.
//!
//! Threads come from rayon when the default `parallel` feature is enabled;
//! without it the same worker partition runs sequentially.

pub mod error;
pub mod exec;
pub mod fab;
pub mod index_space;
pub mod iter;
pub mod kernels;
pub mod level;
pub mod plotfile;

pub use error::{Error, Result};
pub use exec::{available_workers, partition, Arena, ArenaPool};
pub use fab::FArrayBox;
pub use index_space::{decompose, Centering, IndexBox, IndexType, IntVect, TileSize, SPACEDIM};
pub use iter::{
    parallel_for_tiles, parallel_for_tiles_with_arena, IterConfig, TileCursor, TileEntry, TileRef, TileSchedule,
    TilingMode,
};
pub use kernels::{derive_coeffs8, HeatParams, Operator, StencilCoeffs8, StepContext, Threading};
pub use level::{BoxArray, CopyTag, FillPlan, Geometry, Layout, MultiFab};
