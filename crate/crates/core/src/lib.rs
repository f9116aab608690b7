//! Periodic attractors of discretised Hammerstein integrodifference
//! equations on a bounded habitat.
//!
//! A [`grid::Grid`] carries the Nyström nodes and trapezoid weights, the
//! [`model`] module holds kernels, growth maps and seasonal forcing, and
//! [`dynamics::HammersteinOperator`] is the resulting step map. The
//! [`engine`] certifies a contraction over one period and computes the
//! pullback fibers of the attractor to a guaranteed tolerance.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod engine;
pub mod error;
pub mod exec;
pub mod grid;
pub mod model;
pub mod scenario;
pub mod report;
pub mod semilinear;

pub use dynamics::{BoundSource, HammersteinOperator, Process};
pub use engine::{
    certify_contraction, certify_process, pullback_fibers, required_iterations, AttractorFibers,
    ContractionCertificate, ErrorBudget, L2Mode,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{Grid, GridFunction, QuadratureRule};
pub use model::{GrowthFamily, GrowthSpec, KernelFamily, KernelSpec, SeasonalForcing, Variant};
pub use scenario::{parse_config, ScenarioConfig};
