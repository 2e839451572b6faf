//! Tensor ring (TR) decomposition of dense tensors: batch alternating
//! least squares, a structure-exploiting normal-equation variant,
//! sketched/randomized solvers, and streaming trackers that fold new
//! temporal slices into an existing decomposition without revisiting
//! old data.

pub mod error;
pub mod io;
pub mod linalg;
pub mod sketch;
pub mod solvers;
pub mod stream;
pub mod tensor;
pub mod tr;

pub use error::{Error, Result};
pub use tensor::{linear_index, ComplexDenseTensor, DenseTensor, UnfoldKind};
pub use tr::{GramTensor, SubchainTensor, TRCores};
