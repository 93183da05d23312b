//! Heat kernels on weighted graphs built from parametrices.
//!
//! A parametrix `H` is an approximate heat kernel with the right initial
//! value; the true kernel is `H + H ∗ F` with `F = Σ_{ℓ≥1} (−1)^ℓ (LH)^{∗ℓ}`,
//! where `∗` is time convolution fused with a matrix product over vertices.

pub mod bessel;
pub mod embed1d;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod oracle;
pub mod parametrix;
pub mod quad;
pub mod series;
mod util;

pub use error::{HeatError, Result};
pub use graph::{BoundarySets, DegreeProfile, SubgraphEmbedding, VertexId, WeightedGraph};
pub use linalg::Matrix;
pub use series::{ClosedFormKernel, ConvolutionPlan, KernelFamily, KernelSeries, TimeGrid};
pub use parametrix::{assemble_heat_kernel, neumann_series, neumann_series_with, NeumannSeriesResult, Parametrix, Truncation};
