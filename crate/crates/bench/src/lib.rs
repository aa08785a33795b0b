//! Fixtures shared by the benchmarks in `benches/`.

use passage::density_kernel::ConvolutionMethod;
use passage::{BoundarySequence, GridConfig};

/// Constant boundary at -1, the reference case throughout.
pub fn reference_boundary() -> BoundarySequence {
    BoundarySequence::constant(-1.0).expect("finite constant")
}

pub fn grid(method: ConvolutionMethod, spacing: f64) -> GridConfig {
    GridConfig::default().with_method(method).with_spacing(spacing)
}
