//! Shared numeric primitives: dense vectors, the function-class descriptor
//! and the seeded random stream every randomized routine draws from.

mod class;
mod rng;
mod vector;

pub use class::FunctionClassSpec;
pub use rng::RngStream;
pub use vector::Vector;

use crate::error::{ensure_dim, Result};

/// Euclidean norm.
pub fn norm(v: &Vector) -> f64 {
    v.norm()
}

/// The point `x + u (y - x)` on the segment `[x, y]`.
pub fn segment_point(x: &Vector, y: &Vector, u: f64) -> Result<Vector> {
    ensure_dim(x.dim(), y.dim())?;
    Ok(x.lerp(y, u))
}

/// Draws a point uniformly from the closed segment `[x, y]`.
///
/// Consumes exactly one uniform draw from `rng`.
pub fn segment_sample(x: &Vector, y: &Vector, rng: &mut RngStream) -> Result<Vector> {
    ensure_dim(x.dim(), y.dim())?;
    let u = rng.uniform_closed();
    Ok(x.lerp(y, u))
}
