//! Periodic grids, unitary spectral transforms, the fractional Laplacian and
//! the grid-weighted norms every other module is built on.

mod grid;
mod transform;

pub use grid::{ComplexField, GridSpec, BOUNDARY_TOLERANCE};
pub use transform::{Norms, Spectral, SpectralCoefficients};
