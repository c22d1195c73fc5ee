//! Spectral ground states, variational functionals, virial diagnostics and
//! blow-up experiments for the focusing fractional nonlinear Schrödinger
//! equation `i u_t - (-Delta)^s u = -|u|^alpha u` on a periodic box.

pub mod error;
pub mod params;
pub mod functionals;
pub mod ground_state;
pub mod evolution;
pub mod virial;
pub mod spectral;
pub mod sampling;
pub mod experiment;

pub use error::{Error, Result};
pub use params::ModelParams;
pub use spectral::{ComplexField, GridSpec, Norms, Spectral, SpectralCoefficients};
