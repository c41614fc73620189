//! Constructive approximation of spectral Barron functions by shallow
//! sigmoidal and deep ReLU networks.
//!
//! Targets are given by explicit Fourier data ([`spectral`]); networks are
//! synthesized from samples of the construction measures ([`build`]) using an
//! exact piecewise-linear calculus ([`pwl`]) and measured with [`metrics`].

pub mod bessel;
pub mod build;
pub mod error;
pub mod function;
pub mod lowerbound;
pub mod metrics;
pub mod multiscale;
pub mod netcore;
pub mod pwl;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use function::Function;
