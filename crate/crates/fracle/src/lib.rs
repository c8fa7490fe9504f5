//! Minimal-energy solutions of the fractional Lane-Emden system
//!
//! ```text
//! (-Δ)^s u = v^p,  (-Δ)^s v = u^q  in Ω,   u = v = 0 on ∂Ω
//! ```
//!
//! on axis-aligned boxes, with the spectral fractional Laplacian. Ground
//! states come from a normalized power iteration on the dual integral
//! equation; the `blowup` module drives ε → 0 families toward the critical
//! hyperbola and compares them with Green's-function and HLS limits.

pub mod blowup;
pub mod domain;
pub mod error;
pub mod fractional;
pub mod hls;
pub mod io;
pub mod lane_emden;
pub mod quadrature;
mod util;

pub use domain::{
    analyze, build_basis, integrate, lp_norm, synthesize, BoxDomain, EigenIndex, Grid,
    GridFunction, SpectralBasis, SpectralField,
};
pub use error::{Error, Result};
pub use lane_emden::{ExponentPair, SolutionPair, SolveReport, SolverOptions};
