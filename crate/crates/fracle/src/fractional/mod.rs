//! The spectral fractional Laplacian and its kernels.

mod cubature;
mod kernel;
mod operator;

use crate::domain::{analyze, synthesize, GridFunction, SpectralBasis};
use crate::error::{Error, Result};
use crate::util::det_sum;

pub use cubature::{integrate_singular, CubatureOptions, CubatureResult, SingularPoint};
pub use kernel::{
    free_kernel, free_kernel_constant, green, green_many, g_tilde, regular_part, rescaled_green, sphere_area,
    FreeKernelConstant, HeatKernel, KernelSample, GTildeOptions,
};
pub use operator::{GridGreenOperator, RescaledGreenOperator};

/// Clamped mass above this fraction of the L¹ norm triggers a warning.
pub const CLAMP_WARN_FRACTION: f64 = 1e-8;

fn check_order(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("fractional order {s} outside (0, 1]")))
    }
}

fn apply_power(f: &GridFunction, power: f64, basis: &SpectralBasis) -> Result<GridFunction> {
    let a = analyze(f, basis)?;
    synthesize(&a.with_multiplier(power), f.grid())
}

/// (-Δ)^s f: coefficients times λ_k^s.
pub fn apply_fraclap(f: &GridFunction, s: f64, basis: &SpectralBasis) -> Result<GridFunction> {
    check_order(s)?;
    apply_power(f, s, basis)
}

/// (-Δ)^{-s} f: coefficients times λ_k^{-s}.
pub fn apply_inverse(f: &GridFunction, s: f64, basis: &SpectralBasis) -> Result<GridFunction> {
    check_order(s)?;
    apply_power(f, -s, basis)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct ClampStats {
    /// Σ w |f_-|.
    pub clamped_mass: f64,
    pub l1_norm: f64,
    /// clamped_mass / l1_norm (0 for the zero function).
    pub fraction: f64,
    pub min_value: f64,
}

/// Replaces negative values by zero and reports how much was removed.
pub fn clamp_negative(f: &GridFunction) -> (GridFunction, ClampStats) {
    let w = f.grid().weight();
    let neg = w * det_sum(f.slice(), |v| if v < 0.0 { -v } else { 0.0 });
    let l1 = w * det_sum(f.slice(), f64::abs);
    let stats = ClampStats {
        clamped_mass: neg,
        l1_norm: l1,
        fraction: if l1 > 0.0 { neg / l1 } else { 0.0 },
        min_value: f.min(),
    };
    if stats.fraction > CLAMP_WARN_FRACTION {
        log::warn!(
            "clamped negative mass fraction {:.3e} (min value {:.3e})",
            stats.fraction,
            stats.min_value
        );
    }
    let clamped = f.map(|v| v.max(0.0)).expect("clamping keeps values finite");
    (clamped, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_basis, BoxDomain, EigenIndex, Grid};
    use std::f64::consts::PI;

    #[test]
    fn single_mode_multipliers() {
        let d = BoxDomain::unit(2, 0.5).unwrap();
        let b = build_basis(&d, &[8, 8]).unwrap();
        let g = Grid::uniform(&d, 16).unwrap();
        let k = EigenIndex::new(vec![1, 1]).unwrap();
        let phi = GridFunction::from_fn(&g, |x| b.mode_value(&k, x)).unwrap();
        let up = apply_fraclap(&phi, 0.5, &b).unwrap();
        let down = apply_inverse(&phi, 0.5, &b).unwrap();
        let c = (2.0 * PI * PI).sqrt();
        for ((p, u), d) in phi.values().iter().zip(up.values()).zip(down.values()) {
            assert!((u - c * p).abs() < 1e-12);
            assert!((d - p / c).abs() < 1e-12);
        }
        assert!((1.0 / c - 0.2251).abs() < 1e-4);
    }

    #[test]
    fn clamp_reports_removed_mass() {
        let d = BoxDomain::unit(2, 0.5).unwrap();
        let g = Grid::uniform(&d, 4).unwrap();
        let f = GridFunction::from_fn(&g, |x| if x[0] < 0.3 { -1.0 } else { 1.0 }).unwrap();
        let (c, st) = clamp_negative(&f);
        assert!(c.min() >= 0.0);
        assert!((st.fraction - 0.25).abs() < 1e-15);
        assert_eq!(st.min_value, -1.0);
    }
}
