//! The rescaled profiles at the smallest ε: decay rates, sharp decay, the
//! Serrin log integral, the HLS quotient of w̃, and the rescaled equation.

use serde::Serialize;

use super::{covering_window, rescale_solution};
use crate::error::{Error, Result};
use crate::fractional::{HeatKernel, RescaledGreenOperator};
use crate::hls::{
    decay_fit, hls_quotient, limit_system_residual, log_corrected_fit, serrin_decay_fit, serrin_log_integral,
    sharp_decay_check, DecayFit, HlsQuotient, LimitResidual, Regime, SerrinLogReport, SharpDecayReport,
};
use crate::lane_emden::SolutionPair;
use crate::util::det_sum;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitOptions {
    /// Inner radius of the fit annulus, in rescaled units.
    pub inner_radius: f64,
    /// Outer radius λ r with r = `outer_fraction` · dist(x_c, ∂Ω).
    pub outer_fraction: f64,
    pub sharp_delta: f64,
    /// Cap on points per axis of the fields covering Ω_ε.
    pub max_points: usize,
    /// Box for the HLS quotient and the limit-system residual.
    pub hls_half_width: f64,
    pub hls_points: usize,
    pub hls: bool,
    pub residual: bool,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            inner_radius: 2.0,
            outer_fraction: 0.1,
            sharp_delta: 0.25,
            max_points: 1025,
            hls_half_width: 16.0,
            hls_points: 257,
            hls: true,
            residual: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitAnalysis {
    pub lambda: f64,
    pub center: Vec<f64>,
    pub window: (f64, f64),
    /// ∫_{Ω_ε} w̃ = λ^{n-αq} ∫_Ω u^q, the C1 seen by the rescaled profile.
    pub c1_rescaled: f64,
    /// ũ at the origin; 1 by construction of λ.
    pub u_peak: f64,
    pub v_fit: DecayFit,
    pub v_slope_target: f64,
    pub u_fit: DecayFit,
    pub u_slope_target: f64,
    /// Power in ũ ~ r^{slope} log r at the Serrin exponent.
    pub u_log_fit: Option<DecayFit>,
    /// Fit of ũ r^{n-2s} against log r at the Serrin exponent; the slope
    /// should be positive.
    pub u_log_growth: Option<DecayFit>,
    pub sharp: SharpDecayReport,
    pub serrin: Option<SerrinLogReport>,
    /// ‖w̃‖_{(q0+1)/q0} before normalization.
    pub w_norm: f64,
    pub hls: Option<HlsQuotient>,
    /// |Q(W) - Ŝ| / Ŝ.
    pub hls_gap: Option<f64>,
    pub residual: Option<LimitResidual>,
}

/// Decay fits and limit checks for the rescaled solution around (λ, x_c).
/// `s_hat` is the extrapolated constant the HLS quotient is compared with.
pub fn analyze_limit(
    pair: &SolutionPair,
    lambda: f64,
    center: &[f64],
    s_hat: Option<f64>,
    opts: &LimitOptions,
) -> Result<LimitAnalysis> {
    let e = &pair.exponents;
    let n = e.n;
    let nf = n as f64;
    let a = nf - 2.0 * e.s;
    let q0 = e.q0();
    let grid = pair.u.grid();
    let (alpha, _) = e.alpha_beta()?;
    let window = (
        opts.inner_radius,
        opts.outer_fraction * grid.domain().boundary_distance(center) * lambda,
    );
    if !(window.1 > 2.0 * window.0) {
        return Err(Error::EmptyWindow(format!(
            "fit annulus [{}, {}] is too thin at lambda = {lambda}",
            window.0, window.1
        )));
    }
    let (half, points) = covering_window(grid, lambda, center, opts.max_points);
    let cover = rescale_solution(pair, lambda, center, half, points)?;
    let u_peak = {
        let c = cover.u.center_index();
        cover.u.values()[ndarray::IxDyn(&vec![c; n])]
    };
    let c1_rescaled =
        lambda.powf(nf - alpha * e.q) * grid.weight() * det_sum(pair.u.slice(), |x| x.max(0.0).powf(e.q));

    let regime = Regime::of(e.p, n, e.s);
    let v_fit = decay_fit(&cover.v, window)?;
    let u_fit = decay_fit(&cover.u, window)?;
    let (u_log_fit, u_log_growth) = match regime {
        Regime::Serrin => (
            Some(serrin_decay_fit(&cover.u, window)?),
            Some(log_corrected_fit(&cover.u, window, e.s)?),
        ),
        _ => (None, None),
    };
    let sharp = sharp_decay_check(
        &cover.v,
        c1_rescaled,
        opts.sharp_delta,
        window.0,
        window.1 / lambda,
        lambda,
        e.s,
    )?;
    let serrin = match regime {
        Regime::Serrin => Some(serrin_log_integral(&cover.v, e.p, lambda, c1_rescaled, e.s)?),
        _ => None,
    };

    let (mut w_norm, mut hls, mut hls_gap, mut residual) = (0.0, None, None, None);
    if opts.hls || opts.residual {
        let hw = opts.hls_half_width.min(half);
        let local = rescale_solution(pair, lambda, center, hw, opts.hls_points)?;
        w_norm = local.w.lp_norm((q0 + 1.0) / q0);
        if opts.hls {
            let wn = local.w.map(|x| x / w_norm)?;
            let qv = hls_quotient(&wn, q0, e.p, e.s)?;
            hls_gap = s_hat.map(|sh| (qv.value - sh).abs() / sh);
            hls = Some(qv);
        }
        if opts.residual {
            residual = Some(limit_system_residual(&local.u, &local.v, e.p, q0, e.s)?);
        }
    }
    Ok(LimitAnalysis {
        lambda,
        center: center.to_vec(),
        window,
        c1_rescaled,
        u_peak,
        v_fit,
        v_slope_target: -a,
        u_fit,
        u_slope_target: regime.u_slope(e.p, n, e.s),
        u_log_fit,
        u_log_growth,
        sharp,
        serrin,
        w_norm,
        hls,
        hls_gap,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RescaledEquationReport {
    /// sup |G_ε w̃ - ṽ| / sup ṽ.
    pub v_residual: f64,
    /// sup |G_ε (G_ε w̃)^p - ũ| / sup ũ.
    pub u_residual: f64,
}

/// ṽ = G_ε w̃ and w̃^{1/q} = ũ = G_ε (G_ε w̃)^p on Ω_ε, with G_ε applied by
/// product quadrature of the rescaled kernel on the solution's grid.
pub fn rescaled_equation_check(pair: &SolutionPair, lambda: f64, center: &[f64]) -> Result<RescaledEquationReport> {
    let e = &pair.exponents;
    let (alpha, beta) = e.alpha_beta()?;
    let grid = pair.u.grid();
    let kernel = HeatKernel::new(grid.domain(), e.s)?;
    let op = RescaledGreenOperator::new(&kernel, grid, lambda, center)?;
    let u = pair.u.values().mapv(|x| lambda.powf(-alpha) * x.max(0.0));
    let v = pair.v.values().mapv(|x| lambda.powf(-beta) * x.max(0.0));
    let w = u.mapv(|x| x.powf(e.q));
    let v_q = op.apply_values(&w);
    let u_q = op.apply_values(&v_q.mapv(|x| x.max(0.0).powf(e.p)));
    let sup_diff = |a: &ndarray::ArrayD<f64>, b: &ndarray::ArrayD<f64>| {
        a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let sup = |a: &ndarray::ArrayD<f64>| a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(RescaledEquationReport {
        v_residual: sup_diff(&v_q, &v) / sup(&v),
        u_residual: sup_diff(&u_q, &u) / sup(&u),
    })
}
