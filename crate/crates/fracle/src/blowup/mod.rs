//! Blow-up sweeps: ε → 0 families of ground states, their concentration
//! scale λ_ε, the rescaled profiles, and the Green's-function limits away
//! from the concentration point.

mod analysis;

use nalgebra::{DMatrix, DVector};
use ndarray::{Dimension, IxDyn};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{build_basis, BoxDomain, Grid, GridFunction, SpectralField};
use crate::error::{Error, Result};
use crate::fractional::{g_tilde, GTildeOptions, HeatKernel};
use crate::hls::{serrin_target, FreeField, Regime};
use crate::lane_emden::{identity_report, solve_ground_state, ExponentPair, SolutionPair, SolverOptions};
use crate::util::det_sum;

pub use analysis::{
    analyze_limit, rescaled_equation_check, LimitAnalysis, LimitOptions, RescaledEquationReport,
};

/// λ = (max u)^{1/α} and the argmax, refined below the grid scale by a
/// least-squares quadratic on the 3^n stencil around the largest node.
pub fn find_max(u: &GridFunction, alpha: f64) -> Result<(f64, Vec<f64>)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be positive")));
    }
    let (idx, top) = u.argmax();
    if !(top > 0.0) {
        return Err(Error::ZeroInput);
    }
    let grid = u.grid();
    let n = idx.len();
    let node = grid.node(&idx);
    let on_edge = idx.iter().zip(grid.points()).any(|(&i, &m)| i == 0 || i + 1 == m);
    if on_edge {
        log::warn!("maximum of u sits on the outermost node layer at {node:?}");
        return Ok((top.powf(1.0 / alpha), node));
    }
    let mut samples = Vec::with_capacity(3usize.pow(n as u32));
    let mut j = idx.clone();
    for t in 0..3usize.pow(n as u32) {
        let d = stencil_offset(t, n);
        for a in 0..n {
            j[a] = (idx[a] as i64 + d[a]) as usize;
        }
        samples.push(u.values()[IxDyn(&j)]);
    }
    let (x, value) = match quadratic_peak(&samples, n) {
        Some((d, v)) if v >= top => {
            let x = node.iter().enumerate().map(|(a, x)| x + d[a] * grid.spacing(a)).collect();
            (x, v)
        }
        _ => (node, top),
    };
    Ok((value.powf(1.0 / alpha), x))
}

fn stencil_offset(t: usize, n: usize) -> Vec<i64> {
    (0..n).map(|a| ((t / 3usize.pow(a as u32)) % 3) as i64 - 1).collect()
}

/// Stationary point (in cell units) and value of the least-squares quadratic
/// through the 3^n stencil, if it is a maximum within one cell.
fn quadratic_peak(samples: &[f64], n: usize) -> Option<(Vec<f64>, f64)> {
    let cols = 1 + n + n * (n + 1) / 2;
    let mut a = DMatrix::zeros(samples.len(), cols);
    for (t, _) in samples.iter().enumerate() {
        let d = stencil_offset(t, n);
        a[(t, 0)] = 1.0;
        let mut c = 1;
        for i in 0..n {
            a[(t, c)] = d[i] as f64;
            c += 1;
        }
        for i in 0..n {
            for k in i..n {
                a[(t, c)] = (d[i] * d[k]) as f64;
                c += 1;
            }
        }
    }
    let coef = a.svd(true, true).solve(&DVector::from_column_slice(samples), 1e-14).ok()?;
    let g = DVector::from_iterator(n, (0..n).map(|i| coef[1 + i]));
    let mut h = DMatrix::zeros(n, n);
    let mut c = 1 + n;
    for i in 0..n {
        for k in i..n {
            if i == k {
                h[(i, i)] = 2.0 * coef[c];
            } else {
                h[(i, k)] = coef[c];
                h[(k, i)] = coef[c];
            }
            c += 1;
        }
    }
    (-h.clone()).cholesky()?;
    let d = h.lu().solve(&(-&g))?;
    if d.iter().any(|x| x.abs() > 1.0) {
        return None;
    }
    let value = coef[0] + 0.5 * g.dot(&d);
    Some((d.iter().cloned().collect(), value))
}

/// Newton ascent on the spectral field from `start`; returns the local
/// maximizer and the maximum. Steps are capped at `max_step`.
pub fn polish_max(field: &SpectralField, start: &[f64], max_step: f64) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut x = start.to_vec();
    let mut fx = field.eval(&x);
    let scale = field.basis().domain().diameter();
    for _ in 0..30 {
        let mut order = vec![0; n];
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            order[i] = 1;
            g[i] = field.derivative(&x, &order);
            order[i] = 2;
            h[(i, i)] = field.derivative(&x, &order);
            order[i] = 1;
            for k in i + 1..n {
                order[k] = 1;
                let v = field.derivative(&x, &order);
                h[(i, k)] = v;
                h[(k, i)] = v;
                order[k] = 0;
            }
            order[i] = 0;
        }
        if (-h.clone()).cholesky().is_none() {
            break;
        }
        let Some(mut d) = h.lu().solve(&(-&g)) else { break };
        let len = d.norm();
        if len > max_step {
            d *= max_step / len;
        }
        let cand: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
        let fc = field.eval(&cand);
        if !(fc >= fx) {
            break;
        }
        x = cand;
        fx = fc;
        if len < 1e-13 * scale {
            break;
        }
    }
    if x.iter().zip(start).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > 2.0 * max_step {
        log::warn!("peak refinement drifted from {start:?} to {x:?}");
    }
    (x, fx)
}

/// λ_ε and x_ε of a solution: grid maximum, quadratic refinement, then
/// Newton on the spectral u so that λ^{-α} u(x_ε) = 1 to rounding.
pub fn locate_peak(pair: &SolutionPair) -> Result<(f64, Vec<f64>)> {
    let (alpha, _) = pair.exponents.alpha_beta()?;
    let (_, x) = find_max(&pair.u, alpha)?;
    let h = pair.u.grid().max_spacing();
    let (x, top) = polish_max(&pair.u_field, &x, h);
    if !(top > 0.0) {
        return Err(Error::ZeroInput);
    }
    Ok((top.powf(1.0 / alpha), x))
}

/// ũ, ṽ, w̃ on the blown-up box around the peak.
#[derive(Clone, Debug)]
pub struct RescaledFields {
    pub u: FreeField,
    pub v: FreeField,
    pub w: FreeField,
    pub lambda: f64,
    pub center: Vec<f64>,
}

/// ũ(ξ) = λ^{-α} u(ξ/λ + x_c), ṽ(ξ) = λ^{-β} v(ξ/λ + x_c), w̃ = ũ^q, sampled
/// at the nodes of [-R, R]^n (odd `points` per axis) by evaluating the
/// spectral fields; zero where the pulled-back point leaves Ω.
pub fn rescale_solution(
    pair: &SolutionPair,
    lambda: f64,
    center: &[f64],
    half_width: f64,
    points: usize,
) -> Result<RescaledFields> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    let e = &pair.exponents;
    if center.len() != e.n {
        return Err(Error::InvalidArgument("center has the wrong dimension".into()));
    }
    let (alpha, beta) = e.alpha_beta()?;
    if points % 2 == 0 || !(half_width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need an odd point count and a positive half width, got {points} and {half_width}"
        )));
    }
    let h = 2.0 * half_width / points as f64;
    let xi: Vec<f64> = (0..points).map(|j| -half_width + (j as f64 + 0.5) * h).collect();
    let axes: Vec<Vec<f64>> = center.iter().map(|c| xi.iter().map(|x| x / lambda + c).collect()).collect();
    let a = e.n as f64 - 2.0 * e.s;
    let regime = Regime::of(e.p, e.n, e.s);
    let u_decay = -regime.u_slope(e.p, e.n, e.s);
    let ua = lambda.powf(-alpha);
    let vb = lambda.powf(-beta);
    let u = pair.u_field.eval_tensor(&axes).mapv(|x| ua * x.max(0.0));
    let v = pair.v_field.eval_tensor(&axes).mapv(|x| vb * x.max(0.0));
    let w = u.mapv(|x| x.powf(e.q));
    Ok(RescaledFields {
        u: FreeField::new(half_width, u, u_decay)?,
        v: FreeField::new(half_width, v, a)?,
        w: FreeField::new(half_width, w, e.q * u_decay)?,
        lambda,
        center: center.to_vec(),
    })
}

/// Box half width that covers all of Ω_ε = λ(Ω - x_c), and the odd point
/// count that keeps the native spacing, capped at `max_points`.
pub fn covering_window(grid: &Grid, lambda: f64, center: &[f64], max_points: usize) -> (f64, usize) {
    let d = grid.domain();
    let reach = center
        .iter()
        .zip(d.lengths())
        .map(|(c, l)| c.max(l - c))
        .fold(0.0, f64::max);
    let half = lambda * reach;
    let native = (2.0 * reach / grid.max_spacing()).ceil() as usize;
    (half, odd_at_most(native.max(3), max_points))
}

fn odd_at_most(m: usize, cap: usize) -> usize {
    let m = m.min(cap.max(3));
    if m % 2 == 1 {
        m
    } else {
        m - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollarReport {
    pub delta: f64,
    /// sup of u + v over nodes within δ of ∂Ω.
    pub sup: f64,
    pub global_sup: f64,
    /// min(p, q) - 1: the room in the hypothesis p, q > 1 + η.
    pub eta_margin: f64,
    pub nodes: usize,
}

pub fn boundary_bound_check(pair: &SolutionPair, delta: f64) -> Result<CollarReport> {
    let grid = pair.u.grid();
    let d = grid.domain();
    if !(delta > 0.0 && delta < 0.5 * d.min_side()) {
        return Err(Error::InvalidArgument(format!(
            "collar width {delta} must lie in (0, {})",
            0.5 * d.min_side()
        )));
    }
    let (mut sup, mut global, mut nodes) = (0.0f64, 0.0f64, 0usize);
    for ((idx, &u), &v) in pair.u.values().indexed_iter().zip(pair.v.values().iter()) {
        let idx: Vec<usize> = idx.as_array_view().to_vec();
        let x = grid.node(&idx);
        let t = u + v;
        global = global.max(t);
        if d.boundary_distance(&x) < delta {
            sup = sup.max(t);
            nodes += 1;
        }
    }
    let e = &pair.exponents;
    Ok(CollarReport {
        delta,
        sup,
        global_sup: global,
        eta_margin: e.p.min(e.q) - 1.0,
        nodes,
    })
}

/// Eight comparison points at distance `radius` from the center of the box:
/// a regular octagon in 2-D, the cube diagonals in 3-D.
pub fn ring_points(domain: &BoxDomain, radius: f64) -> Vec<Vec<f64>> {
    let c = domain.center();
    let n = domain.dim();
    match n {
        1 => vec![vec![c[0] - radius], vec![c[0] + radius]],
        2 => (0..8)
            .map(|t| {
                let th = std::f64::consts::PI * t as f64 / 4.0;
                vec![c[0] + radius * th.cos(), c[1] + radius * th.sin()]
            })
            .collect(),
        _ => (0..8)
            .map(|t| {
                let mut x = c.clone();
                for a in 0..3 {
                    let sign = if (t >> a) & 1 == 1 { 1.0 } else { -1.0 };
                    x[a] += sign * radius / 3f64.sqrt();
                }
                x
            })
            .collect(),
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub domain: BoxDomain,
    pub p: f64,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Initial cutoff and grid; both double when the core is under-resolved.
    pub cutoff: Vec<usize>,
    pub points: Vec<usize>,
    /// Refinement cap on the grid points per axis.
    pub max_points: usize,
    /// The core 2/λ must span at least this many cells.
    pub min_core_cells: f64,
    pub solver: SolverOptions,
    pub ring: Vec<Vec<f64>>,
    /// Comparison points keep this distance from the center and from ∂Ω.
    pub exclusion: f64,
    pub collar: f64,
    pub warm_start: bool,
    pub kernel: GTildeOptions,
    /// Rescaled-profile analysis at the smallest ε; `None` skips it.
    pub limit: Option<LimitOptions>,
}

impl SweepConfig {
    /// Defaults for a box: ring of radius 0.3·min side, δ = 0.1 collar,
    /// K = 64 and 128 points per axis in 2-D, K = 24 and 48 in 3-D.
    pub fn new(domain: BoxDomain, p: f64, epsilons: Vec<f64>) -> SweepConfig {
        let n = domain.dim();
        let (k, m, cap) = match n {
            1 => (256, 512, 8192),
            2 => (64, 128, 2048),
            _ => (24, 48, 96),
        };
        let ring = ring_points(&domain, 0.3 * domain.min_side());
        SweepConfig {
            p,
            epsilons,
            cutoff: vec![k; n],
            points: vec![m; n],
            max_points: cap,
            min_core_cells: 8.0,
            solver: SolverOptions::default(),
            ring,
            exclusion: 0.15 * domain.min_side(),
            collar: 0.1 * domain.min_side(),
            warm_start: true,
            kernel: GTildeOptions::default(),
            limit: Some(LimitOptions::default()),
            domain,
        }
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.p, self.domain.dim(), self.domain.s())
    }

    /// All violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let n = self.domain.dim();
        let s = self.domain.s();
        if self.epsilons.is_empty() {
            bad.push("epsilon schedule is empty".to_string());
        }
        for w in self.epsilons.windows(2) {
            if !(w[1] < w[0]) {
                bad.push(format!("epsilon schedule must be strictly decreasing ({} then {})", w[0], w[1]));
            }
        }
        for &eps in &self.epsilons {
            if let Err(e) = ExponentPair::from_epsilon(self.p, n, s, eps) {
                bad.push(format!("epsilon = {eps}: {e}"));
            }
        }
        if self.cutoff.len() != n || self.points.len() != n {
            bad.push(format!("cutoff and points need {n} entries"));
        }
        let c = self.domain.center();
        for x in &self.ring {
            if x.len() != n {
                bad.push(format!("comparison point {x:?} has the wrong dimension"));
                continue;
            }
            let r = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if r < self.exclusion || self.domain.boundary_distance(x) < self.exclusion {
                bad.push(format!(
                    "comparison point {x:?} is closer than {} to the center or to the boundary",
                    self.exclusion
                ));
            }
        }
        if !(self.collar > 0.0 && self.collar < 0.5 * self.domain.min_side()) {
            bad.push(format!("collar width {} must lie in (0, half the shortest side)", self.collar));
        }
        if !(self.min_core_cells > 0.0) {
            bad.push("min_core_cells must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantEstimates {
    /// λ^{n/(q0+1)} ∫ u^q.
    pub c1: f64,
    /// λ^{n/(p+1)} ∫ v^p.
    pub c2: f64,
    /// (g C1)^{n/(n-2s)} |S^{n-1}|.
    pub c3: f64,
    /// C1^p.
    pub c4: f64,
    /// C4 when p = 1.
    pub c5: Option<f64>,
}

impl ConstantEstimates {
    pub fn from_solution(pair: &SolutionPair, lambda: f64) -> Result<Self> {
        let e = &pair.exponents;
        let n = e.n as f64;
        let q0 = e.q0();
        let w = pair.u.grid().weight();
        let iu = w * det_sum(pair.u.slice(), |x| x.max(0.0).powf(e.q));
        let iv = w * det_sum(pair.v.slice(), |x| x.max(0.0).powf(e.p));
        let c1 = lambda.powf(n / (q0 + 1.0)) * iu;
        let c4 = c1.powf(e.p);
        Ok(ConstantEstimates {
            c1,
            c2: lambda.powf(n / (e.p + 1.0)) * iv,
            c3: serrin_target(c1, e.n, e.s)?,
            c4,
            c5: (e.p == 1.0).then_some(c4),
        })
    }

    /// The multiple of G (or G̃) that the normalized u tends to.
    pub fn u_constant(&self, regime: Regime) -> f64 {
        match regime {
            Regime::AboveSerrin => self.c2,
            Regime::Serrin => self.c3,
            Regime::BelowSerrin => self.c5.unwrap_or(self.c4),
        }
    }
}

/// Factor that turns u_ε into a quantity with a nonzero limit away from x0:
/// λ^{n/(p+1)}, λ^{n/(p+1)}/log λ or λ^{np/(q0+1)} by regime.
pub fn u_normalization(regime: Regime, lambda: f64, n: usize, p: f64, q0: f64) -> f64 {
    let n = n as f64;
    match regime {
        Regime::AboveSerrin => lambda.powf(n / (p + 1.0)),
        Regime::Serrin => lambda.powf(n / (p + 1.0)) / lambda.ln(),
        Regime::BelowSerrin => lambda.powf(n * p / (q0 + 1.0)),
    }
}

/// λ^{n/(q0+1)}.
pub fn v_normalization(lambda: f64, n: usize, q0: f64) -> f64 {
    lambda.powf(n as f64 / (q0 + 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub x_c: Vec<f64>,
    pub theta: f64,
    pub s_omega: f64,
    pub energy: f64,
    /// λ_ε dist(x_ε, ∂Ω).
    pub lam_dist: f64,
    pub lam_pow_eps: f64,
    pub boundary_sup: f64,
    pub max_green_dev: f64,
    pub u_max: f64,
    /// ‖ṽ‖_{L^{p+1}(Ω_ε)} = λ^{n/(p+1)-β} ‖v‖_{p+1}.
    pub rescaled_v_norm: f64,
    pub constants: ConstantEstimates,
    /// Normalized u and v at the comparison points.
    pub ring_u: Vec<f64>,
    pub ring_v: Vec<f64>,
    pub green: GreenDeviation,
    pub cutoff: Vec<usize>,
    pub points: Vec<usize>,
    /// Cells across the core 2/λ on the coarsest axis.
    pub core_cells: f64,
    pub resolved: bool,
    pub iterations: usize,
    pub identity_worst: f64,
    pub equation_residual: f64,
}

/// Limit kernels at the comparison points, None where unresolved.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreenTargets {
    pub regime: Regime,
    pub x0: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// G(x_i, x0).
    pub g: Vec<Option<f64>>,
    /// G(x_i, x0) above and at the Serrin exponent, G̃(x_i, x0) below.
    pub u_kernel: Vec<Option<f64>>,
    pub u_kernel_error: Vec<Option<f64>>,
}

pub fn green_targets(
    domain: &BoxDomain,
    p: f64,
    x0: &[f64],
    points: &[Vec<f64>],
    opts: &GTildeOptions,
) -> Result<GreenTargets> {
    let n = domain.dim();
    let s = domain.s();
    let regime = Regime::of(p, n, s);
    let kernel = HeatKernel::new(domain, s)?;
    let g: Vec<Option<f64>> = points
        .par_iter()
        .map(|x| match kernel.green(x, x0) {
            Ok(k) => Some(k.value),
            Err(e) => {
                log::warn!("skipping comparison point {x:?}: {e}");
                None
            }
        })
        .collect();
    let (u_kernel, u_kernel_error): (Vec<_>, Vec<_>) = match regime {
        Regime::BelowSerrin => points
            .par_iter()
            .map(|x| match g_tilde(x, x0, p, &kernel, opts) {
                Ok(k) => (Some(k.value), Some(k.truncation_bound)),
                Err(e) => {
                    log::warn!("skipping comparison point {x:?} for the iterated kernel: {e}");
                    (None, None)
                }
            })
            .unzip(),
        _ => (g.clone(), vec![Some(0.0); g.len()]),
    };
    Ok(GreenTargets {
        regime,
        x0: x0.to_vec(),
        points: points.to_vec(),
        g,
        u_kernel,
        u_kernel_error,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GreenDeviation {
    /// normalized u / (C · kernel) per comparison point.
    pub u_ratio: Vec<Option<f64>>,
    /// λ^{n/(q0+1)} v / (C1 G) per comparison point.
    pub v_ratio: Vec<Option<f64>>,
    pub max_u: f64,
    pub max_v: f64,
}

impl GreenDeviation {
    pub fn max(&self) -> f64 {
        self.max_u.max(self.max_v)
    }

    /// |ratio - 1| for u and v at point i.
    pub fn at(&self, i: usize) -> (Option<f64>, Option<f64>) {
        (self.u_ratio[i].map(|r| (r - 1.0).abs()), self.v_ratio[i].map(|r| (r - 1.0).abs()))
    }
}

/// Ratios of the row's normalized values to the predicted multiples of the
/// limit kernels.
pub fn green_limit_check(row: &SweepRow, targets: &GreenTargets) -> Result<GreenDeviation> {
    let c = &row.constants;
    let cu = c.u_constant(targets.regime);
    let mut out = GreenDeviation::default();
    for i in 0..targets.points.len() {
        let ur = targets.u_kernel[i].map(|k| row.ring_u[i] / (cu * k));
        let vr = targets.g[i].map(|k| row.ring_v[i] / (c.c1 * k));
        out.u_ratio.push(ur);
        out.v_ratio.push(vr);
        if let Some(r) = ur {
            out.max_u = out.max_u.max((r - 1.0).abs());
        }
        if let Some(r) = vr {
            out.max_v = out.max_v.max((r - 1.0).abs());
        }
    }
    if out.u_ratio.iter().all(Option::is_none) {
        return Err(Error::EmptyWindow("no comparison point has a resolved kernel".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub eps: f64,
    pub theta: f64,
    /// Ŝ^{-1} |Ω|^{1/(q_ε+1) - 1/(q0+1)}.
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    /// Intercept of the least-squares line S(ε) = Ŝ + c ε.
    pub s_hat: f64,
    pub slope: f64,
    /// RMS residual of the line; the linear model is a heuristic.
    pub fit_residual: f64,
    pub bounds: Vec<BoundRow>,
    pub bound_ok: bool,
    /// (2s/n) Ŝ^{n/2s}.
    pub energy_target: f64,
    /// |E - target| / E per row.
    pub energy_gaps: Vec<f64>,
    pub energy_trend_ok: bool,
}

impl Extrapolation {
    pub fn energy_gap_at_min(&self) -> f64 {
        *self.energy_gaps.last().expect("at least three rows")
    }
}

pub fn extrapolate_s(rows: &[SweepRow], domain: &BoxDomain, p: f64) -> Result<Extrapolation> {
    if rows.len() < 3 {
        return Err(Error::TooFewRows { needed: 3, got: rows.len() });
    }
    let n = domain.dim();
    let s = domain.s();
    let k = rows.len() as f64;
    let mx = rows.iter().map(|r| r.eps).sum::<f64>() / k;
    let my = rows.iter().map(|r| r.s_omega).sum::<f64>() / k;
    let sxx: f64 = rows.iter().map(|r| (r.eps - mx).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| (r.eps - mx) * (r.s_omega - my)).sum();
    let slope = sxy / sxx;
    let s_hat = my - slope * mx;
    let fit_residual = (rows
        .iter()
        .map(|r| (r.s_omega - s_hat - slope * r.eps).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    let nf = n as f64;
    let q0 = 1.0 / ((nf - 2.0 * s) / nf - 1.0 / (p + 1.0)) - 1.0;
    let vol = domain.volume();
    let bounds: Vec<BoundRow> = rows
        .iter()
        .map(|r| {
            let bound = vol.powf(1.0 / (r.q + 1.0) - 1.0 / (q0 + 1.0)) / s_hat;
            BoundRow {
                eps: r.eps,
                theta: r.theta,
                bound,
                ok: r.theta <= bound,
            }
        })
        .collect();
    let energy_target = 2.0 * s / nf * s_hat.powf(nf / (2.0 * s));
    let energy_gaps: Vec<f64> = rows.iter().map(|r| (r.energy - energy_target).abs() / r.energy).collect();
    Ok(Extrapolation {
        s_hat,
        slope,
        fit_residual,
        bound_ok: bounds.iter().all(|b| b.ok),
        bounds,
        energy_target,
        energy_trend_ok: energy_gaps.windows(2).all(|w| w[1] <= w[0]),
        energy_gaps,
    })
}

/// Trend checks over a finished schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepChecks {
    pub lambda_increasing: bool,
    pub lam_dist_increasing: bool,
    /// λ^ε ∈ (0.9, 1.1) on every row.
    pub lam_pow_eps_band: bool,
    /// |λ^ε - 1| decreasing on the last two rows.
    pub lam_pow_eps_converging: bool,
    /// Per-point deviations nonincreasing after the first row, 5% jitter.
    pub green_nonincreasing: bool,
    /// max_green_dev strictly decreasing along the schedule.
    pub green_decreasing: bool,
    /// Successive |ΔC1|/C1 decreasing.
    pub c1_stabilizing: bool,
    /// Collar suprema within a factor 2 of each other.
    pub collar_bounded: bool,
    pub identities: bool,
    pub resolved: bool,
}

impl SweepChecks {
    pub fn evaluate(rows: &[SweepRow]) -> SweepChecks {
        let inc = |f: &dyn Fn(&SweepRow) -> f64| rows.windows(2).all(|w| f(&w[1]) > f(&w[0]));
        let gap: Vec<f64> = rows.iter().map(|r| (r.lam_pow_eps - 1.0).abs()).collect();
        let mut green_nonincreasing = true;
        if rows.len() > 2 {
            for w in rows[1..].windows(2) {
                for i in 0..w[0].ring_u.len() {
                    let (a0, b0) = w[0].green.at(i);
                    let (a1, b1) = w[1].green.at(i);
                    for (x0, x1) in [(a0, a1), (b0, b1)] {
                        if let (Some(x0), Some(x1)) = (x0, x1) {
                            if x1 > 1.05 * x0 {
                                green_nonincreasing = false;
                            }
                        }
                    }
                }
            }
        }
        let dc: Vec<f64> = rows
            .windows(2)
            .map(|w| (w[1].constants.c1 - w[0].constants.c1).abs() / w[1].constants.c1)
            .collect();
        let sups: Vec<f64> = rows.iter().map(|r| r.boundary_sup).collect();
        let hi = sups.iter().cloned().fold(0.0, f64::max);
        let lo = sups.iter().cloned().fold(f64::INFINITY, f64::min);
        SweepChecks {
            lambda_increasing: inc(&|r| r.lambda),
            lam_dist_increasing: inc(&|r| r.lam_dist),
            lam_pow_eps_band: rows.iter().all(|r| r.lam_pow_eps > 0.9 && r.lam_pow_eps < 1.1),
            lam_pow_eps_converging: gap.len() < 2 || gap[gap.len() - 1] < gap[gap.len() - 2],
            green_nonincreasing,
            green_decreasing: rows.windows(2).all(|w| w[1].max_green_dev < w[0].max_green_dev),
            c1_stabilizing: dc.windows(2).all(|w| w[1] < w[0]),
            collar_bounded: rows.is_empty() || hi < 2.0 * lo,
            identities: rows.iter().all(|r| r.identity_worst < 1e-6),
            resolved: rows.iter().all(|r| r.resolved),
        }
    }

    pub fn all(&self) -> bool {
        self.lambda_increasing
            && self.lam_dist_increasing
            && self.lam_pow_eps_band
            && self.lam_pow_eps_converging
            && self.green_nonincreasing
            && self.green_decreasing
            && self.c1_stabilizing
            && self.collar_bounded
            && self.identities
            && self.resolved
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub regime: Regime,
    pub rows: Vec<SweepRow>,
    /// Estimates at the smallest ε.
    pub constants: ConstantEstimates,
    pub targets: GreenTargets,
    pub checks: SweepChecks,
    pub extrapolation: Option<Extrapolation>,
    pub limit: Option<LimitAnalysis>,
    #[serde(skip)]
    pub last: Option<SolutionPair>,
}

fn warm_start(prev: &SolutionPair, grid: &Grid, q: f64) -> Result<GridFunction> {
    let vals = if prev.u.grid() == grid {
        prev.u.values().mapv(|x| x.max(0.0).powf(q))
    } else {
        let axes: Vec<Vec<f64>> = (0..grid.points().len()).map(|a| grid.coords(a)).collect();
        prev.u_field.eval_tensor(&axes).mapv(|x| x.max(0.0).powf(q))
    };
    GridFunction::new(grid, vals)
}

/// Solves along the ε schedule, measures each row, and compares with the
/// Green's-function limits at the comparison points.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let d = &cfg.domain;
    let n = d.dim();
    let s = d.s();
    let regime = cfg.regime();
    let mut cutoff = cfg.cutoff.clone();
    let mut points = cfg.points.clone();
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut prev: Option<SolutionPair> = None;
    let mut last_peak = (0.0, Vec::new());
    for &eps in &cfg.epsilons {
        let wrap = |e: Error| Error::Row {
            epsilon: eps,
            source: Box::new(e),
        };
        let e = ExponentPair::from_epsilon(cfg.p, n, s, eps).map_err(wrap)?;
        let (pair, report, basis, lambda, x_c) = loop {
            let basis = build_basis(d, &cutoff).map_err(wrap)?;
            let grid = Grid::new(d, &points).map_err(wrap)?;
            let init = match (&prev, cfg.warm_start) {
                (Some(p), true) => Some(warm_start(p, &grid, e.q).map_err(wrap)?),
                _ => None,
            };
            let (pair, report) = solve_ground_state(&e, &basis, &grid, init.as_ref(), &cfg.solver).map_err(|err| {
                log::error!("solve failed at eps = {eps} on {points:?} points: {err}");
                wrap(err)
            })?;
            let (lambda, x_c) = locate_peak(&pair).map_err(wrap)?;
            let core = 2.0 / lambda / grid.max_spacing();
            let can_refine = points.iter().all(|&m| 2 * m <= cfg.max_points);
            if core < cfg.min_core_cells && can_refine {
                log::info!("eps = {eps}: core spans {core:.2} cells, refining to {:?} points", points.iter().map(|m| 2 * m).collect::<Vec<_>>());
                cutoff.iter_mut().for_each(|k| *k *= 2);
                points.iter_mut().for_each(|m| *m *= 2);
                prev = Some(pair);
                continue;
            }
            break (pair, report, basis, lambda, x_c);
        };
        let (alpha, beta) = e.alpha_beta().map_err(wrap)?;
        let grid = pair.u.grid().clone();
        let core_cells = 2.0 / lambda / grid.max_spacing();
        if core_cells < cfg.min_core_cells {
            log::warn!("eps = {eps}: core spans only {core_cells:.2} cells at the refinement cap");
        }
        let constants = ConstantEstimates::from_solution(&pair, lambda).map_err(wrap)?;
        let q0 = e.q0();
        let un = u_normalization(regime, lambda, n, cfg.p, q0);
        let vn = v_normalization(lambda, n, q0);
        let ring_u = cfg.ring.iter().map(|x| un * pair.u_field.eval(x)).collect();
        let ring_v = cfg.ring.iter().map(|x| vn * pair.v_field.eval(x)).collect();
        let collar = boundary_bound_check(&pair, cfg.collar).map_err(wrap)?;
        let ids = identity_report(&pair, &basis).map_err(wrap)?;
        let vnorm = crate::domain::lp_norm(&pair.v, cfg.p + 1.0).map_err(wrap)?;
        rows.push(SweepRow {
            eps,
            q: e.q,
            alpha,
            beta,
            lambda,
            lam_dist: lambda * d.boundary_distance(&x_c),
            lam_pow_eps: lambda.powf(eps),
            x_c: x_c.clone(),
            theta: report.theta,
            s_omega: report.sobolev_quotient,
            energy: report.energy,
            boundary_sup: collar.sup,
            max_green_dev: 0.0,
            u_max: pair.u.max(),
            rescaled_v_norm: lambda.powf(n as f64 / (cfg.p + 1.0) - beta) * vnorm,
            constants,
            ring_u,
            ring_v,
            green: GreenDeviation::default(),
            cutoff: cutoff.clone(),
            points: points.clone(),
            core_cells,
            resolved: core_cells >= cfg.min_core_cells,
            iterations: report.iterations,
            identity_worst: ids.worst(),
            equation_residual: report.equation_residual,
        });
        log::info!(
            "eps = {eps}: lambda = {lambda:.6}, theta = {:.10}, S = {:.6}, {} iterations on {points:?}",
            report.theta,
            report.sobolev_quotient,
            report.iterations
        );
        last_peak = (lambda, x_c);
        prev = Some(pair);
    }
    let x0 = last_peak.1.clone();
    let targets = green_targets(d, cfg.p, &x0, &cfg.ring, &cfg.kernel)?;
    for row in rows.iter_mut() {
        row.green = green_limit_check(row, &targets)?;
        row.max_green_dev = row.green.max();
    }
    let checks = SweepChecks::evaluate(&rows);
    let extrapolation = if rows.len() >= 3 { Some(extrapolate_s(&rows, d, cfg.p)?) } else { None };
    let last = prev.expect("schedule is nonempty");
    let limit = match &cfg.limit {
        Some(opts) => match analyze_limit(&last, last_peak.0, &last_peak.1, extrapolation.as_ref().map(|x| x.s_hat), opts) {
            Ok(a) => Some(a),
            Err(e) => {
                log::warn!("rescaled-profile analysis skipped: {e}");
                None
            }
        },
        None => None,
    };
    Ok(SweepResult {
        regime,
        constants: rows.last().expect("schedule is nonempty").constants.clone(),
        rows,
        targets,
        checks,
        extrapolation,
        limit,
        last: Some(last),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EigenIndex;

    #[test]
    fn stencil_fit_recovers_paraboloid() {
        let d = BoxDomain::unit(2, 0.5).unwrap();
        let g = Grid::uniform(&d, 40).unwrap();
        let h = g.spacing(0);
        let peak = [0.4123, 0.5871];
        let u = GridFunction::from_fn(&g, |x| {
            3.0 - 5.0 * (x[0] - peak[0]).powi(2) - 2.0 * (x[1] - peak[1]).powi(2) + (x[0] - peak[0]) * (x[1] - peak[1])
        })
        .unwrap();
        let (lam, x) = find_max(&u, 1.0).unwrap();
        assert!((x[0] - peak[0]).abs() < 1e-3 * h && (x[1] - peak[1]).abs() < 1e-3 * h, "{x:?}");
        assert!((lam - 3.0).abs() < 1e-12);
    }

    #[test]
    fn first_mode_peak() {
        let d = BoxDomain::unit(2, 0.5).unwrap();
        let b = build_basis(&d, &[4, 4]).unwrap();
        let g = Grid::uniform(&d, 64).unwrap();
        let k = EigenIndex::new(vec![1, 1]).unwrap();
        let u = GridFunction::from_fn(&g, |x| b.mode_value(&k, x)).unwrap();
        let (lam, x) = find_max(&u, 0.5).unwrap();
        assert!((lam - 4.0).abs() < 1e-5, "{lam}");
        let h = g.max_spacing();
        assert!((x[0] - 0.5).abs() < 1e-3 * h && (x[1] - 0.5).abs() < 1e-3 * h, "{x:?}");
        let (lam1, _) = find_max(&u, 1.0).unwrap();
        assert!((lam1 - lam.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ring_is_admissible() {
        let d = BoxDomain::unit(2, 0.5).unwrap();
        let cfg = SweepConfig::new(d, 2.5, vec![0.06, 0.04, 0.025]);
        assert_eq!(cfg.ring.len(), 8);
        cfg.validate().unwrap();
        let d3 = BoxDomain::unit(3, 0.5).unwrap();
        let cfg3 = SweepConfig::new(d3, 1.0, vec![0.2, 0.12]);
        assert_eq!(cfg3.ring.len(), 8);
        cfg3.validate().unwrap();
    }
}
