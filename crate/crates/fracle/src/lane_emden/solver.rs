//! Normalized power iteration for the dual integral equation
//! (-Δ)^{-s}((-Δ)^{-s} w)^p = w^{1/q}.

use ndarray::{ArrayD, Axis, IxDyn};
use serde::Serialize;

use crate::domain::{GridFunction, SpectralBasis, SpectralField, TransformPair, Grid};
use crate::error::{Error, Result};
use crate::util::{det_sum, sup_abs};

use super::{ExponentPair, SolutionPair};

/// Relative Θ gain a symmetry-broken restart needs before it replaces the
/// symmetric fixed point; smaller gains are rounding.
const PROBE_GAIN: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative change of Θ between iterations.
    pub theta_tol: f64,
    /// Relative sup residual of the Euler-Lagrange relation.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Allowed relative decrease of Θ before the run is aborted.
    pub ascent_slack: f64,
    /// Abort when clamped negative mass exceeds this fraction of the L¹ norm.
    pub positivity_limit: f64,
    /// Iterations allowed for a perturbed restart to climb above a symmetric
    /// fixed point; 0 disables the probe.
    pub symmetry_probe: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            theta_tol: 1e-9,
            residual_tol: 1e-7,
            max_iter: 2000,
            ascent_slack: 1e-12,
            positivity_limit: 1e-3,
            symmetry_probe: 60,
        }
    }
}

/// Symmetries of the computed u that hold to 1e-10 relative.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SymmetryClass {
    /// Axes i with u(.., x_i, ..) = u(.., L_i - x_i, ..).
    pub reflections: Vec<usize>,
    /// Axis pairs (i, j) with u invariant under swapping x_i and x_j.
    pub swaps: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub theta: f64,
    pub mu: f64,
    pub energy: f64,
    pub sobolev_quotient: f64,
    pub iterations: usize,
    pub theta_change: f64,
    /// Relative sup residual of the Euler-Lagrange relation at the last iterate.
    pub residual: f64,
    /// Relative sup residual of the un-normalized equation after rescaling.
    pub equation_residual: f64,
    pub theta_history: Vec<f64>,
    pub max_clamp_fraction: f64,
    pub symmetry: SymmetryClass,
}

struct Operator {
    tp: TransformPair,
    mult: ArrayD<f64>,
}

impl Operator {
    fn coeffs(&self, values: &ArrayD<f64>) -> ArrayD<f64> {
        let mut a = self.tp.analyze(values);
        a *= &self.mult;
        a
    }
}

fn lp(values: &ArrayD<f64>, weight: f64, r: f64) -> f64 {
    (weight * det_sum(values.as_slice().unwrap(), |x| x.abs().powf(r))).powf(1.0 / r)
}

fn clamp_fraction(values: &ArrayD<f64>) -> f64 {
    let s = values.as_slice().unwrap();
    let neg = det_sum(s, |x| if x < 0.0 { -x } else { 0.0 });
    let tot = det_sum(s, f64::abs);
    if tot > 0.0 {
        neg / tot
    } else {
        0.0
    }
}

fn symmetry_of(u: &ArrayD<f64>, grid: &Grid) -> SymmetryClass {
    let tol = 1e-10 * sup_abs(u.as_slice().unwrap()).max(f64::MIN_POSITIVE);
    let n = u.ndim();
    let dev = |other: &ArrayD<f64>| -> f64 {
        u.iter().zip(other.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let mut class = SymmetryClass::default();
    for a in 0..n {
        let mut r = u.view();
        r.invert_axis(Axis(a));
        if dev(&r.to_owned()) <= tol {
            class.reflections.push(a);
        }
    }
    let lengths = grid.domain().lengths();
    for i in 0..n {
        for j in i + 1..n {
            if grid.points()[i] != grid.points()[j] || lengths[i] != lengths[j] {
                continue;
            }
            let mut t = u.view();
            t.swap_axes(i, j);
            if dev(&t.as_standard_layout().into_owned()) <= tol {
                class.swaps.push((i, j));
            }
        }
    }
    class
}

struct Run {
    w: ArrayD<f64>,
    theta: f64,
    aw: ArrayD<f64>,
    ay: ArrayD<f64>,
    history: Vec<f64>,
    theta_change: f64,
    residual: f64,
    max_clamp: f64,
}

/// Runs the normalized iteration from `w` (already normalized). With
/// `escape = Some((theta_ref, n))`, gives up with `Ok(None)` if Θ has not
/// passed `theta_ref` after `n` iterations.
fn iterate(
    op: &Operator,
    e: &ExponentPair,
    weight: f64,
    mut w: ArrayD<f64>,
    opts: &SolverOptions,
    escape: Option<(f64, usize)>,
) -> Result<Option<Run>> {
    let b = e.dual_exponent();
    let mut history: Vec<f64> = Vec::new();
    let mut max_clamp = 0.0f64;
    let mut theta_change = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for k in 0..opts.max_iter {
        let aw = op.coeffs(&w);
        let z = op.tp.synthesize(&aw);
        let zf = clamp_fraction(&z);
        let zp = z.mapv(|x| x.max(0.0));
        let theta = lp(&zp, weight, e.p + 1.0);
        if let Some(&prev) = history.last() {
            if theta < prev * (1.0 - opts.ascent_slack) {
                return Err(Error::AscentViolated {
                    iteration: k,
                    previous: prev,
                    current: theta,
                });
            }
            theta_change = (theta - prev).abs() / theta;
        }
        history.push(theta);
        if let Some((reference, limit)) = escape {
            if k >= limit && theta <= reference * (1.0 + opts.theta_tol) {
                return Ok(None);
            }
        }
        let ay = op.coeffs(&zp.mapv(|x| x.powf(e.p)));
        let y = op.tp.synthesize(&ay);
        let yf = clamp_fraction(&y);
        max_clamp = max_clamp.max(zf).max(yf);
        if max_clamp > opts.positivity_limit {
            return Err(Error::PositivityLost {
                fraction: max_clamp,
                limit: opts.positivity_limit,
            });
        }
        let mu = theta.powf(e.p + 1.0);
        let target = w.mapv(|x| mu * x.powf(1.0 / e.q));
        let scale = sup_abs(target.as_slice().unwrap());
        residual = y
            .iter()
            .zip(target.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        if theta_change < opts.theta_tol && residual < opts.residual_tol {
            return Ok(Some(Run {
                w,
                theta,
                aw,
                ay,
                history,
                theta_change,
                residual,
                max_clamp,
            }));
        }
        let mut next = y.mapv(|x| x.max(0.0).powf(e.q));
        let nn = lp(&next, weight, b);
        if !(nn > 0.0) {
            return Err(Error::ZeroInput);
        }
        next /= nn;
        w = next;
    }
    Err(Error::NoConvergence {
        iterations: history.len(),
        theta_change,
        residual,
    })
}

/// Multiplies w by 1 + δ Σ_i c_i cos(π x_i / L_i) with distinct c_i, which
/// breaks every reflection and axis swap of the box.
fn break_symmetry(w: &ArrayD<f64>, grid: &Grid, delta: f64) -> ArrayD<f64> {
    let n = w.ndim();
    let cosines: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            let l = grid.domain().lengths()[a];
            let c = 1.0 / (a as f64 + 1.0);
            grid.coords(a).iter().map(|x| c * (std::f64::consts::PI * x / l).cos()).collect()
        })
        .collect();
    let norm: f64 = (0..n).map(|a| 1.0 / (a as f64 + 1.0)).sum();
    let mut out = w.clone();
    for (idx, v) in out.indexed_iter_mut() {
        let s: f64 = (0..n).map(|a| cosines[a][idx[a]]).sum();
        *v *= 1.0 + delta * s / norm;
    }
    out
}

/// Maximizes Θ over nonnegative w by the normalized iteration
/// w ← [T((T w)_+^p)]_+^q / ‖·‖_{(q+1)/q}, T = (-Δ)^{-s}, then rescales the
/// maximizer into a solution of the system.
///
/// `init` is the starting w; the first eigenfunction is used when absent.
/// A symmetric fixed point can be a saddle of Θ on coarse grids; with
/// `opts.symmetry_probe > 0` the iteration is restarted from a perturbed
/// copy, and the symmetric point is kept unless Θ climbs above it.
pub fn solve_ground_state(
    exponents: &ExponentPair,
    basis: &SpectralBasis,
    grid: &Grid,
    init: Option<&GridFunction>,
    opts: &SolverOptions,
) -> Result<(SolutionPair, SolveReport)> {
    let e = *exponents;
    if e.is_critical() {
        return Err(Error::Exponent(
            "the critical pair has no maximizer on a bounded domain; use epsilon > 0".into(),
        ));
    }
    if basis.domain().dim() != e.n || basis.domain().s() != e.s {
        return Err(Error::InvalidArgument("exponents and basis disagree on n or s".into()));
    }
    let op = Operator {
        tp: TransformPair::new(grid, basis)?,
        mult: basis.multiplier(-e.s),
    };
    let weight = grid.weight();
    let b = e.dual_exponent();
    let mut w: ArrayD<f64> = match init {
        Some(f) => {
            if f.grid() != grid {
                return Err(Error::DomainMismatch("initial guess lives on another grid".into()));
            }
            if f.min() < 0.0 {
                return Err(Error::InvalidArgument("initial guess must be nonnegative".into()));
            }
            f.values().clone()
        }
        None => {
            let mut c = ArrayD::zeros(IxDyn(basis.cutoff()));
            c[IxDyn(&vec![0; e.n])] = 1.0;
            op.tp.synthesize(&c).mapv(|x| x.max(0.0))
        }
    };
    let norm = lp(&w, weight, b);
    if !(norm > 0.0) {
        return Err(Error::ZeroInput);
    }
    w /= norm;

    let mut run = iterate(&op, &e, weight, w, opts, None)?.expect("no escape limit set");
    let mut iterations = run.history.len();
    if opts.symmetry_probe > 0 {
        let sym = symmetry_of(&run.w, grid);
        if !sym.reflections.is_empty() || !sym.swaps.is_empty() {
            let mut pw = break_symmetry(&run.w, grid, 1e-2);
            pw /= lp(&pw, weight, b);
            let probe = iterate(&op, &e, weight, pw, opts, Some((run.theta, opts.symmetry_probe)));
            match probe {
                Ok(Some(better)) if better.theta > run.theta * (1.0 + PROBE_GAIN) => {
                    log::info!(
                        "symmetric fixed point is not maximal: theta {:.12e} -> {:.12e}",
                        run.theta,
                        better.theta
                    );
                    // the recorded history is that of the winning ascent
                    iterations += better.history.len();
                    let clamp = run.max_clamp.max(better.max_clamp);
                    run = Run {
                        max_clamp: clamp,
                        ..better
                    };
                }
                Ok(_) => iterations += opts.symmetry_probe,
                Err(err) => log::warn!("symmetry probe failed: {err}"),
            }
        }
    }
    let Run {
        w,
        theta,
        aw,
        ay,
        history,
        theta_change,
        residual,
        max_clamp,
    } = run;
    if max_clamp > crate::fractional::CLAMP_WARN_FRACTION {
        log::warn!("largest clamped mass fraction during the solve: {max_clamp:.3e}");
    }

    let mu = theta.powf(e.p + 1.0);
    let t = theta.powf(-e.q * (e.p + 1.0) / (e.p * e.q - 1.0));
    let w_sol = &w * t;
    let v_coeffs = &aw * t;
    let u_coeffs = &ay * t.powf(e.p);
    // spectral ringing near the boundary is clamped, as in the iteration
    let v_vals = op.tp.synthesize(&v_coeffs).mapv(|x| x.max(0.0));
    let u_vals = w_sol.mapv(|x| x.powf(1.0 / e.q));
    // residual of the un-normalized equation T((T W)_+^p) = W^{1/q}
    let check = op.tp.synthesize(&op.coeffs(&v_vals.mapv(|x| x.max(0.0).powf(e.p))));
    let equation_residual = check
        .iter()
        .zip(u_vals.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / sup_abs(u_vals.as_slice().unwrap());

    let symmetry = symmetry_of(&u_vals, grid);
    let pair = SolutionPair {
        u: GridFunction::new(grid, u_vals)?,
        v: GridFunction::new(grid, v_vals)?,
        w: GridFunction::new(grid, w_sol)?,
        u_field: SpectralField::new(basis, u_coeffs)?,
        v_field: SpectralField::new(basis, v_coeffs)?,
        exponents: e,
    };
    let report = SolveReport {
        theta,
        mu,
        energy: super::energy(&pair),
        sobolev_quotient: super::sobolev_quotient(&pair)?,
        iterations,
        theta_change,
        residual,
        equation_residual,
        theta_history: history,
        max_clamp_fraction: max_clamp,
        symmetry,
    };
    Ok((pair, report))
}
