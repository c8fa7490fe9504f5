//! Whole-space fields: the HLS quotient, the limit integral system, bubble
//! profiles, radial decay fits and the sharp-decay checks.
//!
//! A [`FreeField`] is sampled at the centers of a uniform grid of cells on
//! [-R, R]^n with an odd number of cells per axis, so the origin is a node.
//! Riesz potentials g|x|^{2s-n} * f are computed as discrete convolutions
//! with exact cell integrals of the kernel, done by FFT.

use std::f64::consts::PI;

use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractional::{free_kernel_constant, sphere_area};
use crate::quadrature::{cube_exterior_integral, cube_singular_integral, for_each_index, gauss_legendre};
use crate::util::det_sum;

/// Tolerance for "on the critical hyperbola" and "at the Serrin exponent".
const EXPONENT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct FreeField {
    half_width: f64,
    values: ArrayD<f64>,
    decay_hint: f64,
}

impl FreeField {
    /// `values` has the same odd length on every axis; `decay_hint` is the
    /// exponent a in f ~ |x|^{-a} used for tail estimates.
    pub fn new(half_width: f64, values: ArrayD<f64>, decay_hint: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!("half width {half_width} must be positive")));
        }
        let shape = values.shape().to_vec();
        if shape.is_empty() || shape.iter().any(|&m| m != shape[0]) || shape[0] % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "free fields need the same odd point count on every axis, got {shape:?}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("free field values must be nonnegative".into()));
        }
        Ok(FreeField {
            half_width,
            values: values.as_standard_layout().into_owned(),
            decay_hint,
        })
    }

    pub fn from_fn(
        n: usize,
        half_width: f64,
        points: usize,
        decay_hint: f64,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        if points % 2 == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!("need n >= 1 and an odd point count, got {points}")));
        }
        let h = 2.0 * half_width / points as f64;
        let mut x = vec![0.0; n];
        let values = ArrayD::from_shape_fn(IxDyn(&vec![points; n]), |idx| {
            for a in 0..n {
                x[a] = -half_width + (idx[a] as f64 + 0.5) * h;
            }
            f(&x)
        });
        Self::new(half_width, values, decay_hint)
    }

    pub fn zeros(n: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::from_fn(n, half_width, points, 0.0, |_| 0.0)
    }

    pub fn dim(&self) -> usize {
        self.values.ndim()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points() as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points()).map(|j| -self.half_width + (j as f64 + 0.5) * h).collect()
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        let h = self.spacing();
        idx.iter().map(|&j| -self.half_width + (j as f64 + 0.5) * h).collect()
    }

    /// Index of the origin along each axis.
    pub fn center_index(&self) -> usize {
        self.points() / 2
    }

    pub fn weight(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }

    pub fn decay_hint(&self) -> f64 {
        self.decay_hint
    }

    pub fn with_decay_hint(mut self, hint: f64) -> Self {
        self.decay_hint = hint;
        self
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// ∫ f^r.
    pub fn integral_pow(&self, r: f64) -> f64 {
        self.weight() * det_sum(self.values.as_slice().unwrap(), |v| if v > 0.0 { v.powf(r) } else { 0.0 })
    }

    pub fn lp_norm(&self, r: f64) -> f64 {
        self.integral_pow(r).powf(1.0 / r)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<FreeField> {
        FreeField::new(self.half_width, self.values.mapv(f), self.decay_hint)
    }

    /// Every other node, when the origin stays a node (points ≡ 1 mod 4).
    pub fn coarsened(&self) -> Option<FreeField> {
        let m = self.points();
        if m % 4 != 1 || m < 5 {
            return None;
        }
        let mut v = self.values.clone();
        for a in 0..self.dim() {
            v = v.slice_axis(Axis(a), ndarray::Slice::new(0, None, 2)).to_owned();
        }
        let h = self.spacing();
        FreeField::new(self.half_width + 0.5 * h, v, self.decay_hint).ok()
    }

    /// Zero extension to `points` per axis with the same spacing.
    pub fn embedded(&self, points: usize) -> Result<FreeField> {
        let m = self.points();
        if points < m || points % 2 == 0 {
            return Err(Error::InvalidArgument(format!("cannot embed {m} points into {points}")));
        }
        let off = (points - m) / 2;
        let n = self.dim();
        let mut out = ArrayD::zeros(IxDyn(&vec![points; n]));
        let mut slot = out.view_mut();
        for a in 0..n {
            slot.slice_axis_inplace(Axis(a), ndarray::Slice::from(off..off + m));
        }
        slot.assign(&self.values);
        FreeField::new(self.half_width * points as f64 / m as f64, out, self.decay_hint)
    }

    /// Shells of width two cells around the origin.
    pub fn radial_profile(&self) -> Vec<Shell> {
        let h = self.spacing();
        let width = 2.0 * h;
        let n = self.dim();
        let c = self.coords();
        let count = (self.half_width * (n as f64).sqrt() / width).ceil() as usize + 1;
        let mut shells: Vec<Shell> = (0..count)
            .map(|k| Shell {
                r_inner: k as f64 * width,
                r_outer: (k + 1) as f64 * width,
                r_mean: 0.0,
                mean: 0.0,
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
                count: 0,
            })
            .collect();
        for (idx, &v) in self.values.indexed_iter() {
            let r = (0..n).map(|a| c[idx[a]] * c[idx[a]]).sum::<f64>().sqrt();
            let s = &mut shells[(r / width) as usize];
            s.r_mean += r;
            s.mean += v;
            s.min = s.min.min(v);
            s.max = s.max.max(v);
            s.count += 1;
        }
        shells
            .into_iter()
            .filter(|s| s.count > 0)
            .map(|mut s| {
                s.r_mean /= s.count as f64;
                s.mean /= s.count as f64;
                s
            })
            .collect()
    }
}

/// Radial statistics of a field over one shell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shell {
    pub r_inner: f64,
    pub r_outer: f64,
    pub r_mean: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// ∫ over the cell centered at d·h of |y|^{-a}, for offsets d ≥ 0 on every
/// axis (the table is even in each component).
fn riesz_cell_table(n: usize, a: f64, h: f64, extent: usize) -> ArrayD<f64> {
    let rules: Vec<(usize, Vec<f64>, Vec<f64>)> = [20usize, 6, 3]
        .iter()
        .map(|&o| {
            let (x, w) = gauss_legendre(o);
            (o, x, w)
        })
        .collect();
    let self_cell = (0.5 * h).powf(n as f64 - a) * cube_singular_integral(n, a);
    let shape = vec![extent; n];
    let total: usize = shape.iter().product();
    let vals: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0usize; n];
            let mut rem = flat;
            for ax in (0..n).rev() {
                idx[ax] = rem % extent;
                rem /= extent;
            }
            let dist = *idx.iter().max().unwrap();
            if dist == 0 {
                return self_cell;
            }
            let (o, x, w) = match dist {
                1..=2 => &rules[0],
                3..=6 => &rules[1],
                _ => &rules[2],
            };
            let mut sum = 0.0;
            for_each_index(&vec![*o; n], |q| {
                let mut r2 = 0.0;
                let mut wt = 1.0;
                for ax in 0..n {
                    let y = (idx[ax] as f64 + 0.5 * x[q[ax]]) * h;
                    r2 += y * y;
                    wt *= 0.5 * w[q[ax]];
                }
                sum += wt * r2.powf(-0.5 * a);
            });
            sum * h.powi(n as i32)
        })
        .collect();
    ArrayD::from_shape_vec(IxDyn(&shape), vals).unwrap()
}

fn fft_all_axes(data: &mut ArrayD<Complex64>, forward: bool) {
    let mut planner = FftPlanner::new();
    for axis in 0..data.ndim() {
        let len = data.shape()[axis];
        let plan = if forward {
            planner.plan_fft_forward(len)
        } else {
            planner.plan_fft_inverse(len)
        };
        let mut buf = vec![Complex64::default(); len];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for mut lane in data.lanes_mut(Axis(axis)) {
            for (b, v) in buf.iter_mut().zip(lane.iter()) {
                *b = *v;
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for (v, b) in lane.iter_mut().zip(&buf) {
                *v = *b;
            }
        }
    }
}

/// out_i = Σ_j f_j K_{i-j} with K_d = table[|d|], on the grid of `values`.
fn convolve(values: &ArrayD<f64>, table: &ArrayD<f64>) -> ArrayD<f64> {
    let n = values.ndim();
    let m = values.shape()[0];
    let p = 2 * m;
    let shape = vec![p; n];
    let mut fp = ArrayD::from_elem(IxDyn(&shape), Complex64::default());
    for (idx, &v) in values.indexed_iter() {
        fp[&idx] = Complex64::new(v, 0.0);
    }
    let mut kp = ArrayD::from_elem(IxDyn(&shape), Complex64::default());
    let mut src = vec![0usize; n];
    for (idx, slot) in kp.indexed_iter_mut() {
        let mut ok = true;
        for a in 0..n {
            let i = idx[a];
            src[a] = if i < m {
                i
            } else if i > p - m {
                p - i
            } else {
                ok = false;
                0
            };
        }
        if ok {
            *slot = Complex64::new(table[IxDyn(&src)], 0.0);
        }
    }
    fft_all_axes(&mut fp, true);
    fft_all_axes(&mut kp, true);
    fp.zip_mut_with(&kp, |a, b| *a *= *b);
    fft_all_axes(&mut fp, false);
    let scale = 1.0 / (p as f64).powi(n as i32);
    ArrayD::from_shape_fn(IxDyn(&vec![m; n]), |idx| fp[&idx].re * scale)
}

/// g|x|^{2s-n} * f at the nodes of f, with f constant on each cell.
pub fn riesz_potential(f: &FreeField, s: f64) -> Result<FreeField> {
    let n = f.dim();
    let g = free_kernel_constant(n, s)?;
    let a = n as f64 - 2.0 * s;
    let table = riesz_cell_table(n, a, f.spacing(), f.points());
    let vals = convolve(&f.values, &table).mapv(|v| (g * v).max(0.0));
    FreeField::new(f.half_width, vals, a)
}

fn check_critical(p: f64, q0: f64, n: usize, s: f64) -> Result<()> {
    let nf = n as f64;
    let gap = 1.0 / (p + 1.0) + 1.0 / (q0 + 1.0) - (nf - 2.0 * s) / nf;
    if gap.abs() > EXPONENT_TOL {
        return Err(Error::Exponent(format!(
            "(p, q0) = ({p}, {q0}) is off the critical hyperbola by {gap:.3e}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HlsQuotient {
    pub value: f64,
    /// ‖f‖_{(p+1)/p}.
    pub numerator: f64,
    /// ‖g|x|^{2s-n} * f‖_{q0+1}.
    pub denominator: f64,
    /// Share of ∫|I f|^{q0+1} coming from the analytic exterior tail.
    pub exterior_fraction: f64,
}

/// ‖f‖_{(p+1)/p} / ‖g|x|^{2s-n} * f‖_{q0+1} for a critical pair.
///
/// The potential is computed on a box twice as wide as the support box; the
/// remainder of the L^{q0+1} norm uses the far-field form g·(∫f)·|x|^{2s-n}.
pub fn hls_quotient(f: &FreeField, p: f64, q0: f64, s: f64) -> Result<HlsQuotient> {
    let n = f.dim();
    check_critical(p, q0, n, s)?;
    let numerator = f.lp_norm((p + 1.0) / p);
    if numerator == 0.0 {
        return Err(Error::ZeroInput);
    }
    let ext = f.embedded(2 * f.points() + 1)?;
    let pot = riesz_potential(&ext, s)?;
    let inner = pot.integral_pow(q0 + 1.0);
    let g = free_kernel_constant(n, s)?;
    let a = n as f64 - 2.0 * s;
    let b = a * (q0 + 1.0);
    let mass = f.integral_pow(1.0);
    let r = pot.half_width();
    let tail = (g * mass).powf(q0 + 1.0) * r.powf(n as f64 - b) * cube_exterior_integral(n, b);
    let denominator = (inner + tail).powf(1.0 / (q0 + 1.0));
    Ok(HlsQuotient {
        value: numerator / denominator,
        numerator,
        denominator,
        exterior_fraction: tail / (inner + tail),
    })
}

/// Composite Gauss-Legendre on [0, π/2] after θ = (π/2) t^k, which removes
/// the endpoint singularity sin^{2s-1}θ.
fn theta_integral(k: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    let panels = 64;
    let mut total = 0.0;
    for j in 0..panels {
        let (a, b) = (j as f64 / panels as f64, (j + 1) as f64 / panels as f64);
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            let theta = 0.5 * PI * t.powf(k);
            let jac = 0.5 * PI * k * t.powf(k - 1.0);
            total += 0.5 * (b - a) * wi * f(theta) * jac;
        }
    }
    total
}

/// ∫_0^∞ r^{n-1} (1+r²)^{-n} dr and ∫_0^∞ r^{2s-1} (1+r²)^{-(n+2s)/2} dr by
/// radial quadrature in r = tan θ.
fn bubble_radial_integrals(n: usize, s: f64) -> (f64, f64) {
    let nf = n as f64;
    let mass = theta_integral(1.0, |t| (t.sin() * t.cos()).powf(nf - 1.0));
    let pot = theta_integral(1.0 / (2.0 * s), |t| t.sin().powf(2.0 * s - 1.0) * t.cos().powf(nf - 1.0));
    (mass, pot)
}

/// The diagonal bubble (1+|x|²)^{-(n+2s)/2}.
pub fn bubble(x: &[f64], s: f64) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 + r2).powf(-0.5 * (x.len() as f64 + 2.0 * s))
}

/// The HLS quotient of the diagonal bubble, p = q0 = (n+2s)/(n-2s).
///
/// Uses g|x|^{2s-n} * (1+|x|²)^{-(n+2s)/2} = κ (1+|x|²)^{-(n-2s)/2} with
/// κ = g|S^{n-1}|∫r^{2s-1}(1+r²)^{-(n+2s)/2}dr, so the quotient reduces to
/// A^{2s/n}/κ with A = |S^{n-1}|∫r^{n-1}(1+r²)^{-n}dr.
pub fn bubble_quotient_oracle(n: usize, s: f64) -> Result<f64> {
    let g = free_kernel_constant(n, s)?;
    let area = sphere_area(n);
    let (mass, pot) = bubble_radial_integrals(n, s);
    let kappa = g * area * pot;
    Ok((area * mass).powf(2.0 * s / n as f64) / kappa)
}

/// U = V = c (1+|x|²)^{-(n-2s)/2} with c chosen so that U = I(V^p) at
/// p = q0 = (n+2s)/(n-2s).
pub fn bubble_pair_amplitude(n: usize, s: f64) -> Result<f64> {
    let g = free_kernel_constant(n, s)?;
    let (_, pot) = bubble_radial_integrals(n, s);
    let kappa = g * sphere_area(n) * pot;
    let p = (n as f64 + 2.0 * s) / (n as f64 - 2.0 * s);
    Ok(kappa.powf(-1.0 / (p - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitResidual {
    /// sup |U - I(V^p)| / sup U on the inner half box.
    pub u: f64,
    /// sup |V - I(U^q0)| / sup V on the inner half box.
    pub v: f64,
    /// Truncation tail plus discretization estimate for `u`.
    pub u_budget: f64,
    pub v_budget: f64,
}

/// Exterior contribution bound at points of the inner half box, assuming
/// f^r decays like |x|^{-r·hint} beyond the box.
fn exterior_bound(f: &FreeField, r: f64, s: f64) -> Result<f64> {
    let n = f.dim();
    let nf = n as f64;
    let a = nf - 2.0 * s;
    let m = f.points();
    // largest value on the outer layer of cells
    let mut edge = 0.0f64;
    for (idx, &v) in f.values.indexed_iter() {
        if idx.as_array_view().iter().any(|&i| i == 0 || i == m - 1) {
            edge = edge.max(v);
        }
    }
    if edge == 0.0 {
        return Ok(0.0);
    }
    let decay = r * f.decay_hint + a;
    if decay <= nf {
        return Ok(f64::INFINITY);
    }
    let g = free_kernel_constant(n, s)?;
    let big_r = f.half_width;
    // |x - y| ≥ |y|/2 for x in the half box and y outside the box
    Ok(g * 2f64.powf(a) * edge.powf(r) * big_r.powf(r * f.decay_hint) * big_r.powf(nf - decay)
        * cube_exterior_integral(n, decay))
}

fn equation_gap(target: &FreeField, source: &FreeField, r: f64, s: f64) -> Result<(f64, f64, f64)> {
    let pot = riesz_potential(&source.map(|v| v.powf(r))?, s)?;
    let m = target.points();
    let lo = m / 4;
    let hi = m - m / 4;
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for (idx, &v) in target.values.indexed_iter() {
        if idx.as_array_view().iter().all(|&i| i >= lo && i < hi) {
            gap = gap.max((v - pot.values[&idx]).abs());
            scale = scale.max(v.abs());
        }
    }
    Ok((gap, scale, exterior_bound(source, r, s)?))
}

fn discretization_estimate(target: &FreeField, source: &FreeField, r: f64, s: f64) -> Result<f64> {
    let (Some(tc), Some(sc)) = (target.coarsened(), source.coarsened()) else {
        return Ok(0.0);
    };
    let fine = riesz_potential(&source.map(|v| v.powf(r))?, s)?;
    let coarse = riesz_potential(&sc.map(|v| v.powf(r))?, s)?;
    let m = tc.points();
    let (lo, hi) = (m / 4, m - m / 4);
    let mut worst = 0.0f64;
    for (idx, &c) in coarse.values.indexed_iter() {
        if idx.as_array_view().iter().all(|&i| i >= lo && i < hi) {
            let fi: Vec<usize> = idx.as_array_view().iter().map(|&i| 2 * i).collect();
            worst = worst.max((fine.values[IxDyn(&fi)] - c).abs());
        }
    }
    Ok(worst)
}

/// Residuals of U = I(V^p), V = I(U^q0) with I = g|x|^{2s-n} *, on the
/// inner half box.
pub fn limit_system_residual(u: &FreeField, v: &FreeField, p: f64, q0: f64, s: f64) -> Result<LimitResidual> {
    let n = u.dim();
    if v.dim() != n || v.points() != u.points() || v.half_width() != u.half_width() {
        return Err(Error::DomainMismatch("U and V live on different grids".into()));
    }
    check_critical(p, q0, n, s)?;
    let (gu, su, tu) = equation_gap(u, v, p, s)?;
    let (gv, sv, tv) = equation_gap(v, u, q0, s)?;
    let du = discretization_estimate(u, v, p, s)?;
    let dv = discretization_estimate(v, u, q0, s)?;
    let rel = |x: f64, scale: f64| if scale > 0.0 { x / scale } else { 0.0 };
    Ok(LimitResidual {
        u: rel(gu, su),
        v: rel(gv, sv),
        u_budget: rel(tu + du, su),
        v_budget: rel(tv + dv, sv),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BubbleLevel {
    pub half_width: f64,
    pub points: usize,
    pub spacing: f64,
    pub quotient: f64,
    /// (quotient - oracle) / oracle.
    pub rel_error: f64,
    pub exterior_fraction: f64,
    pub residual: LimitResidual,
}

/// HLS quotient of the diagonal bubble and the limit-system residual of
/// the bubble pair on a sequence of truncation boxes.
pub fn bubble_refinement(n: usize, s: f64, half_widths: &[f64], points: &[usize]) -> Result<Vec<BubbleLevel>> {
    if half_widths.len() != points.len() || half_widths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} half widths for {} point counts",
            half_widths.len(),
            points.len()
        )));
    }
    let nf = n as f64;
    let a = nf - 2.0 * s;
    let pd = (nf + 2.0 * s) / a;
    let oracle = bubble_quotient_oracle(n, s)?;
    let amp = bubble_pair_amplitude(n, s)?;
    half_widths
        .iter()
        .zip(points)
        .map(|(&r, &m)| {
            let f = FreeField::from_fn(n, r, m, nf + 2.0 * s, |x| bubble(x, s))?;
            let q = hls_quotient(&f, pd, pd, s)?;
            let u = FreeField::from_fn(n, r, m, a, |x| amp * bubble(x, s).powf(a / (nf + 2.0 * s)))?;
            let residual = limit_system_residual(&u, &u, pd, pd, s)?;
            Ok(BubbleLevel {
                half_width: r,
                points: m,
                spacing: f.spacing(),
                quotient: q.value,
                rel_error: (q.value - oracle) / oracle,
                exterior_fraction: q.exterior_fraction,
                residual,
            })
        })
        .collect()
}

/// Which line of the decay table applies to ũ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// n/(n-2s) < p: ũ ~ |x|^{-(n-2s)}.
    AboveSerrin,
    /// p = n/(n-2s): ũ ~ |x|^{-(n-2s)} log|x|.
    Serrin,
    /// p < n/(n-2s): ũ ~ |x|^{-(p(n-2s)-2s)}.
    BelowSerrin,
}

impl Regime {
    pub fn of(p: f64, n: usize, s: f64) -> Regime {
        let serrin = n as f64 / (n as f64 - 2.0 * s);
        if (p - serrin).abs() <= EXPONENT_TOL * serrin {
            Regime::Serrin
        } else if p > serrin {
            Regime::AboveSerrin
        } else {
            Regime::BelowSerrin
        }
    }

    /// Predicted power-law slope of ũ (the log factor is not included).
    pub fn u_slope(self, p: f64, n: usize, s: f64) -> f64 {
        let a = n as f64 - 2.0 * s;
        match self {
            Regime::AboveSerrin | Regime::Serrin => -a,
            Regime::BelowSerrin => -(p * a - 2.0 * s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// RMS of the fit residuals.
    pub residual: f64,
    pub shells: usize,
}

impl DecayFit {
    /// The regime whose predicted ũ slope is nearest to the fitted one.
    pub fn classify(&self, p: f64, n: usize, s: f64) -> Regime {
        let own = Regime::of(p, n, s);
        if own == Regime::Serrin {
            return own;
        }
        let above = Regime::AboveSerrin.u_slope(p, n, s);
        let below = Regime::BelowSerrin.u_slope(p, n, s);
        if (self.slope - above).abs() <= (self.slope - below).abs() {
            Regime::AboveSerrin
        } else {
            Regime::BelowSerrin
        }
    }
}

/// Shell means of (log r, y(r, f)) over nodes with r in the window and f > 0.
fn shell_samples(f: &FreeField, window: (f64, f64), y: impl Fn(f64, f64) -> f64) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::EmptyWindow(format!("window ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    if hi > f.half_width() {
        return Err(Error::EmptyWindow(format!(
            "window upper end {hi} leaves the truncation box of half width {}",
            f.half_width()
        )));
    }
    let width = 2.0 * f.spacing();
    let c = f.coords();
    let n = f.dim();
    let first = (lo / width).floor() as usize;
    let count = (hi / width).ceil() as usize - first + 1;
    let mut acc = vec![(0.0f64, 0.0f64, 0usize); count];
    for (idx, &v) in f.values.indexed_iter() {
        let r = (0..n).map(|a| c[idx[a]] * c[idx[a]]).sum::<f64>().sqrt();
        if r < lo || r > hi || v <= 0.0 {
            continue;
        }
        let k = (r / width) as usize - first;
        acc[k].0 += r.ln();
        acc[k].1 += y(r, v);
        acc[k].2 += 1;
    }
    let pts: Vec<(f64, f64)> = acc
        .into_iter()
        .filter(|a| a.2 > 0)
        .map(|(x, y, c)| (x / c as f64, y / c as f64))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptyWindow(format!("fewer than two populated shells in ({lo}, {hi})")));
    }
    Ok(pts)
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    (slope, intercept, rms)
}

/// Least-squares slope of log f against log r, over shells two cells wide.
/// Within a shell log r and log f are averaged, so exact power laws are
/// recovered exactly.
pub fn decay_fit(f: &FreeField, window: (f64, f64)) -> Result<DecayFit> {
    let pts = shell_samples(f, window, |_, v| v.ln())?;
    let (slope, intercept, residual) = line_fit(&pts);
    Ok(DecayFit {
        slope,
        intercept,
        window,
        residual,
        shells: pts.len(),
    })
}

/// Fit of f·r^{n-2s} against log r; a positive slope is the logarithmic
/// growth expected at the Serrin exponent.
pub fn log_corrected_fit(f: &FreeField, window: (f64, f64), s: f64) -> Result<DecayFit> {
    let a = f.dim() as f64 - 2.0 * s;
    let pts = shell_samples(f, window, |r, v| v * r.powf(a))?;
    let (slope, intercept, residual) = line_fit(&pts);
    Ok(DecayFit {
        slope,
        intercept,
        window,
        residual,
        shells: pts.len(),
    })
}

/// Slope of log f against log r + log log r, i.e. the power in
/// f ~ r^{slope} log r; used for the ũ line at the Serrin exponent.
pub fn serrin_decay_fit(f: &FreeField, window: (f64, f64)) -> Result<DecayFit> {
    if window.0 <= 1.0 {
        return Err(Error::EmptyWindow("the log-corrected fit needs r > 1".into()));
    }
    let pts = shell_samples(f, window, |r, v| v.ln() - r.ln().ln())?;
    let (slope, intercept, residual) = line_fit(&pts);
    Ok(DecayFit {
        slope,
        intercept,
        window,
        residual,
        shells: pts.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SharpDecayReport {
    pub samples: usize,
    pub violations: usize,
    pub fraction: f64,
    /// Extremes of v / (g C1 |x|^{2s-n}) over the annulus.
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// (1-δ) g C1 |x|^{2s-n} ≤ ṽ ≤ (1+δ) g C1 |x|^{2s-n} on R ≤ |x| ≤ λ r.
pub fn sharp_decay_check(
    v: &FreeField,
    c1: f64,
    delta: f64,
    big_r: f64,
    r: f64,
    lambda: f64,
    s: f64,
) -> Result<SharpDecayReport> {
    let n = v.dim();
    let g = free_kernel_constant(n, s)?;
    let a = n as f64 - 2.0 * s;
    let outer = lambda * r;
    if !(outer > big_r && big_r > 0.0) {
        return Err(Error::EmptyWindow(format!("annulus [{big_r}, {outer}] is empty")));
    }
    let c = v.coords();
    let (mut samples, mut violations) = (0usize, 0usize);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (idx, &val) in v.values.indexed_iter() {
        let rr = (0..n).map(|k| c[idx[k]] * c[idx[k]]).sum::<f64>().sqrt();
        if rr < big_r || rr > outer {
            continue;
        }
        let ratio = val / (g * c1 * rr.powf(-a));
        samples += 1;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        if ratio < 1.0 - delta || ratio > 1.0 + delta {
            violations += 1;
        }
    }
    if samples == 0 {
        return Err(Error::EmptyWindow(format!("no nodes in the annulus [{big_r}, {outer}]")));
    }
    Ok(SharpDecayReport {
        samples,
        violations,
        fraction: violations as f64 / samples as f64,
        min_ratio: lo,
        max_ratio: hi,
        pass: violations == 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SerrinLogReport {
    /// (1/log λ) ∫ ṽ^p.
    pub value: f64,
    /// (g C1)^{n/(n-2s)} |S^{n-1}|.
    pub target: f64,
    pub rel_error: f64,
}

pub fn serrin_log_integral(v: &FreeField, p: f64, lambda: f64, c1: f64, s: f64) -> Result<SerrinLogReport> {
    let n = v.dim();
    if Regime::of(p, n, s) != Regime::Serrin {
        return Err(Error::Regime(format!(
            "p = {p} is not the Serrin exponent n/(n-2s) = {}",
            n as f64 / (n as f64 - 2.0 * s)
        )));
    }
    if !(lambda > 1.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must exceed 1")));
    }
    let value = v.integral_pow(p) / lambda.ln();
    let target = serrin_target(c1, n, s)?;
    Ok(SerrinLogReport {
        value,
        target,
        rel_error: (value - target).abs() / target,
    })
}

/// (g C1)^{n/(n-2s)} |S^{n-1}|.
pub fn serrin_target(c1: f64, n: usize, s: f64) -> Result<f64> {
    let g = free_kernel_constant(n, s)?;
    Ok((g * c1).powf(n as f64 / (n as f64 - 2.0 * s)) * sphere_area(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_table_sums_to_cube_integral() {
        for &(n, a) in &[(2usize, 1.0), (3, 2.0), (2, 1.5)] {
            let h = 0.1;
            let t = riesz_cell_table(n, a, h, 12);
            for m in [0usize, 1, 4, 11] {
                let mut sum = 0.0;
                for (idx, &v) in t.indexed_iter() {
                    if idx.as_array_view().iter().all(|&i| i <= m) {
                        let mult: f64 = idx.as_array_view().iter().map(|&i| if i == 0 { 1.0 } else { 2.0 }).product();
                        sum += mult * v;
                    }
                }
                let want = ((m as f64 + 0.5) * h).powf(n as f64 - a) * cube_singular_integral(n, a);
                assert!(((sum - want) / want).abs() < 1e-7, "{n} {a} {m}: {sum} vs {want}");
            }
        }
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let f = FreeField::from_fn(2, 1.0, 9, 0.0, |x| 1.0 + x[0] * x[0] + 0.3 * x[1]).unwrap();
        let table = riesz_cell_table(2, 1.0, f.spacing(), 9);
        let fast = convolve(f.values(), &table);
        for (i, &got) in fast.indexed_iter() {
            let mut want = 0.0;
            for (j, &v) in f.values().indexed_iter() {
                let d = [i[0].abs_diff(j[0]), i[1].abs_diff(j[1])];
                want += v * table[IxDyn(&d)];
            }
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn bubble_oracle_closed_forms() {
        // n = 2, s = 1/2: A = π and κ = 1
        assert!((bubble_quotient_oracle(2, 0.5).unwrap() - PI.sqrt()).abs() < 1e-12);
        // Beta-function forms B(n/2, n/2)/2 and B(s, n/2)/2
        let (m, p) = bubble_radial_integrals(3, 0.25);
        let beta = |x: f64, y: f64| libm::tgamma(x) * libm::tgamma(y) / libm::tgamma(x + y);
        assert!((m - 0.5 * beta(1.5, 1.5)).abs() < 1e-12);
        assert!((p - 0.5 * beta(0.25, 1.5)).abs() < 1e-10);
    }

    #[test]
    fn exact_power_laws_are_recovered() {
        let f = FreeField::from_fn(2, 20.0, 201, 1.0, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r > 0.0 { r.powf(-1.0) } else { 0.0 }
        })
        .unwrap();
        let fit = decay_fit(&f, (2.0, 15.0)).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-9 && fit.residual < 1e-9);
        let scaled = decay_fit(&f.map(|v| 3.7 * v).unwrap(), (2.0, 15.0)).unwrap();
        assert!((scaled.slope - fit.slope).abs() < 1e-12);
        assert!(decay_fit(&f, (2.0, 25.0)).is_err());
        assert!(decay_fit(&f, (0.0, 5.0)).is_err());
    }

    #[test]
    fn log_growth_is_detected() {
        let f = FreeField::from_fn(2, 40.0, 201, 1.0, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt().max(1.0);
            r.ln().max(0.0) / r
        })
        .unwrap();
        let lc = log_corrected_fit(&f, (3.0, 35.0), 0.5).unwrap();
        assert!((lc.slope - 1.0).abs() < 1e-9);
        let sf = serrin_decay_fit(&f, (3.0, 35.0)).unwrap();
        assert!((sf.slope + 1.0).abs() < 1e-9);
    }

    #[test]
    fn regime_dispatch() {
        assert_eq!(Regime::of(2.5, 2, 0.5), Regime::AboveSerrin);
        assert_eq!(Regime::of(2.0, 2, 0.5), Regime::Serrin);
        assert_eq!(Regime::of(1.5, 2, 0.5), Regime::BelowSerrin);
        assert_eq!(Regime::of(1.0, 3, 0.5), Regime::BelowSerrin);
        assert_eq!(Regime::BelowSerrin.u_slope(1.0, 3, 0.5), -1.0);
    }

    #[test]
    fn embedding_and_coarsening_keep_the_origin() {
        let f = FreeField::from_fn(2, 1.0, 9, 0.0, |x| bubble(x, 0.5)).unwrap();
        let e = f.embedded(19).unwrap();
        assert_eq!(e.values()[[9, 9]], f.values()[[4, 4]]);
        assert!((e.spacing() - f.spacing()).abs() < 1e-15);
        let c = f.coarsened().unwrap();
        assert_eq!(c.points(), 5);
        assert_eq!(c.values()[[2, 2]], 1.0);
        assert!((c.node(&[2, 2])[0]).abs() < 1e-15);
        assert!(FreeField::from_fn(2, 1.0, 8, 0.0, |_| 1.0).is_err());
    }
}
