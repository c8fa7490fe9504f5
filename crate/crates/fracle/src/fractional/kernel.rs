//! Green's function of (-Δ)^{-σ} on a box by heat-semigroup resummation.
//!
//! G_σ(x,y) = Γ(σ)^{-1} ∫_0^∞ t^{σ-1} Π_i K_i(t, x_i, y_i) dt, with K_i the
//! Dirichlet heat kernel on (0, L_i). Each K_i is summed by images for small
//! t and by sine modes for large t, so both forms converge geometrically.
//! The t-integral is taken over τ = log t with the trapezoid rule, which is
//! spectrally accurate for this integrand; halving the node set gives the
//! error estimate.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use libm::{erfc, tgamma as gamma};

use crate::domain::{BoxDomain, SpectralBasis};
use crate::error::{Error, Result};

use super::cubature::{integrate_singular, CubatureOptions, SingularPoint};

/// Pointwise kernel value with an error estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    pub truncation_bound: f64,
}

/// g_{n,s} = Γ((n-2s)/2) / (π^{n/2} 4^s Γ(s)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreeKernelConstant {
    pub n: usize,
    pub s: f64,
    pub value: f64,
}

impl FreeKernelConstant {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if !(s > 0.0 && (n as f64) > 2.0 * s) {
            return Err(Error::InvalidArgument(format!(
                "free kernel needs s > 0 and n > 2s (n = {n}, s = {s})"
            )));
        }
        let nf = n as f64;
        let value = gamma(0.5 * (nf - 2.0 * s)) / (PI.powf(0.5 * nf) * 4f64.powf(s) * gamma(s));
        Ok(FreeKernelConstant { n, s, value })
    }
}

pub fn free_kernel_constant(n: usize, s: f64) -> Result<f64> {
    Ok(FreeKernelConstant::new(n, s)?.value)
}

/// |S^{n-1}| = 2π^{n/2}/Γ(n/2).
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(0.5 * n as f64) / gamma(0.5 * n as f64)
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// g_{n,s} |x - y|^{2s-n}.
pub fn free_kernel(x: &[f64], y: &[f64], n: usize, s: f64) -> Result<f64> {
    if x.len() != n || y.len() != n {
        return Err(Error::InvalidArgument("point dimension mismatch".into()));
    }
    let r = distance(x, y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(free_kernel_constant(n, s)? * r.powf(2.0 * s - n as f64))
}

/// Images are summed below SWITCH·L², sine modes above.
const SWITCH: f64 = 0.05;
/// exp(-CUT) is treated as zero.
const CUT: f64 = 46.0;
const IMAGES: i32 = 3;

fn gauss(z: f64, t: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// ∫_a^b of the unit Gaussian centered at c with variance 2t, without
/// cancellation in the tails.
fn gauss_mass(c: f64, a: f64, b: f64, t: f64) -> f64 {
    let sc = 1.0 / (4.0 * t).sqrt();
    let u1 = (a - c) * sc;
    let u2 = (b - c) * sc;
    if u1 >= 0.0 {
        0.5 * (erfc(u1) - erfc(u2))
    } else if u2 <= 0.0 {
        0.5 * (erfc(-u2) - erfc(-u1))
    } else {
        1.0 - 0.5 * (erfc(-u1) + erfc(u2))
    }
}

/// Dirichlet heat kernel on (0, L).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Heat1d {
    pub length: f64,
}

impl Heat1d {
    fn eigen_terms(&self, t: f64) -> usize {
        let l = self.length;
        let kmax = ((CUT / t).sqrt() * l / PI).ceil() as usize;
        kmax.max(1)
    }

    /// K(t,x,y) split into the direct Gaussian and the remaining images.
    pub fn split(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        // ordered so that swapping the arguments is bitwise neutral
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let l = self.length;
        let direct = gauss(x - y, t);
        if t < SWITCH * l * l {
            let mut rest = 0.0;
            for m in -IMAGES..=IMAGES {
                let shift = 2.0 * m as f64 * l;
                if m != 0 {
                    rest += gauss(x - y + shift, t);
                }
                rest -= gauss(x + y + shift, t);
            }
            (direct, rest)
        } else {
            (direct, self.eigen(t, x, y) - direct)
        }
    }

    fn eigen(&self, t: f64, x: f64, y: f64) -> f64 {
        let l = self.length;
        let mut sum = 0.0;
        for k in 1..=self.eigen_terms(t) {
            let w = k as f64 * PI / l;
            sum += (-w * w * t).exp() * (w * x).sin() * (w * y).sin();
        }
        2.0 / l * sum
    }

    pub fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        let (d, r) = self.split(t, x, y);
        d + r
    }

    /// ∫_a^b K(t, x, y) dy.
    pub fn cell_mass(&self, t: f64, x: f64, a: f64, b: f64) -> f64 {
        let l = self.length;
        if t < SWITCH * l * l {
            let mut sum = 0.0;
            for m in -IMAGES..=IMAGES {
                let shift = 2.0 * m as f64 * l;
                // image at y = x + shift has positive sign, y = -x + shift negative
                sum += gauss_mass(x + shift, a, b, t);
                sum -= gauss_mass(-x + shift, a, b, t);
            }
            sum
        } else {
            let mut sum = 0.0;
            for k in 1..=self.eigen_terms(t) {
                let w = k as f64 * PI / l;
                sum += (-w * w * t).exp() * (w * x).sin() * ((w * a).cos() - (w * b).cos()) / w;
            }
            2.0 / l * sum
        }
    }
}

/// Trapezoid nodes in τ = log t on [log t_lo, log t_hi].
#[derive(Clone, Debug)]
pub(crate) struct TauRule {
    pub t: Vec<f64>,
    pub step: f64,
}

impl TauRule {
    pub fn new(t_lo: f64, t_hi: f64, step: f64) -> Self {
        let a = t_lo.ln();
        let b = t_hi.ln();
        let count = ((b - a) / step).ceil().max(2.0) as usize;
        // even count so that the every-other-node rule has the same span
        let count = count + count % 2;
        let h = (b - a) / count as f64;
        TauRule {
            t: (0..=count).map(|j| (a + j as f64 * h).exp()).collect(),
            step: h,
        }
    }

    /// ∫ F dτ for samples F_j at the nodes, and |T_h - T_{2h}|.
    pub fn sum(&self, f: &[f64]) -> (f64, f64) {
        let h = self.step;
        let ends = 0.5 * (f[0] + f[f.len() - 1]);
        let fine: f64 = (f.iter().sum::<f64>() - ends) * h;
        let coarse: f64 = (f.iter().step_by(2).sum::<f64>() - ends) * 2.0 * h;
        (fine, (fine - coarse).abs())
    }

    /// As `sum`, with Euler-Maclaurin corrections for an integrand whose
    /// first and third τ-derivatives at the upper end are `d1`, `d3`.
    pub fn sum_open_end(&self, f: &[f64], d1: f64, d3: f64) -> (f64, f64) {
        let corr = |h: f64| -h * h / 12.0 * d1 + h.powi(4) / 720.0 * d3;
        let (fine, _) = self.sum(f);
        let h = self.step;
        let ends = 0.5 * (f[0] + f[f.len() - 1]);
        let coarse = (f.iter().step_by(2).sum::<f64>() - ends) * 2.0 * h + corr(2.0 * h);
        let fine = fine + corr(h);
        (fine, (fine - coarse).abs())
    }
}

/// τ-derivatives (first, third) of t^σ (4πt)^{-n/2} e^{-r²/4t} at t.
fn free_end_derivatives(n: usize, sigma: f64, r2: f64, t: f64) -> (f64, f64) {
    let f = t.powf(sigma) * (4.0 * PI * t).powf(-0.5 * n as f64) * (-r2 / (4.0 * t)).exp();
    let c = r2 / (4.0 * t);
    let g1 = sigma - 0.5 * n as f64 + c;
    let g2 = -c;
    let g3 = c;
    (f * g1, f * (g1 * g1 * g1 + 3.0 * g1 * g2 + g3))
}

/// Default τ step; the trapezoid error decays like exp(-π²/step).
pub(crate) const TAU_STEP: f64 = 0.15;

/// Green's function of (-Δ)^{-order} with Dirichlet data on a box.
#[derive(Clone, Debug)]
pub struct HeatKernel {
    domain: BoxDomain,
    order: f64,
    axes: Vec<Heat1d>,
    gamma_order: f64,
    min_separation: f64,
}

/// Separations below this fraction of the diameter are refused.
pub const RESOLVABLE_FRACTION: f64 = 1e-9;

impl HeatKernel {
    /// Kernel of (-Δ)^{-order}; `order` may exceed 1 (e.g. 2s for the
    /// iterated kernel at p = 1).
    pub fn new(domain: &BoxDomain, order: f64) -> Result<Self> {
        if !(order.is_finite() && order > 0.0) {
            return Err(Error::InvalidArgument(format!("kernel order {order} must be positive")));
        }
        Ok(HeatKernel {
            domain: domain.clone(),
            order,
            axes: domain.lengths().iter().map(|&l| Heat1d { length: l }).collect(),
            gamma_order: gamma(order),
            min_separation: RESOLVABLE_FRACTION * domain.diameter(),
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub(crate) fn axes(&self) -> &[Heat1d] {
        &self.axes
    }

    pub(crate) fn gamma_order(&self) -> f64 {
        self.gamma_order
    }

    pub(crate) fn t_max(&self) -> f64 {
        CUT / self.domain.lambda_min()
    }

    fn check_pair(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.domain.check_point(x)?;
        self.domain.check_point(y)?;
        let r = distance(x, y);
        if r == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        if r < self.min_separation {
            return Err(Error::UnresolvedSingularity {
                distance: r,
                threshold: self.min_separation,
            });
        }
        Ok(r)
    }

    fn sample(&self, x: &[f64], y: &[f64], value: f64, err: f64) -> KernelSample {
        KernelSample {
            x: x.to_vec(),
            y: y.to_vec(),
            value,
            truncation_bound: err + 4.0 * f64::EPSILON * value.abs(),
        }
    }

    /// G(x, y).
    pub fn green(&self, x: &[f64], y: &[f64]) -> Result<KernelSample> {
        let r = self.check_pair(x, y)?;
        let rule = TauRule::new(r * r / (4.0 * CUT), self.t_max(), TAU_STEP);
        let f: Vec<f64> = rule
            .t
            .iter()
            .map(|&t| {
                let prod: f64 = self
                    .axes
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(k, (&a, &b))| k.value(t, a, b))
                    .product();
                t.powf(self.order) * prod
            })
            .collect();
        let (v, e) = rule.sum(&f);
        Ok(self.sample(x, y, v / self.gamma_order, e / self.gamma_order))
    }

    /// H(x, y) = g|x-y|^{2σ-n} - G(x, y), computed from the image terms
    /// directly. Needs n > 2σ.
    pub fn regular_part(&self, x: &[f64], y: &[f64]) -> Result<KernelSample> {
        self.check_pair(x, y)?;
        let n = self.domain.dim();
        if (n as f64) <= 2.0 * self.order {
            return Err(Error::InvalidArgument(format!(
                "regular part needs n > 2σ (n = {n}, σ = {})",
                self.order
            )));
        }
        // nearest reflected image of y
        let d_img = x
            .iter()
            .zip(y)
            .zip(self.domain.lengths())
            .map(|((&a, &b), &l)| (a + b).min(2.0 * l - a - b))
            .fold(f64::INFINITY, f64::min);
        let rule = TauRule::new(d_img * d_img / (4.0 * CUT), self.t_max(), TAU_STEP);
        // beyond t_max the free kernel alone still contributes: add it analytically
        let f: Vec<f64> = rule
            .t
            .iter()
            .map(|&t| {
                let mut free = 1.0;
                let mut diff = 0.0;
                for (k, (&a, &b)) in self.axes.iter().zip(x.iter().zip(y)) {
                    let (g, rest) = k.split(t, a, b);
                    diff = diff * (g + rest) + free * rest;
                    free *= g;
                }
                -t.powf(self.order) * diff
            })
            .collect();
        let t_hi = *rule.t.last().unwrap();
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        // the integrand is the free one at t_hi up to e^{-CUT}
        let (d1, d3) = free_end_derivatives(n, self.order, r2, t_hi);
        let (v, e) = rule.sum_open_end(&f, d1, d3);
        let tail = free_tail(n, self.order, r2, t_hi);
        Ok(self.sample(x, y, (v + tail) / self.gamma_order, e / self.gamma_order))
    }
}

/// ∫_{T}^∞ t^{σ-1} (4πt)^{-n/2} e^{-r²/4t} dt, by Gauss-Legendre in
/// u = (T/t)^{n/2-σ}. Used for the free-kernel tail beyond the last node.
fn free_tail(n: usize, sigma: f64, r2: f64, t_hi: f64) -> f64 {
    let a = 0.5 * n as f64 - sigma;
    // t = T u^{-1/a}: ∫_0^1 t^{σ-1}(4πt)^{-n/2} e^{-r²/4t} (T/a) u^{-1/a-1} du
    let (x, w) = crate::quadrature::gauss_legendre_on(24, 0.0, 1.0);
    x.iter()
        .zip(&w)
        .map(|(&u, &wt)| {
            let t = t_hi * u.powf(-1.0 / a);
            let jac = t_hi / a * u.powf(-1.0 / a - 1.0);
            wt * t.powf(sigma - 1.0) * (4.0 * PI * t).powf(-0.5 * n as f64) * (-r2 / (4.0 * t)).exp() * jac
        })
        .sum()
}

/// G(x, y) for the order-s fractional Laplacian of `basis`'s domain.
///
/// The value does not depend on the cutoff of `basis`: the heat-kernel
/// representation has no eigen-sum truncation, and the reported bound is the
/// quadrature estimate.
pub fn green(x: &[f64], y: &[f64], basis: &SpectralBasis) -> Result<KernelSample> {
    HeatKernel::new(basis.domain(), basis.domain().s())?.green(x, y)
}

pub fn regular_part(x: &[f64], y: &[f64], basis: &SpectralBasis) -> Result<KernelSample> {
    HeatKernel::new(basis.domain(), basis.domain().s())?.regular_part(x, y)
}

/// G_ε(x, y) = λ^{-(n-2s)} G(x/λ + x_c, y/λ + x_c).
pub fn rescaled_green(
    x: &[f64],
    y: &[f64],
    lambda: f64,
    center: &[f64],
    kernel: &HeatKernel,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("scale {lambda} must be positive")));
    }
    let map = |z: &[f64]| -> Vec<f64> { z.iter().zip(center).map(|(z, c)| z / lambda + c).collect() };
    let xm = map(x);
    let ym = map(y);
    kernel.domain().check_point(&xm)?;
    kernel.domain().check_point(&ym)?;
    let n = kernel.domain().dim() as f64;
    Ok(lambda.powf(-(n - 2.0 * kernel.order())) * kernel.green(&xm, &ym)?.value)
}

/// Quadrature settings for the iterated kernel.
#[derive(Clone, Debug)]
pub struct GTildeOptions {
    pub cubature: CubatureOptions,
    /// Use the kernel of (-Δ)^{-2s} directly when p = 1.
    pub exact_at_p_one: bool,
}

impl Default for GTildeOptions {
    fn default() -> Self {
        GTildeOptions {
            cubature: CubatureOptions::default(),
            exact_at_p_one: true,
        }
    }
}

/// G̃(x, y) = ∫_Ω G(x, z) G(z, y)^p dz, for 1 ≤ p < n/(n-2s).
pub fn g_tilde(
    x: &[f64],
    y: &[f64],
    p: f64,
    kernel: &HeatKernel,
    opts: &GTildeOptions,
) -> Result<KernelSample> {
    let n = kernel.domain().dim();
    let a = n as f64 - 2.0 * kernel.order();
    if !(p >= 1.0) {
        return Err(Error::Regime(format!("iterated kernel needs p >= 1, got {p}")));
    }
    if p * a >= n as f64 {
        return Err(Error::Regime(format!(
            "G^p is not integrable for p = {p} >= n/(n-2s) = {}",
            n as f64 / a
        )));
    }
    kernel.check_pair(x, y)?;
    if p == 1.0 && opts.exact_at_p_one {
        return HeatKernel::new(kernel.domain(), 2.0 * kernel.order())?.green(x, y);
    }
    let singular = [
        SingularPoint {
            x: x.to_vec(),
            strength: a,
        },
        SingularPoint {
            x: y.to_vec(),
            strength: p * a,
        },
    ];
    let res = integrate_singular(kernel.domain(), &singular, &opts.cubature, |z| {
        match (kernel.green(x, z), kernel.green(z, y)) {
            (Ok(gx), Ok(gy)) => gx.value * gy.value.max(0.0).powf(p),
            _ => 0.0,
        }
    })?;
    Ok(KernelSample {
        x: x.to_vec(),
        y: y.to_vec(),
        value: res.value,
        truncation_bound: res.error_estimate,
    })
}

/// Kernel values for many pairs, in input order.
pub fn green_many(kernel: &HeatKernel, pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<Result<KernelSample>> {
    pairs.par_iter().map(|(x, y)| kernel.green(x, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> BoxDomain {
        BoxDomain::unit(2, 0.5).unwrap()
    }

    #[test]
    fn free_constants() {
        assert!((free_kernel_constant(2, 0.5).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((free_kernel_constant(3, 0.5).unwrap() - 1.0 / (2.0 * PI * PI)).abs() < 1e-15);
        let v = free_kernel(&[0.0, 0.0], &[0.5, 0.0], 2, 0.5).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-15);
        assert!(free_kernel(&[0.1, 0.1], &[0.1, 0.1], 2, 0.5).is_err());
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn tau_rule_reproduces_free_kernel() {
        // ∫ t^{s-1} (4πt)^{-n/2} e^{-r²/4t} dt / Γ(s) = g r^{2s-n}
        for &(n, s, r) in &[(2usize, 0.5, 0.3), (3, 0.5, 1e-3), (2, 0.25, 0.05), (3, 0.9, 0.7)] {
            let rule = TauRule::new(r * r / (4.0 * CUT), 1e6, TAU_STEP);
            let f: Vec<f64> = rule
                .t
                .iter()
                .map(|&t| t.powf(s) * (4.0 * PI * t).powf(-0.5 * n as f64) * (-r * r / (4.0 * t)).exp())
                .collect();
            let t_hi = *rule.t.last().unwrap();
            let (d1, d3) = free_end_derivatives(n, s, r * r, t_hi);
            let (v, e) = rule.sum_open_end(&f, d1, d3);
            let tail = free_tail(n, s, r * r, t_hi);
            let got = (v + tail) / gamma(s);
            let want = free_kernel_constant(n, s).unwrap() * r.powf(2.0 * s - n as f64);
            assert!(((got - want) / want).abs() < 1e-11, "{n} {s} {r}: {got} vs {want}");
            assert!(e / gamma(s) < 1e-8 * want);
        }
    }

    #[test]
    fn heat_kernel_forms_agree_at_switch() {
        let k = Heat1d { length: 1.3 };
        for &t in &[0.02, 0.0845, 0.3] {
            let (x, y) = (0.4, 0.9);
            let mut img = 0.0;
            for m in -6..=6 {
                let sh = 2.0 * m as f64 * 1.3;
                img += gauss(x - y + sh, t) - gauss(x + y + sh, t);
            }
            assert!((k.eigen(t, x, y) - img).abs() < 1e-13);
            let (a, b) = (0.2, 0.35);
            let mut mass_img = 0.0;
            for m in -6..=6 {
                let sh = 2.0 * m as f64 * 1.3;
                mass_img += gauss_mass(x + sh, a, b, t) - gauss_mass(-x + sh, a, b, t);
            }
            assert!((k.cell_mass(t, x, a, b) - mass_img).abs() < 1e-13, "{t}: {} vs {mass_img}", k.cell_mass(t, x, a, b));
        }
    }

    #[test]
    fn green_is_below_free_kernel_and_symmetric() {
        let k = HeatKernel::new(&square(), 0.5).unwrap();
        let x = [0.5, 0.5];
        let y = [0.25, 0.5];
        let g = k.green(&x, &y).unwrap();
        assert!(g.value > 0.0 && g.value < 2.0 / PI);
        let gt = k.green(&y, &x).unwrap();
        assert_eq!(g.value, gt.value);
        let h = k.regular_part(&x, &y).unwrap();
        let free = free_kernel(&x, &y, 2, 0.5).unwrap();
        assert!((free - g.value - h.value).abs() < 1e-10);
        assert!(h.value > 0.0);
    }

    #[test]
    fn green_matches_slowly_converging_eigen_sum_on_average() {
        // Cesàro-type check: the eigen sum with a Gaussian damping exp(-λ δ)
        // converges to the heat-kernel value with τ truncated at δ.
        let d = square();
        let k = HeatKernel::new(&d, 0.5).unwrap();
        let x = [0.5, 0.5];
        let y = [0.5, 0.8];
        let delta = 1e-4;
        let mut sum = 0.0;
        for i in 1..=400 {
            for j in 1..=400 {
                let lam = PI * PI * ((i * i + j * j) as f64);
                let phi = |z: &[f64]| 2.0 * (i as f64 * PI * z[0]).sin() * (j as f64 * PI * z[1]).sin();
                sum += (-lam * delta).exp() * lam.powf(-0.5) * phi(&x) * phi(&y);
            }
        }
        // the damped sum equals Γ(s)^{-1}∫_δ^∞ (t-δ)^{s-1} P(t) dt; compare with
        // the direct integral over the shifted variable
        let rule = TauRule::new(1e-12, k.t_max(), TAU_STEP);
        let f: Vec<f64> = rule
            .t
            .iter()
            .map(|&t| t.powf(0.5) * k.axes[0].value(t + delta, x[0], y[0]) * k.axes[1].value(t + delta, x[1], y[1]))
            .collect();
        let (v, _) = rule.sum(&f);
        let want = v / gamma(0.5);
        assert!(((sum - want) / want).abs() < 1e-6, "{sum} vs {want}");
        let g = k.green(&x, &y).unwrap().value;
        assert!((g - want).abs() < 1e-2);
    }

    #[test]
    fn coincident_and_near_points_are_refused() {
        let k = HeatKernel::new(&square(), 0.5).unwrap();
        assert!(matches!(k.green(&[0.3, 0.3], &[0.3, 0.3]), Err(Error::CoincidentPoints)));
        assert!(matches!(
            k.green(&[0.3, 0.3], &[0.3, 0.3 + 1e-12]),
            Err(Error::UnresolvedSingularity { .. })
        ));
        assert!(k.green(&[0.3, 0.3], &[1.3, 0.3]).is_err());
    }

    #[test]
    fn rescaled_green_identity_and_homogeneity() {
        let d = square();
        let k = HeatKernel::new(&d, 0.5).unwrap();
        let x = [0.2, 0.7];
        let y = [0.6, 0.4];
        let g = k.green(&x, &y).unwrap().value;
        let gr = rescaled_green(&x, &y, 1.0, &[0.0, 0.0], &k).unwrap();
        assert_eq!(g, gr);
        let lam: f64 = 3.0;
        let c = [0.5, 0.5];
        let xs = [0.3, -0.2];
        let ys = [-0.4, 0.6];
        let direct = lam.powf(-1.0)
            * k.green(&[xs[0] / lam + 0.5, xs[1] / lam + 0.5], &[ys[0] / lam + 0.5, ys[1] / lam + 0.5])
                .unwrap()
                .value;
        assert_eq!(rescaled_green(&xs, &ys, lam, &c, &k).unwrap(), direct);
        let f1 = free_kernel(&xs, &ys, 2, 0.5).unwrap();
        let f2 = lam.powf(-1.0)
            * free_kernel(&[xs[0] / lam, xs[1] / lam], &[ys[0] / lam, ys[1] / lam], 2, 0.5).unwrap();
        assert!((f1 - f2).abs() < 1e-14);
        assert!(rescaled_green(&[10.0, 0.0], &ys, 2.0, &c, &k).is_err());
    }
}
