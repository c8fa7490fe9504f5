//! One-dimensional sine transforms on cell-centered grids.
//!
//! With nodes x_j = (j + 1/2) h, h = L/m, the analysis map is
//! a_k = sqrt(2/L) h Σ_j f_j sin(kπ x_j / L) and synthesis is
//! f_j = sqrt(2/L) Σ_k a_k sin(kπ x_j / L). For k < m the sampled sines are
//! exactly orthonormal under the midpoint weights, so the two maps are
//! mutually inverse on the retained modes.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::ArrayD;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Which kernel evaluates a transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Dense below 64 points, FFT above.
    Auto,
    Dense,
    Fft,
}

const DENSE_LIMIT: usize = 64;

/// A prepared transform between `points` samples and `modes` coefficients.
#[derive(Clone)]
pub struct SineTransform {
    points: usize,
    modes: usize,
    length: f64,
    plan: Plan,
}

#[derive(Clone)]
enum Plan {
    Dense(Arc<Vec<f64>>),
    Fft {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        twiddle: Arc<Vec<Complex64>>,
    },
}

impl SineTransform {
    pub fn new(points: usize, modes: usize, length: f64, backend: Backend) -> Self {
        let use_fft = match backend {
            Backend::Dense => false,
            Backend::Fft => true,
            Backend::Auto => points > DENSE_LIMIT,
        } && modes < 2 * points;
        let plan = if use_fft {
            let mut planner = FftPlanner::new();
            let twiddle = (0..2 * points)
                .map(|k| Complex64::from_polar(1.0, PI * k as f64 / (2 * points) as f64))
                .collect();
            Plan::Fft {
                forward: planner.plan_fft_forward(2 * points),
                inverse: planner.plan_fft_inverse(2 * points),
                twiddle: Arc::new(twiddle),
            }
        } else {
            let mut table = vec![0.0; modes * points];
            for k in 0..modes {
                for j in 0..points {
                    table[k * points + j] =
                        (PI * (k + 1) as f64 * (j as f64 + 0.5) / points as f64).sin();
                }
            }
            Plan::Dense(Arc::new(table))
        };
        SineTransform {
            points,
            modes,
            length,
            plan,
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    fn scratch(&self) -> Vec<Complex64> {
        match &self.plan {
            Plan::Dense(_) => Vec::new(),
            Plan::Fft { forward, .. } => {
                vec![Complex64::default(); 2 * self.points + forward.get_inplace_scratch_len()]
            }
        }
    }

    /// Samples → coefficients for modes 1..=modes.
    pub fn analyze_lane(&self, f: &[f64], out: &mut [f64], scratch: &mut Vec<Complex64>) {
        let m = self.points;
        let h = self.length / m as f64;
        let c = (2.0 / self.length).sqrt() * h;
        match &self.plan {
            Plan::Dense(table) => {
                for (k, o) in out.iter_mut().enumerate() {
                    let row = &table[k * m..(k + 1) * m];
                    *o = c * row.iter().zip(f).map(|(s, v)| s * v).sum::<f64>();
                }
            }
            Plan::Fft {
                forward, twiddle, ..
            } => {
                let (buf, fft_scratch) = scratch.split_at_mut(2 * m);
                for j in 0..m {
                    buf[j] = Complex64::new(f[j], 0.0);
                    buf[2 * m - 1 - j] = Complex64::new(-f[j], 0.0);
                }
                forward.process_with_scratch(buf, fft_scratch);
                for (i, o) in out.iter_mut().enumerate() {
                    let k = i + 1;
                    let z = buf[k] * twiddle[k].conj();
                    *o = -0.5 * c * z.im;
                }
            }
        }
    }

    /// Coefficients for modes 1..=modes → samples.
    pub fn synthesize_lane(&self, a: &[f64], out: &mut [f64], scratch: &mut Vec<Complex64>) {
        let m = self.points;
        let c = (2.0 / self.length).sqrt();
        match &self.plan {
            Plan::Dense(table) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (k, &ak) in a.iter().enumerate() {
                    if ak == 0.0 {
                        continue;
                    }
                    let row = &table[k * m..(k + 1) * m];
                    for (o, s) in out.iter_mut().zip(row) {
                        *o += ak * s;
                    }
                }
                out.iter_mut().for_each(|o| *o *= c);
            }
            Plan::Fft {
                inverse, twiddle, ..
            } => {
                let (buf, fft_scratch) = scratch.split_at_mut(2 * m);
                buf.iter_mut().for_each(|z| *z = Complex64::default());
                for (i, &ak) in a.iter().enumerate() {
                    let k = i + 1;
                    buf[k] = twiddle[k] * ak;
                }
                inverse.process_with_scratch(buf, fft_scratch);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = c * buf[j].im;
                }
            }
        }
    }
}

/// Applies `f` to every one-dimensional lane of `a` along `axis`, producing
/// lanes of length `out_len`. Lanes are independent, so the result is the
/// same for any thread count.
pub(crate) fn map_lanes<F>(a: &ArrayD<f64>, axis: usize, out_len: usize, f: F) -> ArrayD<f64>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n = a.ndim();
    let mut perm: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
    perm.push(axis);
    let moved = a.view().permuted_axes(perm.clone());
    let contiguous = moved.as_standard_layout();
    let src = contiguous.as_slice().expect("standard layout");
    let in_len = a.shape()[axis];
    let lanes = if in_len == 0 { 0 } else { src.len() / in_len };
    let mut out = vec![0.0; lanes * out_len];
    if out_len > 0 && in_len > 0 {
        out.par_chunks_mut(out_len)
            .zip(src.par_chunks(in_len))
            .for_each(|(o, i)| f(i, o));
    }
    let mut shape: Vec<usize> = perm.iter().map(|&i| a.shape()[i]).collect();
    *shape.last_mut().unwrap() = out_len;
    let arr = ArrayD::from_shape_vec(shape, out).expect("lane shape");
    let mut inv = vec![0; n];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    let back = arr.permuted_axes(inv);
    if axis + 1 == n {
        back
    } else {
        back.as_standard_layout().into_owned()
    }
}

/// Tensor analysis along every axis.
pub(crate) fn analyze_tensor(values: &ArrayD<f64>, plans: &[SineTransform]) -> ArrayD<f64> {
    let mut cur = values.clone();
    for (axis, plan) in plans.iter().enumerate() {
        cur = map_lanes(&cur, axis, plan.modes(), |i, o| {
            let mut s = plan.scratch();
            plan.analyze_lane(i, o, &mut s)
        });
    }
    cur
}

/// Tensor synthesis along every axis.
pub(crate) fn synthesize_tensor(coeffs: &ArrayD<f64>, plans: &[SineTransform]) -> ArrayD<f64> {
    let mut cur = coeffs.clone();
    for (axis, plan) in plans.iter().enumerate() {
        cur = map_lanes(&cur, axis, plan.points(), |i, o| {
            let mut s = plan.scratch();
            plan.synthesize_lane(i, o, &mut s)
        });
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lane(plan: &SineTransform, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; plan.modes()];
        let mut s = plan.scratch();
        plan.analyze_lane(f, &mut out, &mut s);
        out
    }

    #[test]
    fn fft_and_dense_agree() {
        for &(m, k) in &[(8, 4), (40, 20), (130, 65), (256, 128)] {
            let f: Vec<f64> = (0..m).map(|j| ((j * j) as f64 * 0.37).sin() + 0.1).collect();
            let d = SineTransform::new(m, k, 1.3, Backend::Dense);
            let t = SineTransform::new(m, k, 1.3, Backend::Fft);
            let a = lane(&d, &f);
            let b = lane(&t, &f);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-13, "{m}: {x} vs {y}");
            }
            let mut back_d = vec![0.0; m];
            let mut back_f = vec![0.0; m];
            d.synthesize_lane(&a, &mut back_d, &mut d.scratch());
            t.synthesize_lane(&a, &mut back_f, &mut t.scratch());
            for (x, y) in back_d.iter().zip(&back_f) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn synthesis_inverts_analysis_on_retained_modes() {
        let m = 96;
        let plan = SineTransform::new(m, m - 1, 2.0, Backend::Fft);
        let a: Vec<f64> = (0..m - 1).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let mut f = vec![0.0; m];
        plan.synthesize_lane(&a, &mut f, &mut plan.scratch());
        let b = lane(&plan, &f);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
