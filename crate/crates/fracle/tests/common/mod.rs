#![allow(dead_code)]

use fracle::fractional::apply_inverse;
use fracle::lane_emden::theta_quotient;
use fracle::{integrate, ExponentPair, Grid, GridFunction, SpectralBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normalize(w: &GridFunction, b: f64) -> GridFunction {
    let n = fracle::lp_norm(w, b).unwrap();
    w.scaled(1.0 / n).unwrap()
}

/// Projected gradient ascent on Θ over nonnegative grid functions with an
/// adaptive step, restarted from random positive fields. Returns the best Θ.
pub fn projected_gradient_theta(
    e: &ExponentPair,
    basis: &SpectralBasis,
    grid: &Grid,
    restarts: usize,
    max_steps: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = e.dual_exponent();
    let mut best = 0.0f64;
    for _ in 0..restarts {
        let vals = GridFunction::zeros(grid).values().mapv(|_| rng.gen_range(0.05..1.0));
        let mut w = GridFunction::new(grid, vals).unwrap();
        w = normalize(&w, b);
        let mut theta = theta_quotient(&w, e, basis).unwrap();
        let mut eta = 1e-2;
        for _ in 0..max_steps {
            let tw = apply_inverse(&w, e.s, basis).unwrap();
            let zp = tw.map(|x| x.max(0.0).powf(e.p)).unwrap();
            let num = integrate(&tw.map(|x| x.max(0.0).powf(e.p + 1.0)).unwrap());
            let den = integrate(&w.map(|x| x.powf(b)).unwrap());
            let up = apply_inverse(&zp, e.s, basis).unwrap();
            let grad: Vec<f64> = up
                .values()
                .iter()
                .zip(w.values())
                .map(|(a, x)| theta * (a / num - x.powf(b - 1.0) / den))
                .collect();
            let mut accepted = false;
            while eta > 1e-14 {
                let vals: Vec<f64> = w
                    .values()
                    .iter()
                    .zip(&grad)
                    .map(|(x, g)| (x + eta * g).max(0.0))
                    .collect();
                let cand = GridFunction::new(grid, ndarray::ArrayD::from_shape_vec(w.values().raw_dim(), vals).unwrap()).unwrap();
                let cand = normalize(&cand, b);
                let t = theta_quotient(&cand, e, basis).unwrap();
                if t > theta {
                    w = cand;
                    theta = t;
                    eta *= 1.5;
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        best = best.max(theta);
    }
    best
}

/// Random positive fields on the grid, for maximality spot checks.
pub fn random_positive_fields(grid: &Grid, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c: Vec<f64> = grid.domain().center();
            let width = rng.gen_range(0.05..0.5);
            let shift: Vec<f64> = c.iter().map(|_| rng.gen_range(-0.2..0.2)).collect();
            let noise = rng.gen_range(0.0..0.5);
            let base = GridFunction::from_fn(grid, |x| {
                let r2: f64 = x.iter().zip(&c).zip(&shift).map(|((a, b), d)| (a - b - d).powi(2)).sum();
                (-r2 / (width * width)).exp()
            })
            .unwrap();
            let vals = base.values().mapv(|v| v + noise * rng.gen::<f64>());
            GridFunction::new(grid, vals).unwrap()
        })
        .collect()
}
