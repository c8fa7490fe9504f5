//! Product integration of G against piecewise-constant data on a tensor grid.
//!
//! Entry (i, j) is ∫_{cell j} G(x_i, y) dy. The heat kernel factorizes over
//! axes, so at each τ node the operator is a Kronecker product of small
//! per-axis matrices of cell masses, and the diagonal singularity is
//! integrated exactly.

use ndarray::ArrayD;

use crate::domain::{map_lanes, Grid, GridFunction};
use crate::error::{Error, Result};

use super::kernel::{HeatKernel, TauRule, TAU_STEP};

#[derive(Clone, Debug)]
pub struct GridGreenOperator {
    grid: Grid,
    order: f64,
    gamma: f64,
    weights: Vec<f64>,
    mats: Vec<Vec<Vec<f64>>>,
    diag: f64,
}

impl GridGreenOperator {
    pub fn new(kernel: &HeatKernel, grid: &Grid) -> Result<Self> {
        if kernel.domain() != grid.domain() {
            return Err(Error::DomainMismatch("kernel and grid live on different boxes".into()));
        }
        let n = grid.points().len();
        let hmin = (0..n).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
        // below t_sat every per-axis mass matrix is the identity to rounding
        let t_sat = hmin * hmin / 600.0;
        let sigma = kernel.order();
        let rule = TauRule::new(t_sat, kernel.t_max(), TAU_STEP);
        let h = rule.step;
        let edges: Vec<Vec<f64>> = (0..n)
            .map(|a| {
                let s = grid.spacing(a);
                (0..=grid.points()[a]).map(|j| j as f64 * s).collect()
            })
            .collect();
        let coords: Vec<Vec<f64>> = (0..n).map(|a| grid.coords(a)).collect();
        let mut weights = Vec::new();
        let mut mats = Vec::new();
        for &t in &rule.t[1..] {
            weights.push(h * t.powf(sigma));
            let per_axis = (0..n)
                .map(|a| {
                    let m = coords[a].len();
                    let k = kernel.axes()[a];
                    let mut mat = vec![0.0; m * m];
                    for i in 0..m {
                        for j in 0..m {
                            mat[i * m + j] = k.cell_mass(t, coords[a][i], edges[a][j], edges[a][j + 1]);
                        }
                    }
                    mat
                })
                .collect();
            mats.push(per_axis);
        }
        let ts = t_sat.powf(sigma);
        let diag = ts / sigma + 0.5 * h * ts + h * h / 12.0 * sigma * ts;
        Ok(GridGreenOperator {
            grid: grid.clone(),
            order: sigma,
            gamma: kernel.gamma_order(),
            weights,
            mats,
            diag,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn apply_values(&self, values: &ArrayD<f64>) -> ArrayD<f64> {
        let n = values.ndim();
        let mut acc = values * self.diag;
        for (w, per_axis) in self.weights.iter().zip(&self.mats) {
            let mut cur = values.clone();
            for (axis, mat) in per_axis.iter().enumerate().take(n) {
                let m = values.shape()[axis];
                cur = map_lanes(&cur, axis, m, |i, o| {
                    for (r, oi) in o.iter_mut().enumerate() {
                        let row = &mat[r * m..(r + 1) * m];
                        *oi = row.iter().zip(i).map(|(a, b)| a * b).sum();
                    }
                });
            }
            acc.scaled_add(*w, &cur);
        }
        acc / self.gamma
    }

    /// ∫_Ω G(x_i, y) f(y) dy with f constant on each cell.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid() != &self.grid {
            return Err(Error::DomainMismatch("function lives on another grid".into()));
        }
        GridFunction::new(&self.grid, self.apply_values(f.values()))
    }
}

/// The operator of G_ε on the blown-up box Ω_ε = λ(Ω - x_c), acting on
/// values at the mapped grid nodes.
#[derive(Clone, Debug)]
pub struct RescaledGreenOperator {
    inner: GridGreenOperator,
    lambda: f64,
    center: Vec<f64>,
}

impl RescaledGreenOperator {
    pub fn new(kernel: &HeatKernel, grid: &Grid, lambda: f64, center: &[f64]) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {lambda} must be positive")));
        }
        Ok(RescaledGreenOperator {
            inner: GridGreenOperator::new(kernel, grid)?,
            lambda,
            center: center.to_vec(),
        })
    }

    /// Node i in blown-up coordinates.
    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        self.inner
            .grid
            .node(idx)
            .iter()
            .zip(&self.center)
            .map(|(x, c)| self.lambda * (x - c))
            .collect()
    }

    /// Cell volume in blown-up coordinates.
    pub fn cell_volume(&self) -> f64 {
        self.inner.grid.weight() * self.lambda.powi(self.center.len() as i32)
    }

    /// ∫_{Ω_ε} G_ε(ξ_i, η) f(η) dη. With η = λ(y - x_c) the cell integral
    /// picks up λ^n from the volume and λ^{-(n-2σ)} from the kernel.
    pub fn apply_values(&self, values: &ArrayD<f64>) -> ArrayD<f64> {
        self.inner.apply_values(values) * self.lambda.powf(2.0 * self.inner.order)
    }
}
