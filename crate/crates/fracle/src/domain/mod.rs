//! Box domains, their Dirichlet eigenbasis, tensor grids and transforms.

mod sine;

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{det_sum, det_sum2};

pub use sine::{Backend, SineTransform};
pub(crate) use sine::map_lanes;

/// Ω = Π (0, L_i) together with the fractional order s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lengths: Vec<f64>,
    s: f64,
}

impl BoxDomain {
    pub fn new(lengths: Vec<f64>, s: f64) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidDomain(format!("side length {l} is not positive")));
        }
        if !(s.is_finite() && s > 0.0 && s < 1.0) {
            return Err(Error::InvalidDomain(format!("s = {s} is outside (0, 1)")));
        }
        let n = lengths.len() as f64;
        if n <= 2.0 * s {
            return Err(Error::InvalidDomain(format!(
                "need n > 2s, got n = {n}, s = {s}"
            )));
        }
        Ok(BoxDomain { lengths, s })
    }

    /// The unit cube (0,1)^n.
    pub fn unit(n: usize, s: f64) -> Result<Self> {
        Self::new(vec![1.0; n], s)
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lengths.iter().map(|l| 0.5 * l).collect()
    }

    pub fn min_side(&self) -> f64 {
        self.lengths.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        self.lengths.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// Smallest Dirichlet eigenvalue Σ (π/L_i)².
    pub fn lambda_min(&self) -> f64 {
        self.lengths.iter().map(|l| (PI / l).powi(2)).sum()
    }

    /// True for points of the open box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lengths).all(|(&x, &l)| x > 0.0 && x < l)
    }

    /// Distance to ∂Ω; negative outside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.lengths)
            .map(|(&x, &l)| x.min(l - x))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(x.to_vec()))
        }
    }
}

/// Multi-index k of an eigenpair; every component is at least 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EigenIndex(Vec<usize>);

impl EigenIndex {
    pub fn new(k: Vec<usize>) -> Result<Self> {
        if k.is_empty() || k.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "eigen index components must be >= 1, got {k:?}"
            )));
        }
        Ok(EigenIndex(k))
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug)]
struct BasisData {
    domain: BoxDomain,
    cutoff: Vec<usize>,
    eigenvalues: ArrayD<f64>,
}

/// All Dirichlet eigenpairs with k_i ≤ K_i. Cheap to clone.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    inner: Arc<BasisData>,
}

pub fn build_basis(domain: &BoxDomain, cutoff: &[usize]) -> Result<SpectralBasis> {
    if cutoff.len() != domain.dim() {
        return Err(Error::InvalidCutoff(format!(
            "{} cutoffs for a {}-dimensional domain",
            cutoff.len(),
            domain.dim()
        )));
    }
    if let Some(axis) = cutoff.iter().position(|&k| k == 0) {
        return Err(Error::InvalidCutoff(format!("cutoff on axis {axis} is zero")));
    }
    let freq: Vec<Vec<f64>> = cutoff
        .iter()
        .zip(domain.lengths())
        .map(|(&k, &l)| (1..=k).map(|j| (j as f64 * PI / l).powi(2)).collect())
        .collect();
    let eigenvalues = ArrayD::from_shape_fn(IxDyn(cutoff), |idx| {
        (0..freq.len()).map(|a| freq[a][idx[a]]).sum()
    });
    Ok(SpectralBasis {
        inner: Arc::new(BasisData {
            domain: domain.clone(),
            cutoff: cutoff.to_vec(),
            eigenvalues,
        }),
    })
}

impl SpectralBasis {
    pub fn domain(&self) -> &BoxDomain {
        &self.inner.domain
    }

    pub fn cutoff(&self) -> &[usize] {
        &self.inner.cutoff
    }

    pub fn mode_count(&self) -> usize {
        self.inner.cutoff.iter().product()
    }

    /// λ_k laid out as an array indexed by k - 1.
    pub fn eigenvalues(&self) -> &ArrayD<f64> {
        &self.inner.eigenvalues
    }

    pub fn eigenvalue(&self, k: &EigenIndex) -> Result<f64> {
        let c = k.components();
        if c.len() != self.cutoff().len() || c.iter().zip(self.cutoff()).any(|(k, m)| k > m) {
            return Err(Error::InvalidArgument(format!(
                "index {c:?} outside cutoff {:?}",
                self.cutoff()
            )));
        }
        let idx: Vec<usize> = c.iter().map(|k| k - 1).collect();
        Ok(self.inner.eigenvalues[IxDyn(&idx)])
    }

    /// Retained eigenvalues in nondecreasing order.
    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.inner.eigenvalues.iter().cloned().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    pub fn lambda_min(&self) -> f64 {
        self.domain().lambda_min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.cutoff()
            .iter()
            .zip(self.domain().lengths())
            .map(|(&k, &l)| (k as f64 * PI / l).powi(2))
            .sum()
    }

    /// φ_k(x).
    pub fn mode_value(&self, k: &EigenIndex, x: &[f64]) -> f64 {
        k.components()
            .iter()
            .zip(x)
            .zip(self.domain().lengths())
            .map(|((&k, &x), &l)| (2.0 / l).sqrt() * (k as f64 * PI * x / l).sin())
            .product()
    }

    /// λ_k^power for every retained mode.
    pub fn multiplier(&self, power: f64) -> ArrayD<f64> {
        self.inner.eigenvalues.mapv(|l| l.powf(power))
    }
}

/// Uniform cell-centered tensor grid: x_j = (j + 1/2) h on each axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    domain: BoxDomain,
    points: Vec<usize>,
}

impl Grid {
    pub fn new(domain: &BoxDomain, points: &[usize]) -> Result<Self> {
        if points.len() != domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} grid sizes for a {}-dimensional domain",
                points.len(),
                domain.dim()
            )));
        }
        if points.contains(&0) {
            return Err(Error::InvalidArgument("grid size zero".into()));
        }
        Ok(Grid {
            domain: domain.clone(),
            points: points.to_vec(),
        })
    }

    pub fn uniform(domain: &BoxDomain, m: usize) -> Result<Self> {
        Self::new(domain, &vec![m; domain.dim()])
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn node_count(&self) -> usize {
        self.points.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.lengths()[axis] / self.points[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.points.len())
            .map(|a| self.spacing(a))
            .fold(0.0, f64::max)
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.points[axis])
            .map(|j| (j as f64 + 0.5) * h)
            .collect()
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(a, &j)| (j as f64 + 0.5) * self.spacing(a))
            .collect()
    }

    /// Midpoint weight, the same at every node.
    pub fn weight(&self) -> f64 {
        (0..self.points.len()).map(|a| self.spacing(a)).product()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight() * self.node_count() as f64
    }

    /// The grid with `factor` times as many points per axis.
    pub fn refined(&self, factor: usize) -> Grid {
        Grid {
            domain: self.domain.clone(),
            points: self.points.iter().map(|m| m * factor).collect(),
        }
    }

    fn check_resolves(&self, basis: &SpectralBasis) -> Result<()> {
        if basis.domain() != &self.domain {
            return Err(Error::DomainMismatch("basis and grid live on different boxes".into()));
        }
        for (axis, (&m, &k)) in self.points.iter().zip(basis.cutoff()).enumerate() {
            if m < 2 * k {
                return Err(Error::ResolutionTooCoarse {
                    axis,
                    points: m,
                    modes: k,
                    needed: 2 * k,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn plans(&self, basis: &SpectralBasis, backend: Backend) -> Vec<SineTransform> {
        self.points
            .iter()
            .zip(basis.cutoff())
            .zip(self.domain.lengths())
            .map(|((&m, &k), &l)| SineTransform::new(m, k, l, backend))
            .collect()
    }
}

/// Samples on a grid; always finite.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Grid,
    values: ArrayD<f64>,
}

impl GridFunction {
    pub fn new(grid: &Grid, values: ArrayD<f64>) -> Result<Self> {
        if values.shape() != grid.points() {
            return Err(Error::InvalidArgument(format!(
                "value shape {:?} does not match grid {:?}",
                values.shape(),
                grid.points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(GridFunction {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        GridFunction {
            grid: grid.clone(),
            values: ArrayD::zeros(IxDyn(grid.points())),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let coords: Vec<Vec<f64>> = (0..grid.points().len()).map(|a| grid.coords(a)).collect();
        let mut x = vec![0.0; coords.len()];
        let values = ArrayD::from_shape_fn(IxDyn(grid.points()), |idx| {
            for a in 0..x.len() {
                x[a] = coords[a][idx[a]];
            }
            f(&x)
        });
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }

    pub fn into_values(self) -> ArrayD<f64> {
        self.values
    }

    pub(crate) fn slice(&self) -> &[f64] {
        self.values.as_slice().expect("grid functions are stored contiguously")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(&self.grid, self.values.mapv(f))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// Largest value and its node.
    pub fn argmax(&self) -> (Vec<usize>, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &v) in self.slice().iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        let mut idx = vec![0; self.grid.points().len()];
        let mut rem = best.0;
        for a in (0..idx.len()).rev() {
            idx[a] = rem % self.grid.points()[a];
            rem /= self.grid.points()[a];
        }
        (idx, best.1)
    }

    pub fn max(&self) -> f64 {
        self.argmax().1
    }

    pub fn min(&self) -> f64 {
        self.slice().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Expansion Σ a_k φ_k over a basis; coefficients indexed by k - 1.
#[derive(Clone, Debug)]
pub struct SpectralField {
    basis: SpectralBasis,
    coeffs: ArrayD<f64>,
}

impl SpectralField {
    pub fn new(basis: &SpectralBasis, coeffs: ArrayD<f64>) -> Result<Self> {
        if coeffs.shape() != basis.cutoff() {
            return Err(Error::InvalidArgument(format!(
                "coefficient shape {:?} does not match cutoff {:?}",
                coeffs.shape(),
                basis.cutoff()
            )));
        }
        Ok(SpectralField {
            basis: basis.clone(),
            coeffs,
        })
    }

    pub fn zeros(basis: &SpectralBasis) -> Self {
        SpectralField {
            basis: basis.clone(),
            coeffs: ArrayD::zeros(IxDyn(basis.cutoff())),
        }
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &ArrayD<f64> {
        &self.coeffs
    }

    pub fn coefficient(&self, k: &EigenIndex) -> f64 {
        let idx: Vec<usize> = k.components().iter().map(|k| k - 1).collect();
        self.coeffs[IxDyn(&idx)]
    }

    /// Multiplies every coefficient by λ_k^power.
    pub fn with_multiplier(&self, power: f64) -> SpectralField {
        let mut coeffs = self.coeffs.clone();
        coeffs.zip_mut_with(self.basis.eigenvalues(), |a, &l| *a *= l.powf(power));
        SpectralField {
            basis: self.basis.clone(),
            coeffs,
        }
    }

    /// Σ a_k b_k λ_k^power.
    pub fn weighted_dot(&self, other: &SpectralField, power: f64) -> f64 {
        let a = self.coeffs.as_slice().expect("contiguous");
        let b = other.coeffs.as_slice().expect("contiguous");
        let l = self.basis.eigenvalues().as_slice().expect("contiguous");
        let prod: Vec<f64> = a.iter().zip(l).map(|(a, l)| a * l.powf(power)).collect();
        det_sum2(&prod, b, |x, y| x * y)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        det_sum(self.coeffs.as_slice().expect("contiguous"), |a| a * a)
    }

    fn axis_factors(&self, x: &[f64], order: &[usize]) -> Vec<Vec<f64>> {
        self.basis
            .cutoff()
            .iter()
            .zip(self.basis.domain().lengths())
            .enumerate()
            .map(|(a, (&kmax, &l))| {
                let c = (2.0 / l).sqrt();
                (1..=kmax)
                    .map(|k| {
                        let w = k as f64 * PI / l;
                        let t = w * x[a];
                        match order[a] {
                            0 => c * t.sin(),
                            1 => c * w * t.cos(),
                            _ => -c * w * w * t.sin(),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Value at an arbitrary point (zero outside the closed box).
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.derivative(x, &vec![0; x.len()])
    }

    /// Mixed partial derivative of order `order[i]` (≤ 2) along axis i.
    pub fn derivative(&self, x: &[f64], order: &[usize]) -> f64 {
        let outside = x
            .iter()
            .zip(self.basis.domain().lengths())
            .any(|(&x, &l)| !(0.0..=l).contains(&x));
        if outside {
            return 0.0;
        }
        contract(&self.coeffs, &self.axis_factors(x, order))
    }

    /// Values on the tensor product of per-axis coordinate lists; points
    /// outside the box get zero.
    pub fn eval_tensor(&self, axes: &[Vec<f64>]) -> ArrayD<f64> {
        let mut cur = self.coeffs.clone();
        for (axis, coords) in axes.iter().enumerate() {
            let l = self.basis.domain().lengths()[axis];
            let kmax = self.basis.cutoff()[axis];
            let c = (2.0 / l).sqrt();
            let mut table = vec![0.0; coords.len() * kmax];
            for (j, &x) in coords.iter().enumerate() {
                if !(0.0..=l).contains(&x) {
                    continue;
                }
                for k in 0..kmax {
                    table[j * kmax + k] = c * ((k + 1) as f64 * PI * x / l).sin();
                }
            }
            cur = map_lanes(&cur, axis, coords.len(), |i, o| {
                for (j, oj) in o.iter_mut().enumerate() {
                    let row = &table[j * kmax..(j + 1) * kmax];
                    *oj = row.iter().zip(i).map(|(a, b)| a * b).sum();
                }
            });
        }
        cur
    }
}

/// Σ_k a_k Π_i t_i[k_i], contracting the last axis first.
fn contract(coeffs: &ArrayD<f64>, factors: &[Vec<f64>]) -> f64 {
    let mut cur: Vec<f64> = coeffs.iter().cloned().collect();
    for t in factors.iter().rev() {
        let k = t.len();
        cur = cur
            .chunks(k)
            .map(|c| c.iter().zip(t).map(|(a, b)| a * b).sum())
            .collect();
    }
    cur[0]
}

/// Coefficients a_k = ∫ f φ_k under the grid quadrature.
pub fn analyze(f: &GridFunction, basis: &SpectralBasis) -> Result<SpectralField> {
    analyze_with(f, basis, Backend::Auto)
}

pub fn analyze_with(f: &GridFunction, basis: &SpectralBasis, backend: Backend) -> Result<SpectralField> {
    f.grid().check_resolves(basis)?;
    let plans = f.grid().plans(basis, backend);
    SpectralField::new(basis, sine::analyze_tensor(f.values(), &plans))
}

/// Pointwise Σ a_k φ_k on the grid nodes.
pub fn synthesize(c: &SpectralField, grid: &Grid) -> Result<GridFunction> {
    synthesize_with(c, grid, Backend::Auto)
}

pub fn synthesize_with(c: &SpectralField, grid: &Grid, backend: Backend) -> Result<GridFunction> {
    if c.basis().domain() != grid.domain() {
        return Err(Error::DomainMismatch("field and grid live on different boxes".into()));
    }
    let plans = grid.plans(c.basis(), backend);
    GridFunction::new(grid, sine::synthesize_tensor(c.coefficients(), &plans))
}

/// (Σ w_i |f_i|^r)^{1/r}.
pub fn lp_norm(f: &GridFunction, r: f64) -> Result<f64> {
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::InvalidArgument(format!("norm exponent {r} must be finite and >= 1")));
    }
    let w = f.grid().weight();
    let sum = if r == 2.0 {
        det_sum(f.slice(), |v| v * v)
    } else if r == 1.0 {
        det_sum(f.slice(), f64::abs)
    } else {
        det_sum(f.slice(), |v| v.abs().powf(r))
    };
    Ok((w * sum).powf(1.0 / r))
}

/// Σ w_i f_i.
pub fn integrate(f: &GridFunction) -> f64 {
    f.grid().weight() * det_sum(f.slice(), |v| v)
}

/// A prepared transform pair for repeated use on one grid and basis.
#[derive(Clone)]
pub struct TransformPair {
    grid: Grid,
    basis: SpectralBasis,
    plans: Vec<SineTransform>,
}

impl TransformPair {
    pub fn new(grid: &Grid, basis: &SpectralBasis) -> Result<Self> {
        grid.check_resolves(basis)?;
        Ok(TransformPair {
            grid: grid.clone(),
            basis: basis.clone(),
            plans: grid.plans(basis, Backend::Auto),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn analyze(&self, values: &ArrayD<f64>) -> ArrayD<f64> {
        sine::analyze_tensor(values, &self.plans)
    }

    pub fn synthesize(&self, coeffs: &ArrayD<f64>) -> ArrayD<f64> {
        sine::synthesize_tensor(coeffs, &self.plans)
    }
}
