//! Exponent algebra, quotients, energies and the ground-state solver.

mod solver;

use serde::Serialize;

use crate::domain::{analyze, lp_norm, synthesize, GridFunction, SpectralBasis, SpectralField};
use crate::error::{Error, Result};
use crate::util::det_sum;

pub use solver::{solve_ground_state, SolveReport, SolverOptions, SymmetryClass};

/// Distance to the critical hyperbola below which a pair counts as critical.
const CRITICAL_TOL: f64 = 1e-12;

/// (p, q) with ε = 1/(p+1) + 1/(q+1) - (n-2s)/n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentPair {
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub s: f64,
    pub epsilon: f64,
}

/// q_ε from 1/(q+1) = (n-2s)/n + ε - 1/(p+1).
pub fn solve_q_epsilon(p: f64, n: usize, s: f64, epsilon: f64) -> Result<f64> {
    let nf = n as f64;
    if !(s > 0.0 && nf > 2.0 * s) {
        return Err(Error::InvalidArgument(format!("need 0 < s and n > 2s (n = {n}, s = {s})")));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Exponent(format!("epsilon = {epsilon} must be >= 0")));
    }
    let eps_max = 2.0 / (p + 1.0) - (nf - 2.0 * s) / nf;
    if epsilon > eps_max + CRITICAL_TOL {
        return Err(Error::Exponent(format!(
            "epsilon = {epsilon} gives q < p (q >= p requires epsilon <= {eps_max})"
        )));
    }
    let inv = (nf - 2.0 * s) / nf + epsilon - 1.0 / (p + 1.0);
    if inv <= 0.0 {
        return Err(Error::Exponent(format!("epsilon = {epsilon} leaves 1/(q+1) <= 0")));
    }
    Ok(1.0 / inv - 1.0)
}

/// α = 2s(p+1)/(pq-1), β = 2s(q+1)/(pq-1).
pub fn alpha_beta(p: f64, q: f64, s: f64) -> Result<(f64, f64)> {
    let d = p * q - 1.0;
    if !(d > 0.0) {
        return Err(Error::Exponent(format!("pq = {} must exceed 1", p * q)));
    }
    Ok((2.0 * s * (p + 1.0) / d, 2.0 * s * (q + 1.0) / d))
}

impl ExponentPair {
    /// Checks q ≥ p > 2s/(n-2s) and that (p, q) is not supercritical.
    pub fn new(p: f64, q: f64, n: usize, s: f64) -> Result<Self> {
        let nf = n as f64;
        if !(s > 0.0 && nf > 2.0 * s) {
            return Err(Error::InvalidArgument(format!("need 0 < s and n > 2s (n = {n}, s = {s})")));
        }
        let lower = 2.0 * s / (nf - 2.0 * s);
        if !(p > lower) {
            return Err(Error::Exponent(format!("p = {p} must exceed 2s/(n-2s) = {lower}")));
        }
        if !(q >= p) {
            return Err(Error::Exponent(format!("q = {q} must be >= p = {p}")));
        }
        let epsilon = 1.0 / (p + 1.0) + 1.0 / (q + 1.0) - (nf - 2.0 * s) / nf;
        if epsilon < -CRITICAL_TOL {
            return Err(Error::Exponent(format!("(p, q) = ({p}, {q}) is supercritical")));
        }
        Ok(ExponentPair {
            p,
            q,
            n,
            s,
            epsilon: epsilon.max(0.0),
        })
    }

    pub fn from_epsilon(p: f64, n: usize, s: f64, epsilon: f64) -> Result<Self> {
        let q = solve_q_epsilon(p, n, s, epsilon)?;
        let mut e = Self::new(p, q, n, s)?;
        e.epsilon = epsilon;
        Ok(e)
    }

    pub fn critical(p: f64, n: usize, s: f64) -> Result<Self> {
        Self::from_epsilon(p, n, s, 0.0)
    }

    pub fn is_critical(&self) -> bool {
        self.epsilon <= CRITICAL_TOL
    }

    /// The critical partner q0 of p.
    pub fn q0(&self) -> f64 {
        let nf = self.n as f64;
        1.0 / ((nf - 2.0 * self.s) / nf - 1.0 / (self.p + 1.0)) - 1.0
    }

    pub fn alpha_beta(&self) -> Result<(f64, f64)> {
        alpha_beta(self.p, self.q, self.s)
    }

    /// n/(n-2s).
    pub fn serrin(&self) -> f64 {
        let nf = self.n as f64;
        nf / (nf - 2.0 * self.s)
    }

    /// Norm exponent (q+1)/q of the dual variable w.
    pub fn dual_exponent(&self) -> f64 {
        (self.q + 1.0) / self.q
    }
}

/// Converged (u, v, w = u^q) with spectral representations of u and v.
#[derive(Clone, Debug)]
pub struct SolutionPair {
    pub u: GridFunction,
    pub v: GridFunction,
    pub w: GridFunction,
    pub u_field: SpectralField,
    pub v_field: SpectralField,
    pub exponents: ExponentPair,
}

fn inverse_of(f: &GridFunction, s: f64, basis: &SpectralBasis) -> Result<GridFunction> {
    synthesize(&analyze(f, basis)?.with_multiplier(-s), f.grid())
}

/// Θ = ‖(-Δ)^{-s} w‖_{p+1} / ‖w‖_{(q+1)/q}.
pub fn theta_quotient(w: &GridFunction, exponents: &ExponentPair, basis: &SpectralBasis) -> Result<f64> {
    let den = lp_norm(w, exponents.dual_exponent())?;
    if den == 0.0 {
        return Err(Error::ZeroInput);
    }
    let tw = inverse_of(w, exponents.s, basis)?;
    Ok(lp_norm(&tw, exponents.p + 1.0)? / den)
}

fn integral_pow(f: &GridFunction, r: f64) -> f64 {
    f.grid().weight() * det_sum(f.slice(), |x| x.max(0.0).powf(r))
}

/// E = Σ λ^s a_k b_k - ∫v^{p+1}/(p+1) - ∫u^{q+1}/(q+1).
pub fn energy(pair: &SolutionPair) -> f64 {
    let e = &pair.exponents;
    let bilinear = pair.u_field.weighted_dot(&pair.v_field, e.s);
    bilinear - integral_pow(&pair.v, e.p + 1.0) / (e.p + 1.0) - integral_pow(&pair.u, e.q + 1.0) / (e.q + 1.0)
}

/// S = ‖v^p‖_{(p+1)/p} / ‖u‖_{q+1}.
pub fn sobolev_quotient(pair: &SolutionPair) -> Result<f64> {
    let e = &pair.exponents;
    let r = (e.p + 1.0) / e.p;
    let num = integral_pow(&pair.v, e.p + 1.0).powf(1.0 / r);
    let den = lp_norm(&pair.u, e.q + 1.0)?;
    if den == 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rel: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        IdentityCheck {
            lhs,
            rhs,
            rel: (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE),
        }
    }
}

/// The algebraic identities that hold at an exact solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    /// ∫v^{p+1} = ∫u^{q+1}.
    pub potential_balance: IdentityCheck,
    /// ‖(-Δ)^{-s}w‖_{p+1}^{p+1} = ‖w‖_{(q+1)/q}^{(q+1)/q}.
    pub dual_balance: IdentityCheck,
    /// Direct energy against (1 - 1/(p+1) - 1/(q+1)) Θ^{-(p+1)(q+1)/(pq-1)}.
    pub energy_closed_form: IdentityCheck,
    /// Direct energy against (1 - 1/(p+1) - 1/(q+1)) ∫ w^{(q+1)/q}.
    pub energy_shortcut: IdentityCheck,
}

impl IdentityReport {
    pub fn worst(&self) -> f64 {
        [
            self.potential_balance.rel,
            self.dual_balance.rel,
            self.energy_closed_form.rel,
            self.energy_shortcut.rel,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn identity_report(pair: &SolutionPair, basis: &SpectralBasis) -> Result<IdentityReport> {
    let e = &pair.exponents;
    let b = e.dual_exponent();
    let coef = 1.0 - 1.0 / (e.p + 1.0) - 1.0 / (e.q + 1.0);
    let tw = inverse_of(&pair.w, e.s, basis)?;
    let theta = theta_quotient(&pair.w, e, basis)?;
    let direct = energy(pair);
    let w_int = integral_pow(&pair.w, b);
    Ok(IdentityReport {
        potential_balance: IdentityCheck::new(integral_pow(&pair.v, e.p + 1.0), integral_pow(&pair.u, e.q + 1.0)),
        dual_balance: IdentityCheck::new(lp_norm(&tw, e.p + 1.0)?.powf(e.p + 1.0), w_int),
        energy_closed_form: IdentityCheck::new(
            direct,
            coef * theta.powf(-(e.p + 1.0) * (e.q + 1.0) / (e.p * e.q - 1.0)),
        ),
        energy_shortcut: IdentityCheck::new(direct, coef * w_int),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_epsilon_examples() {
        let q0 = solve_q_epsilon(2.5, 2, 0.5, 0.0).unwrap();
        assert!((q0 - 11.0 / 3.0).abs() < 1e-13);
        let q = solve_q_epsilon(2.5, 2, 0.5, 0.05).unwrap();
        assert!((q - 103.0 / 37.0).abs() < 1e-13);
        match solve_q_epsilon(2.5, 2, 0.5, 0.1) {
            Err(Error::Exponent(msg)) => assert!(msg.contains("q >= p")),
            other => panic!("expected exponent error, got {other:?}"),
        }
        assert!(solve_q_epsilon(2.5, 2, 0.5, 1.0 / 14.0).is_ok());
    }

    #[test]
    fn alpha_beta_examples() {
        let (a, b) = alpha_beta(2.5, 103.0 / 37.0, 0.5).unwrap();
        assert!((a - 37.0 / 63.0).abs() < 1e-13);
        assert!((b - 40.0 / 63.0).abs() < 1e-13);
        let (a0, b0) = alpha_beta(2.5, 11.0 / 3.0, 0.5).unwrap();
        assert!((a0 - 3.0 / 7.0).abs() < 1e-13);
        assert!((b0 - 4.0 / 7.0).abs() < 1e-13);
        assert!(alpha_beta(0.5, 1.5, 0.5).is_err());
    }

    #[test]
    fn pair_hypotheses() {
        assert!(ExponentPair::new(0.9, 2.0, 2, 0.5).is_err());
        assert!(ExponentPair::new(2.0, 1.5, 2, 0.5).is_err());
        assert!(ExponentPair::new(4.0, 5.0, 2, 0.5).is_err());
        let c = ExponentPair::critical(2.5, 2, 0.5).unwrap();
        assert!(c.is_critical());
        assert!((c.q0() - 11.0 / 3.0).abs() < 1e-13);
        let t = ExponentPair::critical(1.0, 3, 0.5).unwrap();
        assert!((t.q - 5.0).abs() < 1e-12);
    }
}
