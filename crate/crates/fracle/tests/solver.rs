mod common;

use fracle::fractional::apply_inverse;
use fracle::lane_emden::{identity_report, solve_ground_state, theta_quotient};
use fracle::{build_basis, BoxDomain, Error, ExponentPair, Grid, SolverOptions};

fn square_setup(k: usize, m: usize) -> (fracle::SpectralBasis, Grid) {
    let d = BoxDomain::unit(2, 0.5).unwrap();
    (build_basis(&d, &[k, k]).unwrap(), Grid::uniform(&d, m).unwrap())
}

#[test]
fn identities_and_ascent_at_convergence() {
    let (b, g) = square_setup(16, 32);
    let e = ExponentPair::from_epsilon(2.5, 2, 0.5, 0.04).unwrap();
    let (pair, rep) = solve_ground_state(&e, &b, &g, None, &SolverOptions::default()).unwrap();
    let ids = identity_report(&pair, &b).unwrap();
    assert!(ids.worst() < 1e-6, "{ids:?}");
    for w in rep.theta_history.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-12));
    }
    assert!(rep.residual < 1e-7 && rep.equation_residual < 1e-6);
    assert!((rep.mu - rep.theta.powf(e.p + 1.0)).abs() < 1e-12 * rep.mu);
    assert!(pair.u.min() >= 0.0 && pair.v.min() >= 0.0);
}

#[test]
fn square_solution_is_dihedral_and_peaks_at_center() {
    let (b, g) = square_setup(24, 48);
    let e = ExponentPair::from_epsilon(2.5, 2, 0.5, 0.06).unwrap();
    let (pair, rep) = solve_ground_state(&e, &b, &g, None, &SolverOptions::default()).unwrap();
    assert_eq!(rep.symmetry.reflections, vec![0, 1]);
    assert_eq!(rep.symmetry.swaps, vec![(0, 1)]);
    let (idx, _) = pair.u.argmax();
    // even grid: the maximum sits on one of the four central nodes
    assert!(idx.iter().all(|&i| i == 23 || i == 24));
    let v = pair.v.values();
    for i in 0..48 {
        for j in 0..48 {
            assert!((v[[i, j]] - v[[j, i]]).abs() <= 1e-10 * pair.v.max());
            assert!((v[[i, j]] - v[[47 - i, j]]).abs() <= 1e-10 * pair.v.max());
        }
    }
}

#[test]
fn small_instance_matches_gradient_ascent() {
    let (b, g) = square_setup(4, 8);
    let e = ExponentPair::from_epsilon(2.5, 2, 0.5, 0.04).unwrap();
    let (_, rep) = solve_ground_state(&e, &b, &g, None, &SolverOptions::default()).unwrap();
    let oracle = common::projected_gradient_theta(&e, &b, &g, 6, 4000, 7);
    assert!(((rep.theta - oracle) / oracle).abs() < 1e-4, "{} vs {oracle}", rep.theta);
}

#[test]
fn coarse_grid_matches_gradient_ascent() {
    let (b, g) = square_setup(12, 24);
    let e = ExponentPair::from_epsilon(2.5, 2, 0.5, 0.06).unwrap();
    let (_, rep) = solve_ground_state(&e, &b, &g, None, &SolverOptions::default()).unwrap();
    let oracle = common::projected_gradient_theta(&e, &b, &g, 3, 3000, 11);
    assert!(((rep.theta - oracle) / oracle).abs() < 1e-3, "{} vs {oracle}", rep.theta);
}

#[test]
fn symmetric_system_is_self_consistent() {
    let (b, g) = square_setup(12, 24);
    let e = ExponentPair::new(2.5, 2.5, 2, 0.5).unwrap();
    let (pair, _) = solve_ground_state(&e, &b, &g, None, &SolverOptions::default()).unwrap();
    let scale = pair.u.max();
    for (a, c) in pair.u.values().iter().zip(pair.v.values()) {
        assert!((a - c).abs() < 1e-6 * scale);
    }
    // u = (-Δ)^{-s}((-Δ)^{-s} u^q)^q
    let inner = apply_inverse(&pair.u.map(|x| x.powf(e.q)).unwrap(), e.s, &b).unwrap();
    let outer = apply_inverse(&inner.map(|x| x.max(0.0).powf(e.q)).unwrap(), e.s, &b).unwrap();
    for (a, c) in outer.values().iter().zip(pair.u.values()) {
        assert!((a - c).abs() < 1e-6 * scale);
    }
}

#[test]
fn solver_value_dominates_random_fields() {
    let (b, g) = square_setup(12, 24);
    let e = ExponentPair::from_epsilon(2.5, 2, 0.5, 0.06).unwrap();
    let (_, rep) = solve_ground_state(&e, &b, &g, None, &SolverOptions::default()).unwrap();
    for f in common::random_positive_fields(&g, 20, 3) {
        assert!(theta_quotient(&f, &e, &b).unwrap() <= rep.theta * (1.0 + 1e-12));
    }
}

#[test]
fn rescaled_maximizer_solves_the_unnormalized_equation() {
    let (b, g) = square_setup(12, 24);
    let e = ExponentPair::from_epsilon(1.5, 2, 0.5, 0.1).unwrap();
    let (pair, rep) = solve_ground_state(&e, &b, &g, None, &SolverOptions::default()).unwrap();
    assert!(rep.equation_residual < 1e-6);
    // v = (-Δ)^{-s} u^q and u = (-Δ)^{-s} v^p
    let v = apply_inverse(&pair.u.map(|x| x.powf(e.q)).unwrap(), e.s, &b).unwrap();
    let u = apply_inverse(&pair.v.map(|x| x.max(0.0).powf(e.p)).unwrap(), e.s, &b).unwrap();
    for (a, c) in v.values().iter().zip(pair.v.values()) {
        assert!((a.max(0.0) - c).abs() < 1e-6 * pair.v.max());
    }
    for (a, c) in u.values().iter().zip(pair.u.values()) {
        assert!((a - c).abs() < 1e-6 * pair.u.max());
    }
}

#[test]
fn critical_pair_is_refused() {
    let (b, g) = square_setup(4, 8);
    let e = ExponentPair::critical(2.5, 2, 0.5).unwrap();
    assert!(matches!(
        solve_ground_state(&e, &b, &g, None, &SolverOptions::default()),
        Err(Error::Exponent(_))
    ));
    let w = fracle::GridFunction::from_fn(&g, |x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])).unwrap();
    assert!(theta_quotient(&w, &e, &b).unwrap() > 0.0);
}
