use std::f64::consts::PI;

use fracle::fractional::{free_kernel, g_tilde, GTildeOptions, HeatKernel};
use fracle::{analyze, build_basis, BoxDomain, EigenIndex, Error, Grid, GridFunction};
use ndarray::{Dimension, IxDyn};

fn square() -> BoxDomain {
    BoxDomain::unit(2, 0.5).unwrap()
}

#[test]
fn green_between_zero_and_free_kernel() {
    let k = HeatKernel::new(&square(), 0.5).unwrap();
    let g = k.green(&[0.5, 0.5], &[0.25, 0.5]).unwrap();
    let bound = free_kernel(&[0.5, 0.5], &[0.25, 0.5], 2, 0.5).unwrap();
    assert!((bound - 2.0 / PI).abs() < 1e-15);
    assert!(g.value > 0.0 && g.value < bound, "{g:?}");
    assert!(g.truncation_bound >= 0.0);
}

#[test]
fn regular_part_is_positive_symmetric_and_bounded() {
    let k = HeatKernel::new(&square(), 0.5).unwrap();
    let pairs = [
        ([0.3, 0.4], [0.7, 0.2]),
        ([0.1, 0.9], [0.5, 0.5]),
        ([0.05, 0.05], [0.95, 0.95]),
        ([0.45, 0.6], [0.55, 0.65]),
    ];
    for (x, y) in pairs {
        let h = k.regular_part(&x, &y).unwrap();
        let hs = k.regular_part(&y, &x).unwrap();
        let g = k.green(&x, &y).unwrap();
        let free = free_kernel(&x, &y, 2, 0.5).unwrap();
        assert!(h.value > 0.0);
        assert!((h.value - hs.value).abs() <= 1e-12 * h.value.abs());
        assert!((h.value - (free - g.value)).abs() < 1e-10, "{} vs {}", h.value, free - g.value);
    }
    // G blows up along the diagonal while H settles
    let x = [0.5, 0.5];
    let (mut gs, mut hs) = (Vec::new(), Vec::new());
    for d in [1e-1, 1e-2, 1e-3] {
        let y = [0.5 + d, 0.5];
        gs.push(k.green(&x, &y).unwrap().value);
        hs.push(k.regular_part(&x, &y).unwrap().value);
    }
    assert!(gs[2] > 50.0 * gs[0]);
    assert!((hs[2] - hs[1]).abs() < 0.01 * hs[2], "{hs:?}");
    assert!((hs[1] - hs[0]).abs() < 0.2 * hs[1], "{hs:?}");
}

#[test]
fn iterated_kernel_routes_agree_at_p_one() {
    let k = HeatKernel::new(&square(), 0.5).unwrap();
    let cubature = GTildeOptions {
        exact_at_p_one: false,
        ..GTildeOptions::default()
    };
    let x = [0.35, 0.5];
    let y = [0.6, 0.4];
    let heat = g_tilde(&x, &y, 1.0, &k, &GTildeOptions::default()).unwrap();
    let cub = g_tilde(&x, &y, 1.0, &k, &cubature).unwrap();
    let swapped = g_tilde(&y, &x, 1.0, &k, &cubature).unwrap();
    let tol = 10.0 * (cub.truncation_bound + heat.truncation_bound) + 1e-6 * heat.value;
    assert!((cub.value - heat.value).abs() < tol, "{cub:?} vs {heat:?}");
    assert!((cub.value - swapped.value).abs() < tol);
}

#[test]
fn iterated_kernel_converges_under_local_refinement() {
    let k = HeatKernel::new(&square(), 0.5).unwrap();
    let x = [0.3, 0.5];
    let y = [0.6, 0.55];
    let at_depth = |d: usize| {
        let mut o = GTildeOptions::default();
        o.cubature.max_depth = d;
        g_tilde(&x, &y, 1.5, &k, &o).unwrap().value
    };
    let reference = at_depth(16);
    let errs: Vec<f64> = [2, 4, 6, 8].iter().map(|&d| (at_depth(d) - reference).abs()).collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
    assert!(reference > 0.0);
}

#[test]
fn iterated_kernel_refuses_serrin_and_above() {
    let k = HeatKernel::new(&square(), 0.5).unwrap();
    for p in [2.0, 2.5] {
        let r = g_tilde(&[0.3, 0.3], &[0.6, 0.6], p, &k, &GTildeOptions::default());
        assert!(matches!(r, Err(Error::Regime(_))), "{r:?}");
    }
}

#[test]
fn iterated_kernel_inverts_to_green_in_the_cube() {
    // weak form on the low modes: λ_k^s <G̃(·,y), φ_k> = <G(·,y), φ_k> = λ_k^{-s} φ_k(y)
    let d = BoxDomain::unit(3, 0.5).unwrap();
    let k = HeatKernel::new(&d, 0.5).unwrap();
    let basis = build_basis(&d, &[4, 4, 4]).unwrap();
    let y = [0.5, 0.5, 0.5];
    let opts = GTildeOptions::default();
    let exact = basis.multiplier(-0.5);
    let modes: Vec<Vec<usize>> = exact.indexed_iter().map(|(i, _)| i.as_array_view().to_vec()).collect();
    let errors = |m: usize| {
        let grid = Grid::uniform(&d, m).unwrap();
        let gt = GridFunction::from_fn(&grid, |x| g_tilde(x, &y, 1.0, &k, &opts).unwrap().value).unwrap();
        let g = GridFunction::from_fn(&grid, |x| k.green(x, &y).unwrap().value).unwrap();
        let lifted = analyze(&gt, &basis).unwrap().with_multiplier(0.5);
        let direct = analyze(&g, &basis).unwrap();
        let (mut el, mut ed, mut scale) = (0.0f64, 0.0f64, 0.0f64);
        for idx in &modes {
            let ki = EigenIndex::new(idx.iter().map(|i| i + 1).collect()).unwrap();
            let e = exact[IxDyn(idx)] * basis.mode_value(&ki, &y);
            el = el.max((lifted.coefficients()[IxDyn(idx)] - e).abs());
            ed = ed.max((direct.coefficients()[IxDyn(idx)] - e).abs());
            scale = scale.max(e.abs());
        }
        (el / scale, ed / scale)
    };
    let coarse = errors(24);
    let fine = errors(48);
    // G̃ is the smoother of the two, so its side converges faster
    assert!(fine.0 < coarse.0 && fine.1 < coarse.1, "{coarse:?} -> {fine:?}");
    assert!(fine.0 < 5e-3, "{fine:?}");
}
