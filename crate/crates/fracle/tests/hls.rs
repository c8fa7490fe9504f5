use fracle::fractional::free_kernel_constant;
use fracle::hls::{
    bubble, bubble_refinement, decay_fit, hls_quotient, serrin_log_integral, sharp_decay_check, FreeField,
};
use fracle::Error;
use proptest::prelude::*;

#[test]
fn bubble_study_approaches_the_oracle_from_above() {
    let levels = bubble_refinement(2, 0.5, &[4.0, 8.0, 16.0, 32.0], &[33, 65, 129, 257]).unwrap();
    let errs: Vec<f64> = levels.iter().map(|l| l.rel_error).collect();
    assert!(errs.iter().all(|&e| e >= 0.0), "{errs:?}");
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 0.01);
    let res: Vec<f64> = levels.iter().map(|l| l.residual.u.max(l.residual.v)).collect();
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    for l in &levels {
        assert!(l.residual.u <= l.residual.u_budget && l.residual.v <= l.residual.v_budget, "{l:?}");
    }
}

#[test]
fn quotient_is_nearly_dilation_invariant() {
    let pd = 3.0;
    let f = FreeField::from_fn(2, 32.0, 257, 3.0, |x| bubble(x, 0.5)).unwrap();
    let scaled = FreeField::from_fn(2, 32.0, 257, 3.0, |x| bubble(&[x[0] / 1.5, x[1] / 1.5], 0.5)).unwrap();
    let a = hls_quotient(&f, pd, pd, 0.5).unwrap();
    let b = hls_quotient(&scaled, pd, pd, 0.5).unwrap();
    // budget: coarse-to-fine change of each quotient plus the exterior share
    let coarse = |g: &FreeField| hls_quotient(&g.coarsened().unwrap(), pd, pd, 0.5).unwrap().value;
    let budget = (coarse(&f) - a.value).abs() + (coarse(&scaled) - b.value).abs() + a.exterior_fraction + b.exterior_fraction;
    assert!((a.value - b.value).abs() <= budget, "{} vs {} (budget {budget})", a.value, b.value);
}

#[test]
fn quotient_rejects_noncritical_pairs() {
    let f = FreeField::from_fn(2, 4.0, 17, 3.0, |x| bubble(x, 0.5)).unwrap();
    assert!(hls_quotient(&f, 2.0, 2.0, 0.5).is_err());
    let zero = FreeField::zeros(2, 4.0, 17).unwrap();
    assert!(matches!(hls_quotient(&zero, 3.0, 3.0, 0.5), Err(Error::ZeroInput)));
}

#[test]
fn sharp_decay_sandwich() {
    let (s, c1) = (0.5, 2.0);
    let g = free_kernel_constant(2, s).unwrap();
    let exact = FreeField::from_fn(2, 20.0, 161, 1.0, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(0.5);
        g * c1 / r
    })
    .unwrap();
    let ok = sharp_decay_check(&exact, c1, 0.25, 2.0, 0.1, 150.0, s).unwrap();
    assert!(ok.pass && ok.samples > 0);
    let doubled = exact.map(|v| 2.0 * v).unwrap();
    let bad = sharp_decay_check(&doubled, c1, 0.5, 2.0, 0.1, 150.0, s).unwrap();
    assert!(!bad.pass && bad.violations == bad.samples);
    assert!(sharp_decay_check(&exact, c1, 0.25, 2.0, 0.01, 100.0, s).is_err());
}

#[test]
fn serrin_integral_tends_to_its_constant() {
    // ṽ = g C1 |x|^{-1} outside the unit disc: (1/log R) ∫ ṽ^2 -> (g C1)^2 |S^1| as R grows
    let (s, c1) = (0.5, 1.3);
    let g = free_kernel_constant(2, s).unwrap();
    let errs: Vec<f64> = [8.0, 32.0, 128.0]
        .iter()
        .map(|&big_r| {
            let f = FreeField::from_fn(2, big_r, 257, 1.0, |x| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r <= big_r {
                    g * c1 / r.max(1.0)
                } else {
                    0.0
                }
            })
            .unwrap();
            serrin_log_integral(&f, 2.0, big_r, c1, s).unwrap().rel_error
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    let f = FreeField::from_fn(2, 4.0, 17, 1.0, |_| 1.0).unwrap();
    assert!(matches!(serrin_log_integral(&f, 2.5, 10.0, c1, s), Err(Error::Regime(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn decay_fit_ignores_amplitude(slope in 0.3f64..3.0, c in 1e-3f64..1e3) {
        let f = FreeField::from_fn(2, 16.0, 129, slope, |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(0.1);
            r.powf(-slope)
        })
        .unwrap();
        let a = decay_fit(&f, (2.0, 12.0)).unwrap();
        let b = decay_fit(&f.map(|v| c * v).unwrap(), (2.0, 12.0)).unwrap();
        prop_assert!((a.slope + slope).abs() < 1e-6);
        prop_assert!((a.slope - b.slope).abs() < 1e-12);
    }
}
