use flowbox_core::dynsys::builtin;
use flowbox_core::varfit::{fit, gradient_check, random_field, FitConfig, Optimizer};
use proptest::prelude::*;

fn non_increasing(h: &[f64]) -> bool {
    h.windows(2).all(|w| w[1] <= w[0])
}

/// Mean cosine between fitted and analytic gradients over interior nodes, maximised over
/// the labelling of the two coordinates.
fn ar_direction_cosine(r: &flowbox_core::FitResult) -> f64 {
    let g = r.field.gradients();
    let (mut same, mut swapped, mut count) = (0.0, 0.0, 0.0);
    for node in 0..r.field.node_count() {
        if !r.field.is_interior(node) {
            continue;
        }
        let x = r.field.node_coords(node);
        let a1 = [1.0 / (3.0 * (x[0] + x[1])); 2];
        let a2 = [1.0 / (8.0 * (x[0] - x[1])), -1.0 / (8.0 * (x[0] - x[1]))];
        let cos = |u: &[f64], v: &[f64]| (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
        same += cos(&g[0][node], &a1) + cos(&g[1][node], &a2);
        swapped += cos(&g[0][node], &a2) + cos(&g[1][node], &a1);
        count += 2.0;
    }
    same.max(swapped) / count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn momentum_descent_is_monotone(seed in 0u64..1000) {
        let vf = builtin("linear-ar").unwrap();
        let cfg = FitConfig { optimizer: Optimizer::Momentum, iterations: 200, seed, ..FitConfig::default() };
        let r = fit(&vf, &[4.0, 1.0], &[6.0, 3.0], &[12, 12], &cfg).unwrap();
        prop_assert!(non_increasing(&r.loss_history));
    }

    #[test]
    fn lm_descent_is_monotone(seed in 0u64..1000) {
        let vf = builtin("appendix").unwrap();
        let cfg = FitConfig { seed, ..FitConfig::default() };
        let r = fit(&vf, &[0.5, -1.0], &[1.5, 1.0], &[16, 16], &cfg).unwrap();
        for level in &r.levels {
            prop_assert!(non_increasing(&level.loss_history));
        }
    }

    #[test]
    fn gradient_matches_finite_differences(seed in 0u64..1000) {
        let vf = builtin("limit-cycle").unwrap();
        let y = random_field(&[0.2, 0.3], &[1.1, 1.0], &[7, 6], 2, seed).unwrap();
        prop_assert!(gradient_check(&y, &vf, &FitConfig::default(), 20, seed).unwrap() <= 1e-5);
    }
}

#[test]
fn identical_configs_give_identical_histories() {
    let vf = builtin("linear-ar").unwrap();
    let cfg = FitConfig { seed: 11, ..FitConfig::default() };
    let a = fit(&vf, &[4.0, 1.0], &[6.0, 3.0], &[16, 16], &cfg).unwrap();
    let b = fit(&vf, &[4.0, 1.0], &[6.0, 3.0], &[16, 16], &cfg).unwrap();
    assert_eq!(a.loss_history.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.loss_history.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.field, b.field);
}

#[test]
fn fit_recovers_analytic_directions() {
    let vf = builtin("linear-ar").unwrap();
    let r = fit(&vf, &[4.0, 1.0], &[6.0, 3.0], &[32, 32], &FitConfig::default()).unwrap();
    assert!(!r.flagged, "{:?}", r.diagnostics);
    assert!(ar_direction_cosine(&r) >= 0.99);
}

#[test]
fn singular_patch_is_flagged() {
    let vf = builtin("linear-ar").unwrap();
    let r = fit(&vf, &[2.5, 2.5], &[3.0, 3.0], &[32, 32], &FitConfig::default()).unwrap();
    assert!(r.diagnostics.degenerate && r.flagged);
}

#[test]
fn single_iteration_run() {
    let vf = builtin("linear-ar").unwrap();
    let cfg = FitConfig { iterations: 1, ..FitConfig::default() };
    for optimizer in [Optimizer::Momentum, Optimizer::LevenbergMarquardt] {
        let r = fit(&vf, &[4.0, 1.0], &[6.0, 3.0], &[16, 16], &FitConfig { optimizer, ..cfg.clone() }).unwrap();
        assert_eq!(r.loss_history.len(), 1, "{optimizer:?}");
    }
}
