use std::sync::Arc;

use flowbox_core::chart::{Chart, Surface, SurfaceSpec};
use flowbox_core::dynsys::builtin;
use flowbox_core::kef::{build_kef, kpde_residual, minimal_set, RANK_TOL};
use flowbox_core::numeric::halton;
use flowbox_core::odeint::{flow, IntegratorConfig};
use flowbox_core::Complex64;
use proptest::prelude::*;

fn tight() -> IntegratorConfig {
    IntegratorConfig {
        event_tol: 1e-15,
        ..IntegratorConfig::rk45(1e-12)
    }
}

fn chart_with(system: &str, spec: SurfaceSpec) -> Arc<Chart> {
    Arc::new(Chart::new(builtin(system).unwrap(), Surface::from_spec(&spec).unwrap(), tight()).unwrap())
}

fn chart(system: &str) -> Arc<Chart> {
    chart_with(system, SurfaceSpec::default_for(system).unwrap())
}

fn b_point(u: f64, v: f64) -> Vec<f64> {
    vec![0.4 + 2.0 * u, -2.0 + 4.0 * v]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn factor_is_flow_invariant(u in 0.0f64..1.0, v in 0.0f64..1.0, re in -1.0f64..1.0, im in -2.0f64..2.0, t in -0.5f64..0.5) {
        let ch = chart("hyperbolic-b");
        let lambda = Complex64::new(re, im);
        let phi = build_kef(ch.clone(), lambda, |tau: &[f64]| Complex64::new(1.0 + tau[0] * tau[0], tau[0]));
        let x = b_point(u, v);
        let factor = |x: &[f64]| phi.eval(x).unwrap() * (-lambda * ch.evaluate_m(x).unwrap()).exp();
        let moved = flow(ch.field(), &x, t, ch.config()).unwrap();
        prop_assert!((factor(&x) - factor(&moved)).norm() <= 1e-6);
    }

    #[test]
    fn products_solve_the_pde(u in 0.0f64..1.0, v in 0.0f64..1.0, l1 in -2.0f64..2.0, l2 in -2.0f64..2.0) {
        let ch = chart("hyperbolic-b");
        let (l1, l2) = (Complex64::new(l1, 0.5), Complex64::new(l2, 0.0));
        let p = build_kef(ch.clone(), l1, |tau: &[f64]| Complex64::new(tau[0].cos(), 0.0));
        let q = build_kef(ch.clone(), l2, |tau: &[f64]| Complex64::new(2.0 + tau[0], 0.0));
        let pq = p.product(&q);
        let x = b_point(u, v);
        let r = kpde_residual(|x: &[f64]| pq.eval(x), l1 + l2, ch.field(), &x, 1e-5).unwrap();
        prop_assert!(r.norm() <= 1e-6, "residual {r} at {x:?}");
    }
}

#[test]
fn chart_built_invariant_matches_known_one() {
    // with S = {x1 = 1, 0 < x2 < 4} the invariant x1 x2 is 4τ
    let ch = chart_with(
        "hyperbolic-b",
        SurfaceSpec::Segment {
            a: [1.0, 0.0],
            b: [1.0, 4.0],
        },
    );
    let h = build_kef(ch.clone(), Complex64::new(0.0, 0.0), |tau: &[f64]| Complex64::new(4.0 * tau[0], 0.0));
    for k in 1..=50 {
        let q = halton(k, 2);
        let x1 = 0.4 + 2.0 * q[0];
        let x = vec![x1, (0.05 + 3.9 * q[1]) / x1];
        let v = h.eval(&x).unwrap();
        assert!((v.re - x[0] * x[1]).abs() <= 1e-8, "{x:?}: {v}");
        let r = kpde_residual(|x: &[f64]| h.eval(x), h.lambda(), ch.field(), &x, 1e-5).unwrap();
        assert!(r.norm() <= 1e-6);
    }
}

#[test]
fn general_solutions_pass_their_own_residual() {
    let ch = chart("hyperbolic-b");
    for (k, lambda) in [Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0), Complex64::new(0.3, 1.0)].into_iter().enumerate() {
        let f = build_kef(ch.clone(), lambda, move |tau: &[f64]| Complex64::new((k as f64 + 1.0) * tau[0], tau[0].sin()));
        for j in 1..=20 {
            let q = halton(j, 2);
            let x = b_point(q[0], q[1]);
            let r = kpde_residual(|x: &[f64]| f.eval(x), lambda, ch.field(), &x, 1e-5).unwrap();
            assert!(r.norm() <= 1e-6, "λ={lambda} at {x:?}: {r}");
        }
    }
}

#[test]
fn minimal_sets_have_full_rank() {
    for system in ["source-a", "hyperbolic-b", "linear-ar"] {
        let ch = chart(system);
        let set = minimal_set(ch.clone()).unwrap();
        assert_eq!(set.dim(), 2);
        for k in 1..=30 {
            let q = halton(k, 2);
            let x = match system {
                "hyperbolic-b" => b_point(q[0], q[1]),
                _ => {
                    let r = 0.5 + 1.0 * q[0];
                    let a = 2.0 * std::f64::consts::PI * q[1];
                    vec![r * a.sin(), -r * a.cos()]
                }
            };
            let Ok(sample) = set.rank_at(&x) else { continue };
            assert_eq!(sample.rank, 2, "{system} at {x:?}: {:?}", sample.singular_values);
            assert!(sample.singular_values[1] >= RANK_TOL * sample.singular_values[0]);
        }
    }
}
