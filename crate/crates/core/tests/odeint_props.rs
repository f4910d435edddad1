use flowbox_core::dynsys::{builtin, BUILTINS};
use flowbox_core::odeint::{flow, IntegratorConfig, Method};
use flowbox_core::{Error, VectorField};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn scale(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(1e-3, f64::max)
}

/// Relative control only, so that the tolerance is meaningful for orbits near the origin.
fn relative(tol: f64) -> IntegratorConfig {
    IntegratorConfig {
        method: Method::Rk45 {
            abs_tol: 1e-15,
            rel_tol: tol,
        },
        ..IntegratorConfig::default()
    }
}

/// Shrinks `x` toward the origin until the orbit stays in the domain for `t` in `[-span, span]`.
fn start_point(f: &VectorField, x: &[f64], span: f64, cfg: &IntegratorConfig) -> Option<Vec<f64>> {
    let mut x: Vec<f64> = x[..f.dim()].to_vec();
    for _ in 0..8 {
        match (flow(f, &x, span, cfg), flow(f, &x, -span, cfg)) {
            (Ok(_), Ok(_)) => return Some(x),
            (Err(Error::LeftDomain { .. }), _) | (_, Err(Error::LeftDomain { .. })) => {
                x.iter_mut().for_each(|v| *v *= 0.1);
            }
            _ => return None,
        }
    }
    None
}

fn builtin_point() -> impl Strategy<Value = [f64; 2]> {
    prop::array::uniform2(0.2f64..1.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn group_property(x in builtin_point(), s in -0.3f64..0.3, t in -0.3f64..0.3) {
        let cfg = relative(TOL);
        for info in BUILTINS {
            let f = builtin(info.name).unwrap();
            let Some(x) = start_point(&f, &x, 1.0, &cfg) else { continue };
            let two = flow(&f, &flow(&f, &x, s, &cfg).unwrap(), t, &cfg).unwrap();
            let one = flow(&f, &x, s + t, &cfg).unwrap();
            prop_assert!(diff(&one, &two) <= 10.0 * TOL * scale(&one), "{}: {one:?} vs {two:?}", info.name);
        }
    }

    #[test]
    fn reversibility(x in builtin_point(), t in -0.3f64..0.3) {
        let cfg = relative(TOL);
        for info in BUILTINS {
            let f = builtin(info.name).unwrap();
            let Some(x) = start_point(&f, &x, 1.0, &cfg) else { continue };
            let back = flow(&f, &flow(&f, &x, t, &cfg).unwrap(), -t, &cfg).unwrap();
            prop_assert!(diff(&x, &back) <= 10.0 * TOL * scale(&x), "{}: {x:?} vs {back:?}", info.name);
        }
    }
}

#[test]
fn adaptive_matches_fixed_step_on_builtins() {
    let adaptive = IntegratorConfig::rk45(TOL);
    let fixed = IntegratorConfig::rk4(1e-4);
    for info in BUILTINS {
        let f = builtin(info.name).unwrap();
        for x in [[0.6, 0.3], [1.2, -0.7], [0.4, 1.1]] {
            let Some(x) = start_point(&f, &x, 1.0, &adaptive) else { continue };
            let a = flow(&f, &x, 1.0, &adaptive).unwrap();
            let b = flow(&f, &x, 1.0, &fixed).unwrap();
            assert!(diff(&a, &b) <= 1e-6, "{}: {a:?} vs {b:?}", info.name);
        }
    }
}
