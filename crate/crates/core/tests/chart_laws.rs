use flowbox_core::chart::{default_circle_param, Chart, Surface, SurfaceSpec};
use flowbox_core::dynsys::builtin;
use flowbox_core::odeint::{flow, IntegratorConfig};
use proptest::prelude::*;

fn chart(system: &str) -> Chart {
    let spec = SurfaceSpec::default_for(system).unwrap();
    Chart::new(builtin(system).unwrap(), Surface::from_spec(&spec).unwrap(), IntegratorConfig::default()).unwrap()
}

/// Sample boxes inside `Ω(S)` for each tested system.
fn sample(system: &str, u: f64, v: f64) -> Option<Vec<f64>> {
    let x = match system {
        "hyperbolic-b" => vec![0.3 + 2.5 * u, -3.0 + 6.0 * v],
        "appendix" => vec![0.5 + 1.5 * u, -2.0 + 4.0 * v],
        "source-a" | "linear-ar" => vec![-2.0 + 4.0 * u, -2.0 + 4.0 * v],
        _ => unreachable!(),
    };
    let r = x[0].hypot(x[1]);
    if system == "source-a" || system == "linear-ar" {
        // stay off the origin and away from the cut of the circle parameter
        let cut = x[0].abs() < 0.05 && x[1] < 0.0;
        if r < 0.3 || cut {
            return None;
        }
    }
    Some(x)
}

const SYSTEMS: &[&str] = &["hyperbolic-b", "appendix", "source-a", "linear-ar"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unit_velocity_law(u in 0.0f64..1.0, v in 0.0f64..1.0) {
        for &s in SYSTEMS {
            let ch = chart(s);
            let Some(x) = sample(s, u, v) else { continue };
            let dt = 1e-3;
            let moved = flow(ch.field(), &x, dt, ch.config()).unwrap();
            let rate = (ch.evaluate_m(&moved).unwrap() - ch.evaluate_m(&x).unwrap()) / dt;
            prop_assert!((rate - 1.0).abs() <= 1e-5, "{s} at {x:?}: {rate}");
        }
    }

    #[test]
    fn invariance_law(u in 0.0f64..1.0, v in 0.0f64..1.0) {
        for &s in SYSTEMS {
            let ch = chart(s);
            let Some(x) = sample(s, u, v) else { continue };
            let h0 = ch.evaluate_h(&x).unwrap();
            for t in [0.1, 0.5, 1.0] {
                let Ok(moved) = flow(ch.field(), &x, t, ch.config()) else { continue };
                let Ok(h) = ch.evaluate_h(&moved) else { continue };
                prop_assert!((h[0] - h0[0]).abs() <= 1e-6, "{s} at {x:?}, t={t}: {h:?} vs {h0:?}");
            }
        }
    }

    #[test]
    fn chart_consistency(tau in 0.05f64..0.95, t in -0.5f64..0.5) {
        for &s in SYSTEMS {
            let ch = chart(s);
            let Ok(x) = ch.point_of(&[tau], t) else { continue };
            let z = ch.flowbox(&x).unwrap();
            prop_assert!((z[0] - tau).abs() <= 1e-6 && (z[1] - t).abs() <= 1e-6, "{s}: {z:?} vs ({tau}, {t})");
        }
    }

    #[test]
    fn round_trip_to_surface(u in 0.0f64..1.0, v in 0.0f64..1.0) {
        for &s in SYSTEMS {
            let ch = chart(s);
            let Some(x) = sample(s, u, v) else { continue };
            let p = ch.locate(&x).unwrap();
            let back = flow(ch.field(), &x, -p.m, ch.config()).unwrap();
            prop_assert!(ch.surface().level(&back).abs() <= 1e-8, "{s}: level {}", ch.surface().level(&back));
            let tau = ch.surface().param_inverse(&back);
            prop_assert!((tau[0] - p.h[0]).abs() <= 1e-8, "{s}: {tau:?} vs {:?}", p.h);
        }
    }
}

#[test]
fn chart_agrees_with_closed_forms() {
    let b = chart("hyperbolic-b");
    let a = chart("source-a");
    let mut checked = 0;
    for k in 1..=200 {
        let q = flowbox_core::numeric::halton(k, 2);
        let x = vec![0.3 + 2.5 * q[0], -3.0 + 6.0 * q[1]];
        let p = b.locate(&x).unwrap();
        assert!((p.m + x[0].ln()).abs() <= 1e-6);
        // the segment parameter is affine in the invariant x1 x2
        assert!((p.h[0] - (x[0] * x[1] + 10.0) / 20.0).abs() <= 1e-6);

        let Some(y) = sample("source-a", q[0], q[1]) else { continue };
        let p = a.locate(&y).unwrap();
        assert!((p.m - 0.5 * (y[0] * y[0] + y[1] * y[1]).ln()).abs() <= 1e-6);
        assert!((p.h[0] - default_circle_param(&y)).abs() <= 1e-6);
        checked += 1;
    }
    assert!(checked > 150);
    assert!((b.evaluate_m(&[0.5, 2.0]).unwrap() - 2f64.ln()).abs() <= 1e-6);
}
