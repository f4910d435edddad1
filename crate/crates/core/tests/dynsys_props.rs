use flowbox_core::dynsys::{builtin, parse_system, BUILTINS};
use flowbox_core::expr::{indexed_names, parse, BinOp, Expr, Func};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-5.0f64..5.0).prop_map(Expr::Const),
        (0usize..3).prop_map(Expr::Var),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp)], inner.clone())
                .prop_map(|(f, e)| Expr::Call(f, Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Atan2(Box::new(a), Box::new(b))),
            (
                prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)],
                inner.clone(),
                inner,
            )
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn close(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_then_parse_preserves_values(e in expr(), pts in prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 100)) {
        let names = indexed_names("x", 3);
        let text = e.render(&names);
        let back = parse(&text, &names).unwrap();
        for p in &pts {
            match (e.eval(p), back.eval(p)) {
                (Ok(a), Ok(b)) => prop_assert!(close(a, b), "{text}: {a} vs {b}"),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{text}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn fd_jacobian_matches_analytic(x1 in 0.3f64..2.5, x2 in -2.5f64..2.5) {
        for info in BUILTINS {
            let f = builtin(info.name).unwrap();
            let x: Vec<f64> = if f.dim() == 1 { vec![x1] } else { vec![x1, x2] };
            if let Some(jac) = f.analytic_jacobian(&x) {
                let fd = f.jacobian_fd(&x, 1e-5).unwrap();
                for (ra, rf) in jac.iter().zip(&fd) {
                    for (a, b) in ra.iter().zip(rf) {
                        prop_assert!((a - b).abs() <= 1e-6, "{}: {a} vs {b}", info.name);
                    }
                }
            }
        }
    }
}

#[test]
fn listed_equilibria_are_equilibria() {
    for info in BUILTINS {
        let f = builtin(info.name).unwrap();
        for eq in f.equilibria() {
            assert!(f.is_equilibrium(eq, 1e-12).unwrap(), "{} at {eq:?}", info.name);
        }
    }
}

#[test]
fn parsed_system_matches_builtin() {
    let parsed = parse_system("x1, -x2 + x1^2", 2).unwrap();
    let reference = builtin("appendix").unwrap();
    for x in [[0.5, 1.0], [1.0, 1.0], [-1.5, 0.25]] {
        assert_eq!(parsed.eval(&x).unwrap(), reference.eval(&x).unwrap());
    }
}
