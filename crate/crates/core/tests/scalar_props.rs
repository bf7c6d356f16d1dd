//! Property tests for the coefficient-function layer: symbolic
//! derivatives against finite differences, and shift/eval commutation,
//! over randomly generated expression DAGs.

use dynell_core::scalar::{Evaluator, Point, ScalarExpr, VarId};
use dynell_core::{Ctx, C64};
use num_complex::ComplexFloat;
use proptest::prelude::*;

fn ctx() -> Ctx {
    Ctx::standard(2).unwrap()
}

/// Small random expression DAGs in `u` and `lambda_1`, kept away from
/// wild growth: depth <= 4, theta arguments offset so denominators stay
/// generic.
fn arb_expr() -> impl Strategy<Value = ScalarExpr> {
    let leaf = prop_oneof![
        (-5i32..5, -5i32..5).prop_map(|(a, b)| ScalarExpr::constant(C64::new(
            a as f64 * 0.17,
            b as f64 * 0.11
        ))),
        Just(ScalarExpr::var(VarId::U)),
        Just(ScalarExpr::var(VarId::Lambda(0))),
        Just(ScalarExpr::theta(ScalarExpr::var(VarId::U))),
        Just(ScalarExpr::theta_deriv(
            1,
            ScalarExpr::var(VarId::Lambda(0))
        )),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            inner.clone().prop_map(|a| a.neg()),
            inner.clone().prop_map(|a| ScalarExpr::exp(a.scale(C64::new(0.3, 0.1)))),
            (inner.clone(), 2i32..4).prop_map(|(a, p)| a.powi(p)),
            // Quotient with a denominator bounded away from zero.
            (inner.clone(), inner).prop_map(|(a, b)| a.div(
                &b.mul(&b).add(&ScalarExpr::constant(C64::new(2.0, 0.4)))
            )),
        ]
    })
}

fn base_point() -> Point {
    Point::new()
        .set(VarId::U, C64::new(0.23, 0.07))
        .set(VarId::Lambda(0), C64::new(-0.17, 0.12))
        .set(VarId::Lambda(1), C64::new(0.31, -0.05))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_matches_finite_difference(e in arb_expr()) {
        let c = ctx();
        let d = match e.differentiate(VarId::U) {
            Ok(d) => d,
            Err(_) => return Ok(()),
        };
        let pt = base_point();
        let at = |x: C64| -> Option<C64> {
            let mut p = pt.clone();
            p.insert(VarId::U, x);
            e.eval(&c, &p).ok()
        };
        let u0 = pt.get(VarId::U).unwrap();
        let h = 1e-6;
        let (Some(fp), Some(fm), Ok(sym)) = (at(u0 + h), at(u0 - h), d.eval(&c, &pt)) else {
            return Ok(());
        };
        let fd = (fp - fm) / (2.0 * h);
        let err = (sym - fd).abs() / (1.0 + sym.abs().max(fd.abs()));
        prop_assert!(err < 1e-4, "sym {sym} vs fd {fd}");
    }

    #[test]
    fn shift_commutes_with_eval(e in arb_expr(), ku in -2i32..3, kl in -2i32..3) {
        let c = ctx();
        let shifted = e.substitute_shift_many(&c, &[(VarId::U, ku), (VarId::Lambda(0), kl)]);
        let pt = base_point();
        let mut pt2 = pt.clone();
        pt2.insert(VarId::U, pt.get(VarId::U).unwrap() + c.hbar * ku as f64);
        pt2.insert(
            VarId::Lambda(0),
            pt.get(VarId::Lambda(0)).unwrap() + c.hbar * kl as f64,
        );
        let (Ok(a), Ok(b)) = (shifted.eval(&c, &pt), e.eval(&c, &pt2)) else {
            return Ok(());
        };
        prop_assert!((a - b).abs() / (1.0 + a.abs()) < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn product_rule_in_lambda(e in arb_expr(), f in arb_expr()) {
        let c = ctx();
        let x = VarId::Lambda(0);
        let (Ok(de), Ok(df)) = (e.differentiate(x), f.differentiate(x)) else {
            return Ok(());
        };
        let lhs = match e.mul(&f).differentiate(x) {
            Ok(d) => d,
            Err(_) => return Ok(()),
        };
        let rhs = de.mul(&f).add(&e.mul(&df));
        let pt = base_point();
        let (Ok(a), Ok(b)) = (lhs.eval(&c, &pt), rhs.eval(&c, &pt)) else {
            return Ok(());
        };
        prop_assert!((a - b).abs() / (1.0 + a.abs().max(b.abs())) < 1e-11, "{a} vs {b}");
    }
}

#[test]
fn evaluator_memo_is_shared_across_expressions() {
    // Two expressions sharing a subtree evaluate it once per point; the
    // observable contract is via an opaque callback counter.
    let c = ctx();
    let (m, table) = dynell_core::scalar::opaque_matrix_fn(
        "probe",
        1,
        vec![VarId::U],
        |pt| Ok(vec![pt.get(VarId::U).unwrap() * 2.0]),
    )
    .unwrap();
    let shared = m[(0, 0)].clone();
    let a = shared.add(&ScalarExpr::one());
    let b = shared.mul(&ScalarExpr::theta(ScalarExpr::var(VarId::U)));
    let pt = Point::new().set(VarId::U, C64::new(0.31, 0.0));
    let mut ev = Evaluator::new(&c, &pt);
    ev.eval(&a).unwrap();
    ev.eval(&b).unwrap();
    assert_eq!(table.call_count(), 1);
}

#[test]
fn expression_types_are_send_sync() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<ScalarExpr>();
    assert_send_sync::<dynell_core::opalg::OperatorElem>();
    assert_send_sync::<dynell_core::opalg::AuxTensor>();
    assert_send_sync::<dynell_core::opalg::ScalarTensor>();
}

#[test]
fn opaque_cache_single_flight_under_threads() {
    use std::sync::Arc;
    let (m, table) = dynell_core::scalar::opaque_matrix_fn(
        "concurrent",
        2,
        vec![VarId::U],
        |pt| {
            // Slow enough that threads pile up on the same point.
            std::thread::sleep(std::time::Duration::from_millis(5));
            let u = pt.get(VarId::U).unwrap();
            Ok(vec![u, u * 2.0, u * 3.0, u * 4.0])
        },
    )
    .unwrap();
    let entry = Arc::new(m[(0, 1)].clone());
    let c = Arc::new(ctx());
    let mut handles = Vec::new();
    for _ in 0..4 {
        let e = entry.clone();
        let c = c.clone();
        handles.push(std::thread::spawn(move || {
            let pt = Point::new().set(VarId::U, C64::new(0.31, 0.07));
            e.eval(&c, &pt).unwrap()
        }));
    }
    let vals: Vec<C64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(table.call_count(), 1, "one flight per distinct point");
}
