use super::*;
use crate::theta;
use num_complex::ComplexFloat;

fn ctx() -> Ctx {
    Ctx::standard(2).unwrap()
}

fn ctx_hbar(h: f64) -> Ctx {
    Ctx::standard(2).unwrap().with_hbar(C64::new(h, 0.0))
}

#[test]
fn eval_const() {
    let c = ScalarExpr::constant(C64::new(3.0, 1.0));
    let v = c.eval(&ctx(), &Point::new()).unwrap();
    assert_eq!(v, C64::new(3.0, 1.0));
}

#[test]
fn eval_theta_ratio_is_one() {
    let t = theta_of(VarId::U);
    let e = t.div(&t);
    let pt = Point::new().set(VarId::U, C64::new(0.3, 0.0));
    assert!((e.eval(&ctx(), &pt).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn eval_shifted_theta_ratio_matches_direct_composition() {
    // theta(u + hbar)/theta(u) at u = 0.25, hbar = 0.1, tau = 1.1i.
    let c = ctx_hbar(0.1);
    let num = ScalarExpr::theta(
        ScalarExpr::var(VarId::U).add(&ScalarExpr::constant(c.hbar)),
    );
    let e = num.div(&theta_of(VarId::U));
    let pt = Point::new().set(VarId::U, C64::new(0.25, 0.0));
    let got = e.eval(&c, &pt).unwrap();
    let want = theta::theta(C64::new(0.35, 0.0), &c.ell).unwrap()
        / theta::theta(C64::new(0.25, 0.0), &c.ell).unwrap();
    assert!((got - want).abs() < 1e-14);
}

#[test]
fn derivative_of_theta_at_origin() {
    let d = theta_of(VarId::U).differentiate(VarId::U).unwrap();
    let v = d
        .eval(&ctx(), &Point::new().set(VarId::U, C64::new(0.0, 0.0)))
        .unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn derivative_in_absent_variable_is_zero() {
    let e = theta_of(VarId::U).mul(&ScalarExpr::var(VarId::U).powi(3));
    let d = e.differentiate(VarId::Lambda(0)).unwrap();
    assert!(d.is_const_zero());
}

#[test]
fn log_derivative_matches_finite_difference() {
    let c = ctx();
    let e = ScalarExpr::theta_deriv(1, ScalarExpr::var(VarId::U)).div(&theta_of(VarId::U));
    let d = e.differentiate(VarId::U).unwrap();
    let u = C64::new(0.3, 0.1);
    let h = 1e-5;
    let at = |x: C64| e.eval(&c, &Point::new().set(VarId::U, x)).unwrap();
    let fd = (at(u + h) - at(u - h)) / (2.0 * h);
    let sym = d.eval(&c, &Point::new().set(VarId::U, u)).unwrap();
    assert!((sym - fd).abs() / (1.0 + sym.abs()) < 1e-6);
}

#[test]
fn shift_of_const_is_same_node() {
    let c = ScalarExpr::constant(C64::new(2.0, -1.0));
    let s = c.substitute_shift(&ctx(), VarId::U, 3);
    assert!(s.same(&c));
}

#[test]
fn shift_by_zero_is_identity() {
    let e = theta_of(VarId::U).div(&theta_of(VarId::Lambda(0)));
    let s = e.substitute_shift(&ctx(), VarId::U, 0);
    assert!(s.same(&e));
}

#[test]
fn shift_theta_then_eval() {
    let c = ctx();
    let e = theta_of(VarId::U).substitute_shift(&c, VarId::U, 1);
    let u0 = C64::new(0.21, 0.05);
    let got = e.eval(&c, &Point::new().set(VarId::U, u0)).unwrap();
    let want = theta::theta(u0 + c.hbar, &c.ell).unwrap();
    assert!((got - want).abs() < 1e-15);
}

#[test]
fn shift_commutes_with_eval_exactly() {
    let c = ctx();
    let e = theta_of(VarId::U)
        .mul(&ScalarExpr::exp(ScalarExpr::var(VarId::U)))
        .div(&theta_of(VarId::Lambda(0)));
    let shifted = e.substitute_shift_many(&c, &[(VarId::U, 2), (VarId::Lambda(0), -1)]);
    let u0 = C64::new(0.11, -0.07);
    let l0 = C64::new(0.23, 0.13);
    let a = shifted
        .eval(&c, &Point::new().set(VarId::U, u0).set(VarId::Lambda(0), l0))
        .unwrap();
    let b = e
        .eval(
            &c,
            &Point::new()
                .set(VarId::U, u0 + 2.0 * c.hbar)
                .set(VarId::Lambda(0), l0 - c.hbar),
        )
        .unwrap();
    assert!((a - b).abs() / (1.0 + a.abs()) < 1e-12);
}

#[test]
fn multiplicative_shift() {
    let c = ctx();
    let e = ScalarExpr::var(VarId::Z).powi(2);
    let s = e.substitute_shift(&c, VarId::Z, 1);
    let z0 = C64::new(0.4, 0.2);
    let got = s.eval(&c, &Point::new().set(VarId::Z, z0)).unwrap();
    let want = (z0 * c.q_squared()).powi(2);
    assert!((got - want).abs() < 1e-14);
}

#[test]
fn unassigned_variable_is_usage_error() {
    let e = theta_of(VarId::U);
    match e.eval(&ctx(), &Point::new()) {
        Err(Error::Unassigned(_)) => {}
        other => panic!("expected unassigned error, got {other:?}"),
    }
}

#[test]
fn denominator_guard_trips_near_theta_zero() {
    let c = ctx();
    let e = ScalarExpr::one().div(&theta_of(VarId::U));
    let bad = Point::new().set(VarId::U, C64::new(1e-6, 0.0));
    match e.eval(&c, &bad) {
        Err(Error::Singularity(_)) => {}
        other => panic!("expected singularity, got {other:?}"),
    }
    // Numerator position is fine even at the zero itself.
    let ok = theta_of(VarId::U)
        .eval(&c, &Point::new().set(VarId::U, C64::new(0.0, 0.0)))
        .unwrap();
    assert!(ok.abs() < 1e-15);
}

#[test]
fn opaque_identity_matrix() {
    let (m, table) = opaque_matrix_fn("id", 2, alloc::vec![VarId::U], |_pt| {
        Ok(alloc::vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0)
        ])
    })
    .unwrap();
    let c = ctx();
    let pt = Point::new().set(VarId::U, C64::new(0.3, 0.0));
    let mut ev = Evaluator::new(&c, &pt);
    for i in 0..2 {
        for j in 0..2 {
            let v = ev.eval(&m[(i, j)]).unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-15);
        }
    }
    assert_eq!(table.call_count(), 1, "joint evaluation must be cached");
}

fn sample_matrix(l: C64) -> [C64; 4] {
    // Invertible 2x2 function of lambda_1.
    [
        C64::new(1.0, 0.0) + l,
        C64::new(0.2, 0.1),
        l * l,
        C64::new(2.0, -0.3),
    ]
}

#[test]
fn opaque_inverse_times_matrix_is_identity() {
    let (inv, _) = opaque_matrix_fn("inv", 2, alloc::vec![VarId::Lambda(0)], |pt| {
        let l = pt.get(VarId::Lambda(0)).unwrap();
        let [a, b, c, d] = sample_matrix(l);
        let det = a * d - b * c;
        Ok(alloc::vec![d / det, -b / det, -c / det, a / det])
    })
    .unwrap();
    let c = ctx();
    let l = C64::new(0.31, -0.12);
    let pt = Point::new().set(VarId::Lambda(0), l);
    let mut ev = Evaluator::new(&c, &pt);
    let m = sample_matrix(l);
    // (inv * M) == 1.
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..2 {
                acc += ev.eval(&inv[(i, k)]).unwrap() * m[k * 2 + j];
            }
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((acc - want).abs() < 1e-12, "entry ({i},{j}) = {acc}");
        }
    }
}

#[test]
fn shifted_opaque_equals_opaque_at_shifted_point() {
    let (inv, _) = opaque_matrix_fn("inv", 2, alloc::vec![VarId::Lambda(0)], |pt| {
        let l = pt.get(VarId::Lambda(0)).unwrap();
        let [a, b, c, d] = sample_matrix(l);
        let det = a * d - b * c;
        Ok(alloc::vec![d / det, -b / det, -c / det, a / det])
    })
    .unwrap();
    let c = ctx();
    let shifted = inv[(0, 0)].substitute_shift(&c, VarId::Lambda(0), 1);
    let l = C64::new(0.17, 0.09);
    let a = shifted
        .eval(&c, &Point::new().set(VarId::Lambda(0), l))
        .unwrap();
    let b = inv[(0, 0)]
        .eval(&c, &Point::new().set(VarId::Lambda(0), l + c.hbar))
        .unwrap();
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn opaque_differentiation_is_capability_error() {
    let (m, _) = opaque_matrix_fn("id", 1, alloc::vec![VarId::U], |_pt| {
        Ok(alloc::vec![C64::new(1.0, 0.0)])
    })
    .unwrap();
    match m[(0, 0)].differentiate(VarId::U) {
        Err(Error::Capability(_)) => {}
        other => panic!("expected capability error, got {other:?}"),
    }
    // Differentiating in a variable the opaque does not read gives zero.
    let d = m[(0, 0)].differentiate(VarId::V).unwrap();
    assert!(d.is_const_zero());
}

#[test]
fn expr_equal_structural() {
    let c = ctx();
    let e = theta_of(VarId::U).div(&theta_of(VarId::Lambda(0)));
    let rep = expr_equal_numeric(&c, &e, &e.clone(), SamplingPolicy::new(8, 5)).unwrap();
    assert_eq!(rep.max_abs, 0.0);
}

#[test]
fn expr_equal_periodicity() {
    let c = ctx();
    let lhs = ScalarExpr::theta(ScalarExpr::var(VarId::U).add(&ScalarExpr::one()));
    let rhs = theta_of(VarId::U).neg();
    let rep = expr_equal_numeric(&c, &lhs, &rhs, SamplingPolicy::new(16, 5)).unwrap();
    assert!(rep.max_rel < 1e-10, "residual {}", rep.max_rel);
}

#[test]
fn expr_equal_commuting_coefficients() {
    let c = ctx();
    let a = theta_of(VarId::U).mul(&ScalarExpr::theta_deriv(1, ScalarExpr::var(VarId::V)));
    let b = ScalarExpr::theta_deriv(1, ScalarExpr::var(VarId::V)).mul(&theta_of(VarId::U));
    let rep = expr_equal_numeric(&c, &a, &b, SamplingPolicy::new(8, 9)).unwrap();
    assert!(rep.max_rel < 1e-12);
}

#[test]
fn free_vars_cover_opaque_bindings() {
    let (m, _) = opaque_matrix_fn("f", 1, alloc::vec![VarId::U, VarId::Lambda(1)], |pt| {
        Ok(alloc::vec![pt.get(VarId::U).unwrap() + pt.get(VarId::Lambda(1)).unwrap()])
    })
    .unwrap();
    let e = m[(0, 0)].mul(&theta_of(VarId::V));
    let vars = e.free_vars();
    assert!(vars.contains(&VarId::U));
    assert!(vars.contains(&VarId::Lambda(1)));
    assert!(vars.contains(&VarId::V));
}
