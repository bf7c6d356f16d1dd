//! The `sl_2` elliptic Gaudin model on `(C^2)^{(x) N}`: half-currents in
//! the single dynamical variable `lambda = lambda_1 - lambda_2`, the
//! generating function `S_lambda(u)`, and its cross-check against the
//! general characteristic-polynomial pipeline.

use super::{
    char_poly_classical, classical_manin, commutator_on_projector, elems_equal_on_projector,
    GaudinModel,
};
use crate::ctx::Ctx;
use crate::error::{Error, Result};
use crate::opalg::{CoeffMat, Flavor, Mono, OperatorElem};
use crate::report::ResidualReport;
use crate::residual::residual_elem;
use crate::sampling::SamplingPolicy;
use crate::scalar::{ScalarExpr, VarId};
use crate::C64;
use ndarray::Array2;

const LAM: VarId = VarId::Lambda(0);

fn lam() -> ScalarExpr {
    ScalarExpr::var(LAM)
}

/// `(C^2)^{(x) N}` with all defining sites and the traceless projection.
pub fn sl2_model(sites: &[C64]) -> Result<GaudinModel> {
    GaudinModel::new(
        2,
        sites
            .iter()
            .map(|&v| (crate::opalg::SiteKind::Defining, v))
            .collect(),
        true,
    )
}

/// `h^+(u) = sum_s theta'(u-v_s)/theta(u-v_s) (e_11 - e_22)^{(s)}`.
pub fn h_plus(model: &GaudinModel) -> CoeffMat {
    let d = model.dim();
    let mut acc = CoeffMat::zeros(d);
    for slot in 0..model.qspace.sites.len() {
        let v = model.qspace.sites[slot].eval_point;
        let x = ScalarExpr::var(VarId::U).sub(&ScalarExpr::constant(v));
        let kernel = ScalarExpr::theta_deriv(1, x.clone()).div(&ScalarExpr::theta(x));
        let rep = &model.site_rep(slot, 0, 0) - &model.site_rep(slot, 1, 1);
        acc = acc.add(&CoeffMat(Array2::from_shape_fn((d, d), |(r, c)| {
            let w = rep[(r, c)];
            if w == C64::new(0.0, 0.0) {
                ScalarExpr::zero()
            } else {
                kernel.scale(w)
            }
        })));
    }
    acc
}

/// `e^+_lambda(u)` (sign `+1`) or `f^+_lambda(u)` (sign `-1`): the
/// off-diagonal half-currents in the single variable `lambda`.
pub fn ef_plus(model: &GaudinModel, raising: bool) -> CoeffMat {
    let d = model.dim();
    let lam_signed = if raising { lam() } else { lam().neg() };
    let (i, j) = if raising { (0, 1) } else { (1, 0) };
    let mut acc = CoeffMat::zeros(d);
    for slot in 0..model.qspace.sites.len() {
        let v = model.qspace.sites[slot].eval_point;
        let x = ScalarExpr::var(VarId::U).sub(&ScalarExpr::constant(v));
        let kernel = ScalarExpr::theta(x.add(&lam_signed))
            .div(&ScalarExpr::theta(x).mul(&ScalarExpr::theta(lam_signed.clone())));
        let rep = model.site_rep(slot, i, j);
        acc = acc.add(&CoeffMat(Array2::from_shape_fn((d, d), |(r, c)| {
            let w = rep[(r, c)];
            if w == C64::new(0.0, 0.0) {
                ScalarExpr::zero()
            } else {
                kernel.scale(w)
            }
        })));
    }
    acc
}

/// Which displayed form of the generating function to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SForm {
    /// `(d_lam - h^+/2)^2 + d_u h^+ / 2 + e^+ f^+`.
    Plain,
    /// `(d_lam - h^+/2)^2 + (e^+ f^+ + f^+ e^+)/2`.
    Symmetrized,
}

/// `S_lambda(u)` in the diff ring over `lambda`.
pub fn s_lambda(ctx: &Ctx, model: &GaudinModel, form: SForm) -> Result<OperatorElem> {
    let d = model.dim();
    let h = h_plus(model);
    let e = ef_plus(model, true);
    let f = ef_plus(model, false);
    let x = OperatorElem::from_mono(Flavor::Diff, d, Mono::lam(0, 1)).sub(
        &OperatorElem::from_coeff(Flavor::Diff, h.scale(C64::new(0.5, 0.0))),
    );
    let xx = x.mul(ctx, &x)?;
    let rest = match form {
        SForm::Plain => {
            let du_h = h.try_map(|g| g.differentiate(VarId::U))?;
            OperatorElem::from_coeff(Flavor::Diff, du_h.scale(C64::new(0.5, 0.0)))
                .add(&OperatorElem::from_coeff(Flavor::Diff, e.mul(&f)))
        }
        SForm::Symmetrized => OperatorElem::from_coeff(
            Flavor::Diff,
            e.mul(&f).add(&f.mul(&e)).scale(C64::new(0.5, 0.0)),
        ),
    };
    Ok(xx.add(&rest))
}

/// `[e^+_lambda(u), f^+_lambda(u)] = -d h^+(u)/du + (theta'(lambda)/theta(lambda))' h`
/// with `h = h_1 - h_2`.
pub fn ef_commutation_residual(
    ctx: &Ctx,
    model: &GaudinModel,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let d = model.dim();
    let e = ef_plus(model, true);
    let f = ef_plus(model, false);
    let lhs = OperatorElem::from_coeff(Flavor::Diff, e.mul(&f).add(&f.mul(&e).scale(C64::new(-1.0, 0.0))));
    let du_h = h_plus(model).try_map(|g| g.differentiate(VarId::U))?;
    let log_theta_d2 = ScalarExpr::theta_deriv(1, lam())
        .div(&ScalarExpr::theta(lam()))
        .differentiate(LAM)?;
    let h = &model.cartan(0) - &model.cartan(1);
    let rhs = OperatorElem::from_coeff(
        Flavor::Diff,
        du_h.scale(C64::new(-1.0, 0.0)).add(&CoeffMat(Array2::from_shape_fn(
            (d, d),
            |(r, c)| {
                let w = h[(r, c)];
                if w == C64::new(0.0, 0.0) {
                    ScalarExpr::zero()
                } else {
                    log_theta_d2.scale(w)
                }
            },
        ))),
    );
    let mut rep = ResidualReport::new(id, "sl2-currents", tol, policy.seed);
    residual_elem(ctx, &lhs, &rhs, policy, &mut rep)?;
    Ok(rep)
}

/// The two displayed forms of `S_lambda(u)` agree modulo the Cartan
/// ideal: their difference annihilates the zero-weight subspace.
pub fn s_forms_residual(
    ctx: &Ctx,
    model: &GaudinModel,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let (proj, dim) = model.zero_weight_projector();
    if dim == 0 {
        return Err(Error::Usage("trivial zero-weight subspace".into()));
    }
    let a = s_lambda(ctx, model, SForm::Plain)?;
    let b = s_lambda(ctx, model, SForm::Symmetrized)?;
    let mut rep = ResidualReport::new(id, "S_lambda", tol, policy.seed);
    elems_equal_on_projector(ctx, &a, &b, &proj, policy, &mut rep)?;
    Ok(rep)
}

/// `[S_lambda(u), S_lambda(v)] = 0 mod A h` on the zero-weight subspace.
pub fn s_commutativity_residual(
    ctx: &Ctx,
    model: &GaudinModel,
    uv: (C64, C64),
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let (proj, dim) = model.zero_weight_projector();
    if dim == 0 {
        return Err(Error::Usage("trivial zero-weight subspace".into()));
    }
    let s = s_lambda(ctx, model, SForm::Plain)?;
    let fix = |x: C64| -> Result<OperatorElem> {
        s.try_map_coeffs(|f| f.subst_var(VarId::U, &ScalarExpr::constant(x)))
    };
    let su = fix(uv.0)?;
    let sv = fix(uv.1)?;
    let mut rep = ResidualReport::new(id, "S_lambda", tol, policy.seed);
    commutator_on_projector(ctx, &su, &sv, &proj, policy, &mut rep)?;
    Ok(rep)
}

/// Restrict a diff-ring element over `(lambda_1, lambda_2)` to the
/// antidiagonal: `d/dlam_1 -> d/dlam`, `d/dlam_2 -> -d/dlam`,
/// coefficients at `lambda_2 = 0` (they depend on `lambda_12` only).
pub fn restrict_antidiagonal(e: &OperatorElem) -> Result<OperatorElem> {
    let mut out = OperatorElem::zero(e.flavor, e.qdim);
    for (mono, cm) in &e.terms {
        let a = mono.dlam[0];
        let b = mono.dlam[1];
        let mut m2 = *mono;
        m2.dlam[0] = a + b;
        m2.dlam[1] = 0;
        let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
        let cm2 = cm.try_map(|f| f.subst_var(VarId::Lambda(1), &ScalarExpr::zero()))?;
        out = out.add(&OperatorElem::from_term(
            e.flavor,
            cm2.scale(C64::new(sign, 0.0)),
            m2,
        ));
    }
    Ok(out)
}

/// Cross-check of the general pipeline against the displayed `sl_2`
/// generating function: on the zero-weight subspace
/// `s_1 = -theta'(lambda)/theta(lambda) h` and `s_2 = -S_lambda(u)`.
pub fn pipeline_crosscheck_residual(
    ctx: &Ctx,
    model: &GaudinModel,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let (proj, dim) = model.zero_weight_projector();
    if dim == 0 {
        return Err(Error::Usage("trivial zero-weight subspace".into()));
    }
    let d = model.dim();
    let l = model.l_operator(ctx);
    let coeffs = char_poly_classical(ctx, &classical_manin(&l))?;
    let mut rep = ResidualReport::new(id, "chpolGaudin-sl2", tol, policy.seed);

    let s1 = restrict_antidiagonal(&coeffs[&1])?;
    let h = &model.cartan(0) - &model.cartan(1);
    let kernel = ScalarExpr::theta_deriv(1, lam()).div(&ScalarExpr::theta(lam()));
    let want1 = OperatorElem::from_coeff(
        Flavor::Diff,
        CoeffMat(Array2::from_shape_fn((d, d), |(r, c)| {
            let w = h[(r, c)];
            if w == C64::new(0.0, 0.0) {
                ScalarExpr::zero()
            } else {
                kernel.scale(-w)
            }
        })),
    );
    elems_equal_on_projector(ctx, &s1, &want1, &proj, policy, &mut rep)?;

    let s2 = restrict_antidiagonal(&coeffs[&2])?;
    let want2 = s_lambda(ctx, model, SForm::Plain)?.scale(C64::new(-1.0, 0.0));
    elems_equal_on_projector(ctx, &s2, &want2, &proj, policy, &mut rep)?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{Evaluator, Point};
    use num_complex::ComplexFloat;

    fn ctx2() -> Ctx {
        Ctx::standard(2).unwrap()
    }

    fn two_sites() -> GaudinModel {
        sl2_model(&[C64::new(0.1, 0.0), C64::new(0.45, 0.0)]).unwrap()
    }

    #[test]
    fn empty_model_s_is_dsquared() {
        let ctx = ctx2();
        let model = sl2_model(&[]).unwrap();
        let s = s_lambda(&ctx, &model, SForm::Plain).unwrap();
        assert_eq!(s.terms.len(), 1);
        let (mono, cm) = s.terms.iter().next().unwrap();
        assert_eq!(*mono, Mono::lam(0, 2));
        assert!(cm.0[(0, 0)].is_const_one());
    }

    #[test]
    fn zero_weight_dims() {
        // (C^2)^{x2} traceless: dim 2; a single site has none.
        let (_, d2) = two_sites().zero_weight_projector();
        assert_eq!(d2, 2);
        let single = sl2_model(&[C64::new(0.1, 0.0)]).unwrap();
        let (_, d1) = single.zero_weight_projector();
        assert_eq!(d1, 0);
        let four = sl2_model(&[
            C64::new(0.1, 0.0),
            C64::new(0.45, 0.0),
            C64::new(-0.21, 0.0),
            C64::new(0.3, 0.2),
        ])
        .unwrap();
        let (_, d4) = four.zero_weight_projector();
        assert_eq!(d4, 6);
    }

    #[test]
    fn current_commutation() {
        let ctx = ctx2();
        let rep = ef_commutation_residual(&ctx, &two_sites(), SamplingPolicy::new(5, 31), 1e-10, "sl2:ef")
            .unwrap();
        assert!(rep.pass, "residual {}", rep.max_rel);
    }

    #[test]
    fn forms_agree_on_w() {
        let ctx = ctx2();
        let rep = s_forms_residual(&ctx, &two_sites(), SamplingPolicy::new(6, 32), 1e-9, "sl2:forms")
            .unwrap();
        assert!(rep.pass, "residual {}", rep.max_rel);
    }

    #[test]
    fn s_commutes_on_w() {
        let ctx = ctx2();
        let rep = s_commutativity_residual(
            &ctx,
            &two_sites(),
            (C64::new(0.21, 0.04), C64::new(-0.17, 0.08)),
            SamplingPolicy::new(5, 33),
            1e-8,
            "sl2:SS",
        )
        .unwrap();
        assert!(rep.pass, "residual {}", rep.max_rel);
    }

    #[test]
    fn pipeline_matches_display() {
        let ctx = ctx2();
        let rep = pipeline_crosscheck_residual(
            &ctx,
            &two_sites(),
            SamplingPolicy::new(5, 34),
            1e-8,
            "sl2:pipeline",
        )
        .unwrap();
        assert!(rep.pass, "residual {}", rep.max_rel);
    }

    #[test]
    fn h_plus_single_site_diagonal() {
        let ctx = ctx2();
        let single = sl2_model(&[C64::new(0.1, 0.0)]).unwrap();
        let h = h_plus(&single);
        let u0 = C64::new(0.3, 0.07);
        let pt = Point::new().set(VarId::U, u0);
        let mut ev = Evaluator::new(&ctx, &pt);
        let m = h.eval(&mut ev).unwrap();
        let x = u0 - C64::new(0.1, 0.0);
        let want = crate::theta::theta_deriv(1, x, &ctx.ell).unwrap()
            / crate::theta::theta(x, &ctx.ell).unwrap();
        assert!((m[(0, 0)] - want).abs() < 1e-13);
        assert!((m[(1, 1)] + want).abs() < 1e-13);
    }
}
