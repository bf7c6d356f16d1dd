//! Sampled residual comparison of operator tensors and ring elements.
//!
//! Operator identities hold monomial-by-monomial (shift and derivative
//! monomials are independent over the coefficient functions at generic
//! `hbar`), so two tensors are compared by evaluating every normal-form
//! coefficient matrix at sampled points and taking the worst entry-wise
//! deviation, normalized as `|lhs - rhs| / (1 + max(|lhs|, |rhs|))`.

use crate::ctx::Ctx;
use crate::error::Result;
use crate::opalg::{AuxTensor, Mono, OperatorElem, ScalarTensor};
use crate::report::{mixed_rel, ResidualReport};
use crate::sampling::{Sampler, SamplingPolicy};
use crate::scalar::{draw_point, Evaluator, Point, VarId};
use crate::C64;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use ndarray::Array2;
use crate::cmath::cabs;

fn fold_mono_maps(
    a: &BTreeMap<Mono, Array2<C64>>,
    b: &BTreeMap<Mono, Array2<C64>>,
) -> (f64, f64) {
    let mut monos: BTreeSet<Mono> = BTreeSet::new();
    monos.extend(a.keys().copied());
    monos.extend(b.keys().copied());
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for m in monos {
        match (a.get(&m), b.get(&m)) {
            (Some(x), Some(y)) => {
                for (p, q) in x.iter().zip(y.iter()) {
                    diff = diff.max(cabs(p - q));
                    scale = scale.max(cabs(*p)).max(cabs(*q));
                }
            }
            (Some(x), None) | (None, Some(x)) => {
                for p in x.iter() {
                    diff = diff.max(cabs(*p));
                    scale = scale.max(cabs(*p));
                }
            }
            (None, None) => unreachable!(),
        }
    }
    (diff, scale)
}

/// Fold the residual of two operator tensors over sampled points into a
/// report.
pub fn residual_aux(
    ctx: &Ctx,
    lhs: &AuxTensor,
    rhs: &AuxTensor,
    policy: SamplingPolicy,
    rep: &mut ResidualReport,
) -> Result<()> {
    let mut vars: BTreeSet<VarId> = lhs.free_vars();
    vars.extend(rhs.free_vars());
    let vars: Vec<VarId> = vars.into_iter().collect();
    let mut sampler = Sampler::for_identity(policy, &rep.identity_id);
    for _ in 0..policy.samples {
        let ((d, s), _) = draw_point(&mut sampler, &vars, policy.max_retries, |pt| {
            let mut ev = Evaluator::new(ctx, pt);
            let a = lhs.eval_mono_coeffs(&mut ev)?;
            let b = rhs.eval_mono_coeffs(&mut ev)?;
            Ok(fold_mono_maps(&a, &b))
        })?;
        rep.record(d, mixed_rel(d, s));
    }
    Ok(())
}

/// Residual of two bare ring elements.
pub fn residual_elem(
    ctx: &Ctx,
    lhs: &OperatorElem,
    rhs: &OperatorElem,
    policy: SamplingPolicy,
    rep: &mut ResidualReport,
) -> Result<()> {
    let mut vars: BTreeSet<VarId> = lhs.free_vars();
    vars.extend(rhs.free_vars());
    let vars: Vec<VarId> = vars.into_iter().collect();
    let mut sampler = Sampler::for_identity(policy, &rep.identity_id);
    for _ in 0..policy.samples {
        let ((d, s), _) = draw_point(&mut sampler, &vars, policy.max_retries, |pt| {
            let mut ev = Evaluator::new(ctx, pt);
            let a = lhs.eval_coeffs(&mut ev)?;
            let b = rhs.eval_coeffs(&mut ev)?;
            Ok(fold_mono_maps(&a, &b))
        })?;
        rep.record(d, mixed_rel(d, s));
    }
    Ok(())
}

/// Residual of two pure-function tensors.
pub fn residual_scalar_tensor(
    ctx: &Ctx,
    lhs: &ScalarTensor,
    rhs: &ScalarTensor,
    policy: SamplingPolicy,
    rep: &mut ResidualReport,
) -> Result<()> {
    let mut vars: BTreeSet<VarId> = lhs.free_vars();
    vars.extend(rhs.free_vars());
    let vars: Vec<VarId> = vars.into_iter().collect();
    let mut sampler = Sampler::for_identity(policy, &rep.identity_id);
    for _ in 0..policy.samples {
        let ((d, s), _) = draw_point(&mut sampler, &vars, policy.max_retries, |pt| {
            let mut ev = Evaluator::new(ctx, pt);
            let a = lhs.eval(&mut ev)?;
            let b = rhs.eval(&mut ev)?;
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for (p, q) in a.iter().zip(b.iter()) {
                diff = diff.max(cabs(p - q));
                scale = scale.max(cabs(*p)).max(cabs(*q));
            }
            Ok((diff, scale))
        })?;
        rep.record(d, mixed_rel(d, s));
    }
    Ok(())
}

/// Evaluate `f` at sampled points (resampling on singularity) and fold
/// each returned `(abs, scale)` into the report.  The generic entry point
/// for checks that need custom per-point assembly.
pub fn residual_custom(
    _ctx: &Ctx,
    vars: &[VarId],
    policy: SamplingPolicy,
    rep: &mut ResidualReport,
    mut f: impl FnMut(&Point) -> Result<(f64, f64)>,
) -> Result<()> {
    let mut sampler = Sampler::for_identity(policy, &rep.identity_id);
    for _ in 0..policy.samples {
        let ((d, s), _) = draw_point(&mut sampler, vars, policy.max_retries, |pt| f(pt))?;
        rep.record(d, mixed_rel(d, s));
    }
    Ok(())
}

/// Max entry deviation and scale between two numeric matrices.
pub fn matrix_gap(a: &Array2<C64>, b: &Array2<C64>) -> (f64, f64) {
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (p, q) in a.iter().zip(b.iter()) {
        diff = diff.max(cabs(p - q));
        scale = scale.max(cabs(*p)).max(cabs(*q));
    }
    (diff, scale)
}
