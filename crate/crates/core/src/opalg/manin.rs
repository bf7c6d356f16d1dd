//! The Manin property and its verification.

use super::antisym::antisymmetrizer;
use super::tensor::AuxTensor;
use crate::ctx::Ctx;
use crate::error::{Error, Result};
use crate::report::ResidualReport;
use crate::residual::{residual_aux, residual_elem};
use crate::sampling::SamplingPolicy;

/// Both characterizations of the Manin property, checked by sampling and
/// reported separately: the antisymmetrizer sandwich
/// `A M^{(1)} M^{(2)} = A M^{(1)} M^{(2)} A`, and the per-2x2-submatrix
/// relations `ad - da = cb - bc`, `ac = ca`, `bd = db`.
#[derive(Debug, Clone)]
pub struct ManinCheck {
    pub sandwich: ResidualReport,
    pub submatrix: ResidualReport,
}

impl ManinCheck {
    pub fn pass(&self) -> bool {
        self.sandwich.pass && self.submatrix.pass
    }

    pub fn max_rel(&self) -> f64 {
        self.sandwich.max_rel.max(self.submatrix.max_rel)
    }
}

/// Verify that the 1-leg `n x n` matrix `m` is a Manin matrix.
pub fn manin_check(
    ctx: &Ctx,
    m: &AuxTensor,
    id: &str,
    anchor: &str,
    policy: SamplingPolicy,
    tol: f64,
) -> Result<ManinCheck> {
    if m.legs != 1 {
        return Err(Error::Dimension("manin_check expects one aux leg".into()));
    }
    let n = m.n;

    // Sandwich form on two legs.
    let m1 = m.embed(&[0], 2)?;
    let m2 = m.embed(&[1], 2)?;
    let mm = m1.mul(ctx, &m2)?;
    let a2 = antisymmetrizer(2, n);
    let lhs = mm.mul_numeric_left(&a2);
    let rhs = lhs.mul_numeric_right(&a2);
    let mut sandwich = ResidualReport::new(
        &alloc::format!("{id}:sandwich"),
        anchor,
        tol,
        policy.seed,
    );
    residual_aux(ctx, &lhs, &rhs, policy, &mut sandwich)?;

    // Definition form, rearranged additively: ad + bc = da + cb and the
    // column commutators ac = ca, bd = db, over all 2x2 submatrices.
    let mut submatrix = ResidualReport::new(
        &alloc::format!("{id}:submatrix"),
        anchor,
        tol,
        policy.seed,
    );
    for i in 0..n {
        for k in i + 1..n {
            for j in 0..n {
                for l in j + 1..n {
                    let a = m.get(i, j);
                    let b = m.get(i, l);
                    let c = m.get(k, j);
                    let d = m.get(k, l);
                    let lhs = a.mul(ctx, d)?.add(&b.mul(ctx, c)?);
                    let rhs = d.mul(ctx, a)?.add(&c.mul(ctx, b)?);
                    residual_elem(ctx, &lhs, &rhs, policy, &mut submatrix)?;
                    residual_elem(
                        ctx,
                        &a.mul(ctx, c)?,
                        &c.mul(ctx, a)?,
                        policy,
                        &mut submatrix,
                    )?;
                    residual_elem(
                        ctx,
                        &b.mul(ctx, d)?,
                        &d.mul(ctx, b)?,
                        policy,
                        &mut submatrix,
                    )?;
                }
            }
        }
    }
    Ok(ManinCheck { sandwich, submatrix })
}
