//! DAG evaluation with per-point memoization and singularity guards.

use super::{Expr, Point, ScalarExpr};
use crate::ctx::Ctx;
use crate::error::{Error, Result};
use crate::cmath::{cabs, cexp};
use crate::theta;
use crate::C64;
use alloc::format;
use hashbrown::HashMap;
use num_complex::ComplexFloat;

/// Evaluates expressions at one fixed point, memoizing shared subtrees.
///
/// Guards: a `Quot` denominator smaller than `1e-280` in magnitude, or a
/// theta node *inside a denominator* whose value falls below
/// `ctx.theta_guard` (or whose argument comes within `ctx.lattice_guard`
/// of the period lattice) raise [`Error::Singularity`], which the sampling
/// layer treats as a resample signal.
pub struct Evaluator<'a> {
    pub ctx: &'a Ctx,
    pub point: &'a Point,
    memo: HashMap<(usize, bool), C64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(ctx: &'a Ctx, point: &'a Point) -> Self {
        Self { ctx, point, memo: HashMap::new() }
    }

    pub fn eval(&mut self, e: &ScalarExpr) -> Result<C64> {
        self.eval_guarded(e, false)
    }

    fn eval_guarded(&mut self, e: &ScalarExpr, in_denom: bool) -> Result<C64> {
        let key = (e0_ptr(e), in_denom);
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let v = match e.node() {
            Expr::Const(c) => *c,
            Expr::Var(v) => self
                .point
                .get(*v)
                .ok_or_else(|| super::unassigned(*v))?,
            Expr::Theta { order, arg } => {
                let a = self.eval_guarded(arg, in_denom)?;
                let val = theta::theta_deriv(*order as usize, a, &self.ctx.ell)?;
                if in_denom {
                    if theta::lattice_distance(a, self.ctx.ell.tau) < self.ctx.lattice_guard {
                        return Err(Error::Singularity(format!(
                            "theta argument {a} within lattice guard"
                        )));
                    }
                    if *order == 0 && cabs(val) < self.ctx.theta_guard {
                        return Err(Error::Singularity(format!(
                            "theta({a}) = {val} below denominator guard"
                        )));
                    }
                }
                val
            }
            Expr::Exp(arg) => cexp(self.eval_guarded(arg, in_denom)?),
            Expr::Sum(xs) => {
                let mut acc = C64::new(0.0, 0.0);
                for x in xs {
                    acc += self.eval_guarded(x, in_denom)?;
                }
                acc
            }
            Expr::Prod(xs) => {
                let mut acc = C64::new(1.0, 0.0);
                for x in xs {
                    acc *= self.eval_guarded(x, in_denom)?;
                }
                acc
            }
            Expr::Quot(a, b) => {
                let den = self.eval_guarded(b, true)?;
                if cabs(den) < 1e-280 {
                    return Err(Error::Singularity("zero denominator".into()));
                }
                self.eval_guarded(a, in_denom)? / den
            }
            Expr::Neg(a) => -self.eval_guarded(a, in_denom)?,
            Expr::IntPow(a, p) => {
                let base = self.eval_guarded(a, in_denom || *p < 0)?;
                if *p < 0 && cabs(base) < 1e-280 {
                    return Err(Error::Singularity("zero base of negative power".into()));
                }
                base.powi(*p)
            }
            Expr::Opaque(r) => r.eval(self.point)?,
        };
        self.memo.insert(key, v);
        Ok(v)
    }
}

fn e0_ptr(e: &ScalarExpr) -> usize {
    // Stable for the lifetime of the expression (Arc keeps it alive).
    e.node() as *const Expr as usize
}
