//! Column determinant of a matrix over a noncommutative ring.

use super::elem::OperatorElem;
use super::tensor::AuxTensor;
use crate::ctx::Ctx;
use crate::error::{Error, Result};
use crate::linalg::permutations_with_sign;
use crate::C64;

/// `det M = sum_sigma (-1)^sigma M_{sigma(1),1} M_{sigma(2),2} ... `
/// with factors multiplied left-to-right in the written (column) order.
/// `m` must be a 1-leg tensor, i.e. an `n x n` matrix over the ring.
pub fn column_det(ctx: &Ctx, m: &AuxTensor) -> Result<OperatorElem> {
    if m.legs != 1 {
        return Err(Error::Dimension(
            "column determinant needs an n x n matrix (one aux leg)".into(),
        ));
    }
    let n = m.n;
    let mut acc = OperatorElem::zero(m.flavor, m.qdim);
    for (sigma, sign) in permutations_with_sign(n) {
        let mut prod: Option<OperatorElem> = None;
        for (col, &row) in sigma.iter().enumerate() {
            let factor = m.get(row, col);
            prod = Some(match prod {
                None => factor.clone(),
                Some(p) => p.mul(ctx, factor)?,
            });
            if prod.as_ref().map(|p| p.is_zero()).unwrap_or(false) {
                break;
            }
        }
        if let Some(p) = prod {
            acc = acc.add(&p.scale(C64::new(sign, 0.0)));
        }
    }
    Ok(acc)
}
