//! Noncommutative operator rings over coefficient functions, with the
//! tensor-leg calculus: embeddings, antisymmetrizers, partial traces and
//! column determinants.

mod antisym;
mod det;
mod elem;
mod manin;
mod mono;
mod qspace;
mod tensor;

pub use antisym::{a_block, antisymmetrizer, antisymmetrizer_recursive, embed_numeric};
pub use det::column_det;
pub use elem::{CoeffMat, OperatorElem};
pub use manin::{manin_check, ManinCheck};
pub use mono::{Flavor, Mono};
pub use qspace::{QuantumSpace, Site, SiteKind};
pub use tensor::{AuxTensor, ScalarTensor};

use crate::ctx::Ctx;
use crate::scalar::{ScalarExpr, VarId};
use alloc::vec::Vec;
use ndarray::Array2;

/// `sum_{l in legs} D^{(l)}` as a diff-ring operator tensor: the diagonal
/// matrix of derivations `d/d lambda_(leg digit)` over a `qdim`-dimensional
/// quantum space.
pub fn d_hat_legs(n: usize, total_legs: usize, legs: &[usize], qdim: usize) -> AuxTensor {
    let mut t = AuxTensor::zero(n, total_legs, Flavor::Diff, qdim);
    let dim = t.dim();
    for r in 0..dim {
        let digits = crate::linalg::digits(r, n, total_legs);
        let mut acc = OperatorElem::zero(Flavor::Diff, qdim);
        for &l in legs {
            acc = acc.add(&OperatorElem::from_mono(Flavor::Diff, qdim, Mono::lam(digits[l], 1)));
        }
        *t.get_mut(r, r) = acc;
    }
    t
}

/// Block-diagonal substitution `lambda_k -> lambda_k + hbar * w_k` on the
/// joint weight eigenspaces of a quantum space: entry `(i, j)` of `f` is
/// shifted by the weight of basis column `j`.  Exact because the Cartan
/// elements are diagonal integers on the tensor basis.
pub fn weight_shift_substitute(
    ctx: &Ctx,
    f: &Array2<ScalarExpr>,
    qspace: &QuantumSpace,
    sign: i32,
) -> Array2<ScalarExpr> {
    Array2::from_shape_fn(f.dim(), |(i, j)| {
        let e = &f[(i, j)];
        if e.is_const_zero() {
            return e.clone();
        }
        let w = qspace.weights(j);
        let shifts: Vec<(VarId, i32)> = (0..qspace.n)
            .filter(|&k| w[k] != 0)
            .map(|k| (VarId::Lambda(k as u8), sign * w[k]))
            .collect();
        e.substitute_shift_many(ctx, &shifts)
    })
}
