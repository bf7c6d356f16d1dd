//! Dynamical elliptic L-operators, the Manin matrices they induce, the
//! commuting trace family `t_m(u)`, the quantum characteristic
//! polynomial, quantum powers and Newton identities, and the exact
//! trace-exchange identity behind commutativity.

use crate::ctx::Ctx;
use crate::error::{Error, Result};
use crate::felder::{felder_r, trig_r, trig_twist_g, RKind};
use crate::linalg;
use crate::opalg::{
    a_block, antisymmetrizer, column_det, manin_check, AuxTensor, CoeffMat, Flavor, ManinCheck,
    Mono, OperatorElem, QuantumSpace, ScalarTensor,
};
use crate::report::ResidualReport;
use crate::residual::{matrix_gap, residual_aux, residual_custom, residual_elem};
use crate::sampling::SamplingPolicy;
use crate::scalar::{opaque_matrix_fn, Evaluator, ScalarExpr, VarId};
use crate::C64;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use ndarray::Array2;

/// An `n x n` matrix over the shift ring satisfying the dynamical RLL
/// relation, with Cartan elements given by the integer weights of its
/// quantum space.  The spectral variable is `U` (or `Z` for the
/// trigonometric variant).
#[derive(Debug, Clone)]
pub struct DynamicalLOperator {
    pub n: usize,
    pub qspace: QuantumSpace,
    /// One aux leg, shift flavor, `qdim = qspace.dim()`; entries carry no
    /// shift monomials (those enter through `L_D` and the Manin matrix).
    pub body: AuxTensor,
    pub spectral: VarId,
}

/// Which basic L-operator to build from the R-matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LopRole {
    /// `L(u) = R(u - v; lambda)` with the second space as the quantum
    /// space.
    SecondSpace,
    /// `L(u) = R^{(21)}(v - u; lambda)^{-1}`, realized by pointwise
    /// inversion.
    Inverse,
}

impl DynamicalLOperator {
    /// The body with the spectral variable substituted.
    pub fn at(&self, spectral: &ScalarExpr) -> Result<AuxTensor> {
        self.body.try_map_entries(|e| {
            e.try_map_coeffs(|f| f.subst_var(self.spectral, spectral))
        })
    }

    /// Cartan element `h_k` as a numeric diagonal on the quantum space.
    pub fn cartan(&self, k: usize) -> Array2<C64> {
        let d = self.qspace.dim();
        let mut m = Array2::from_elem((d, d), C64::new(0.0, 0.0));
        for b in 0..d {
            m[(b, b)] = C64::new(self.qspace.weights(b)[k] as f64, 0.0);
        }
        m
    }
}

/// `L(u) = R(u - v; lambda)` (or its inverse variant) on one defining
/// site at `v`.
pub fn lop_from_r(ctx: &Ctx, v: C64, role: LopRole) -> Result<DynamicalLOperator> {
    let n = ctx.n;
    let qspace = QuantumSpace::defining(n, v);
    let mut body = AuxTensor::zero(n, 1, Flavor::Shift, n);
    match role {
        LopRole::SecondSpace => {
            let r = felder_r(
                ctx,
                &ScalarExpr::var(VarId::U).sub(&ScalarExpr::constant(v)),
            );
            for i in 0..n {
                for j in 0..n {
                    let cm = CoeffMat(Array2::from_shape_fn((n, n), |(a, b)| {
                        r.entries[(i * n + a, j * n + b)].clone()
                    }));
                    if !cm.is_zero() {
                        *body.get_mut(i, j) = OperatorElem::from_coeff(Flavor::Shift, cm);
                    }
                }
            }
        }
        LopRole::Inverse => {
            // R^{(21)}(v - u; lambda)^{-1}, inverted pointwise under the
            // condition-number guard.
            let r21 = felder_r(
                ctx,
                &ScalarExpr::constant(v).sub(&ScalarExpr::var(VarId::U)),
            )
            .permute_legs(&[1, 0]);
            let mut vars = alloc::vec![VarId::U];
            vars.extend(VarId::lambdas(n));
            let ctx_c = *ctx;
            let (inv, _) = opaque_matrix_fn("R21-inverse", n * n, vars, move |pt| {
                let mut ev = Evaluator::new(&ctx_c, pt);
                let m = r21.eval(&mut ev)?;
                let inv = linalg::inverse_guarded(&m, ctx_c.cond_limit)?;
                Ok(inv.iter().copied().collect())
            })?;
            for i in 0..n {
                for j in 0..n {
                    let cm = CoeffMat(Array2::from_shape_fn((n, n), |(a, b)| {
                        inv[(i * n + a, j * n + b)].clone()
                    }));
                    *body.get_mut(i, j) = OperatorElem::from_coeff(Flavor::Shift, cm);
                }
            }
        }
    }
    Ok(DynamicalLOperator { n, qspace, body, spectral: VarId::U })
}

/// Fusion (matrix product with the dynamical shift):
/// `L(u) = L2(u; lambda) L1(u; lambda + hbar h^2)` over the joined
/// quantum space; Cartan weights add.
pub fn fuse(
    ctx: &Ctx,
    l2: &DynamicalLOperator,
    l1: &DynamicalLOperator,
) -> Result<DynamicalLOperator> {
    if l1.n != l2.n {
        return Err(Error::Dimension("rank mismatch in fusion".into()));
    }
    let n = l1.n;
    let q1 = &l1.qspace;
    let q2 = &l2.qspace;
    let (d1, d2) = (q1.dim(), q2.dim());
    let fused_q = q1.tensor(q2);
    let lift1 = |e: &OperatorElem| -> OperatorElem {
        // Left factor of the quantum tensor product, with
        // lambda -> lambda + hbar * w2(column of the second factor).
        let mut out = OperatorElem::zero(Flavor::Shift, d1 * d2);
        for (mono, cm) in &e.terms {
            let big = CoeffMat(Array2::from_shape_fn(
                (d1 * d2, d1 * d2),
                |(r, c)| {
                    let (r1, r2) = (r / d2, r % d2);
                    let (c1, c2) = (c / d2, c % d2);
                    if r2 != c2 {
                        return ScalarExpr::zero();
                    }
                    let f = &cm.0[(r1, c1)];
                    if f.is_const_zero() {
                        return f.clone();
                    }
                    let w = q2.weights(c2);
                    let shifts: Vec<(VarId, i32)> = (0..n)
                        .filter(|&k| w[k] != 0)
                        .map(|k| (VarId::Lambda(k as u8), w[k]))
                        .collect();
                    f.substitute_shift_many(ctx, &shifts)
                },
            ));
            out = out.add(&OperatorElem::from_term(Flavor::Shift, big, *mono));
        }
        out
    };
    let lift2 = |e: &OperatorElem| -> OperatorElem {
        let mut out = OperatorElem::zero(Flavor::Shift, d1 * d2);
        for (mono, cm) in &e.terms {
            let big = CoeffMat(Array2::from_shape_fn(
                (d1 * d2, d1 * d2),
                |(r, c)| {
                    let (r1, r2) = (r / d2, r % d2);
                    let (c1, c2) = (c / d2, c % d2);
                    if r1 != c1 {
                        ScalarExpr::zero()
                    } else {
                        cm.0[(r2, c2)].clone()
                    }
                },
            ));
            out = out.add(&OperatorElem::from_term(Flavor::Shift, big, *mono));
        }
        out
    };
    let mut body = AuxTensor::zero(n, 1, Flavor::Shift, d1 * d2);
    for i in 0..n {
        for j in 0..n {
            let mut acc = OperatorElem::zero(Flavor::Shift, d1 * d2);
            for k in 0..n {
                let a = l2.body.get(i, k);
                let b = l1.body.get(k, j);
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                acc = acc.add(&lift2(a).mul(ctx, &lift1(b))?);
            }
            *body.get_mut(i, j) = acc;
        }
    }
    Ok(DynamicalLOperator { n, qspace: fused_q, body, spectral: VarId::U })
}

/// The diagonal shift `e^{-hbar D^{(leg)}}` on `total` aux legs: entry
/// `(r, r)` carries `e^{-hbar d/d lambda_(digit)}` for the leg's digit.
pub fn d_shift_leg(n: usize, total: usize, leg: usize, qdim: usize) -> AuxTensor {
    let mut t = AuxTensor::zero(n, total, Flavor::Shift, qdim);
    for r in 0..t.dim() {
        let d = linalg::digits(r, n, total);
        *t.get_mut(r, r) = OperatorElem::from_mono(Flavor::Shift, qdim, Mono::lam(d[leg], -1));
    }
    t
}

/// The aux-diagonal of `e^{-hbar D_lambda}` on the single Manin-matrix
/// leg (row `i` carries `e^{-hbar d/d lambda_i}`).
fn d_shift_single(n: usize, qdim: usize) -> AuxTensor {
    d_shift_leg(n, 1, 0, qdim)
}

/// `M = e^{-hbar D_lambda} L(u; lambda) e^{hbar d/du}`.
pub fn manin_from_lop(ctx: &Ctx, l: &DynamicalLOperator) -> Result<AuxTensor> {
    let qdim = l.qspace.dim();
    let left = d_shift_single(l.n, qdim);
    let right = {
        let mut t = AuxTensor::zero(l.n, 1, Flavor::Shift, qdim);
        for r in 0..l.n {
            *t.get_mut(r, r) = OperatorElem::from_mono(Flavor::Shift, qdim, Mono::u(1));
        }
        t
    };
    left.mul(ctx, &l.body)?.mul(ctx, &right)
}

/// Pointwise inverse of the L-operator body as an opaque matrix over
/// aux (x) quantum.
pub fn lop_inverse_opaque(ctx: &Ctx, l: &DynamicalLOperator) -> Result<AuxTensor> {
    let n = l.n;
    let qdim = l.qspace.dim();
    let dim = n * qdim;
    let body = l.body.clone();
    let mut vars = alloc::vec![l.spectral];
    vars.extend(VarId::lambdas(n));
    let ctx_c = *ctx;
    let (inv, _) = opaque_matrix_fn("L-inverse", dim, vars, move |pt| {
        let mut ev = Evaluator::new(&ctx_c, pt);
        let m = body.eval_numeric(&mut ev)?;
        let inv = linalg::inverse_guarded(&m, ctx_c.cond_limit)?;
        Ok(inv.iter().copied().collect())
    })?;
    let mut out = AuxTensor::zero(n, 1, Flavor::Shift, qdim);
    for i in 0..n {
        for j in 0..n {
            let cm = CoeffMat(Array2::from_shape_fn((qdim, qdim), |(a, b)| {
                inv[(i * qdim + a, j * qdim + b)].clone()
            }));
            *out.get_mut(i, j) = OperatorElem::from_coeff(Flavor::Shift, cm);
        }
    }
    Ok(out)
}

/// `M^{-1} = e^{-hbar d/du} L(u;lambda)^{-1} e^{hbar D_lambda}`.
pub fn manin_inverse_from_lop(ctx: &Ctx, l: &DynamicalLOperator) -> Result<AuxTensor> {
    let qdim = l.qspace.dim();
    let linv = lop_inverse_opaque(ctx, l)?;
    let mut left = AuxTensor::zero(l.n, 1, Flavor::Shift, qdim);
    for r in 0..l.n {
        *left.get_mut(r, r) = OperatorElem::from_mono(Flavor::Shift, qdim, Mono::u(-1));
    }
    let mut right = AuxTensor::zero(l.n, 1, Flavor::Shift, qdim);
    for r in 0..l.n {
        *right.get_mut(r, r) = OperatorElem::from_mono(Flavor::Shift, qdim, Mono::lam(r, 1));
    }
    left.mul(ctx, &linv)?.mul(ctx, &right)
}

/// Residual of the dynamical RLL relation for `l` against the Felder
/// R-matrix.
pub fn rll_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = ctx.n;
    let qdim = l.qspace.dim();
    let r12 = felder_r(ctx, &ScalarExpr::var(VarId::U).sub(&ScalarExpr::var(VarId::V)));
    let l1_u = l.body.embed(&[0], 2)?;
    let l2_v = l.at(&ScalarExpr::var(VarId::V))?.embed(&[1], 2)?;
    let lhs = r12
        .to_aux(Flavor::Shift, qdim)
        .mul(ctx, &l1_u.shift_lambda_by_legs(ctx, &[1], 1))?
        .mul(ctx, &l2_v)?;
    let rhs = l2_v
        .shift_lambda_by_legs(ctx, &[0], 1)
        .mul(ctx, &l1_u)?
        .mul(ctx, &r12.to_aux_weight_shifted(ctx, Flavor::Shift, &l.qspace, 1))?;
    let mut rep = ResidualReport::new(id, "DRLL", tol, policy.seed);
    residual_aux(ctx, &lhs, &rhs, policy, &mut rep)?;
    let _ = n;
    Ok(rep)
}

/// Symmetric RLL form for `L_D(u) = e^{-hbar D_lambda} L(u;lambda)`.
pub fn rll_sym_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let qdim = l.qspace.dim();
    let r12 = felder_r(ctx, &ScalarExpr::var(VarId::U).sub(&ScalarExpr::var(VarId::V)));
    let ld1 = d_shift_leg(ctx.n, 2, 0, qdim).mul(ctx, &l.body.embed(&[0], 2)?)?;
    let ld2 = d_shift_leg(ctx.n, 2, 1, qdim)
        .mul(ctx, &l.at(&ScalarExpr::var(VarId::V))?.embed(&[1], 2)?)?;
    let lhs = r12.to_aux(Flavor::Shift, qdim).mul(ctx, &ld1)?.mul(ctx, &ld2)?;
    let rhs = ld2
        .mul(ctx, &ld1)?
        .mul(ctx, &r12.to_aux_weight_shifted(ctx, Flavor::Shift, &l.qspace, 1))?;
    let mut rep = ResidualReport::new(id, "RLLSym", tol, policy.seed);
    residual_aux(ctx, &lhs, &rhs, policy, &mut rep)?;
    Ok(rep)
}

/// `(E_ii + h_i) L = L (E_ii + h_i)` for every `i`.
pub fn ehl_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = l.n;
    let qdim = l.qspace.dim();
    let mut rep = ResidualReport::new(id, "EhL_LEh", tol, policy.seed);
    for i in 0..n {
        let aux = AuxTensor::from_numeric(n, 1, Flavor::Shift, qdim, &linalg::e_matrix(n, i, i));
        let mut quantum = AuxTensor::zero(n, 1, Flavor::Shift, qdim);
        for r in 0..n {
            *quantum.get_mut(r, r) = OperatorElem::from_coeff(
                Flavor::Shift,
                CoeffMat::from_numeric(&l.cartan(i)),
            );
        }
        let x = aux.add(&quantum);
        let lhs = x.mul(ctx, &l.body)?;
        let rhs = l.body.mul(ctx, &x)?;
        residual_aux(ctx, &lhs, &rhs, policy, &mut rep)?;
    }
    Ok(rep)
}

/// The staircase block
/// `L^{[m_from, m_to]} = prod_i e^{-hbar D^{(i)}} L^{(i)}(base + hbar (i - m_from); lambda)`
/// over legs `m_from..m_to` (0-based) of `total` legs.
pub fn l_block(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    m_from: usize,
    m_to: usize,
    total: usize,
    base: VarId,
) -> Result<AuxTensor> {
    let qdim = l.qspace.dim();
    let mut acc = AuxTensor::identity(l.n, total, Flavor::Shift, qdim);
    for leg in m_from..m_to {
        let spectral = ScalarExpr::var(base)
            .add(&ScalarExpr::constant(ctx.hbar * (leg - m_from) as f64));
        let factor = l.at(&spectral)?.embed(&[leg], total)?;
        let d = d_shift_leg(l.n, total, leg, qdim);
        acc = acc.mul(ctx, &d)?.mul(ctx, &factor)?;
    }
    Ok(acc)
}

/// `t_m(u) = tr(A^{[0,m]} L-block)`, an element of the shift ring over
/// the quantum space; `t_0 = 1`.
pub fn t_m(ctx: &Ctx, l: &DynamicalLOperator, m: usize) -> Result<OperatorElem> {
    let qdim = l.qspace.dim();
    if m == 0 {
        return Ok(OperatorElem::identity(Flavor::Shift, qdim));
    }
    let block = l_block(ctx, l, 0, m, m, VarId::U)?;
    let a = antisymmetrizer(m, l.n);
    Ok(block.mul_numeric_left(&a).trace_full().prune(ctx))
}

/// Coefficients of `det(1 - M)` grouped by the power of
/// `e^{hbar d/du}`: key `m` holds the coefficient of `e^{m hbar d/du}`.
pub fn char_poly(ctx: &Ctx, l: &DynamicalLOperator) -> Result<BTreeMap<usize, OperatorElem>> {
    let qdim = l.qspace.dim();
    let m = manin_from_lop(ctx, l)?;
    let one = AuxTensor::identity(l.n, 1, Flavor::Shift, qdim);
    let det = column_det(ctx, &one.sub(&m))?.prune(ctx);
    let mut out: BTreeMap<usize, OperatorElem> = BTreeMap::new();
    for (mono, cm) in det.terms {
        let mut stripped = mono;
        let power = stripped.du;
        stripped.du = 0;
        if power < 0 {
            return Err(Error::Usage("negative u-shift power in char poly".into()));
        }
        let entry = out
            .entry(power as usize)
            .or_insert_with(|| OperatorElem::zero(Flavor::Shift, qdim));
        *entry = entry.add(&OperatorElem::from_term(Flavor::Shift, cm, stripped));
    }
    Ok(out)
}

/// `det(1-M) = sum_m (-1)^m t_m(u) e^{m hbar d/du}`, coefficient-wise.
pub fn char_poly_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let coeffs = char_poly(ctx, l)?;
    let mut rep = ResidualReport::new(id, "det_gener", tol, policy.seed);
    for m in 0..=l.n {
        let got = coeffs
            .get(&m)
            .cloned()
            .unwrap_or_else(|| OperatorElem::zero(Flavor::Shift, l.qspace.dim()));
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let want = t_m(ctx, l, m)?.scale(C64::new(sign, 0.0));
        residual_elem(ctx, &got, &want, policy, &mut rep)?;
    }
    Ok(rep)
}

/// `det M = tr(A^{[0,n]} M^{(1)} ... M^{(n)})` for the Manin matrix `M`.
pub fn det_tra_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = l.n;
    let m = manin_from_lop(ctx, l)?;
    let det = column_det(ctx, &m)?.prune(ctx);
    let mut prod = AuxTensor::identity(n, n, Flavor::Shift, l.qspace.dim());
    for leg in 0..n {
        prod = prod.mul(ctx, &m.embed(&[leg], n)?)?;
    }
    let traced = prod
        .mul_numeric_left(&antisymmetrizer(n, n))
        .trace_full()
        .prune(ctx);
    let mut rep = ResidualReport::new(id, "det_trA", tol, policy.seed);
    residual_elem(ctx, &det, &traced, policy, &mut rep)?;
    Ok(rep)
}

/// `[h_k, t_m(u)] = 0` for all `k`, `m <= n`.
pub fn ht_th_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let mut rep = ResidualReport::new(id, "ht_th", tol, policy.seed);
    for m in 1..=l.n {
        let t = t_m(ctx, l, m)?;
        for k in 0..l.n {
            let h = l.cartan(k);
            let lhs = t.qmul_left(&h);
            let rhs = t.qmul_right(&h);
            residual_elem(ctx, &lhs, &rhs, policy, &mut rep)?;
        }
    }
    Ok(rep)
}

/// The fused R block `R^{[m,N]}(u; v; lambda)` at staircase points, as an
/// ordered factor list (products are folded on demand).
pub struct FusedRBlock {
    pub n: usize,
    pub m: usize,
    pub big_n: usize,
    factors: Vec<ScalarTensor>,
}

/// Factor ordering of the two equivalent product formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseOrder {
    /// Rows first: increasing `i` outside, decreasing `j` inside.
    RowsFirst,
    /// Columns first: decreasing `j` outside, increasing `i` inside.
    ColsFirst,
}

pub fn fused_r_block(ctx: &Ctx, m: usize, big_n: usize, order: FuseOrder) -> Result<FusedRBlock> {
    if m == 0 || big_n <= m {
        return Err(Error::Usage("fused block needs 0 < m < N".into()));
    }
    let n = ctx.n;
    let factor = |i: usize, j: usize| -> Result<ScalarTensor> {
        // 0-based i in 0..m, j in m..N; staircase
        // u_i - v_j = u - v + hbar (i - j + m).
        let offset = i as i32 - j as i32 + m as i32;
        let spectral = ScalarExpr::var(VarId::U)
            .sub(&ScalarExpr::var(VarId::V))
            .add(&ScalarExpr::constant(ctx.hbar * offset as f64));
        let base = felder_r(ctx, &spectral).embed(&[i, j], big_n)?;
        let mut legs: Vec<usize> = (i + 1..m).collect();
        legs.extend(j + 1..big_n);
        Ok(base.shift_lambda_by_legs(ctx, &legs, 1))
    };
    let mut factors = Vec::new();
    match order {
        FuseOrder::RowsFirst => {
            for i in 0..m {
                for j in (m..big_n).rev() {
                    factors.push(factor(i, j)?);
                }
            }
        }
        FuseOrder::ColsFirst => {
            for j in (m..big_n).rev() {
                for i in 0..m {
                    factors.push(factor(i, j)?);
                }
            }
        }
    }
    Ok(FusedRBlock { n, m, big_n, factors })
}

impl FusedRBlock {
    pub fn eval(&self, ev: &mut Evaluator) -> Result<Array2<C64>> {
        let mut acc = linalg::identity(self.n.pow(self.big_n as u32));
        for f in &self.factors {
            acc = acc.dot(&f.eval(ev)?);
        }
        Ok(acc)
    }

    /// Symbolic product of all factors.
    pub fn symbolic(&self) -> ScalarTensor {
        let mut acc = ScalarTensor::identity(self.n, self.big_n);
        for f in &self.factors {
            acc = acc.mul(f);
        }
        acc
    }

    /// `R^{[m,N]}(u;v;lambda)^{-1}` as an opaque operator tensor over a
    /// quantum space of dimension `qdim`.
    pub fn inverse_opaque(&self, ctx: &Ctx, qdim: usize) -> Result<AuxTensor> {
        let dim = self.n.pow(self.big_n as u32);
        let mut vars = alloc::vec![VarId::U, VarId::V];
        vars.extend(VarId::lambdas(self.n));
        let ctx_c = *ctx;
        let factors: Vec<ScalarTensor> = self.factors.clone();
        let nn = self.n;
        let legs = self.big_n;
        let (inv, _) = opaque_matrix_fn("fusedR-inverse", dim, vars, move |pt| {
            let mut ev = Evaluator::new(&ctx_c, pt);
            let mut acc = linalg::identity(nn.pow(legs as u32));
            for f in &factors {
                acc = acc.dot(&f.eval(&mut ev)?);
            }
            let inv = linalg::inverse_guarded(&acc, ctx_c.cond_limit)?;
            Ok(inv.iter().copied().collect())
        })?;
        let mut out = AuxTensor::zero(self.n, self.big_n, Flavor::Shift, qdim);
        for r in 0..dim {
            for c in 0..dim {
                *out.get_mut(r, c) =
                    OperatorElem::from_scalar(Flavor::Shift, qdim, &inv[(r, c)]);
            }
        }
        Ok(out)
    }
}

/// Ordering consistency of the two fused-product formulas.
pub fn fused_ordering_residual(
    ctx: &Ctx,
    m: usize,
    big_n: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let rows = fused_r_block(ctx, m, big_n, FuseOrder::RowsFirst)?;
    let cols = fused_r_block(ctx, m, big_n, FuseOrder::ColsFirst)?;
    let mut rep = ResidualReport::new(id, "RprRi=RprRj", tol, policy.seed);
    let mut vars = alloc::vec![VarId::U, VarId::V];
    vars.extend(VarId::lambdas(ctx.n));
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let a = rows.eval(&mut ev)?;
        let b = cols.eval(&mut ev)?;
        Ok(matrix_gap(&a, &b))
    })?;
    Ok(rep)
}

/// Sandwich identities `A R = A R A` and `A R^{-1} = A R^{-1} A` for both
/// antisymmetrizer blocks `A^{[0,m]}` and `A^{[m,N]}`.
pub fn ar_ara_residual(
    ctx: &Ctx,
    m: usize,
    big_n: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let block = fused_r_block(ctx, m, big_n, FuseOrder::RowsFirst)?;
    let a_low = a_block(0, m, ctx.n, big_n);
    let a_high = a_block(m, big_n, ctx.n, big_n);
    let mut rep = ResidualReport::new(id, "AR_ARA", tol, policy.seed);
    let mut vars = alloc::vec![VarId::U, VarId::V];
    vars.extend(VarId::lambdas(ctx.n));
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let r = block.eval(&mut ev)?;
        let rinv = linalg::inverse_guarded(&r, ctx.cond_limit)?;
        let mut worst = (0.0f64, 0.0f64);
        for a in [&a_low, &a_high] {
            for mat in [&r, &rinv] {
                let am = a.dot(mat);
                let (d, s) = matrix_gap(&am, &am.dot(a));
                worst = (worst.0.max(d), worst.1.max(s));
            }
        }
        Ok(worst)
    })?;
    Ok(rep)
}

/// Sandwich identity for ordered staircase products of the L-operator:
/// `A^{[m,N]} prod L^{(i)} = A^{[m,N]} prod L^{(i)} A^{[m,N]}`.
pub fn alll_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    m_from: usize,
    big_n: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let qdim = l.qspace.dim();
    let mut prod = AuxTensor::identity(l.n, big_n, Flavor::Shift, qdim);
    for leg in m_from..big_n {
        let spectral = ScalarExpr::var(VarId::U)
            .add(&ScalarExpr::constant(ctx.hbar * (leg - m_from) as f64));
        let legs_after: Vec<usize> = (leg + 1..big_n).collect();
        let factor = l
            .at(&spectral)?
            .embed(&[leg], big_n)?
            .shift_lambda_by_legs(ctx, &legs_after, 1);
        prod = prod.mul(ctx, &factor)?;
    }
    let a = a_block(m_from, big_n, l.n, big_n);
    let lhs = prod.mul_numeric_left(&a);
    let rhs = lhs.mul_numeric_right(&a);
    let mut rep = ResidualReport::new(id, "ALLL_ALLLA", tol, policy.seed);
    residual_aux(ctx, &lhs, &rhs, policy, &mut rep)?;
    Ok(rep)
}

/// The inverse variant: reversed-order product of pointwise inverses.
pub fn alll_inv_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    m_from: usize,
    big_n: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let qdim = l.qspace.dim();
    let linv = lop_inverse_opaque(ctx, l)?;
    let mut prod = AuxTensor::identity(l.n, big_n, Flavor::Shift, qdim);
    for leg in (m_from..big_n).rev() {
        let spectral = ScalarExpr::var(VarId::V)
            .add(&ScalarExpr::constant(ctx.hbar * (leg - m_from) as f64));
        let legs_after: Vec<usize> = (leg + 1..big_n).collect();
        let factor = linv
            .try_map_entries(|e| e.try_map_coeffs(|f| f.subst_var(VarId::U, &spectral)))?
            .embed(&[leg], big_n)?
            .shift_lambda_by_legs(ctx, &legs_after, 1);
        prod = prod.mul(ctx, &factor)?;
    }
    let a = a_block(m_from, big_n, l.n, big_n);
    let lhs = prod.mul_numeric_left(&a);
    let rhs = lhs.mul_numeric_right(&a);
    let mut rep = ResidualReport::new(id, "ALLL_ALLLA_inv", tol, policy.seed);
    residual_aux(ctx, &lhs, &rhs, policy, &mut rep)?;
    Ok(rep)
}

/// Fused RLL commutation at the staircase:
/// `R^{[m,N]}(lambda - hbar sum E^{(l)}) L^{[0,m]}(u) L^{[m,N]}(v)
///  = L^{[m,N]}(v) L^{[0,m]}(u) R^{[m,N]}(lambda + hbar h)`.
pub fn dre_ll_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    m: usize,
    big_n: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let qdim = l.qspace.dim();
    let block = fused_r_block(ctx, m, big_n, FuseOrder::RowsFirst)?.symbolic();
    let all_legs: Vec<usize> = (0..big_n).collect();
    let r_minus = block
        .shift_lambda_by_legs(ctx, &all_legs, -1)
        .to_aux(Flavor::Shift, qdim);
    let r_h = block.to_aux_weight_shifted(ctx, Flavor::Shift, &l.qspace, 1);
    let lu = l_block(ctx, l, 0, m, big_n, VarId::U)?;
    let lv = l_block(ctx, l, m, big_n, big_n, VarId::V)?;
    let lhs = r_minus.mul(ctx, &lu)?.mul(ctx, &lv)?;
    let rhs = lv.mul(ctx, &lu)?.mul(ctx, &r_h)?;
    let mut rep = ResidualReport::new(id, "DReLLeLL", tol, policy.seed);
    residual_aux(ctx, &lhs, &rhs, policy, &mut rep)?;
    Ok(rep)
}

/// The exact trace-exchange identity:
/// `tr(A A L^{[0,m]}(u) L^{[m,N]}(v)) =
///  tr(A A L^{[m,N]}(v) L^{[0,m]}(u) R^{[m,N]}(lambda+hbar h) R^{[m,N]}(lambda)^{-1})`.
pub fn trace_exchange_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    m: usize,
    s: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let big_n = m + s;
    if big_n > 4 {
        return Err(Error::Usage("trace exchange capped at N <= 4".into()));
    }
    let qdim = l.qspace.dim();
    let aa = a_block(0, m, l.n, big_n).dot(&a_block(m, big_n, l.n, big_n));
    let lu = l_block(ctx, l, 0, m, big_n, VarId::U)?;
    let lv = l_block(ctx, l, m, big_n, big_n, VarId::V)?;
    let lhs = lu
        .mul(ctx, &lv)?
        .mul_numeric_left(&aa)
        .trace_full()
        .prune(ctx);
    let block = fused_r_block(ctx, m, big_n, FuseOrder::RowsFirst)?;
    let r_h = block
        .symbolic()
        .to_aux_weight_shifted(ctx, Flavor::Shift, &l.qspace, 1);
    let r_inv = block.inverse_opaque(ctx, qdim)?;
    let rhs = lv
        .mul(ctx, &lu)?
        .mul(ctx, &r_h)?
        .mul(ctx, &r_inv)?
        .mul_numeric_left(&aa)
        .trace_full()
        .prune(ctx);
    let mut rep = ResidualReport::new(id, "tt_tt0", tol, policy.seed);
    residual_elem(ctx, &lhs, &rhs, policy, &mut rep)?;
    Ok(rep)
}

/// `L_D^{[k]}(u) = L_D(u) L_D(u+hbar) ... L_D(u+(k-1)hbar)`.
pub fn quantum_power(ctx: &Ctx, l: &DynamicalLOperator, k: usize) -> Result<AuxTensor> {
    let qdim = l.qspace.dim();
    let mut acc = AuxTensor::identity(l.n, 1, Flavor::Shift, qdim);
    for j in 0..k {
        let spectral =
            ScalarExpr::var(VarId::U).add(&ScalarExpr::constant(ctx.hbar * j as f64));
        let ld = d_shift_single(l.n, qdim).mul(ctx, &l.at(&spectral)?)?;
        acc = acc.mul(ctx, &ld)?;
    }
    Ok(acc)
}

/// `M^k = L_D^{[k]}(u) e^{k hbar d/du}` for `k <= up_to_k`.
pub fn quantum_power_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    up_to_k: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let qdim = l.qspace.dim();
    let m = manin_from_lop(ctx, l)?;
    let mut rep = ResidualReport::new(id, "quantum-powers", tol, policy.seed);
    let mut mk = AuxTensor::identity(l.n, 1, Flavor::Shift, qdim);
    for k in 0..=up_to_k {
        if k > 0 {
            mk = mk.mul(ctx, &m)?;
        }
        let mut ushift = AuxTensor::zero(l.n, 1, Flavor::Shift, qdim);
        for r in 0..l.n {
            *ushift.get_mut(r, r) =
                OperatorElem::from_mono(Flavor::Shift, qdim, Mono::u(k as i32));
        }
        let rhs = quantum_power(ctx, l, k)?.mul(ctx, &ushift)?;
        residual_aux(ctx, &mk, &rhs, policy, &mut rep)?;
    }
    Ok(rep)
}

/// Newton identities
/// `m q_m = sum_{k=0}^{m-1} (-1)^{m+k+1} q_k tr(M^{m-k})` with
/// `q_m = tr(A^{[0,m]} M^{(1)} ... M^{(m)})`, up to `m = up_to_m`
/// (which may exceed `n`, where `q_m = 0`).
pub fn newton_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    up_to_m: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let qdim = l.qspace.dim();
    let m = manin_from_lop(ctx, l)?;
    // q_m via antisymmetrized embedded products.
    let mut qs: Vec<OperatorElem> = alloc::vec![OperatorElem::identity(Flavor::Shift, qdim)];
    for mm in 1..=up_to_m {
        // Antisymmetrizer first: for mm > n it is the zero projector and
        // the whole product short-circuits; otherwise its sparsity keeps
        // the chain small.
        let mut prod = AuxTensor::from_numeric(
            l.n,
            mm,
            Flavor::Shift,
            qdim,
            &antisymmetrizer(mm, l.n),
        );
        for leg in 0..mm {
            prod = prod.mul(ctx, &m.embed(&[leg], mm)?)?;
        }
        qs.push(prod.trace_full().prune(ctx));
    }
    // tr(M^j).
    let mut traces: Vec<OperatorElem> = alloc::vec![OperatorElem::zero(Flavor::Shift, qdim)];
    let mut mk = m.clone();
    for j in 1..=up_to_m {
        traces.push(mk.trace_full().prune(ctx));
        if j < up_to_m {
            mk = mk.mul(ctx, &m)?;
        }
    }
    let mut rep = ResidualReport::new(id, "q_mdef", tol, policy.seed);
    for mm in 1..=up_to_m {
        let lhs = qs[mm].scale(C64::new(mm as f64, 0.0));
        let mut rhs = OperatorElem::zero(Flavor::Shift, qdim);
        for k in 0..mm {
            let sign = if (mm + k + 1) % 2 == 0 { 1.0 } else { -1.0 };
            rhs = rhs.add(
                &qs[k]
                    .mul(ctx, &traces[mm - k])?
                    .scale(C64::new(sign, 0.0)),
            );
        }
        residual_elem(ctx, &lhs, &rhs.prune(ctx), policy, &mut rep)?;
    }
    Ok(rep)
}

/// Manin checks for the L-operator family (reported by the caller).
pub fn manin_of_lop(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    id: &str,
    policy: SamplingPolicy,
    tol: f64,
) -> Result<ManinCheck> {
    let m = manin_from_lop(ctx, l)?;
    manin_check(ctx, &m, id, "AMM_AMMA", policy, tol)
}

/// `M M^{-1} = M^{-1} M = 1` for the explicit inverse.
pub fn manin_inverse_residual(
    ctx: &Ctx,
    l: &DynamicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let qdim = l.qspace.dim();
    let m = manin_from_lop(ctx, l)?;
    let minv = manin_inverse_from_lop(ctx, l)?;
    let one = AuxTensor::identity(l.n, 1, Flavor::Shift, qdim);
    let mut rep = ResidualReport::new(id, "MDLopIn", tol, policy.seed);
    residual_aux(ctx, &m.mul(ctx, &minv)?, &one, policy, &mut rep)?;
    residual_aux(ctx, &minv.mul(ctx, &m)?, &one, policy, &mut rep)?;
    Ok(rep)
}

/// Trigonometric L-operator `L(z) = R_trig(z, z2)` (quantum space = the
/// second leg) and its Manin matrix `M = L(z) q^{2 z d/dz}`.
pub fn trig_lop_body(ctx: &Ctx, kind: RKind) -> AuxTensor {
    let n = ctx.n;
    let r = trig_r(ctx, kind, &ScalarExpr::var(VarId::Z), &ScalarExpr::var(VarId::Z2));
    let mut body = AuxTensor::zero(n, 1, Flavor::Shift, n);
    for i in 0..n {
        for j in 0..n {
            let cm = CoeffMat(Array2::from_shape_fn((n, n), |(a, b)| {
                r.entries[(i * n + a, j * n + b)].clone()
            }));
            if !cm.is_zero() {
                *body.get_mut(i, j) = OperatorElem::from_coeff(Flavor::Shift, cm);
            }
        }
    }
    body
}

/// `M = body * q^{2 z d/dz}`.
pub fn trig_manin(ctx: &Ctx, body: &AuxTensor) -> Result<AuxTensor> {
    let mut right = AuxTensor::zero(body.n, 1, Flavor::Shift, body.qdim);
    for r in 0..body.n {
        *right.get_mut(r, r) = OperatorElem::from_mono(Flavor::Shift, body.qdim, Mono::z(1));
    }
    body.mul(ctx, &right)
}

/// `G L~(z) G` with `G` the diagonal Cartan twist over the quantum
/// weights of the defining site.
pub fn twisted_trig_body(ctx: &Ctx) -> Result<AuxTensor> {
    let n = ctx.n;
    let body = trig_lop_body(ctx, RKind::TrigTilde);
    let q = ctx.q_trig();
    // G is diagonal in aux and quantum: entry (i, b) gets
    // q^{(1/2)(sum_{j>i} h_j(b) - sum_{j<i} h_j(b))} with h_j(b) the
    // defining-site weights.
    let mut g = AuxTensor::zero(n, 1, Flavor::Shift, n);
    for i in 0..n {
        let mut diag = Array2::from_elem((n, n), C64::new(0.0, 0.0));
        for b in 0..n {
            let h: Vec<C64> = (0..n)
                .map(|j| C64::new(if b == j { 1.0 } else { 0.0 }, 0.0))
                .collect();
            diag[(b, b)] = trig_twist_g(n, &h, q)[(i, i)];
        }
        *g.get_mut(i, i) = OperatorElem::from_coeff(Flavor::Shift, CoeffMat::from_numeric(&diag));
    }
    g.mul(ctx, &body)?.mul(ctx, &g)
}
