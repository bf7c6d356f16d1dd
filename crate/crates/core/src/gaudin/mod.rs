//! The `hbar -> 0` degeneration: elliptic Gaudin L-operators from
//! evaluation representations, the characteristic polynomial
//! `Q(u, d/du)` and its coefficients `s_m(u)`, the classical twist,
//! classical quantum powers, and commutativity verification on joint
//! zero-weight subspaces.

pub mod sl2;

use crate::ctx::Ctx;
use crate::error::{Error, Result};
use crate::felder::{classical_r, richardson};
use crate::linalg;
use crate::opalg::{
    antisymmetrizer, column_det, d_hat_legs, manin_check, AuxTensor, CoeffMat, Flavor,
    ManinCheck, Mono, OperatorElem, QuantumSpace, ScalarTensor, Site, SiteKind,
};
use crate::report::{mixed_rel, ResidualReport};
use crate::residual::{matrix_gap, residual_aux, residual_custom, residual_elem};
use crate::sampling::SamplingPolicy;
use crate::scalar::{draw_point, Evaluator, ScalarExpr, VarId};
#[cfg(test)]
use crate::scalar::Point;
use crate::C64;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use ndarray::Array2;

/// A finite Gaudin model: evaluation sites plus the optional traceless
/// (`sl_n`) projection `e_kk -> e_kk - (1/n) sum_l e_ll` applied to every
/// Cartan insertion.
#[derive(Debug, Clone)]
pub struct GaudinModel {
    pub n: usize,
    pub qspace: QuantumSpace,
    pub traceless: bool,
}

impl GaudinModel {
    pub fn new(n: usize, sites: Vec<(SiteKind, C64)>, traceless: bool) -> Result<Self> {
        for (i, (_, vi)) in sites.iter().enumerate() {
            for (_, vj) in sites.iter().skip(i + 1) {
                if crate::cmath::cabs(vi - vj) < 0.05 {
                    return Err(Error::Construction(
                        "site evaluation points closer than the guard distance".into(),
                    ));
                }
            }
        }
        let qspace = QuantumSpace::new(
            n,
            sites
                .into_iter()
                .map(|(kind, eval_point)| Site { kind, n, eval_point })
                .collect(),
        );
        Ok(Self { n, qspace, traceless })
    }

    pub fn dim(&self) -> usize {
        self.qspace.dim()
    }

    /// Representation of `e_ij` on site `slot`, traceless-projected when
    /// the flag is set.
    pub fn site_rep(&self, slot: usize, i: usize, j: usize) -> Array2<C64> {
        let mut m = self.qspace.site_op(slot, i, j);
        if self.traceless && i == j {
            let mut tr = Array2::from_elem(m.dim(), C64::new(0.0, 0.0));
            for l in 0..self.n {
                tr = tr + self.qspace.site_op(slot, l, l);
            }
            m = m - tr.mapv(|x| x / self.n as f64);
        }
        m
    }

    /// `h_k = rho(e_kk)`, summed over sites.
    pub fn cartan(&self, k: usize) -> Array2<C64> {
        let d = self.dim();
        let mut m = Array2::from_elem((d, d), C64::new(0.0, 0.0));
        for slot in 0..self.qspace.sites.len() {
            m = m + self.site_rep(slot, k, k);
        }
        m
    }

    /// Orthogonal projector onto the joint kernel of the Cartan elements,
    /// together with its dimension.
    pub fn zero_weight_projector(&self) -> (Array2<C64>, usize) {
        let d = self.dim();
        let mut proj = Array2::from_elem((d, d), C64::new(0.0, 0.0));
        let mut dim = 0;
        for b in 0..d {
            let zero = (0..self.n).all(|k| crate::cmath::cabs(self.cartan(k)[(b, b)]) < 1e-9);
            if zero {
                proj[(b, b)] = C64::new(1.0, 0.0);
                dim += 1;
            }
        }
        (proj, dim)
    }

    /// The elliptic half-current `e^+_ij(u; lambda)` in this
    /// representation, as a matrix of coefficient functions of `U` and
    /// the `lambda`s:
    ///
    /// ```text
    /// e^+_ii(u) = sum_k theta'(u-v_k)/theta(u-v_k) Pi_k(e_ii)
    /// e^+_ij(u) = sum_k theta(u-v_k+lambda_ij)/(theta(u-v_k) theta(lambda_ij)) Pi_k(e_ij)
    /// ```
    pub fn half_current(&self, _ctx: &Ctx, i: usize, j: usize) -> CoeffMat {
        let d = self.dim();
        let mut acc = CoeffMat::zeros(d);
        for slot in 0..self.qspace.sites.len() {
            let v = self.qspace.sites[slot].eval_point;
            let x = ScalarExpr::var(VarId::U).sub(&ScalarExpr::constant(v));
            let kernel = if i == j {
                ScalarExpr::theta_deriv(1, x.clone()).div(&ScalarExpr::theta(x))
            } else {
                let lij = crate::scalar::lambda_diff(i, j);
                ScalarExpr::theta(x.add(&lij))
                    .div(&ScalarExpr::theta(x).mul(&ScalarExpr::theta(lij)))
            };
            let rep = self.site_rep(slot, i, j);
            let term = CoeffMat(Array2::from_shape_fn((d, d), |(r, c)| {
                let w = rep[(r, c)];
                if w == C64::new(0.0, 0.0) {
                    ScalarExpr::zero()
                } else {
                    kernel.scale(w)
                }
            }));
            acc = acc.add(&term);
        }
        acc
    }

    /// The Gaudin L-operator:
    /// `L_ij = e^+_ji`, `L_ii = e^+_ii + sum_{k != i} theta'(lambda_ik)/theta(lambda_ik) h_k`.
    pub fn l_operator(&self, ctx: &Ctx) -> ClassicalLOperator {
        let n = self.n;
        let d = self.dim();
        let mut body = AuxTensor::zero(n, 1, Flavor::Diff, d);
        for i in 0..n {
            for j in 0..n {
                let mut cm = self.half_current(ctx, j, i);
                if i == j {
                    for k in 0..n {
                        if k == i {
                            continue;
                        }
                        let lik = crate::scalar::lambda_diff(i, k);
                        let kernel =
                            ScalarExpr::theta_deriv(1, lik.clone()).div(&ScalarExpr::theta(lik));
                        let h = self.cartan(k);
                        let term = CoeffMat(Array2::from_shape_fn((d, d), |(r, c)| {
                            let w = h[(r, c)];
                            if w == C64::new(0.0, 0.0) {
                                ScalarExpr::zero()
                            } else {
                                kernel.scale(w)
                            }
                        }));
                        cm = cm.add(&term);
                    }
                }
                if !cm.is_zero() {
                    *body.get_mut(i, j) = OperatorElem::from_coeff(Flavor::Diff, cm);
                }
            }
        }
        ClassicalLOperator { n, model: self.clone(), body }
    }

    /// The twisted variant `L~_ij = e^+_ji` for all `i, j` (no Cartan
    /// correction on the diagonal).
    pub fn l_operator_twisted(&self, ctx: &Ctx) -> ClassicalLOperator {
        let n = self.n;
        let d = self.dim();
        let mut body = AuxTensor::zero(n, 1, Flavor::Diff, d);
        for i in 0..n {
            for j in 0..n {
                let cm = self.half_current(ctx, j, i);
                if !cm.is_zero() {
                    *body.get_mut(i, j) = OperatorElem::from_coeff(Flavor::Diff, cm);
                }
            }
        }
        ClassicalLOperator { n, model: self.clone(), body }
    }
}

/// `n x n` matrix of mono-free diff-ring elements over the model's
/// quantum space.
#[derive(Debug, Clone)]
pub struct ClassicalLOperator {
    pub n: usize,
    pub model: GaudinModel,
    pub body: AuxTensor,
}

impl ClassicalLOperator {
    pub fn at(&self, spectral: &ScalarExpr) -> Result<AuxTensor> {
        self.body
            .try_map_entries(|e| e.try_map_coeffs(|f| f.subst_var(VarId::U, spectral)))
    }
}

/// `M = d/du - D_lambda + L(u; lambda)`, the classical Manin matrix.
pub fn classical_manin(l: &ClassicalLOperator) -> AuxTensor {
    let d = l.model.dim();
    let mut m = l.body.clone();
    for i in 0..l.n {
        let du = OperatorElem::from_mono(Flavor::Diff, d, Mono::u(1));
        let dl = OperatorElem::from_mono(Flavor::Diff, d, Mono::lam(i, 1));
        *m.get_mut(i, i) = m.get(i, i).add(&du).sub(&dl);
    }
    m
}

/// Residual of the dynamical classical rLL relation:
/// `[L1(u)-D1, L2(v)-D2] - sum_k h_k d/dlam_k r(u-v) = [L1(u)+L2(v), r(u-v)]`.
pub fn rll_classical_residual(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = l.n;
    let d = l.model.dim();
    let l1 = l.body.embed(&[0], 2)?;
    let l2 = l.at(&ScalarExpr::var(VarId::V))?.embed(&[1], 2)?;
    let d1 = d_hat_legs(n, 2, &[0], d);
    let d2 = d_hat_legs(n, 2, &[1], d);
    let x1 = l1.sub(&d1);
    let x2 = l2.sub(&d2);
    let r = classical_r(ctx, &ScalarExpr::var(VarId::U).sub(&ScalarExpr::var(VarId::V)));
    let r_aux = r.to_aux(Flavor::Diff, d);
    // sum_k h_k (d r / d lambda_k).
    let mut h_dr = AuxTensor::zero(n, 2, Flavor::Diff, d);
    for k in 0..n {
        let dr = r.map(|e| e.differentiate(VarId::Lambda(k as u8)).expect("differentiable"));
        let h = l.model.cartan(k);
        let lifted = lift_with_qmat(&dr, Flavor::Diff, &h);
        h_dr = h_dr.add(&lifted);
    }
    let lhs = x1
        .mul(ctx, &x2)?
        .sub(&x2.mul(ctx, &x1)?)
        .sub(&h_dr);
    let sum12 = l1.add(&l2);
    let rhs = sum12.mul(ctx, &r_aux)?.sub(&r_aux.mul(ctx, &sum12)?);
    let mut rep = ResidualReport::new(id, "DrLL", tol, policy.seed);
    residual_aux(ctx, &lhs, &rhs, policy, &mut rep)?;
    Ok(rep)
}

/// Lift a pure-function tensor with a fixed numeric quantum matrix:
/// entries become `f * Q`.
pub fn lift_with_qmat(t: &ScalarTensor, flavor: Flavor, q: &Array2<C64>) -> AuxTensor {
    let qdim = q.nrows();
    let mut out = AuxTensor::zero(t.n, t.legs, flavor, qdim);
    for r in 0..t.dim() {
        for c in 0..t.dim() {
            let e = &t.entries[(r, c)];
            if e.is_const_zero() {
                continue;
            }
            let cm = CoeffMat(Array2::from_shape_fn((qdim, qdim), |(a, b)| {
                let w = q[(a, b)];
                if w == C64::new(0.0, 0.0) {
                    ScalarExpr::zero()
                } else {
                    e.scale(w)
                }
            }));
            *out.get_mut(r, c) = OperatorElem::from_coeff(flavor, cm);
        }
    }
    out
}

/// `(E_ii + h_i) L = L (E_ii + h_i)`.
pub fn ehl_classical_residual(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = l.n;
    let d = l.model.dim();
    let mut rep = ResidualReport::new(id, "EhL_LEh_G", tol, policy.seed);
    for i in 0..n {
        let aux = AuxTensor::from_numeric(n, 1, Flavor::Diff, d, &linalg::e_matrix(n, i, i));
        let mut quantum = AuxTensor::zero(n, 1, Flavor::Diff, d);
        for r in 0..n {
            *quantum.get_mut(r, r) = OperatorElem::from_coeff(
                Flavor::Diff,
                CoeffMat::from_numeric(&l.model.cartan(i)),
            );
        }
        let x = aux.add(&quantum);
        residual_aux(ctx, &x.mul(ctx, &l.body)?, &l.body.mul(ctx, &x)?, policy, &mut rep)?;
    }
    Ok(rep)
}

/// Richardson check of `L(u;lambda) = 1 + hbar L_cl(u;lambda) + o(hbar)`
/// for the R-matrix L-operator on a single defining site against the
/// Gaudin L-operator built from half-currents.
pub fn classical_limit_residual(
    ctx: &Ctx,
    site: C64,
    hbars: &[f64],
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let model = GaudinModel::new(ctx.n, alloc::vec![(SiteKind::Defining, site)], false)?;
    let cl = model.l_operator(ctx);
    let quantum: Result<Vec<AuxTensor>> = hbars
        .iter()
        .map(|&h| {
            let c = ctx.with_hbar(C64::new(h, 0.0));
            Ok(crate::lops::lop_from_r(&c, site, crate::lops::LopRole::SecondSpace)?.body)
        })
        .collect();
    let quantum = quantum?;
    let dim = ctx.n * model.dim();
    let eye = linalg::identity(dim);
    let mut rep = ResidualReport::new(id, "LqLc", tol, policy.seed);
    let mut vars = alloc::vec![VarId::U];
    vars.extend(VarId::lambdas(ctx.n));
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let want = cl.body.eval_numeric(&mut ev)?;
        let slopes: Result<Vec<Array2<C64>>> = quantum
            .iter()
            .zip(hbars.iter())
            .map(|(b, &h)| {
                let m = b.eval_numeric(&mut ev)?;
                Ok((&m - &eye).mapv(|x| x / h))
            })
            .collect();
        let got = richardson(&slopes?, hbars);
        Ok(matrix_gap(&got, &want))
    })?;
    Ok(rep)
}

/// Manin property of `d/du - D_lambda + L`.
pub fn classical_manin_check(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    id: &str,
    policy: SamplingPolicy,
    tol: f64,
) -> Result<ManinCheck> {
    let m = classical_manin(l);
    manin_check(ctx, &m, id, "chpolGaudin", policy, tol)
}

/// `s_m(u)` from the column determinant of the classical Manin matrix,
/// grouped by the power of `d/du`: key `m` holds the coefficient of
/// `(d/du)^{n-m}`; `s_0 = 1`.
pub fn char_poly_classical(
    ctx: &Ctx,
    m: &AuxTensor,
) -> Result<BTreeMap<usize, OperatorElem>> {
    let n = m.n;
    let det = column_det(ctx, m)?.prune(ctx);
    let mut out: BTreeMap<usize, OperatorElem> = BTreeMap::new();
    for (mono, cm) in det.terms {
        let mut stripped = mono;
        let power = stripped.du;
        stripped.du = 0;
        let key = n - power as usize;
        let entry = out
            .entry(key)
            .or_insert_with(|| OperatorElem::zero(Flavor::Diff, m.qdim));
        *entry = entry.add(&OperatorElem::from_term(Flavor::Diff, cm, stripped));
    }
    Ok(out)
}

/// `[h_k, s_m(u)] = 0`.
pub fn cartan_residual_s(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let coeffs = char_poly_classical(ctx, &classical_manin(l))?;
    let mut rep = ResidualReport::new(id, "hs_sh", tol, policy.seed);
    for (m, s) in &coeffs {
        if *m == 0 {
            continue;
        }
        for k in 0..l.n {
            let h = l.model.cartan(k);
            residual_elem(ctx, &s.qmul_left(&h), &s.qmul_right(&h), policy, &mut rep)?;
        }
    }
    Ok(rep)
}

/// Weight-block preservation of `s_m`: entries joining different joint
/// weights vanish.
pub fn weight_block_residual(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let coeffs = char_poly_classical(ctx, &classical_manin(l))?;
    let d = l.model.dim();
    let weights: Vec<Vec<C64>> = (0..d)
        .map(|b| (0..l.n).map(|k| l.model.cartan(k)[(b, b)]).collect())
        .collect();
    let mut offblock = Array2::from_elem((d, d), false);
    for r in 0..d {
        for c in 0..d {
            let same = (0..l.n).all(|k| crate::cmath::cabs(weights[r][k] - weights[c][k]) < 1e-9);
            offblock[(r, c)] = !same;
        }
    }
    let mut rep = ResidualReport::new(id, "hs_sh", tol, policy.seed);
    let mut vars = alloc::vec![VarId::U];
    vars.extend(VarId::lambdas(l.n));
    let elems: Vec<&OperatorElem> = coeffs.values().collect();
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for e in &elems {
            for (_, cm) in e.eval_coeffs(&mut ev)? {
                for ((r, c), v) in cm.indexed_iter() {
                    let a = crate::cmath::cabs(*v);
                    scale = scale.max(a);
                    if offblock[(r, c)] {
                        diff = diff.max(a);
                    }
                }
            }
        }
        Ok((diff, scale))
    })?;
    Ok(rep)
}

/// Plan for evaluating a normal-ordered ring product numerically per
/// point: symbolic coefficient derivatives are prepared once.
pub struct MulPlan {
    qdim: usize,
    terms: Vec<(Mono, f64, CoeffMat, CoeffMat)>,
}

impl MulPlan {
    pub fn new(a: &OperatorElem, b: &OperatorElem) -> Result<MulPlan> {
        let mut terms = Vec::new();
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                for (gamma, binom) in ma.sub_indices() {
                    let mut dcb = cb.clone();
                    for (var, times) in gamma.derivs() {
                        for _ in 0..times {
                            dcb = dcb.try_map(|e| e.differentiate(var))?;
                        }
                    }
                    if dcb.is_zero() {
                        continue;
                    }
                    terms.push((ma.sub(&gamma).add(mb), binom, ca.clone(), dcb));
                }
            }
        }
        Ok(MulPlan { qdim: a.qdim, terms })
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<BTreeMap<Mono, Array2<C64>>> {
        let mut out: BTreeMap<Mono, Array2<C64>> = BTreeMap::new();
        for (mono, factor, left, right) in &self.terms {
            let prod = left.eval(ev)?.dot(&right.eval(ev)?);
            let slot = out.entry(*mono).or_insert_with(|| {
                Array2::from_elem((self.qdim, self.qdim), C64::new(0.0, 0.0))
            });
            *slot = &*slot + &prod.mapv(|x| x * *factor);
        }
        Ok(out)
    }
}

/// Residual of "every normal-form coefficient of `[a, b]` annihilates the
/// projector image": the testable content of commutativity modulo the
/// Cartan ideal.
pub fn commutator_on_projector(
    ctx: &Ctx,
    a: &OperatorElem,
    b: &OperatorElem,
    proj: &Array2<C64>,
    policy: SamplingPolicy,
    rep: &mut ResidualReport,
) -> Result<()> {
    let ab = MulPlan::new(a, b)?;
    let ba = MulPlan::new(b, a)?;
    let mut vars = a.free_vars();
    vars.extend(b.free_vars());
    let vars: Vec<VarId> = vars.into_iter().collect();
    let mut sampler = crate::sampling::Sampler::for_identity(policy, &rep.identity_id);
    for _ in 0..policy.samples {
        let ((d, s), _) = draw_point(&mut sampler, &vars, policy.max_retries, |pt| {
            let mut ev = Evaluator::new(ctx, pt);
            let x = ab.eval(&mut ev)?;
            let y = ba.eval(&mut ev)?;
            let mut monos: alloc::collections::BTreeSet<Mono> = x.keys().copied().collect();
            monos.extend(y.keys().copied());
            let zero = Array2::from_elem(proj.dim(), C64::new(0.0, 0.0));
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for m in monos {
                let cm = x.get(&m).unwrap_or(&zero) - y.get(&m).unwrap_or(&zero);
                scale = scale.max(linalg::norm_max(&cm));
                diff = diff.max(linalg::norm_max(&cm.dot(proj)));
            }
            Ok((diff, scale))
        })?;
        rep.record(d, mixed_rel(d, s));
    }
    Ok(())
}

/// As above but for plain equality `a = b` on the projector image.
pub fn elems_equal_on_projector(
    ctx: &Ctx,
    a: &OperatorElem,
    b: &OperatorElem,
    proj: &Array2<C64>,
    policy: SamplingPolicy,
    rep: &mut ResidualReport,
) -> Result<()> {
    let mut vars = a.free_vars();
    vars.extend(b.free_vars());
    let vars: Vec<VarId> = vars.into_iter().collect();
    let mut sampler = crate::sampling::Sampler::for_identity(policy, &rep.identity_id);
    for _ in 0..policy.samples {
        let ((d, s), _) = draw_point(&mut sampler, &vars, policy.max_retries, |pt| {
            let mut ev = Evaluator::new(ctx, pt);
            let x = a.eval_coeffs(&mut ev)?;
            let y = b.eval_coeffs(&mut ev)?;
            let mut monos: alloc::collections::BTreeSet<Mono> = x.keys().copied().collect();
            monos.extend(y.keys().copied());
            let dq = proj.nrows();
            let zero = Array2::from_elem((dq, dq), C64::new(0.0, 0.0));
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for m in monos {
                let cm = x.get(&m).unwrap_or(&zero) - y.get(&m).unwrap_or(&zero);
                let xa = x.get(&m).map(linalg::norm_max).unwrap_or(0.0);
                let ya = y.get(&m).map(linalg::norm_max).unwrap_or(0.0);
                scale = scale.max(xa).max(ya);
                diff = diff.max(linalg::norm_max(&cm.dot(proj)));
            }
            Ok((diff, scale))
        })?;
        rep.record(d, mixed_rel(d, s));
    }
    Ok(())
}

/// `s_m(u)` at a numeric spectral point.
pub fn s_at(
    _ctx: &Ctx,
    coeffs: &BTreeMap<usize, OperatorElem>,
    m: usize,
    u0: C64,
) -> Result<OperatorElem> {
    let s = coeffs
        .get(&m)
        .ok_or_else(|| Error::Usage(alloc::format!("no s_{m} coefficient")))?;
    s.try_map_coeffs(|f| f.subst_var(VarId::U, &ScalarExpr::constant(u0)))
}

/// Commutativity `[s_m(u), s_l(v)] = 0 mod A_n h`, verified as coefficient
/// annihilation on the joint zero-weight subspace.
pub fn commutativity_on_zero_weight(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    pairs: &[(usize, usize)],
    uv_pairs: &[(C64, C64)],
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let (proj, dim) = l.model.zero_weight_projector();
    if dim == 0 {
        return Err(Error::Usage(
            "zero-weight subspace is trivial; commutativity check inapplicable".into(),
        ));
    }
    let coeffs = char_poly_classical(ctx, &classical_manin(l))?;
    let mut rep = ResidualReport::new(id, "ss_ss", tol, policy.seed);
    for &(m, ll) in pairs {
        for &(u0, v0) in uv_pairs {
            let a = s_at(ctx, &coeffs, m, u0)?;
            let b = s_at(ctx, &coeffs, ll, v0)?;
            commutator_on_projector(ctx, &a, &b, &proj, policy, &mut rep)?;
        }
    }
    Ok(rep)
}

/// The twisted determinant
/// `det(d/du - D + L~ + sum_{i!=j} E_ii theta'(lambda_ij)/theta(lambda_ij) h_j)`
/// equals the plain characteristic polynomial, coefficient-wise.
pub fn twisted_gaudin_residual(
    ctx: &Ctx,
    model: &GaudinModel,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let l = model.l_operator(ctx);
    let lt = model.l_operator_twisted(ctx);
    let n = model.n;
    let d = model.dim();
    let mut mt = classical_manin(&ClassicalLOperator {
        n,
        model: model.clone(),
        body: lt.body.clone(),
    });
    // Add the diagonal twist term.
    for i in 0..n {
        let mut extra = CoeffMat::zeros(d);
        for j in 0..n {
            if j == i {
                continue;
            }
            let lij = crate::scalar::lambda_diff(i, j);
            let kernel = ScalarExpr::theta_deriv(1, lij.clone()).div(&ScalarExpr::theta(lij));
            let h = model.cartan(j);
            extra = extra.add(&CoeffMat(Array2::from_shape_fn((d, d), |(r, c)| {
                let w = h[(r, c)];
                if w == C64::new(0.0, 0.0) {
                    ScalarExpr::zero()
                } else {
                    kernel.scale(w)
                }
            })));
        }
        *mt.get_mut(i, i) = mt.get(i, i).add(&OperatorElem::from_coeff(Flavor::Diff, extra));
    }
    let twisted = char_poly_classical(ctx, &mt)?;
    let plain = char_poly_classical(ctx, &classical_manin(&l))?;
    let mut rep = ResidualReport::new(id, "Q_Ltilde", tol, policy.seed);
    for m in 0..=n {
        let zero = OperatorElem::zero(Flavor::Diff, d);
        let a = twisted.get(&m).unwrap_or(&zero);
        let b = plain.get(&m).unwrap_or(&zero);
        residual_elem(ctx, a, b, policy, &mut rep)?;
    }
    Ok(rep)
}

/// Classical quantum powers by the recursion
/// `L_D^{[k+1]} = L_D L_D^{[k]} + d(L_D^{[k]})/du`, with
/// `L_D = L - D_lambda`.
pub fn classical_quantum_power(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    k: usize,
) -> Result<AuxTensor> {
    let d = l.model.dim();
    let ld = {
        let mut m = l.body.clone();
        for i in 0..l.n {
            let dl = OperatorElem::from_mono(Flavor::Diff, d, Mono::lam(i, 1));
            *m.get_mut(i, i) = m.get(i, i).sub(&dl);
        }
        m
    };
    let mut acc = AuxTensor::identity(l.n, 1, Flavor::Diff, d);
    for _ in 0..k {
        let du = acc.try_map_entries(|e| {
            e.try_map_coeffs(|f| f.differentiate(VarId::U))
        })?;
        acc = ld.mul(ctx, &acc)?.add(&du);
    }
    Ok(acc)
}

/// Newton reconstruction: `q_m` recursively from `tr(M^j)` matches the
/// direct antisymmetrized traces, and `q_n` matches the column
/// determinant.
pub fn newton_classical_residual(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    up_to_m: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = l.n;
    let d = l.model.dim();
    let m = classical_manin(l);
    let mut traces: Vec<OperatorElem> = alloc::vec![OperatorElem::zero(Flavor::Diff, d)];
    let mut mk = m.clone();
    for j in 1..=up_to_m {
        traces.push(mk.trace_full().prune(ctx));
        if j < up_to_m {
            mk = mk.mul(ctx, &m)?;
        }
    }
    // Direct q_m.
    let mut qs_direct: Vec<OperatorElem> =
        alloc::vec![OperatorElem::identity(Flavor::Diff, d)];
    for mm in 1..=up_to_m {
        // Antisymmetrizer first; see the quantum variant.
        let mut prod =
            AuxTensor::from_numeric(n, mm, Flavor::Diff, d, &antisymmetrizer(mm, n));
        for leg in 0..mm {
            prod = prod.mul(ctx, &m.embed(&[leg], mm)?)?;
        }
        qs_direct.push(prod.trace_full().prune(ctx));
    }
    // Newton-recursed q_m and the identity residuals.
    let mut rep = ResidualReport::new(id, "q_mdef", tol, policy.seed);
    let mut qs_newton: Vec<OperatorElem> =
        alloc::vec![OperatorElem::identity(Flavor::Diff, d)];
    for mm in 1..=up_to_m {
        let mut rhs = OperatorElem::zero(Flavor::Diff, d);
        for k in 0..mm {
            let sign = if (mm + k + 1) % 2 == 0 { 1.0 } else { -1.0 };
            rhs = rhs.add(
                &qs_newton[k]
                    .mul(ctx, &traces[mm - k])?
                    .scale(C64::new(sign, 0.0)),
            );
        }
        let q = rhs.scale(C64::new(1.0 / mm as f64, 0.0)).prune(ctx);
        residual_elem(ctx, &q, &qs_direct[mm], policy, &mut rep)?;
        qs_newton.push(q);
    }
    // q_n coincides with det(M) = sum_m s_m (d/du)^{n-m}.
    if up_to_m >= n {
        let det = column_det(ctx, &m)?.prune(ctx);
        residual_elem(ctx, &qs_newton[n], &det, policy, &mut rep)?;
    }
    Ok(rep)
}

/// Consistency of the quantum-power recursion with ring powers of the
/// classical Manin matrix: `M^k = sum_j C(k,j) L_D^{[j]} (d/du)^{k-j}`.
pub fn classical_power_binomial_residual(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    max_k: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let d = l.model.dim();
    let m = classical_manin(l);
    let mut rep = ResidualReport::new(id, "power-recursion", tol, policy.seed);
    let mut mk = AuxTensor::identity(l.n, 1, Flavor::Diff, d);
    for k in 0..=max_k {
        if k > 0 {
            mk = mk.mul(ctx, &m)?;
        }
        let mut rhs = AuxTensor::zero(l.n, 1, Flavor::Diff, d);
        let mut binom = 1.0;
        for j in 0..=k {
            if j > 0 {
                binom *= (k - j + 1) as f64 / j as f64;
            }
            let du = OperatorElem::from_mono(Flavor::Diff, d, Mono::u((k - j) as i32));
            let mut du_t = AuxTensor::zero(l.n, 1, Flavor::Diff, d);
            for r in 0..l.n {
                *du_t.get_mut(r, r) = du.clone();
            }
            let term = classical_quantum_power(ctx, l, j)?
                .mul(ctx, &du_t)?
                .scale(C64::new(binom, 0.0));
            rhs = rhs.add(&term);
        }
        residual_aux(ctx, &mk, &rhs, policy, &mut rep)?;
    }
    Ok(rep)
}

/// Commutativity of traces of classical quantum powers on the zero-weight
/// subspace, including the plain second power.
pub fn power_trace_commutativity(
    ctx: &Ctx,
    l: &ClassicalLOperator,
    max_k: usize,
    uv: (C64, C64),
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let (proj, dim) = l.model.zero_weight_projector();
    if dim == 0 {
        return Err(Error::Usage("trivial zero-weight subspace".into()));
    }
    let mut rep = ResidualReport::new(id, "power-traces", tol, policy.seed);
    let mut traces = Vec::new();
    for k in 1..=max_k {
        traces.push(classical_quantum_power(ctx, l, k)?.trace_full().prune(ctx));
    }
    let fix = |e: &OperatorElem, x: C64| -> Result<OperatorElem> {
        e.try_map_coeffs(|f| f.subst_var(VarId::U, &ScalarExpr::constant(x)))
    };
    for a in &traces {
        for b in &traces {
            let au = fix(a, uv.0)?;
            let bv = fix(b, uv.1)?;
            commutator_on_projector(ctx, &au, &bv, &proj, policy, &mut rep)?;
        }
    }
    Ok(rep)
}

/// Half-current residue extraction: `(u - v_k) e^+_ij(u) -> Pi_k(e_ij)`
/// along shrinking radii.
pub fn half_current_residue_residual(
    ctx: &Ctx,
    model: &GaudinModel,
    i: usize,
    j: usize,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    // Evaluation right next to the pole needs the denominator guards off.
    let mut open = *ctx;
    open.theta_guard = 0.0;
    open.lattice_guard = 0.0;
    let cm = model.half_current(ctx, i, j);
    let v0 = model.qspace.sites[0].eval_point;
    let want = model.site_rep(0, i, j);
    let mut rep = ResidualReport::new(id, "hc_eij_N", tol, policy.seed);
    let vars = VarId::lambdas(model.n);
    let radii = [1e-2, 1e-3, 1e-4];
    residual_custom(&open, &vars, policy, &mut rep, |pt| {
        let mut prev = f64::MAX;
        let mut worst = (0.0f64, 1.0f64);
        for (step, rho) in radii.iter().enumerate() {
            let u = v0 + C64::new(*rho, 0.4 * rho);
            let mut full = pt.clone();
            full.insert(VarId::U, u);
            let mut ev = Evaluator::new(&open, &full);
            let vals = cm.eval(&mut ev)?.mapv(|x| x * (u - v0));
            let (dd, _) = matrix_gap(&vals, &want);
            if step + 1 == radii.len() {
                worst = (dd, 1.0);
            }
            // The deviation must shrink with the radius.
            if dd > prev * 0.5 {
                return Err(Error::Singularity("residue not converging".into()));
            }
            prev = dd;
        }
        Ok(worst)
    })?;
    Ok(rep)
}
