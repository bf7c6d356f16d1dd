//! The dynamical elliptic R-matrix, its classical and trigonometric
//! degenerations, the twist matrices, and residual checks for all the
//! R-matrix identities (DYBE, unitarity, weight zero, CDYBE, twists,
//! trigonometric limits).

use crate::ctx::Ctx;
use crate::error::Result;
use crate::linalg::{identity, permutation_operator};
use crate::opalg::{antisymmetrizer, Flavor, ScalarTensor};
use crate::report::ResidualReport;
use crate::residual::{matrix_gap, residual_aux, residual_custom};
use crate::sampling::SamplingPolicy;
use crate::scalar::{lambda_diff, Evaluator, ScalarExpr, VarId};
use crate::C64;
use alloc::vec::Vec;
use ndarray::Array2;
#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

/// Which degeneration of the R-matrix to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RKind {
    EllipticDynamical,
    ClassicalR,
    TrigDynamical,
    TrigNonDynamical,
    TrigTilde,
}

fn idx2(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}

/// Felder's dynamical elliptic R-matrix as a 2-leg tensor of coefficient
/// functions of (`spectral`, `lambda_1..lambda_n`):
///
/// ```text
/// R(u;lambda) = theta(u+hbar)/theta(u) sum_i E_ii x E_ii
///   + sum_{i!=j} [ theta(lambda_ij+hbar)/theta(lambda_ij) E_ii x E_jj
///     + theta(u-lambda_ij) theta(hbar) / (theta(u) theta(-lambda_ij)) E_ij x E_ji ]
/// ```
pub fn felder_r(ctx: &Ctx, spectral: &ScalarExpr) -> ScalarTensor {
    let n = ctx.n;
    let hb = ScalarExpr::constant(ctx.hbar);
    let theta_h = ScalarExpr::theta(hb.clone());
    let mut t = ScalarTensor::zero(n, 2);
    let th_u = ScalarExpr::theta(spectral.clone());
    let diag = ScalarExpr::theta(spectral.add(&hb)).div(&th_u);
    for i in 0..n {
        t.entries[(idx2(n, i, i), idx2(n, i, i))] = diag.clone();
        for j in 0..n {
            if i == j {
                continue;
            }
            let lij = lambda_diff(i, j);
            t.entries[(idx2(n, i, j), idx2(n, i, j))] =
                ScalarExpr::theta(lij.add(&hb)).div(&ScalarExpr::theta(lij.clone()));
            t.entries[(idx2(n, i, j), idx2(n, j, i))] = ScalarExpr::theta(spectral.sub(&lij))
                .mul(&theta_h)
                .div(&th_u.mul(&ScalarExpr::theta(lij.neg())));
        }
    }
    t
}

/// The dynamical classical elliptic r-matrix:
///
/// ```text
/// r(u;lambda) = theta'(u)/theta(u) sum_i E_ii x E_ii
///   + sum_{i!=j} [ theta'(lambda_ij)/theta(lambda_ij) E_ii x E_jj
///     + theta(u-lambda_ij)/(theta(u) theta(-lambda_ij)) E_ij x E_ji ]
/// ```
pub fn classical_r(ctx: &Ctx, spectral: &ScalarExpr) -> ScalarTensor {
    let n = ctx.n;
    let mut t = ScalarTensor::zero(n, 2);
    let th_u = ScalarExpr::theta(spectral.clone());
    let diag = ScalarExpr::theta_deriv(1, spectral.clone()).div(&th_u);
    for i in 0..n {
        t.entries[(idx2(n, i, i), idx2(n, i, i))] = diag.clone();
        for j in 0..n {
            if i == j {
                continue;
            }
            let lij = lambda_diff(i, j);
            t.entries[(idx2(n, i, j), idx2(n, i, j))] =
                ScalarExpr::theta_deriv(1, lij.clone()).div(&ScalarExpr::theta(lij.clone()));
            t.entries[(idx2(n, i, j), idx2(n, j, i))] = ScalarExpr::theta(spectral.sub(&lij))
                .div(&th_u.mul(&ScalarExpr::theta(lij.neg())));
        }
    }
    t
}

/// The twisted classical r-matrix `r - f`: diagonal log-derivative part
/// plus the exchange terms, without the `E_ii x E_jj` block.
pub fn classical_r_tilde(ctx: &Ctx, spectral: &ScalarExpr) -> ScalarTensor {
    let f = classical_twist_f(ctx);
    classical_r(ctx, spectral).sub(&f)
}

/// The classical dynamical twist
/// `f(lambda) = sum_{i!=j} theta'(lambda_ij)/theta(lambda_ij) e_ii x e_jj`.
pub fn classical_twist_f(ctx: &Ctx) -> ScalarTensor {
    let n = ctx.n;
    let mut t = ScalarTensor::zero(n, 2);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let lij = lambda_diff(i, j);
            t.entries[(idx2(n, i, j), idx2(n, i, j))] =
                ScalarExpr::theta_deriv(1, lij.clone()).div(&ScalarExpr::theta(lij));
        }
    }
    t
}

/// `B(lambda) = (1/2) sum_{i!=j} theta(lambda_ij)/theta(lambda_ij+hbar) E_ii x E_jj`.
pub fn b_matrix(ctx: &Ctx) -> ScalarTensor {
    let n = ctx.n;
    let hb = ScalarExpr::constant(ctx.hbar);
    let mut t = ScalarTensor::zero(n, 2);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let lij = lambda_diff(i, j);
            t.entries[(idx2(n, i, j), idx2(n, i, j))] = ScalarExpr::theta(lij.clone())
                .div(&ScalarExpr::theta(lij.add(&hb)))
                .scale(C64::new(0.5, 0.0));
        }
    }
    t
}

/// Trigonometric R-matrices in the multiplicative spectral arguments
/// `z`, `w` (expressions), with `q = e^{i pi hbar}` and
/// `mu_ij = e^{2 pi i lambda_ij}`.
pub fn trig_r(ctx: &Ctx, kind: RKind, z: &ScalarExpr, w: &ScalarExpr) -> ScalarTensor {
    let n = ctx.n;
    let q = ctx.q_trig();
    let qc = ScalarExpr::constant(q);
    let qi = ScalarExpr::constant(1.0 / q);
    let qdiff = ScalarExpr::constant(q - 1.0 / q);
    let zw = z.sub(w);
    let mut t = ScalarTensor::zero(n, 2);
    let diag = z.mul(&qc).sub(&w.mul(&qi)).div(&zw);
    for i in 0..n {
        t.entries[(idx2(n, i, i), idx2(n, i, i))] = diag.clone();
    }
    match kind {
        RKind::TrigDynamical => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let mu = ScalarExpr::exp(
                        lambda_diff(i, j).scale(C64::i() * 2.0 * PI),
                    );
                    t.entries[(idx2(n, i, j), idx2(n, i, j))] = mu
                        .mul(&qc)
                        .sub(&qi)
                        .div(&mu.sub(&ScalarExpr::one()));
                    t.entries[(idx2(n, i, j), idx2(n, j, i))] = qdiff
                        .mul(&z.sub(&w.mul(&mu)))
                        .div(&zw.mul(&ScalarExpr::one().sub(&mu)));
                }
            }
        }
        RKind::TrigNonDynamical | RKind::TrigTilde => {
            let (upper, lower) = if kind == RKind::TrigNonDynamical {
                (qc.clone(), qi.clone())
            } else {
                (ScalarExpr::one(), ScalarExpr::one())
            };
            for i in 0..n {
                for j in i + 1..n {
                    t.entries[(idx2(n, i, j), idx2(n, i, j))] = upper.clone();
                    t.entries[(idx2(n, j, i), idx2(n, j, i))] = lower.clone();
                    t.entries[(idx2(n, i, j), idx2(n, j, i))] = qdiff.mul(w).div(&zw);
                    t.entries[(idx2(n, j, i), idx2(n, i, j))] = qdiff.mul(z).div(&zw);
                }
            }
        }
        _ => panic!("trig_r called with a non-trigonometric kind"),
    }
    t
}

/// `F = sum_i E_ii x E_ii + sum_{i<j} (q^{1/2} E_ii x E_jj + q^{-1/2} E_jj x E_ii)`.
pub fn twist_f_numeric(ctx: &Ctx) -> Array2<C64> {
    let n = ctx.n;
    let q = ctx.q_trig();
    let qh = crate::cmath::csqrt(q);
    let mut m = Array2::from_elem((n * n, n * n), C64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let d = idx2(n, i, j);
            m[(d, d)] = if i == j {
                C64::new(1.0, 0.0)
            } else if i < j {
                qh
            } else {
                1.0 / qh
            };
        }
    }
    m
}

/// The diagonal twist `G = sum_i q^{(1/2)(sum_{j>i} h_j - sum_{j<i} h_j)} E_ii`
/// for one numeric Cartan weight vector `h`.
pub fn trig_twist_g(n: usize, h: &[C64], q: C64) -> Array2<C64> {
    let mut m = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    for i in 0..n {
        let mut expo = C64::new(0.0, 0.0);
        for j in 0..n {
            if j > i {
                expo += h[j];
            } else if j < i {
                expo -= h[j];
            }
        }
        m[(i, i)] = crate::cmath::cpowc(q, expo * 0.5);
    }
    m
}

fn u_minus(a: VarId, b: VarId) -> ScalarExpr {
    ScalarExpr::var(a).sub(&ScalarExpr::var(b))
}

fn z_of(v: VarId) -> ScalarExpr {
    ScalarExpr::exp(ScalarExpr::var(v).scale(C64::i() * 2.0 * PI))
}

fn all_vars(ctx: &Ctx, spectral: &[VarId]) -> Vec<VarId> {
    let mut vars = spectral.to_vec();
    vars.extend(VarId::lambdas(ctx.n));
    vars
}

/// DYBE residual: the three-leg identity with the dynamical shifts
/// `lambda + hbar E^{(s)}` on the spectator leg of each factor.
pub fn dybe_residual(
    ctx: &Ctx,
    kind: RKind,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let build = |s1: VarId, s2: VarId| -> ScalarTensor {
        match kind {
            RKind::EllipticDynamical => felder_r(ctx, &u_minus(s1, s2)),
            RKind::TrigDynamical => trig_r(ctx, kind, &z_of(s1), &z_of(s2)),
            _ => unreachable!("dybe_residual needs a dynamical kind"),
        }
    };
    let r12 = build(VarId::U, VarId::V).embed(&[0, 1], 3)?;
    let r13 = build(VarId::U, VarId::W).embed(&[0, 2], 3)?;
    let r23 = build(VarId::V, VarId::W).embed(&[1, 2], 3)?;
    let r13_s2 = r13.shift_lambda_by_legs(ctx, &[1], 1);
    let r23_s1 = r23.shift_lambda_by_legs(ctx, &[0], 1);
    let r12_s3 = r12.shift_lambda_by_legs(ctx, &[2], 1);
    let mut rep = ResidualReport::new(id, "DYBE", tol, policy.seed);
    let vars = all_vars(ctx, &[VarId::U, VarId::V, VarId::W]);
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let lhs = r12
            .eval(&mut ev)?
            .dot(&r13_s2.eval(&mut ev)?)
            .dot(&r23.eval(&mut ev)?);
        let rhs = r23_s1
            .eval(&mut ev)?
            .dot(&r13.eval(&mut ev)?)
            .dot(&r12_s3.eval(&mut ev)?);
        Ok(matrix_gap(&lhs, &rhs))
    })?;
    Ok(rep)
}

/// `R^{(21)}(-u;lambda) R^{(12)}(u;lambda) = theta(u+hbar) theta(u-hbar) / theta(u)^2`.
pub fn unitarity_residual(
    ctx: &Ctx,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let r12 = felder_r(ctx, &ScalarExpr::var(VarId::U));
    let r21_neg = felder_r(ctx, &ScalarExpr::var(VarId::U).neg()).permute_legs(&[1, 0]);
    let hb = ScalarExpr::constant(ctx.hbar);
    let u = ScalarExpr::var(VarId::U);
    let scalar = ScalarExpr::theta(u.add(&hb))
        .mul(&ScalarExpr::theta(u.sub(&hb)))
        .div(&ScalarExpr::theta(u.clone()).mul(&ScalarExpr::theta(u)));
    let mut rep = ResidualReport::new(id, "R21R12", tol, policy.seed);
    let vars = all_vars(ctx, &[VarId::U]);
    let eye = identity(ctx.n * ctx.n);
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let lhs = r21_neg.eval(&mut ev)?.dot(&r12.eval(&mut ev)?);
        let s = ev.eval(&scalar)?;
        let rhs = eye.mapv(|x| x * s);
        Ok(matrix_gap(&lhs, &rhs))
    })?;
    Ok(rep)
}

/// Weight-zero property: `(E_ii^{(1)} + E_ii^{(2)})` commutes with `R`.
pub fn weight_zero_residual(
    ctx: &Ctx,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = ctx.n;
    let r = felder_r(ctx, &ScalarExpr::var(VarId::U));
    let mut rep = ResidualReport::new(id, "EER_REE", tol, policy.seed);
    let vars = all_vars(ctx, &[VarId::U]);
    let mut es = Vec::new();
    for i in 0..n {
        let e = crate::opalg::embed_numeric(n, 2, &[0], &crate::linalg::e_matrix(n, i, i))
            + crate::opalg::embed_numeric(n, 2, &[1], &crate::linalg::e_matrix(n, i, i));
        es.push(e);
    }
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let rm = r.eval(&mut ev)?;
        let mut worst = (0.0f64, 0.0f64);
        for e in &es {
            let (d, s) = matrix_gap(&e.dot(&rm), &rm.dot(e));
            worst = (worst.0.max(d), worst.1.max(s));
        }
        Ok(worst)
    })?;
    Ok(rep)
}

/// `(D^{(1)} + D^{(2)}) R = R (D^{(1)} + D^{(2)})` as a diff-ring
/// identity, where `D = sum_k E_kk d/d lambda_k`.
pub fn dcommute_residual(
    ctx: &Ctx,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let r = felder_r(ctx, &ScalarExpr::var(VarId::U)).to_aux(Flavor::Diff, 1);
    let d_sum = crate::opalg::d_hat_legs(ctx.n, 2, &[0, 1], 1);
    let lhs = d_sum.mul(ctx, &r)?;
    let rhs = r.mul(ctx, &d_sum)?;
    let mut rep = ResidualReport::new(id, "DR_RD", tol, policy.seed);
    residual_aux(ctx, &lhs, &rhs, policy, &mut rep)?;
    Ok(rep)
}


/// `R(-hbar; lambda)` together with `B(lambda)`; residuals of
/// `B R(-hbar) = A_2` and `R(-hbar) = R(-hbar) A_2`.
pub fn r_minus_hbar_residual(
    ctx: &Ctx,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = ctx.n;
    let r_mh = felder_r(ctx, &ScalarExpr::var(VarId::U))
        .subst_var(VarId::U, &ScalarExpr::constant(-ctx.hbar))?;
    let b = b_matrix(ctx);
    let a2 = antisymmetrizer(2, n);
    let lhs = b.mul(&r_mh);
    let rhs = ScalarTensor::from_numeric(n, 2, &a2);
    let mut rep = ResidualReport::new(id, "R_mhbar", tol, policy.seed);
    crate::residual::residual_scalar_tensor(ctx, &lhs, &rhs, policy, &mut rep)?;
    let projected = r_mh.mul_numeric_right(&a2);
    crate::residual::residual_scalar_tensor(ctx, &r_mh, &projected, policy, &mut rep)?;
    Ok(rep)
}

/// Richardson-extrapolated check of `R = 1 + hbar r + o(hbar)`.
pub fn classical_limit_residual(
    ctx: &Ctx,
    hbars: &[f64],
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = ctx.n;
    let rs: Vec<ScalarTensor> = hbars
        .iter()
        .map(|&h| felder_r(&ctx.with_hbar(C64::new(h, 0.0)), &ScalarExpr::var(VarId::U)))
        .collect();
    let r_cl = classical_r(ctx, &ScalarExpr::var(VarId::U));
    let eye = identity(n * n);
    let mut rep = ResidualReport::new(id, "LqLc", tol, policy.seed);
    let vars = all_vars(ctx, &[VarId::U]);
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let want = r_cl.eval(&mut ev)?;
        let slopes: Result<Vec<Array2<C64>>> = rs
            .iter()
            .zip(hbars.iter())
            .map(|(r, &h)| {
                let m = r.eval(&mut ev)?;
                Ok((&m - &eye).mapv(|x| x / h))
            })
            .collect();
        let got = richardson(&slopes?, hbars);
        Ok(matrix_gap(&got, &want))
    })?;
    Ok(rep)
}

/// Richardson extrapolation to step zero for values at steps `h`,
/// assuming the error expands in integer powers of the step: at table
/// level `k` the power `h^k` is eliminated with multiplier `ratio^k`.
pub fn richardson(values: &[Array2<C64>], h: &[f64]) -> Array2<C64> {
    let mut table: Vec<Array2<C64>> = values.to_vec();
    let mut steps: Vec<f64> = h.to_vec();
    let mut level = 1i32;
    while table.len() > 1 {
        let mut next = Vec::with_capacity(table.len() - 1);
        let mut nsteps = Vec::with_capacity(table.len() - 1);
        for i in 0..table.len() - 1 {
            let factor = (steps[i] / steps[i + 1]).powi(level);
            let num = &table[i + 1].mapv(|x| x * factor) - &table[i];
            next.push(num.mapv(|x| x / (factor - 1.0)));
            nsteps.push(steps[i + 1]);
        }
        table = next;
        steps = nsteps;
        level += 1;
    }
    table.pop().unwrap()
}

/// The classical dynamical Yang-Baxter equation
/// `[[r,r]] + D_lambda(r) = 0` in the triple evaluation representation.
pub fn cdybe_residual(
    ctx: &Ctx,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let r = classical_r(ctx, &ScalarExpr::var(VarId::U));
    cdybe_of(ctx, &r, policy, tol, id, "CDYBE")
}

/// CDYBE residual of an arbitrary candidate 2-leg r-matrix given as a
/// function of `U` (the difference of its two evaluation parameters).
fn cdybe_of(
    ctx: &Ctx,
    r: &ScalarTensor,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
    anchor: &str,
) -> Result<ResidualReport> {
    let legs_of = |a: VarId, b: VarId, legs: &[usize]| -> Result<ScalarTensor> {
        r.subst_var(VarId::U, &u_minus(a, b))?.embed(legs, 3)
    };
    let r12 = legs_of(VarId::U, VarId::V, &[0, 1])?;
    let r13 = legs_of(VarId::U, VarId::W, &[0, 2])?;
    let r23 = legs_of(VarId::V, VarId::W, &[1, 2])?;
    let d_parts = dlambda_term(ctx, r)?;
    let mut rep = ResidualReport::new(id, anchor, tol, policy.seed);
    let vars = all_vars(ctx, &[VarId::U, VarId::V, VarId::W]);
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let a12 = r12.eval(&mut ev)?;
        let a13 = r13.eval(&mut ev)?;
        let a23 = r23.eval(&mut ev)?;
        let comm = |x: &Array2<C64>, y: &Array2<C64>| x.dot(y) - y.dot(x);
        let mut total = comm(&a12, &a13) + comm(&a12, &a23) + comm(&a13, &a23);
        let scale = crate::linalg::norm_max(&total)
            .max(crate::linalg::norm_max(&a12))
            .max(crate::linalg::norm_max(&a23));
        total = total + d_parts.eval_3leg(ctx, &mut ev)?;
        let diff = crate::linalg::norm_max(&total);
        Ok((diff, scale))
    })?;
    Ok(rep)
}

/// The three derivative blocks of `D_lambda(a)` for a 2-leg matrix `a`:
/// `-sum_i E^{(1)}_ii d_i a^{(23)} + sum_i E^{(2)}_ii d_i a^{(13)} - sum_i E^{(3)}_ii d_i a^{(12)}`.
struct DLambdaTerm {
    parts: Vec<(Array2<C64>, ScalarTensor)>, // (numeric Cartan factor, derivative tensor)
}

impl DLambdaTerm {
    fn eval_3leg(&self, _ctx: &Ctx, ev: &mut Evaluator) -> Result<Array2<C64>> {
        let dim = self.parts[0].0.nrows();
        let mut acc = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
        for (h, da) in &self.parts {
            acc = acc + h.dot(&da.eval(ev)?);
        }
        Ok(acc)
    }
}

fn dlambda_term(ctx: &Ctx, r: &ScalarTensor) -> Result<DLambdaTerm> {
    let n = ctx.n;
    let mut parts = Vec::new();
    // Spectator-leg Cartan factors, derivative of the complementary block.
    let blocks: [(usize, [usize; 2], [VarId; 2], f64); 3] = [
        (0, [1, 2], [VarId::V, VarId::W], -1.0),
        (1, [0, 2], [VarId::U, VarId::W], 1.0),
        (2, [0, 1], [VarId::U, VarId::V], -1.0),
    ];
    for (spectator, legs, vars, sign) in blocks {
        let base = r.subst_var(VarId::U, &u_minus(vars[0], vars[1]))?;
        for i in 0..n {
            let di = base
                .map(|e| e.differentiate(VarId::Lambda(i as u8)).expect("diff r"))
                .embed(&legs, 3)?;
            let h = crate::opalg::embed_numeric(n, 3, &[spectator], &crate::linalg::e_matrix(n, i, i))
                .mapv(|x| x * sign);
            parts.push((h, di));
        }
    }
    Ok(DLambdaTerm { parts })
}

/// All three vanishing conditions of the classical dynamical twist, plus
/// the match of `r - f` against the displayed twisted r-matrix.
pub fn classical_twist_residual(
    ctx: &Ctx,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = ctx.n;
    let f = classical_twist_f(ctx);
    let r_t = classical_r_tilde(ctx, &ScalarExpr::var(VarId::U));
    let mut rep = ResidualReport::new(id, "cdtwist", tol, policy.seed);

    // Direct structural form of the twisted r-matrix.
    let mut direct = ScalarTensor::zero(n, 2);
    let u = ScalarExpr::var(VarId::U);
    let th_u = ScalarExpr::theta(u.clone());
    for i in 0..n {
        direct.entries[(idx2(n, i, i), idx2(n, i, i))] =
            ScalarExpr::theta_deriv(1, u.clone()).div(&th_u);
        for j in 0..n {
            if i != j {
                let lij = lambda_diff(i, j);
                direct.entries[(idx2(n, i, j), idx2(n, j, i))] = ScalarExpr::theta(u.sub(&lij))
                    .div(&th_u.mul(&ScalarExpr::theta(lij.neg())));
            }
        }
    }
    crate::residual::residual_scalar_tensor(ctx, &r_t, &direct, policy, &mut rep)?;

    // [[f,f]] = 0, [[rt,f]] + [[f,rt]] = 0, D_lambda(f) = 0.
    let embed_f = |a: VarId, b: VarId, legs: &[usize]| -> Result<ScalarTensor> {
        // f has no spectral dependence; variables are named for symmetry.
        let _ = (a, b);
        f.embed(legs, 3)
    };
    let f12 = embed_f(VarId::U, VarId::V, &[0, 1])?;
    let f13 = embed_f(VarId::U, VarId::W, &[0, 2])?;
    let f23 = embed_f(VarId::V, VarId::W, &[1, 2])?;
    let rt12 = r_t.subst_var(VarId::U, &u_minus(VarId::U, VarId::V))?.embed(&[0, 1], 3)?;
    let rt13 = r_t.subst_var(VarId::U, &u_minus(VarId::U, VarId::W))?.embed(&[0, 2], 3)?;
    let rt23 = r_t.subst_var(VarId::U, &u_minus(VarId::V, VarId::W))?.embed(&[1, 2], 3)?;
    let df = dlambda_term(ctx, &f)?;
    let vars = all_vars(ctx, &[VarId::U, VarId::V, VarId::W]);
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let (b12, b13, b23) = (f12.eval(&mut ev)?, f13.eval(&mut ev)?, f23.eval(&mut ev)?);
        let (a12, a13, a23) = (rt12.eval(&mut ev)?, rt13.eval(&mut ev)?, rt23.eval(&mut ev)?);
        let comm = |x: &Array2<C64>, y: &Array2<C64>| x.dot(y) - y.dot(x);
        // [[f,f]]
        let ff = comm(&b12, &b13) + comm(&b12, &b23) + comm(&b13, &b23);
        // [[rt,f]] + [[f,rt]]
        let cross = comm(&a12, &b13)
            + comm(&a12, &b23)
            + comm(&a13, &b23)
            + comm(&b12, &a13)
            + comm(&b12, &a23)
            + comm(&b13, &a23);
        let dfv = df.eval_3leg(ctx, &mut ev)?;
        let scale = crate::linalg::norm_max(&a12)
            .max(crate::linalg::norm_max(&b12))
            .max(1.0);
        let diff = crate::linalg::norm_max(&ff)
            .max(crate::linalg::norm_max(&cross))
            .max(crate::linalg::norm_max(&dfv));
        Ok((diff, scale))
    })?;
    Ok(rep)
}

/// Gap between the elliptic R-matrix at modulus `i * im_tau` and the
/// dynamical trigonometric limit form.
pub fn trig_limit_gap(
    ctx: &Ctx,
    im_tau: f64,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let ctx_t = ctx.with_tau(C64::new(0.0, im_tau))?;
    let r_ell = felder_r(&ctx_t, &u_minus(VarId::U, VarId::V));
    let r_trig = trig_r(ctx, RKind::TrigDynamical, &z_of(VarId::U), &z_of(VarId::V));
    let mut rep = ResidualReport::new(id, "RtrigD", tol, policy.seed);
    let vars = all_vars(ctx, &[VarId::U, VarId::V]);
    residual_custom(ctx, &vars, policy, &mut rep, |pt| {
        let mut ev_t = Evaluator::new(&ctx_t, pt);
        let a = r_ell.eval(&mut ev_t)?;
        let mut ev = Evaluator::new(ctx, pt);
        let b = r_trig.eval(&mut ev)?;
        Ok(matrix_gap(&a, &b))
    })?;
    Ok(rep)
}

/// `F^{(21)} R_trig(z,w) F^{-1} = R~_trig(z,w)`, entrywise.
pub fn trig_f_conjugation_residual(
    ctx: &Ctx,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = ctx.n;
    let f = twist_f_numeric(ctx);
    let p = permutation_operator(n, &[1, 0]);
    let f21 = p.dot(&f).dot(&p);
    let f_inv = {
        // Diagonal.
        let mut m = f.clone();
        for i in 0..n * n {
            m[(i, i)] = 1.0 / f[(i, i)];
        }
        m
    };
    let r = trig_r(ctx, RKind::TrigNonDynamical, &ScalarExpr::var(VarId::Z), &ScalarExpr::var(VarId::Z2));
    let rt = trig_r(ctx, RKind::TrigTilde, &ScalarExpr::var(VarId::Z), &ScalarExpr::var(VarId::Z2));
    let mut rep = ResidualReport::new(id, "Rtildetrig", tol, policy.seed);
    residual_custom(ctx, &[VarId::Z, VarId::Z2], policy, &mut rep, |pt| {
        let mut ev = Evaluator::new(ctx, pt);
        let lhs = f21.dot(&r.eval(&mut ev)?).dot(&f_inv);
        let rhs = rt.eval(&mut ev)?;
        Ok(matrix_gap(&lhs, &rhs))
    })?;
    Ok(rep)
}

/// Non-dynamical limit: the dynamical trigonometric R-matrix at deep
/// imaginary `lambda` staircase matches the non-dynamical form.
pub fn trig_nondyn_limit_residual(
    ctx: &Ctx,
    depth: f64,
    policy: SamplingPolicy,
    tol: f64,
    id: &str,
) -> Result<ResidualReport> {
    let n = ctx.n;
    let r_dyn = trig_r(ctx, RKind::TrigDynamical, &z_of(VarId::U), &z_of(VarId::V));
    let r_non = trig_r(ctx, RKind::TrigNonDynamical, &z_of(VarId::U), &z_of(VarId::V));
    let mut rep = ResidualReport::new(id, "Rtrig", tol, policy.seed);
    residual_custom(ctx, &[VarId::U, VarId::V], policy, &mut rep, |pt| {
        // lambda_k = k * depth * i + jitter from the spectral draw, so
        // lambda_k - lambda_{k+1} = -depth * i.
        let mut full = pt.clone();
        let jitter = pt.get(VarId::U).unwrap_or(C64::new(0.0, 0.0)).re * 0.1;
        for k in 0..n {
            full.insert(
                VarId::Lambda(k as u8),
                C64::new(jitter * (k as f64 + 1.0), depth * k as f64),
            );
        }
        let mut ev = Evaluator::new(ctx, &full);
        let a = r_dyn.eval(&mut ev)?;
        let b = r_non.eval(&mut ev)?;
        Ok(matrix_gap(&a, &b))
    })?;
    Ok(rep)
}
