//! Coefficient functions of the spectral and dynamical variables.
//!
//! [`ScalarExpr`] is an immutable expression DAG over theta nodes,
//! exponentials, rational operations and opaque callbacks.  It supports
//! evaluation at a complex [`Point`], exact symbolic differentiation, and
//! structural affine argument shifts -- the three capabilities the
//! noncommutative operator rings are built on.  There is deliberately no
//! simplification engine beyond constant folding: equality of expressions
//! is always decided numerically by sampling.

mod eval;
mod opaque;

pub use eval::Evaluator;
pub use opaque::{opaque_matrix_fn, Bind, OpaqueRef, OpaqueTable};

use crate::ctx::Ctx;
use crate::error::{Error, Result, VarName};
use crate::report::{mixed_rel, ResidualReport};
use crate::sampling::{Sampler, SamplingPolicy};
use crate::C64;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;
use hashbrown::HashMap;

/// Variables an expression can depend on.
///
/// `U`, `V`, `W` and the `Lambda(k)` are additive with shift step `hbar`
/// (the operators `e^{hbar d/du}`, `e^{hbar d/d lambda_k}`); `Z` and `Z2`
/// are multiplicative with step `q^2` (the operator `q^{2 z d/dz}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarId {
    U,
    V,
    W,
    Z,
    Z2,
    Lambda(u8),
}

impl VarId {
    pub fn is_multiplicative(self) -> bool {
        matches!(self, VarId::Z | VarId::Z2)
    }

    pub fn name(self) -> VarName {
        match self {
            VarId::U => VarName("u", 0),
            VarId::V => VarName("v", 0),
            VarId::W => VarName("w", 0),
            VarId::Z => VarName("z", 0),
            VarId::Z2 => VarName("z2", 0),
            VarId::Lambda(k) => VarName("lambda", k as usize + 1),
        }
    }

    /// The `n` dynamical variables of a rank-`n` engine.
    pub fn lambdas(n: usize) -> Vec<VarId> {
        (0..n).map(|k| VarId::Lambda(k as u8)).collect()
    }
}

/// Assignment of variables to complex values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Point {
    vals: BTreeMap<VarId, C64>,
}

impl Point {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, var: VarId, val: C64) -> Self {
        self.vals.insert(var, val);
        self
    }

    pub fn insert(&mut self, var: VarId, val: C64) {
        self.vals.insert(var, val);
    }

    pub fn get(&self, var: VarId) -> Option<C64> {
        self.vals.get(&var).copied()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vals.keys().copied()
    }
}

#[derive(Debug)]
pub enum Expr {
    Const(C64),
    Var(VarId),
    /// `theta^{(order)}(arg)`.
    Theta { order: u8, arg: ScalarExpr },
    Exp(ScalarExpr),
    Sum(Vec<ScalarExpr>),
    Prod(Vec<ScalarExpr>),
    Quot(ScalarExpr, ScalarExpr),
    Neg(ScalarExpr),
    IntPow(ScalarExpr, i32),
    Opaque(OpaqueRef),
}

const FLAG_OPAQUE: u8 = 1;

#[derive(Debug)]
struct Inner {
    node: Expr,
    flags: u8,
}

/// Shared-subtree handle to an expression DAG.
#[derive(Debug, Clone)]
pub struct ScalarExpr(Arc<Inner>);

fn flags_of(node: &Expr) -> u8 {
    match node {
        Expr::Const(_) | Expr::Var(_) => 0,
        Expr::Opaque(_) => FLAG_OPAQUE,
        Expr::Theta { arg, .. } | Expr::Exp(arg) | Expr::Neg(arg) | Expr::IntPow(arg, _) => {
            arg.0.flags
        }
        Expr::Sum(xs) | Expr::Prod(xs) => xs.iter().fold(0, |f, x| f | x.0.flags),
        Expr::Quot(a, b) => a.0.flags | b.0.flags,
    }
}

impl ScalarExpr {
    fn wrap(node: Expr) -> Self {
        let flags = flags_of(&node);
        ScalarExpr(Arc::new(Inner { node, flags }))
    }

    pub(crate) fn from_opaque(r: OpaqueRef) -> Self {
        Self::wrap(Expr::Opaque(r))
    }

    pub fn node(&self) -> &Expr {
        &self.0.node
    }

    fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn has_opaque(&self) -> bool {
        self.0.flags & FLAG_OPAQUE != 0
    }

    /// Pointer identity; `true` implies structural equality.
    pub fn same(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn constant(c: C64) -> Self {
        Self::wrap(Expr::Const(c))
    }

    pub fn real(x: f64) -> Self {
        Self::constant(C64::new(x, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn one() -> Self {
        Self::real(1.0)
    }

    pub fn var(v: VarId) -> Self {
        Self::wrap(Expr::Var(v))
    }

    pub fn as_const(&self) -> Option<C64> {
        match self.node() {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_const_zero(&self) -> bool {
        matches!(self.node(), Expr::Const(c) if c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_const_one(&self) -> bool {
        matches!(self.node(), Expr::Const(c) if c.re == 1.0 && c.im == 0.0)
    }

    /// `theta^{(order)}(arg)`.
    pub fn theta_deriv(order: u8, arg: ScalarExpr) -> Self {
        Self::wrap(Expr::Theta { order, arg })
    }

    pub fn theta(arg: ScalarExpr) -> Self {
        Self::theta_deriv(0, arg)
    }

    pub fn exp(arg: ScalarExpr) -> Self {
        if let Some(c) = arg.as_const() {
            return Self::constant(crate::cmath::cexp(c));
        }
        Self::wrap(Expr::Exp(arg))
    }

    pub fn add(&self, other: &ScalarExpr) -> Self {
        Self::sum([self.clone(), other.clone()])
    }

    pub fn sum<I: IntoIterator<Item = ScalarExpr>>(terms: I) -> Self {
        let mut parts: Vec<ScalarExpr> = Vec::new();
        let mut konst = C64::new(0.0, 0.0);
        for t in terms {
            match t.node() {
                Expr::Const(c) => konst += c,
                Expr::Sum(xs) => {
                    for x in xs {
                        match x.node() {
                            Expr::Const(c) => konst += c,
                            _ => parts.push(x.clone()),
                        }
                    }
                }
                _ => parts.push(t),
            }
        }
        if konst != C64::new(0.0, 0.0) {
            parts.push(Self::constant(konst));
        }
        match parts.len() {
            0 => Self::zero(),
            1 => parts.pop().unwrap(),
            _ => Self::wrap(Expr::Sum(parts)),
        }
    }

    pub fn sub(&self, other: &ScalarExpr) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &ScalarExpr) -> Self {
        Self::product([self.clone(), other.clone()])
    }

    pub fn product<I: IntoIterator<Item = ScalarExpr>>(factors: I) -> Self {
        let mut parts: Vec<ScalarExpr> = Vec::new();
        let mut konst = C64::new(1.0, 0.0);
        for f in factors {
            match f.node() {
                Expr::Const(c) => konst *= c,
                Expr::Prod(xs) => {
                    for x in xs {
                        match x.node() {
                            Expr::Const(c) => konst *= c,
                            _ => parts.push(x.clone()),
                        }
                    }
                }
                _ => parts.push(f),
            }
        }
        if konst == C64::new(0.0, 0.0) {
            return Self::zero();
        }
        if konst != C64::new(1.0, 0.0) {
            parts.insert(0, Self::constant(konst));
        }
        match parts.len() {
            0 => Self::one(),
            1 => parts.pop().unwrap(),
            _ => Self::wrap(Expr::Prod(parts)),
        }
    }

    pub fn div(&self, other: &ScalarExpr) -> Self {
        if other.is_const_one() {
            return self.clone();
        }
        if self.is_const_zero() {
            return Self::zero();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            if b != C64::new(0.0, 0.0) {
                return Self::constant(a / b);
            }
        }
        Self::wrap(Expr::Quot(self.clone(), other.clone()))
    }

    pub fn neg(&self) -> Self {
        match self.node() {
            Expr::Const(c) => Self::constant(-c),
            Expr::Neg(x) => x.clone(),
            _ => Self::wrap(Expr::Neg(self.clone())),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::product([Self::constant(c), self.clone()])
    }

    pub fn powi(&self, p: i32) -> Self {
        match p {
            0 => Self::one(),
            1 => self.clone(),
            _ => {
                if let Some(c) = self.as_const() {
                    if p > 0 || c != C64::new(0.0, 0.0) {
                        return Self::constant(c.powi(p));
                    }
                }
                Self::wrap(Expr::IntPow(self.clone(), p))
            }
        }
    }

    /// Free variables, including those an opaque callback is bound to.
    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        self.collect_vars(&mut out, &mut seen);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarId>, seen: &mut BTreeSet<usize>) {
        if !seen.insert(self.ptr()) {
            return;
        }
        match self.node() {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Theta { arg, .. } | Expr::Exp(arg) | Expr::Neg(arg) | Expr::IntPow(arg, _) => {
                arg.collect_vars(out, seen)
            }
            Expr::Sum(xs) | Expr::Prod(xs) => {
                for x in xs {
                    x.collect_vars(out, seen);
                }
            }
            Expr::Quot(a, b) => {
                a.collect_vars(out, seen);
                b.collect_vars(out, seen);
            }
            Expr::Opaque(r) => {
                for v in r.source_vars() {
                    out.insert(v);
                }
            }
        }
    }

    /// Exact symbolic derivative with respect to `x`.
    pub fn differentiate(&self, x: VarId) -> Result<ScalarExpr> {
        let mut memo: HashMap<usize, ScalarExpr> = HashMap::new();
        self.diff_inner(x, &mut memo)
    }

    fn diff_inner(&self, x: VarId, memo: &mut HashMap<usize, ScalarExpr>) -> Result<ScalarExpr> {
        if let Some(d) = memo.get(&self.ptr()) {
            return Ok(d.clone());
        }
        let d = match self.node() {
            Expr::Const(_) => Self::zero(),
            Expr::Var(v) => {
                if *v == x {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Expr::Theta { order, arg } => {
                let da = arg.diff_inner(x, memo)?;
                if da.is_const_zero() {
                    Self::zero()
                } else {
                    if *order as usize >= crate::theta::MAX_DERIV {
                        return Err(Error::Capability(alloc::format!(
                            "theta derivative order {} exceeds {}",
                            *order as usize + 1,
                            crate::theta::MAX_DERIV
                        )));
                    }
                    Self::theta_deriv(order + 1, arg.clone()).mul(&da)
                }
            }
            Expr::Exp(arg) => {
                let da = arg.diff_inner(x, memo)?;
                if da.is_const_zero() {
                    Self::zero()
                } else {
                    self.clone().mul(&da)
                }
            }
            Expr::Sum(xs) => {
                let mut parts = Vec::with_capacity(xs.len());
                for t in xs {
                    parts.push(t.diff_inner(x, memo)?);
                }
                Self::sum(parts)
            }
            Expr::Prod(xs) => {
                let mut parts = Vec::new();
                for (i, f) in xs.iter().enumerate() {
                    let df = f.diff_inner(x, memo)?;
                    if df.is_const_zero() {
                        continue;
                    }
                    let factors = xs
                        .iter()
                        .enumerate()
                        .map(|(j, g)| if i == j { df.clone() } else { g.clone() });
                    parts.push(Self::product(factors));
                }
                Self::sum(parts)
            }
            Expr::Quot(a, b) => {
                let da = a.diff_inner(x, memo)?;
                let db = b.diff_inner(x, memo)?;
                if db.is_const_zero() {
                    da.div(b)
                } else {
                    let num = da.mul(b).sub(&a.mul(&db));
                    num.div(&b.mul(b))
                }
            }
            Expr::Neg(a) => a.diff_inner(x, memo)?.neg(),
            Expr::IntPow(a, p) => {
                let da = a.diff_inner(x, memo)?;
                if da.is_const_zero() {
                    Self::zero()
                } else {
                    a.powi(p - 1).scale(C64::new(*p as f64, 0.0)).mul(&da)
                }
            }
            Expr::Opaque(r) => {
                if !r.source_vars().contains(&x) {
                    Self::zero()
                } else {
                    return Err(Error::Capability(
                        "cannot differentiate an opaque node".into(),
                    ));
                }
            }
        };
        memo.insert(self.ptr(), d.clone());
        Ok(d)
    }

    /// Structural substitution `x -> replacement`.  Fails only when an
    /// opaque callback would need a non-affine rebinding.
    pub fn subst_var(&self, x: VarId, replacement: &ScalarExpr) -> Result<ScalarExpr> {
        let mut memo: HashMap<usize, ScalarExpr> = HashMap::new();
        self.subst_inner(
            &|v| {
                if v == x {
                    Some(replacement.clone())
                } else {
                    None
                }
            },
            &mut memo,
        )
    }

    /// Shift `x` by `power` steps: `x -> x + power*hbar` for additive
    /// variables, `x -> x * q^(2 power)` for multiplicative ones.
    pub fn substitute_shift(&self, ctx: &Ctx, x: VarId, power: i32) -> ScalarExpr {
        self.substitute_shift_many(ctx, &[(x, power)])
    }

    /// Simultaneous shift of several variables.
    pub fn substitute_shift_many(&self, ctx: &Ctx, shifts: &[(VarId, i32)]) -> ScalarExpr {
        let live: Vec<(VarId, i32)> =
            shifts.iter().copied().filter(|&(_, p)| p != 0).collect();
        if live.is_empty() {
            return self.clone();
        }
        let mut memo: HashMap<usize, ScalarExpr> = HashMap::new();
        let ctx = *ctx;
        let repl = move |v: VarId| -> Option<ScalarExpr> {
            live.iter().find(|&&(x, _)| x == v).map(|&(x, p)| {
                if x.is_multiplicative() {
                    ScalarExpr::var(x).scale(ctx.q_squared().powi(p))
                } else {
                    ScalarExpr::var(x).add(&ScalarExpr::constant(ctx.hbar * p as f64))
                }
            })
        };
        // Affine shifts always compose into opaque bindings.
        self.subst_inner(&repl, &mut memo)
            .expect("affine shift cannot fail")
    }

    fn subst_inner(
        &self,
        repl: &dyn Fn(VarId) -> Option<ScalarExpr>,
        memo: &mut HashMap<usize, ScalarExpr>,
    ) -> Result<ScalarExpr> {
        if let Some(r) = memo.get(&self.ptr()) {
            return Ok(r.clone());
        }
        let r = match self.node() {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) => repl(*v).unwrap_or_else(|| self.clone()),
            Expr::Theta { order, arg } => {
                let a = arg.subst_inner(repl, memo)?;
                if a.same(arg) {
                    self.clone()
                } else {
                    Self::theta_deriv(*order, a)
                }
            }
            Expr::Exp(arg) => {
                let a = arg.subst_inner(repl, memo)?;
                if a.same(arg) {
                    self.clone()
                } else {
                    Self::exp(a)
                }
            }
            Expr::Sum(xs) => {
                let ys: Result<Vec<_>> = xs.iter().map(|t| t.subst_inner(repl, memo)).collect();
                Self::sum(ys?)
            }
            Expr::Prod(xs) => {
                let ys: Result<Vec<_>> = xs.iter().map(|t| t.subst_inner(repl, memo)).collect();
                Self::product(ys?)
            }
            Expr::Quot(a, b) => a
                .subst_inner(repl, memo)?
                .div(&b.subst_inner(repl, memo)?),
            Expr::Neg(a) => a.subst_inner(repl, memo)?.neg(),
            Expr::IntPow(a, p) => a.subst_inner(repl, memo)?.powi(*p),
            Expr::Opaque(r) => Self::wrap(Expr::Opaque(r.rebind(repl)?)),
        };
        memo.insert(self.ptr(), r.clone());
        Ok(r)
    }

    /// Evaluate at a point (fresh evaluator; for bulk evaluation share an
    /// [`Evaluator`] so the DAG memo is reused).
    pub fn eval(&self, ctx: &Ctx, point: &Point) -> Result<C64> {
        Evaluator::new(ctx, point).eval(self)
    }
}

/// Convenience: `theta(var)` etc.
pub fn theta_of(v: VarId) -> ScalarExpr {
    ScalarExpr::theta(ScalarExpr::var(v))
}

/// `lambda_i - lambda_j` (0-based site indices).
pub fn lambda_diff(i: usize, j: usize) -> ScalarExpr {
    ScalarExpr::var(VarId::Lambda(i as u8)).sub(&ScalarExpr::var(VarId::Lambda(j as u8)))
}

/// Max over sampled points of `|a-b| / (1 + max(|a|,|b|))`; points are
/// redrawn on singularity up to the policy retry limit.
pub fn expr_equal_numeric(
    ctx: &Ctx,
    a: &ScalarExpr,
    b: &ScalarExpr,
    policy: SamplingPolicy,
) -> Result<ResidualReport> {
    let mut vars = a.free_vars();
    vars.extend(b.free_vars());
    let vars: Vec<VarId> = vars.into_iter().collect();
    let mut sampler = Sampler::new(policy);
    let mut rep = ResidualReport::new("expr-equal", "scalar", 1e-12, policy.seed);
    for _ in 0..policy.samples {
        let ((va, vb), _) = draw_point(&mut sampler, &vars, policy.max_retries, |pt| {
            let mut ev = Evaluator::new(ctx, pt);
            let va = ev.eval(a)?;
            let vb = ev.eval(b)?;
            Ok((va, vb))
        })?;
        let diff = crate::cmath::cabs(va - vb);
        rep.record(diff, mixed_rel(diff, crate::cmath::cabs(va).max(crate::cmath::cabs(vb))));
    }
    Ok(rep)
}

/// Draw points for `vars` until `f` evaluates without a singularity;
/// returns `f`'s output and the accepted point.
pub fn draw_point<T>(
    sampler: &mut Sampler,
    vars: &[VarId],
    max_retries: u32,
    mut f: impl FnMut(&Point) -> Result<T>,
) -> Result<(T, Point)> {
    let mut attempts = 0;
    loop {
        let mut pt = Point::new();
        for &v in vars {
            let raw = sampler.complex();
            let val = if v.is_multiplicative() {
                // Sample z = e^{2 pi i x} with x in the usual box, keeping
                // z away from 0 and infinity.
                crate::cmath::cexp(C64::i() * 2.0 * core::f64::consts::PI * raw)
            } else {
                raw
            };
            pt.insert(v, val);
        }
        match f(&pt) {
            Ok(t) => return Ok((t, pt)),
            Err(Error::Singularity(_)) => {
                attempts += 1;
                if attempts > max_retries {
                    return Err(Error::SamplingExhausted { retries: max_retries });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

pub(crate) fn unassigned(v: VarId) -> Error {
    Error::Unassigned(v.name())
}

pub(crate) fn _silence_unused(_: VarName) {}

#[cfg(test)]
mod tests;
