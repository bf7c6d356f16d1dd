//! Ring elements: finite sums of
//! `(quantum-space matrix of coefficient functions) * monomial`
//! in normal form (all coefficients left of all monomials).

use super::mono::{Flavor, Mono};
use crate::ctx::Ctx;
use crate::error::{Error, Result};
use crate::scalar::{draw_point, Evaluator, Point, ScalarExpr, VarId};
use crate::C64;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use ndarray::Array2;

/// Quantum-space matrix of coefficient functions.
#[derive(Debug, Clone)]
pub struct CoeffMat(pub Array2<ScalarExpr>);

impl CoeffMat {
    pub fn zeros(dim: usize) -> Self {
        CoeffMat(Array2::from_shape_fn((dim, dim), |_| ScalarExpr::zero()))
    }

    pub fn identity(dim: usize) -> Self {
        CoeffMat(Array2::from_shape_fn((dim, dim), |(i, j)| {
            if i == j {
                ScalarExpr::one()
            } else {
                ScalarExpr::zero()
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `f * 1` on a `dim`-dimensional quantum space.
    pub fn scalar(dim: usize, f: &ScalarExpr) -> Self {
        CoeffMat(Array2::from_shape_fn((dim, dim), |(i, j)| {
            if i == j {
                f.clone()
            } else {
                ScalarExpr::zero()
            }
        }))
    }

    pub fn from_numeric(m: &Array2<C64>) -> Self {
        CoeffMat(m.mapv(ScalarExpr::constant))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|e| e.is_const_zero())
    }

    pub fn add(&self, other: &CoeffMat) -> CoeffMat {
        CoeffMat(Array2::from_shape_fn(self.0.dim(), |(i, j)| {
            self.0[(i, j)].add(&other.0[(i, j)])
        }))
    }

    pub fn mul(&self, other: &CoeffMat) -> CoeffMat {
        let d = self.dim();
        CoeffMat(Array2::from_shape_fn((d, d), |(i, j)| {
            let mut parts = Vec::new();
            for k in 0..d {
                let a = &self.0[(i, k)];
                let b = &other.0[(k, j)];
                if a.is_const_zero() || b.is_const_zero() {
                    continue;
                }
                parts.push(a.mul(b));
            }
            ScalarExpr::sum(parts)
        }))
    }

    pub fn scale(&self, c: C64) -> CoeffMat {
        if c == C64::new(0.0, 0.0) {
            return CoeffMat::zeros(self.dim());
        }
        self.map(|e| e.scale(c))
    }

    pub fn scale_expr(&self, f: &ScalarExpr) -> CoeffMat {
        self.map(|e| e.mul(f))
    }

    pub fn map(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> CoeffMat {
        CoeffMat(self.0.map(|e| {
            if e.is_const_zero() {
                e.clone()
            } else {
                f(e)
            }
        }))
    }

    pub fn try_map(&self, f: impl Fn(&ScalarExpr) -> Result<ScalarExpr>) -> Result<CoeffMat> {
        let mut out = self.0.clone();
        for e in out.iter_mut() {
            if !e.is_const_zero() {
                *e = f(e)?;
            }
        }
        Ok(CoeffMat(out))
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<Array2<C64>> {
        let mut out = Array2::from_elem(self.0.dim(), C64::new(0.0, 0.0));
        for ((i, j), e) in self.0.indexed_iter() {
            if !e.is_const_zero() {
                out[(i, j)] = ev.eval(e)?;
            }
        }
        Ok(out)
    }

    pub fn has_opaque(&self) -> bool {
        self.0.iter().any(|e| e.has_opaque())
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        for e in self.0.iter() {
            out.extend(e.free_vars());
        }
    }
}

/// A normal-formed element of the shift or differential operator ring over
/// a `qdim`-dimensional quantum space.
#[derive(Debug, Clone)]
pub struct OperatorElem {
    pub flavor: Flavor,
    pub qdim: usize,
    pub terms: BTreeMap<Mono, CoeffMat>,
}

impl OperatorElem {
    pub fn zero(flavor: Flavor, qdim: usize) -> Self {
        Self { flavor, qdim, terms: BTreeMap::new() }
    }

    pub fn identity(flavor: Flavor, qdim: usize) -> Self {
        Self::from_coeff(flavor, CoeffMat::identity(qdim))
    }

    pub fn from_coeff(flavor: Flavor, coeff: CoeffMat) -> Self {
        let qdim = coeff.dim();
        let mut e = Self::zero(flavor, qdim);
        if !coeff.is_zero() {
            e.terms.insert(Mono::one(), coeff);
        }
        e
    }

    pub fn from_scalar(flavor: Flavor, qdim: usize, f: &ScalarExpr) -> Self {
        Self::from_coeff(flavor, CoeffMat::scalar(qdim, f))
    }

    /// A bare monomial (shift operator or derivation) with unit
    /// coefficient.
    pub fn from_mono(flavor: Flavor, qdim: usize, mono: Mono) -> Self {
        let mut e = Self::zero(flavor, qdim);
        e.terms.insert(mono, CoeffMat::identity(qdim));
        e
    }

    pub fn from_term(flavor: Flavor, coeff: CoeffMat, mono: Mono) -> Self {
        let qdim = coeff.dim();
        let mut e = Self::zero(flavor, qdim);
        if !coeff.is_zero() {
            e.terms.insert(mono, coeff);
        }
        e
    }

    /// Shift-ring elements may carry opaque coefficients; diff-ring
    /// elements must stay differentiable.  Enforced when building from
    /// coefficients of unknown origin.
    pub fn validated(self) -> Result<Self> {
        if self.flavor == Flavor::Diff && self.terms.values().any(|c| c.has_opaque()) {
            return Err(Error::Capability(
                "diff-flavor coefficients must be differentiable expression trees".into(),
            ));
        }
        Ok(self)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert(&mut self, mono: Mono, coeff: CoeffMat) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.remove(&mono) {
            None => {
                self.terms.insert(mono, coeff);
            }
            Some(prev) => {
                let s = prev.add(&coeff);
                if !s.is_zero() {
                    self.terms.insert(mono, s);
                }
            }
        }
    }

    pub fn add(&self, other: &OperatorElem) -> OperatorElem {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &OperatorElem) -> OperatorElem {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> OperatorElem {
        let mut out = Self::zero(self.flavor, self.qdim);
        for (m, cm) in &self.terms {
            out.insert(*m, cm.scale(c));
        }
        out
    }

    pub fn scale_expr(&self, f: &ScalarExpr) -> OperatorElem {
        let mut out = Self::zero(self.flavor, self.qdim);
        for (m, cm) in &self.terms {
            out.insert(*m, cm.scale_expr(f));
        }
        out
    }

    /// Ring product with normal ordering.
    ///
    /// Shift flavor: `S^a f = f(shifted by a) S^a`, so the left factor's
    /// monomial shifts the right factor's coefficients.  Diff flavor:
    /// `d^a f = sum_{g <= a} C(a,g) f^{(g)} d^{a-g}` (Leibniz).  Quantum
    /// matrices multiply; scalar coefficients commute.
    pub fn mul(&self, ctx: &Ctx, other: &OperatorElem) -> Result<OperatorElem> {
        if self.flavor != other.flavor {
            return Err(Error::FlavorMismatch);
        }
        if self.qdim != other.qdim {
            return Err(Error::Dimension(alloc::format!(
                "quantum dims {} vs {}",
                self.qdim,
                other.qdim
            )));
        }
        let mut out = Self::zero(self.flavor, self.qdim);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                match self.flavor {
                    Flavor::Shift => {
                        let shifted = if m1.is_one() {
                            c2.clone()
                        } else {
                            let shifts = m1.shifts();
                            c2.map(|e| e.substitute_shift_many(ctx, &shifts))
                        };
                        out.insert(m1.add(m2), c1.mul(&shifted));
                    }
                    Flavor::Diff => {
                        for (gamma, binom) in m1.sub_indices() {
                            let dc2 = if gamma.is_one() {
                                c2.clone()
                            } else {
                                let mut d = c2.clone();
                                for (var, times) in gamma.derivs() {
                                    for _ in 0..times {
                                        d = d.try_map(|e| e.differentiate(var))?;
                                    }
                                }
                                d
                            };
                            if dc2.is_zero() {
                                continue;
                            }
                            let coeff = c1.mul(&dc2).scale(C64::new(binom, 0.0));
                            out.insert(m1.sub(&gamma).add(m2), coeff);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, ctx: &Ctx, other: &OperatorElem) -> Result<OperatorElem> {
        Ok(self.mul(ctx, other)?.sub(&other.mul(ctx, self)?))
    }

    /// Apply a function to every coefficient expression (monomials kept).
    pub fn map_coeffs(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> OperatorElem {
        let mut out = Self::zero(self.flavor, self.qdim);
        for (m, cm) in &self.terms {
            out.insert(*m, cm.map(&f));
        }
        out
    }

    pub fn try_map_coeffs(
        &self,
        f: impl Fn(&ScalarExpr) -> Result<ScalarExpr>,
    ) -> Result<OperatorElem> {
        let mut out = Self::zero(self.flavor, self.qdim);
        for (m, cm) in &self.terms {
            out.insert(*m, cm.try_map(&f)?);
        }
        Ok(out)
    }

    /// Shift the explicit variable dependence of all coefficients
    /// (monomials untouched).
    pub fn shift_coeffs(&self, ctx: &Ctx, shifts: &[(VarId, i32)]) -> OperatorElem {
        self.map_coeffs(|e| e.substitute_shift_many(ctx, shifts))
    }

    /// Multiply by a numeric quantum-space matrix from the left.
    pub fn qmul_left(&self, m: &Array2<C64>) -> OperatorElem {
        let lift = CoeffMat::from_numeric(m);
        let mut out = Self::zero(self.flavor, self.qdim);
        for (mono, cm) in &self.terms {
            out.insert(*mono, lift.mul(cm));
        }
        out
    }

    pub fn qmul_right(&self, m: &Array2<C64>) -> OperatorElem {
        let lift = CoeffMat::from_numeric(m);
        let mut out = Self::zero(self.flavor, self.qdim);
        for (mono, cm) in &self.terms {
            out.insert(*mono, cm.mul(&lift));
        }
        out
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut vars = BTreeSet::new();
        for cm in self.terms.values() {
            cm.collect_vars(&mut vars);
        }
        vars
    }

    /// Evaluate all coefficient matrices at a point.
    pub fn eval_coeffs(&self, ev: &mut Evaluator) -> Result<BTreeMap<Mono, Array2<C64>>> {
        let mut out = BTreeMap::new();
        for (m, cm) in &self.terms {
            out.insert(*m, cm.eval(ev)?);
        }
        Ok(out)
    }

    /// Drop terms (and zero out entries) whose coefficients evaluate below
    /// `ctx.prune_tol` relative to the largest coefficient magnitude, at
    /// [`Ctx::PRUNE_POINTS`] fixed sample points.
    pub fn prune(&self, ctx: &Ctx) -> OperatorElem {
        let vars: Vec<VarId> = self.free_vars().into_iter().collect();
        let points = match prune_points(ctx, &vars, self) {
            Some(p) => p,
            None => return self.clone(),
        };
        // Per-entry max magnitude across points, and the global scale.
        let mut maxima: BTreeMap<Mono, Array2<f64>> = BTreeMap::new();
        for m in self.terms.keys() {
            maxima.insert(*m, Array2::from_elem((self.qdim, self.qdim), 0.0));
        }
        let mut global: f64 = 0.0;
        for pt in &points {
            let mut ev = Evaluator::new(ctx, pt);
            for (m, cm) in &self.terms {
                let vals = match cm.eval(&mut ev) {
                    Ok(v) => v,
                    Err(_) => return self.clone(),
                };
                let acc = maxima.get_mut(m).unwrap();
                for ((i, j), v) in vals.indexed_iter() {
                    let a = crate::cmath::cabs(*v);
                    if a > acc[(i, j)] {
                        acc[(i, j)] = a;
                    }
                    if a > global {
                        global = a;
                    }
                }
            }
        }
        if global == 0.0 {
            return Self::zero(self.flavor, self.qdim);
        }
        let cut = ctx.prune_tol * global;
        let mut out = Self::zero(self.flavor, self.qdim);
        for (m, cm) in &self.terms {
            let acc = &maxima[m];
            let cleaned = CoeffMat(Array2::from_shape_fn((self.qdim, self.qdim), |(i, j)| {
                if acc[(i, j)] <= cut {
                    ScalarExpr::zero()
                } else {
                    cm.0[(i, j)].clone()
                }
            }));
            out.insert(*m, cleaned);
        }
        out
    }
}

/// The fixed pruning sample set: full assignments of `vars`, drawn from
/// the pruning seed, resampled on singularity.  `None` when a variable
/// set cannot be sampled cleanly (caller then skips pruning).
fn prune_points(ctx: &Ctx, vars: &[VarId], probe: &OperatorElem) -> Option<Vec<Point>> {
    use crate::sampling::{Sampler, SamplingPolicy};
    let mut sampler = Sampler::new(SamplingPolicy::new(
        Ctx::PRUNE_POINTS as u32,
        ctx.prune_seed,
    ));
    let mut out = Vec::with_capacity(Ctx::PRUNE_POINTS);
    for _ in 0..Ctx::PRUNE_POINTS {
        let drawn = draw_point(&mut sampler, vars, 20, |pt| {
            // A point is acceptable when every coefficient evaluates.
            let mut ev = Evaluator::new(ctx, pt);
            for cm in probe.terms.values() {
                cm.eval(&mut ev)?;
            }
            Ok(())
        });
        match drawn {
            Ok(((), pt)) => out.push(pt),
            Err(_) => return None,
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::theta_of;
    use num_complex::ComplexFloat;

    fn ctx() -> Ctx {
        Ctx::standard(2).unwrap()
    }

    #[test]
    fn shift_normal_ordering() {
        // e^{hbar d/du} theta(u) = theta(u+hbar) e^{hbar d/du}.
        let c = ctx();
        let s = OperatorElem::from_mono(Flavor::Shift, 1, Mono::u(1));
        let f = OperatorElem::from_scalar(Flavor::Shift, 1, &theta_of(VarId::U));
        let prod = s.mul(&c, &f).unwrap();
        assert_eq!(prod.terms.len(), 1);
        let (mono, cm) = prod.terms.iter().next().unwrap();
        assert_eq!(*mono, Mono::u(1));
        let u0 = C64::new(0.2, 0.0);
        let got = cm.0[(0, 0)]
            .eval(&c, &Point::new().set(VarId::U, u0))
            .unwrap();
        let want = crate::theta::theta(u0 + c.hbar, &c.ell).unwrap();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn diff_leibniz() {
        // d/du theta(u) = theta(u) d/du + theta'(u).
        let c = ctx();
        let d = OperatorElem::from_mono(Flavor::Diff, 1, Mono::u(1));
        let f = OperatorElem::from_scalar(Flavor::Diff, 1, &theta_of(VarId::U));
        let prod = d.mul(&c, &f).unwrap();
        assert_eq!(prod.terms.len(), 2);
        // Constant-mono coefficient is theta'(u).
        let c0 = prod.terms.get(&Mono::one()).unwrap();
        let u0 = C64::new(0.17, 0.03);
        let got = c0.0[(0, 0)]
            .eval(&c, &Point::new().set(VarId::U, u0))
            .unwrap();
        let want = crate::theta::theta_deriv(1, u0, &c.ell).unwrap();
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn flavor_mismatch_rejected() {
        let c = ctx();
        let a = OperatorElem::from_mono(Flavor::Shift, 1, Mono::u(1));
        let b = OperatorElem::from_mono(Flavor::Diff, 1, Mono::u(1));
        assert!(matches!(a.mul(&c, &b), Err(Error::FlavorMismatch)));
    }

    #[test]
    fn associativity_numeric() {
        let c = ctx();
        let th_u = theta_of(VarId::U);
        let th_l = theta_of(VarId::Lambda(0));
        let a = OperatorElem::from_term(
            Flavor::Shift,
            CoeffMat::scalar(1, &th_u),
            Mono::u(1),
        )
        .add(&OperatorElem::from_mono(Flavor::Shift, 1, Mono::lam(0, -1)));
        let b = OperatorElem::from_term(
            Flavor::Shift,
            CoeffMat::scalar(1, &th_l),
            Mono::lam(0, 1),
        )
        .add(&OperatorElem::identity(Flavor::Shift, 1));
        let d = OperatorElem::from_term(
            Flavor::Shift,
            CoeffMat::scalar(1, &th_u.mul(&th_l)),
            Mono::u(-1),
        );
        let ab_c = a.mul(&c, &b).unwrap().mul(&c, &d).unwrap();
        let a_bc = a.mul(&c, &b.mul(&c, &d).unwrap()).unwrap();
        let diff = ab_c.sub(&a_bc);
        let pt = Point::new()
            .set(VarId::U, C64::new(0.21, 0.11))
            .set(VarId::Lambda(0), C64::new(-0.13, 0.07));
        let mut ev = Evaluator::new(&c, &pt);
        for (_, cm) in diff.eval_coeffs(&mut ev).unwrap() {
            for v in cm.iter() {
                assert!(v.abs() < 1e-10, "associativity residual {v}");
            }
        }
    }

    #[test]
    fn distributivity_numeric() {
        let c = ctx();
        let th = theta_of(VarId::U);
        let a = OperatorElem::from_term(Flavor::Shift, CoeffMat::scalar(1, &th), Mono::u(1));
        let b = OperatorElem::from_mono(Flavor::Shift, 1, Mono::lam(1, 1));
        let d = OperatorElem::from_scalar(Flavor::Shift, 1, &th);
        let lhs = a.mul(&c, &b.add(&d)).unwrap();
        let rhs = a.mul(&c, &b).unwrap().add(&a.mul(&c, &d).unwrap());
        let diff = lhs.sub(&rhs);
        let pt = Point::new()
            .set(VarId::U, C64::new(0.19, -0.08))
            .set(VarId::Lambda(1), C64::new(0.31, 0.04));
        let mut ev = Evaluator::new(&c, &pt);
        for (_, cm) in diff.eval_coeffs(&mut ev).unwrap() {
            for v in cm.iter() {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pruning_drops_cancelled_terms() {
        let c = ctx();
        let th = theta_of(VarId::U);
        let a = OperatorElem::from_term(Flavor::Shift, CoeffMat::scalar(1, &th), Mono::u(1));
        // a - a has one monomial whose coefficient is f - f; structural
        // zero detection alone cannot see it, but the numeric prune can.
        let x = a.sub(&OperatorElem::from_term(
            Flavor::Shift,
            CoeffMat::scalar(1, &th.mul(&ScalarExpr::one())),
            Mono::u(1),
        ));
        // Keep one real term so the global scale is nonzero.
        let x = x.add(&OperatorElem::from_scalar(Flavor::Shift, 1, &th));
        assert_eq!(x.terms.len(), 2);
        let pruned = x.prune(&c);
        assert_eq!(pruned.terms.len(), 1);
        assert!(pruned.terms.contains_key(&Mono::one()));
    }

    #[test]
    fn diff_flavor_rejects_opaque() {
        let (m, _) = crate::scalar::opaque_matrix_fn("f", 1, alloc::vec![VarId::U], |pt| {
            Ok(alloc::vec![pt.get(VarId::U).unwrap()])
        })
        .unwrap();
        let cm = CoeffMat(Array2::from_shape_fn((1, 1), |_| m[(0, 0)].clone()));
        assert!(OperatorElem::from_coeff(Flavor::Diff, cm.clone())
            .validated()
            .is_err());
        assert!(OperatorElem::from_coeff(Flavor::Shift, cm)
            .validated()
            .is_ok());
    }
}
