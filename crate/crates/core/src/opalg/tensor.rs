//! Tensors with labeled auxiliary legs over ring elements, and the
//! lighter pure-function variant used for R-matrices.

use super::elem::{CoeffMat, OperatorElem};
use super::mono::{Flavor, Mono};
use super::qspace::QuantumSpace;
use crate::ctx::{Ctx, MAX_RANK};
use crate::error::{Error, Result};
use crate::linalg::{digits, from_digits};
use crate::scalar::{Evaluator, ScalarExpr, VarId};
use crate::C64;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use ndarray::Array2;

/// Element of `End(C^n)^{(x) legs} (x) OperatorElem`.
#[derive(Debug, Clone)]
pub struct AuxTensor {
    pub n: usize,
    pub legs: usize,
    pub flavor: Flavor,
    pub qdim: usize,
    entries: Vec<OperatorElem>,
}

impl AuxTensor {
    pub fn dim(&self) -> usize {
        self.n.pow(self.legs as u32)
    }

    pub fn zero(n: usize, legs: usize, flavor: Flavor, qdim: usize) -> Self {
        let dim = n.pow(legs as u32);
        Self {
            n,
            legs,
            flavor,
            qdim,
            entries: alloc::vec![OperatorElem::zero(flavor, qdim); dim * dim],
        }
    }

    pub fn identity(n: usize, legs: usize, flavor: Flavor, qdim: usize) -> Self {
        let mut t = Self::zero(n, legs, flavor, qdim);
        for r in 0..t.dim() {
            *t.get_mut(r, r) = OperatorElem::identity(flavor, qdim);
        }
        t
    }

    pub fn get(&self, r: usize, c: usize) -> &OperatorElem {
        &self.entries[r * self.dim() + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut OperatorElem {
        let d = self.dim();
        &mut self.entries[r * d + c]
    }

    pub fn from_numeric(
        n: usize,
        legs: usize,
        flavor: Flavor,
        qdim: usize,
        m: &Array2<C64>,
    ) -> Self {
        let mut t = Self::zero(n, legs, flavor, qdim);
        for r in 0..t.dim() {
            for c in 0..t.dim() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    *t.get_mut(r, c) =
                        OperatorElem::from_coeff(flavor, CoeffMat::identity(qdim).scale(v));
                }
            }
        }
        t
    }

    pub fn add(&self, other: &AuxTensor) -> AuxTensor {
        let mut out = self.clone();
        for r in 0..out.dim() {
            for c in 0..out.dim() {
                if !other.get(r, c).is_zero() {
                    *out.get_mut(r, c) = out.get(r, c).add(other.get(r, c));
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &AuxTensor) -> AuxTensor {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, k: C64) -> AuxTensor {
        self.map_entries(|e| e.scale(k))
    }

    pub fn map_entries(&self, f: impl Fn(&OperatorElem) -> OperatorElem) -> AuxTensor {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            if !e.is_zero() {
                *e = f(e);
            }
        }
        out
    }

    pub fn try_map_entries(
        &self,
        f: impl Fn(&OperatorElem) -> Result<OperatorElem>,
    ) -> Result<AuxTensor> {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            if !e.is_zero() {
                *e = f(e)?;
            }
        }
        Ok(out)
    }

    /// Ring-valued matrix product (legs aligned).
    pub fn mul(&self, ctx: &Ctx, other: &AuxTensor) -> Result<AuxTensor> {
        if self.n != other.n || self.legs != other.legs {
            return Err(Error::Dimension("leg mismatch in tensor product".into()));
        }
        let dim = self.dim();
        let mut out = AuxTensor::zero(self.n, self.legs, self.flavor, self.qdim);
        for r in 0..dim {
            for k in 0..dim {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..dim {
                    let b = other.get(k, c);
                    if b.is_zero() {
                        continue;
                    }
                    let p = a.mul(ctx, b)?;
                    *out.get_mut(r, c) = out.get(r, c).add(&p);
                }
            }
        }
        Ok(out)
    }

    /// Left multiplication by a numeric aux-space matrix.
    pub fn mul_numeric_left(&self, m: &Array2<C64>) -> AuxTensor {
        let dim = self.dim();
        let mut out = AuxTensor::zero(self.n, self.legs, self.flavor, self.qdim);
        for r in 0..dim {
            for k in 0..dim {
                let w = m[(r, k)];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..dim {
                    let b = self.get(k, c);
                    if b.is_zero() {
                        continue;
                    }
                    *out.get_mut(r, c) = out.get(r, c).add(&b.scale(w));
                }
            }
        }
        out
    }

    pub fn mul_numeric_right(&self, m: &Array2<C64>) -> AuxTensor {
        let dim = self.dim();
        let mut out = AuxTensor::zero(self.n, self.legs, self.flavor, self.qdim);
        for c in 0..dim {
            for k in 0..dim {
                let w = m[(k, c)];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..dim {
                    let a = self.get(r, k);
                    if a.is_zero() {
                        continue;
                    }
                    *out.get_mut(r, c) = out.get(r, c).add(&a.scale(w));
                }
            }
        }
        out
    }

    /// Place this tensor's legs at `target_legs` (0-based, any order)
    /// inside `total_legs`, identity elsewhere.
    pub fn embed(&self, target_legs: &[usize], total_legs: usize) -> Result<AuxTensor> {
        check_legs(target_legs, self.legs, total_legs)?;
        let mut out = AuxTensor::zero(self.n, total_legs, self.flavor, self.qdim);
        let dim = out.dim();
        for row in 0..dim {
            let rd = digits(row, self.n, total_legs);
            'col: for col in 0..dim {
                let cd = digits(col, self.n, total_legs);
                for l in 0..total_legs {
                    if !target_legs.contains(&l) && rd[l] != cd[l] {
                        continue 'col;
                    }
                }
                let r_small: Vec<usize> = target_legs.iter().map(|&l| rd[l]).collect();
                let c_small: Vec<usize> = target_legs.iter().map(|&l| cd[l]).collect();
                let e = self.get(
                    from_digits(&r_small, self.n),
                    from_digits(&c_small, self.n),
                );
                if !e.is_zero() {
                    *out.get_mut(row, col) = e.clone();
                }
            }
        }
        Ok(out)
    }

    /// Sum the diagonal aux indices over `legs`; remaining legs keep
    /// their relative order.
    pub fn partial_trace(&self, legs: &[usize]) -> Result<AuxTensor> {
        for &l in legs {
            if l >= self.legs {
                return Err(Error::Dimension(alloc::format!("unknown leg {l}")));
            }
        }
        let keep: Vec<usize> = (0..self.legs).filter(|l| !legs.contains(l)).collect();
        let mut out = AuxTensor::zero(self.n, keep.len(), self.flavor, self.qdim);
        let dim = self.dim();
        for row in 0..dim {
            let rd = digits(row, self.n, self.legs);
            for col in 0..dim {
                let cd = digits(col, self.n, self.legs);
                if legs.iter().any(|&l| rd[l] != cd[l]) {
                    continue;
                }
                let e = self.get(row, col);
                if e.is_zero() {
                    continue;
                }
                let r_keep: Vec<usize> = keep.iter().map(|&l| rd[l]).collect();
                let c_keep: Vec<usize> = keep.iter().map(|&l| cd[l]).collect();
                let (r2, c2) = (from_digits(&r_keep, self.n), from_digits(&c_keep, self.n));
                *out.get_mut(r2, c2) = out.get(r2, c2).add(e);
            }
        }
        Ok(out)
    }

    /// Trace over all legs, yielding a bare ring element.
    pub fn trace_full(&self) -> OperatorElem {
        let mut acc = OperatorElem::zero(self.flavor, self.qdim);
        for r in 0..self.dim() {
            acc = acc.add(self.get(r, r));
        }
        acc
    }

    /// Shift `lambda` in every coefficient by `sign * hbar` per occurrence
    /// of each leg's column index: realizes arguments like
    /// `lambda + hbar sum_{l in legs} E^{(l)}`.
    pub fn shift_lambda_by_legs(&self, ctx: &Ctx, legs: &[usize], sign: i32) -> AuxTensor {
        let dim = self.dim();
        let mut out = self.clone();
        for r in 0..dim {
            for c in 0..dim {
                if out.get(r, c).is_zero() {
                    continue;
                }
                let cd = digits(c, self.n, self.legs);
                let mut offsets = [0i32; MAX_RANK];
                for &l in legs {
                    offsets[cd[l]] += sign;
                }
                let shifts: Vec<(VarId, i32)> = offsets
                    .iter()
                    .enumerate()
                    .filter(|(_, &o)| o != 0)
                    .map(|(k, &o)| (VarId::Lambda(k as u8), o))
                    .collect();
                if !shifts.is_empty() {
                    *out.get_mut(r, c) = out.get(r, c).shift_coeffs(ctx, &shifts);
                }
            }
        }
        out
    }

    /// Shift `lambda` by `sign * hbar * h` where `h` are the Cartan
    /// weights of the quantum space: on the weight-`w` column block every
    /// coefficient gets `lambda_k -> lambda_k + sign * hbar * w_k`.
    pub fn shift_lambda_by_weights(
        &self,
        ctx: &Ctx,
        qspace: &QuantumSpace,
        sign: i32,
    ) -> AuxTensor {
        self.map_entries(|e| {
            let mut out = OperatorElem::zero(e.flavor, e.qdim);
            for (mono, cm) in &e.terms {
                let new = CoeffMat(Array2::from_shape_fn(
                    (e.qdim, e.qdim),
                    |(i, j)| {
                        let f = &cm.0[(i, j)];
                        if f.is_const_zero() {
                            return f.clone();
                        }
                        let w = qspace.weights(j);
                        let shifts: Vec<(VarId, i32)> = (0..qspace.n)
                            .filter(|&k| w[k] != 0)
                            .map(|k| (VarId::Lambda(k as u8), sign * w[k]))
                            .collect();
                        f.substitute_shift_many(ctx, &shifts)
                    },
                ));
                out = out.add(&OperatorElem::from_term(e.flavor, new, *mono));
            }
            out
        })
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut vars = BTreeSet::new();
        for e in &self.entries {
            vars.extend(e.free_vars());
        }
        vars
    }

    /// Numeric value per monomial, flattened over aux (x) quantum.
    pub fn eval_mono_coeffs(&self, ev: &mut Evaluator) -> Result<BTreeMap<Mono, Array2<C64>>> {
        let dim = self.dim();
        let big = dim * self.qdim;
        let mut out: BTreeMap<Mono, Array2<C64>> = BTreeMap::new();
        for r in 0..dim {
            for c in 0..dim {
                let e = self.get(r, c);
                for (mono, cm) in &e.terms {
                    let vals = cm.eval(ev)?;
                    let slot = out
                        .entry(*mono)
                        .or_insert_with(|| Array2::from_elem((big, big), C64::new(0.0, 0.0)));
                    for ((qi, qj), v) in vals.indexed_iter() {
                        slot[(r * self.qdim + qi, c * self.qdim + qj)] = *v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Fully numeric evaluation; requires every entry to be monomial-free.
    pub fn eval_numeric(&self, ev: &mut Evaluator) -> Result<Array2<C64>> {
        let coeffs = self.eval_mono_coeffs(ev)?;
        let big = self.dim() * self.qdim;
        let mut out = Array2::from_elem((big, big), C64::new(0.0, 0.0));
        for (mono, m) in coeffs {
            if !mono.is_one() {
                return Err(Error::Usage(
                    "eval_numeric on a tensor containing shift/derivative monomials".into(),
                ));
            }
            out = out + m;
        }
        Ok(out)
    }

    pub fn prune(&self, ctx: &Ctx) -> AuxTensor {
        self.map_entries(|e| e.prune(ctx))
    }

    /// Ordered product of embedded factors.
    pub fn product_of(ctx: &Ctx, factors: &[AuxTensor]) -> Result<AuxTensor> {
        let first = factors
            .first()
            .ok_or_else(|| Error::Usage("empty tensor product".into()))?;
        let mut acc = first.clone();
        for f in &factors[1..] {
            acc = acc.mul(ctx, f)?;
        }
        Ok(acc)
    }
}

fn check_legs(target: &[usize], expect: usize, total: usize) -> Result<()> {
    if target.len() != expect {
        return Err(Error::Dimension(alloc::format!(
            "embedding {expect} legs into {} targets",
            target.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for &l in target {
        if l >= total || !seen.insert(l) {
            return Err(Error::Dimension(alloc::format!(
                "leg {l} duplicate or out of range (total {total})"
            )));
        }
    }
    Ok(())
}

/// Matrix of pure coefficient functions on `legs` tensor legs -- enough
/// for R-matrices and their products, cheaper than full ring elements.
#[derive(Debug, Clone)]
pub struct ScalarTensor {
    pub n: usize,
    pub legs: usize,
    pub entries: Array2<ScalarExpr>,
}

impl ScalarTensor {
    pub fn dim(&self) -> usize {
        self.n.pow(self.legs as u32)
    }

    pub fn zero(n: usize, legs: usize) -> Self {
        let dim = n.pow(legs as u32);
        Self {
            n,
            legs,
            entries: Array2::from_shape_fn((dim, dim), |_| ScalarExpr::zero()),
        }
    }

    pub fn identity(n: usize, legs: usize) -> Self {
        let dim = n.pow(legs as u32);
        Self {
            n,
            legs,
            entries: Array2::from_shape_fn((dim, dim), |(i, j)| {
                if i == j {
                    ScalarExpr::one()
                } else {
                    ScalarExpr::zero()
                }
            }),
        }
    }

    pub fn from_numeric(n: usize, legs: usize, m: &Array2<C64>) -> Self {
        Self { n, legs, entries: m.mapv(ScalarExpr::constant) }
    }

    pub fn map(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> ScalarTensor {
        ScalarTensor {
            n: self.n,
            legs: self.legs,
            entries: self.entries.map(|e| if e.is_const_zero() { e.clone() } else { f(e) }),
        }
    }

    pub fn add(&self, other: &ScalarTensor) -> ScalarTensor {
        ScalarTensor {
            n: self.n,
            legs: self.legs,
            entries: Array2::from_shape_fn(self.entries.dim(), |(i, j)| {
                self.entries[(i, j)].add(&other.entries[(i, j)])
            }),
        }
    }

    pub fn sub(&self, other: &ScalarTensor) -> ScalarTensor {
        self.add(&other.map(|e| e.neg()))
    }

    pub fn scale_expr(&self, f: &ScalarExpr) -> ScalarTensor {
        self.map(|e| e.mul(f))
    }

    /// Symbolic matrix product.
    pub fn mul(&self, other: &ScalarTensor) -> ScalarTensor {
        let dim = self.dim();
        ScalarTensor {
            n: self.n,
            legs: self.legs,
            entries: Array2::from_shape_fn((dim, dim), |(i, j)| {
                let mut parts = Vec::new();
                for k in 0..dim {
                    let a = &self.entries[(i, k)];
                    let b = &other.entries[(k, j)];
                    if a.is_const_zero() || b.is_const_zero() {
                        continue;
                    }
                    parts.push(a.mul(b));
                }
                ScalarExpr::sum(parts)
            }),
        }
    }

    pub fn embed(&self, target_legs: &[usize], total_legs: usize) -> Result<ScalarTensor> {
        check_legs(target_legs, self.legs, total_legs)?;
        let dim = self.n.pow(total_legs as u32);
        let mut out = ScalarTensor::zero(self.n, total_legs);
        for row in 0..dim {
            let rd = digits(row, self.n, total_legs);
            'col: for col in 0..dim {
                let cd = digits(col, self.n, total_legs);
                for l in 0..total_legs {
                    if !target_legs.contains(&l) && rd[l] != cd[l] {
                        continue 'col;
                    }
                }
                let r_small: Vec<usize> = target_legs.iter().map(|&l| rd[l]).collect();
                let c_small: Vec<usize> = target_legs.iter().map(|&l| cd[l]).collect();
                let e = &self.entries[(
                    from_digits(&r_small, self.n),
                    from_digits(&c_small, self.n),
                )];
                if !e.is_const_zero() {
                    out.entries[(row, col)] = e.clone();
                }
            }
        }
        Ok(out)
    }

    /// Conjugation by the permutation of legs: `pi(sigma) T pi(sigma)^{-1}`.
    pub fn permute_legs(&self, sigma: &[usize]) -> ScalarTensor {
        let dim = self.dim();
        let mut out = ScalarTensor::zero(self.n, self.legs);
        for row in 0..dim {
            let rd = digits(row, self.n, self.legs);
            for col in 0..dim {
                let cd = digits(col, self.n, self.legs);
                let a: Vec<usize> = (0..self.legs).map(|k| rd[sigma[k]]).collect();
                let b: Vec<usize> = (0..self.legs).map(|k| cd[sigma[k]]).collect();
                out.entries[(row, col)] =
                    self.entries[(from_digits(&a, self.n), from_digits(&b, self.n))].clone();
            }
        }
        out
    }

    /// As for [`AuxTensor::shift_lambda_by_legs`].
    pub fn shift_lambda_by_legs(&self, ctx: &Ctx, legs: &[usize], sign: i32) -> ScalarTensor {
        let dim = self.dim();
        let mut out = self.clone();
        for r in 0..dim {
            for c in 0..dim {
                if out.entries[(r, c)].is_const_zero() {
                    continue;
                }
                let cd = digits(c, self.n, self.legs);
                let mut offsets = [0i32; MAX_RANK];
                for &l in legs {
                    offsets[cd[l]] += sign;
                }
                let shifts: Vec<(VarId, i32)> = offsets
                    .iter()
                    .enumerate()
                    .filter(|(_, &o)| o != 0)
                    .map(|(k, &o)| (VarId::Lambda(k as u8), o))
                    .collect();
                if !shifts.is_empty() {
                    out.entries[(r, c)] =
                        out.entries[(r, c)].substitute_shift_many(ctx, &shifts);
                }
            }
        }
        out
    }

    /// Left multiplication by a numeric aux matrix.
    pub fn mul_numeric_left(&self, m: &Array2<C64>) -> ScalarTensor {
        let dim = self.dim();
        let mut out = ScalarTensor::zero(self.n, self.legs);
        for r in 0..dim {
            for k in 0..dim {
                let w = m[(r, k)];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..dim {
                    let b = &self.entries[(k, c)];
                    if b.is_const_zero() {
                        continue;
                    }
                    out.entries[(r, c)] = out.entries[(r, c)].add(&b.scale(w));
                }
            }
        }
        out
    }

    pub fn mul_numeric_right(&self, m: &Array2<C64>) -> ScalarTensor {
        let dim = self.dim();
        let mut out = ScalarTensor::zero(self.n, self.legs);
        for c in 0..dim {
            for k in 0..dim {
                let w = m[(k, c)];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..dim {
                    let a = &self.entries[(r, k)];
                    if a.is_const_zero() {
                        continue;
                    }
                    out.entries[(r, c)] = out.entries[(r, c)].add(&a.scale(w));
                }
            }
        }
        out
    }

    pub fn subst_var(&self, x: VarId, replacement: &ScalarExpr) -> Result<ScalarTensor> {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            if !e.is_const_zero() {
                *e = e.subst_var(x, replacement)?;
            }
        }
        Ok(out)
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<Array2<C64>> {
        let mut out = Array2::from_elem(self.entries.dim(), C64::new(0.0, 0.0));
        for ((i, j), e) in self.entries.indexed_iter() {
            if !e.is_const_zero() {
                out[(i, j)] = ev.eval(e)?;
            }
        }
        Ok(out)
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut vars = BTreeSet::new();
        for e in self.entries.iter() {
            vars.extend(e.free_vars());
        }
        vars
    }

    /// Lift to an operator tensor: each function becomes `f * 1_quantum`.
    pub fn to_aux(&self, flavor: Flavor, qdim: usize) -> AuxTensor {
        let mut out = AuxTensor::zero(self.n, self.legs, flavor, qdim);
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let e = &self.entries[(r, c)];
                if !e.is_const_zero() {
                    *out.get_mut(r, c) = OperatorElem::from_scalar(flavor, qdim, e);
                }
            }
        }
        out
    }

    /// Lift with the quantum weight shift `lambda -> lambda + sign*hbar*h`
    /// applied to every coefficient: the quantum part becomes the diagonal
    /// matrix `f(lambda + sign hbar w(.))`.
    pub fn to_aux_weight_shifted(
        &self,
        ctx: &Ctx,
        flavor: Flavor,
        qspace: &QuantumSpace,
        sign: i32,
    ) -> AuxTensor {
        let qdim = qspace.dim();
        let mut out = AuxTensor::zero(self.n, self.legs, flavor, qdim);
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let e = &self.entries[(r, c)];
                if e.is_const_zero() {
                    continue;
                }
                let cm = CoeffMat(Array2::from_shape_fn((qdim, qdim), |(i, j)| {
                    if i != j {
                        return ScalarExpr::zero();
                    }
                    let w = qspace.weights(j);
                    let shifts: Vec<(VarId, i32)> = (0..qspace.n)
                        .filter(|&k| w[k] != 0)
                        .map(|k| (VarId::Lambda(k as u8), sign * w[k]))
                        .collect();
                    e.substitute_shift_many(ctx, &shifts)
                }));
                *out.get_mut(r, c) = OperatorElem::from_coeff(flavor, cm);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{e_matrix, norm_max};
    use crate::scalar::Point;
    use num_complex::ComplexFloat;

    #[test]
    fn embed_single_leg_identity() {
        let c = Ctx::standard(2).unwrap();
        let mut t = AuxTensor::zero(2, 1, Flavor::Shift, 1);
        *t.get_mut(0, 1) = OperatorElem::identity(Flavor::Shift, 1);
        let e = t.embed(&[0], 1).unwrap();
        let pt = Point::new();
        let mut ev = Evaluator::new(&c, &pt);
        let m = e.eval_numeric(&mut ev).unwrap();
        assert_eq!(m[(0, 1)], C64::new(1.0, 0.0));
    }

    #[test]
    fn embed_e12_on_second_leg() {
        // E_12^{(2)} in 2 legs of n=2: e_j (x) e_2 -> e_j (x) e_1.
        let c = Ctx::standard(2).unwrap();
        let t = AuxTensor::from_numeric(2, 1, Flavor::Shift, 1, &e_matrix(2, 0, 1));
        let e = t.embed(&[1], 2).unwrap();
        let mut ev_pt = Point::new();
        ev_pt.insert(VarId::U, C64::new(0.0, 0.0));
        let mut ev = Evaluator::new(&c, &ev_pt);
        let m = e.eval_numeric(&mut ev).unwrap();
        // Basis order: |00>,|01>,|10>,|11>; maps |01> -> |00>, |11> -> |10>.
        assert_eq!(m[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(m[(2, 3)], C64::new(1.0, 0.0));
        let total: C64 = m.iter().sum();
        assert_eq!(total, C64::new(2.0, 0.0));
    }

    #[test]
    fn partial_trace_identity() {
        let c = Ctx::standard(2).unwrap();
        let t = AuxTensor::identity(2, 1, Flavor::Shift, 1);
        let tr = t.partial_trace(&[0]).unwrap();
        assert_eq!(tr.legs, 0);
        let pt = Point::new();
        let mut ev = Evaluator::new(&c, &pt);
        let m = tr.eval_numeric(&mut ev).unwrap();
        assert_eq!(m[(0, 0)], C64::new(2.0, 0.0));
    }

    #[test]
    fn trace_of_a2_both_legs() {
        let c = Ctx::standard(2).unwrap();
        let a2 = super::super::antisym::antisymmetrizer(2, 2);
        let t = AuxTensor::from_numeric(2, 2, Flavor::Shift, 1, &a2);
        let tr = t.partial_trace(&[0, 1]).unwrap();
        let pt = Point::new();
        let mut ev = Evaluator::new(&c, &pt);
        let m = tr.eval_numeric(&mut ev).unwrap();
        // tr A_2 = n(n-1)/2 = 1 for n = 2.
        assert!((m[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trace_cyclicity_numeric() {
        let c = Ctx::standard(2).unwrap();
        let mut s = crate::sampling::Sampler::new(crate::sampling::SamplingPolicy::new(1, 4));
        let a = Array2::from_shape_fn((2, 2), |_| s.complex());
        let b = Array2::from_shape_fn((2, 2), |_| s.complex());
        let ta = AuxTensor::from_numeric(2, 1, Flavor::Shift, 1, &a);
        let tb = AuxTensor::from_numeric(2, 1, Flavor::Shift, 1, &b);
        let ab = ta.mul(&c, &tb).unwrap().trace_full();
        let ba = tb.mul(&c, &ta).unwrap().trace_full();
        let pt = Point::new();
        let mut ev = Evaluator::new(&c, &pt);
        let x = ab.eval_coeffs(&mut ev).unwrap();
        let y = ba.eval_coeffs(&mut ev).unwrap();
        let d = &x[&Mono::one()] - &y[&Mono::one()];
        assert!(norm_max(&d) < 1e-12);
    }

    #[test]
    fn permute_legs_flip() {
        // Flip conjugation of E_12 (x) E_21 gives E_21 (x) E_12.
        let n = 2;
        let m = crate::linalg::kron(&e_matrix(n, 0, 1), &e_matrix(n, 1, 0));
        let t = ScalarTensor::from_numeric(n, 2, &m);
        let flipped = t.permute_legs(&[1, 0]);
        let c = Ctx::standard(2).unwrap();
        let pt = Point::new();
        let mut ev = Evaluator::new(&c, &pt);
        let got = flipped.eval(&mut ev).unwrap();
        let want = crate::linalg::kron(&e_matrix(n, 1, 0), &e_matrix(n, 0, 1));
        assert!(norm_max(&(&got - &want)) < 1e-15);
    }
}
