//! Shift / derivative monomials.

use crate::ctx::MAX_RANK;
use crate::scalar::VarId;
use alloc::vec::Vec;

/// Ring flavor: shift operators (`e^{hbar d/du}`, `e^{hbar d/d lambda_k}`,
/// `q^{2 z d/dz}`) or derivations (`d/du`, `d/d lambda_k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Shift,
    Diff,
}

/// Exponent vector of a monomial in the commuting shift (or derivative)
/// generators.  In shift flavor `du` counts powers of `e^{hbar d/du}`
/// (negative allowed), `dlam[k]` powers of `e^{hbar d/d lambda_k}` and
/// `dz` powers of `q^{2 z d/dz}`.  In diff flavor the entries are the
/// (non-negative) orders of `d/du` and `d/d lambda_k`; `dz` is unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mono {
    pub du: i16,
    pub dz: i16,
    pub dlam: [i16; MAX_RANK],
}

impl Mono {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn u(power: i32) -> Self {
        Mono { du: power as i16, ..Self::default() }
    }

    pub fn z(power: i32) -> Self {
        Mono { dz: power as i16, ..Self::default() }
    }

    pub fn lam(k: usize, power: i32) -> Self {
        let mut m = Self::default();
        m.dlam[k] = power as i16;
        m
    }

    pub fn is_one(&self) -> bool {
        *self == Self::default()
    }

    pub fn add(&self, other: &Mono) -> Mono {
        let mut dlam = self.dlam;
        for (a, b) in dlam.iter_mut().zip(other.dlam.iter()) {
            *a += b;
        }
        Mono { du: self.du + other.du, dz: self.dz + other.dz, dlam }
    }

    pub fn total_degree(&self) -> i32 {
        self.du as i32 + self.dz as i32 + self.dlam.iter().map(|&x| x as i32).sum::<i32>()
    }

    /// Variable/power pairs for applying this monomial as a shift.
    pub fn shifts(&self) -> Vec<(VarId, i32)> {
        let mut out = Vec::new();
        if self.du != 0 {
            out.push((VarId::U, self.du as i32));
        }
        if self.dz != 0 {
            out.push((VarId::Z, self.dz as i32));
        }
        for (k, &p) in self.dlam.iter().enumerate() {
            if p != 0 {
                out.push((VarId::Lambda(k as u8), p as i32));
            }
        }
        out
    }

    /// Derivative variables with multiplicities, e.g. for `d^2/du dlam_1`:
    /// `[(U,1), (Lambda(0),1)]`.
    pub fn derivs(&self) -> Vec<(VarId, usize)> {
        let mut out = Vec::new();
        if self.du > 0 {
            out.push((VarId::U, self.du as usize));
        }
        for (k, &p) in self.dlam.iter().enumerate() {
            if p > 0 {
                out.push((VarId::Lambda(k as u8), p as usize));
            }
        }
        out
    }

    /// All sub-multi-indices `gamma <= self` (diff flavor) with the
    /// multi-binomial coefficient `prod_v C(alpha_v, gamma_v)`.
    pub fn sub_indices(&self) -> Vec<(Mono, f64)> {
        let mut out = alloc::vec![(Mono::one(), 1.0)];
        let extend = |out: &mut Vec<(Mono, f64)>, var: usize, max: i16| {
            if max == 0 {
                return;
            }
            let mut next = Vec::with_capacity(out.len() * (max as usize + 1));
            for (m, c) in out.iter() {
                let mut binomial = 1.0;
                for g in 0..=max {
                    if g > 0 {
                        binomial *= (max - g + 1) as f64 / g as f64;
                    }
                    let mut m2 = *m;
                    match var {
                        usize::MAX => m2.du = g,
                        k => m2.dlam[k] = g,
                    }
                    next.push((m2, c * binomial));
                }
            }
            *out = next;
        };
        extend(&mut out, usize::MAX, self.du);
        for k in 0..MAX_RANK {
            extend(&mut out, k, self.dlam[k]);
        }
        out
    }

    /// `self - other`, assuming `other <= self` componentwise.
    pub fn sub(&self, other: &Mono) -> Mono {
        let mut dlam = self.dlam;
        for (a, b) in dlam.iter_mut().zip(other.dlam.iter()) {
            *a -= b;
        }
        Mono { du: self.du - other.du, dz: self.dz - other.dz, dlam }
    }
}
