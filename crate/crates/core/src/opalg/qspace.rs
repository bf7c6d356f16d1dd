//! Quantum spaces: tensor products of weight-graded evaluation sites.

use crate::ctx::MAX_RANK;
use crate::linalg::{self, e_matrix};
use crate::C64;
use alloc::vec::Vec;
use ndarray::Array2;

/// Which finite `gl_n` representation a site carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    /// Defining representation: `e_ij -> E_ij`; basis vector `e_i` has
    /// Cartan weight `+delta_ik` under `e_kk`.
    Defining,
    /// Dual of the defining representation: `e_ij -> -E_ji`; weights are
    /// negated.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub kind: SiteKind,
    pub n: usize,
    pub eval_point: C64,
}

impl Site {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Representation matrix of `e_ij` on this site.
    pub fn act(&self, i: usize, j: usize) -> Array2<C64> {
        match self.kind {
            SiteKind::Defining => e_matrix(self.n, i, j),
            SiteKind::Dual => {
                let mut m = e_matrix(self.n, j, i);
                m.mapv_inplace(|x| -x);
                m
            }
        }
    }

    /// Weight of basis vector `b` under `e_kk`.
    pub fn weight(&self, b: usize, k: usize) -> i32 {
        let d = if b == k { 1 } else { 0 };
        match self.kind {
            SiteKind::Defining => d,
            SiteKind::Dual => -d,
        }
    }
}

/// Tensor product of sites.  An empty site list is the trivial
/// one-dimensional quantum space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantumSpace {
    pub n: usize,
    pub sites: Vec<Site>,
}

impl QuantumSpace {
    pub fn trivial(n: usize) -> Self {
        Self { n, sites: Vec::new() }
    }

    pub fn new(n: usize, sites: Vec<Site>) -> Self {
        Self { n, sites }
    }

    pub fn defining(n: usize, eval_point: C64) -> Self {
        Self::new(n, alloc::vec![Site { kind: SiteKind::Defining, n, eval_point }])
    }

    pub fn dim(&self) -> usize {
        self.sites.iter().map(|s| s.dim()).product()
    }

    /// Tensor product `self (x) other`, `self` sites first.
    pub fn tensor(&self, other: &QuantumSpace) -> QuantumSpace {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().copied());
        QuantumSpace { n: self.n, sites }
    }

    /// Per-site digit decomposition of a flat basis index (site 0 is the
    /// leftmost factor).
    pub fn decompose(&self, mut idx: usize) -> Vec<usize> {
        let mut out = alloc::vec![0usize; self.sites.len()];
        for (slot, site) in self.sites.iter().enumerate().rev() {
            out[slot] = idx % site.dim();
            idx /= site.dim();
        }
        out
    }

    /// Cartan weight vector of a flat basis index: the sum of site
    /// weights.
    pub fn weights(&self, idx: usize) -> [i32; MAX_RANK] {
        let mut w = [0i32; MAX_RANK];
        for (slot, b) in self.decompose(idx).into_iter().enumerate() {
            for (k, wk) in w.iter_mut().enumerate().take(self.n) {
                *wk += self.sites[slot].weight(b, k);
            }
        }
        w
    }

    /// `e_ij` acting on site `slot`, embedded in the full space.
    pub fn site_op(&self, slot: usize, i: usize, j: usize) -> Array2<C64> {
        let mut m = linalg::identity(1);
        for (s, site) in self.sites.iter().enumerate() {
            let factor = if s == slot {
                site.act(i, j)
            } else {
                linalg::identity(site.dim())
            };
            m = linalg::kron(&m, &factor);
        }
        m
    }

    /// `rho(e_ij) = sum_slots e_ij^{(slot)}` over all sites.
    pub fn total_op(&self, i: usize, j: usize) -> Array2<C64> {
        let d = self.dim();
        let mut m = Array2::from_elem((d, d), C64::new(0.0, 0.0));
        for slot in 0..self.sites.len() {
            m = m + self.site_op(slot, i, j);
        }
        m
    }

    /// Diagonal of the Cartan element `h_k = rho(e_kk)` as integer
    /// weights.
    pub fn cartan_diag(&self, k: usize) -> Vec<i32> {
        (0..self.dim()).map(|b| self.weights(b)[k]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defining_weight_table() {
        let q = QuantumSpace::defining(2, C64::new(0.1, 0.0));
        assert_eq!(q.dim(), 2);
        assert_eq!(q.weights(0)[0], 1);
        assert_eq!(q.weights(0)[1], 0);
        assert_eq!(q.weights(1)[1], 1);
    }

    #[test]
    fn dual_weights_negate() {
        let q = QuantumSpace::new(
            2,
            alloc::vec![Site { kind: SiteKind::Dual, n: 2, eval_point: C64::new(0.45, 0.0) }],
        );
        assert_eq!(q.weights(0)[0], -1);
        assert_eq!(q.weights(1)[1], -1);
        // e_12 acts as -E_21.
        let m = q.site_op(0, 0, 1);
        assert_eq!(m[(1, 0)], C64::new(-1.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn tensor_weights_add() {
        let a = QuantumSpace::defining(2, C64::new(0.1, 0.0));
        let b = QuantumSpace::new(
            2,
            alloc::vec![Site { kind: SiteKind::Dual, n: 2, eval_point: C64::new(0.45, 0.0) }],
        );
        let q = a.tensor(&b);
        assert_eq!(q.dim(), 4);
        // Basis (e_0, f_0): weight 1 - 1 = 0 under h_1.
        assert_eq!(q.weights(0)[0], 0);
        // Basis (e_0, f_1): +1 under h_1, -1 under h_2.
        assert_eq!(q.weights(1)[0], 1);
        assert_eq!(q.weights(1)[1], -1);
    }
}
