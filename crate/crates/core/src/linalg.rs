//! Small dense complex linear algebra: LU decomposition with partial
//! pivoting, inverses with a condition-number guard, Kronecker products
//! and permutation operators on tensor powers.

use crate::error::{Error, Result};
use crate::C64;
use alloc::format;
use alloc::vec::Vec;
use ndarray::Array2;
use crate::cmath::cabs;

/// LU factorization with partial pivoting, stored in-place.
pub struct Lu {
    lu: Array2<C64>,
    piv: Vec<usize>,
    sign_swaps: usize,
}

impl Lu {
    pub fn new(a: &Array2<C64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "LU of non-square {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let mut p = k;
            let mut best = cabs(lu[(k, k)]);
            for i in k + 1..n {
                let m = cabs(lu[(i, k)]);
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best < 1e-280 {
                return Err(Error::Singularity("singular matrix in LU".into()));
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                piv.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let t = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - f * t;
                }
            }
        }
        Ok(Self { lu, piv, sign_swaps: swaps })
    }

    pub fn det(&self) -> C64 {
        let mut d = if self.sign_swaps % 2 == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(-1.0, 0.0)
        };
        for k in 0..self.lu.nrows() {
            d *= self.lu[(k, k)];
        }
        d
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.nrows();
        let mut x: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = x[j];
                x[i] = x[i] - self.lu[(i, j)] * t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = x[j];
                x[i] = x[i] - self.lu[(i, j)] * t;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Array2<C64> {
        let n = self.lu.nrows();
        let mut inv = Array2::from_elem((n, n), C64::new(0.0, 0.0));
        let mut e = alloc::vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let col = self.solve_vec(&e);
            e[j] = C64::new(0.0, 0.0);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Max-column-sum norm.
pub fn norm_1(a: &Array2<C64>) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..a.ncols() {
        let s: f64 = (0..a.nrows()).map(|i| cabs(a[(i, j)])).sum();
        best = best.max(s);
    }
    best
}

/// Largest entry magnitude.
pub fn norm_max(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(cabs(*z)))
}

/// Inverse with a 1-norm condition estimate; exceeding `cond_limit` is a
/// singularity (the sampling layer resamples the point).
pub fn inverse_guarded(a: &Array2<C64>, cond_limit: f64) -> Result<Array2<C64>> {
    let lu = Lu::new(a)?;
    let inv = lu.inverse();
    let cond = norm_1(a) * norm_1(&inv);
    if !cond.is_finite() || cond > cond_limit {
        return Err(Error::Singularity(format!(
            "condition number {cond:.3e} exceeds guard"
        )));
    }
    Ok(inv)
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Matrix units `E_ij` of size `n`.
pub fn e_matrix(n: usize, i: usize, j: usize) -> Array2<C64> {
    let mut m = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

/// Unpack a flat index on `(C^n)^{legs}` into per-leg digits, most
/// significant leg first (leg 0 is the leftmost tensor factor).
pub fn digits(mut idx: usize, n: usize, legs: usize) -> Vec<usize> {
    let mut out = alloc::vec![0usize; legs];
    for slot in (0..legs).rev() {
        out[slot] = idx % n;
        idx /= n;
    }
    out
}

pub fn from_digits(digits: &[usize], n: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * n + d)
}

/// Representation `pi(sigma)` of a permutation on `(C^n)^{legs}`:
/// `pi(sigma)(v_1 x...x v_m) = v_{sigma^{-1}(1)} x...x v_{sigma^{-1}(m)}`.
/// `sigma` maps slot index to slot index (0-based).
pub fn permutation_operator(n: usize, sigma: &[usize]) -> Array2<C64> {
    let legs = sigma.len();
    let dim = n.pow(legs as u32);
    let mut m = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
    for col in 0..dim {
        let in_digits = digits(col, n, legs);
        // Output digit at slot sigma(k) equals input digit at slot k.
        let mut out_digits = alloc::vec![0usize; legs];
        for k in 0..legs {
            out_digits[sigma[k]] = in_digits[k];
        }
        m[(from_digits(&out_digits, n), col)] = C64::new(1.0, 0.0);
    }
    m
}

/// All permutations of `0..m` with signs, in a deterministic order.
pub fn permutations_with_sign(m: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..m).collect();
    heap_rec(m, &mut perm, &mut out);
    out
}

fn heap_rec(k: usize, perm: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, f64)>) {
    if k <= 1 {
        let sign = perm_sign(perm);
        out.push((perm.clone(), sign));
        return;
    }
    for i in 0..k {
        heap_rec(k - 1, perm, out);
        if k % 2 == 0 {
            perm.swap(i, k - 1);
        } else {
            perm.swap(0, k - 1);
        }
    }
}

fn perm_sign(perm: &[usize]) -> f64 {
    let mut seen = alloc::vec![false; perm.len()];
    let mut sign = 1.0;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::ComplexFloat;

    #[test]
    fn lu_inverts_random_matrix() {
        let n = 5;
        let mut s = crate::sampling::Sampler::new(crate::sampling::SamplingPolicy::new(1, 3));
        let a = Array2::from_shape_fn((n, n), |_| s.complex() + C64::new(0.0, 0.0));
        let a = &a + &(identity(n).mapv(|x| x * 2.0));
        let inv = inverse_guarded(&a, 1e12).unwrap();
        let prod = a.dot(&inv);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cond_guard_trips_on_near_singular() {
        let mut a = identity(3);
        a[(2, 2)] = C64::new(1e-13, 0.0);
        assert!(matches!(
            inverse_guarded(&a, 1e10),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn permutation_action() {
        // sigma = transposition of slots 0,1 on n=2: the flip matrix.
        let p = permutation_operator(2, &[1, 0]);
        // e_0 x e_1 (index 1) -> e_1 x e_0 (index 2).
        assert_eq!(p[(2, 1)], C64::new(1.0, 0.0));
        assert_eq!(p[(1, 1)], C64::new(0.0, 0.0));
        let id = p.dot(&p);
        assert_eq!(id, identity(4));
    }

    #[test]
    fn permutation_signs() {
        let perms = permutations_with_sign(3);
        assert_eq!(perms.len(), 6);
        let total: f64 = perms.iter().map(|(_, s)| s).sum();
        assert_eq!(total, 0.0);
        for (p, s) in &perms {
            if p == &[0usize, 1, 2] {
                assert_eq!(*s, 1.0);
            }
            if p == &[1usize, 0, 2] {
                assert_eq!(*s, -1.0);
            }
        }
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = e_matrix(2, 0, 1);
        let b = identity(2);
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[(0, 2)], C64::new(1.0, 0.0));
        assert_eq!(k[(1, 3)], C64::new(1.0, 0.0));
    }
}
