//! Antisymmetrizer projectors `A_m` on `(C^n)^{(x) m}` and numeric leg
//! embeddings.

use crate::linalg::{self, digits, from_digits, permutation_operator, permutations_with_sign};
use crate::C64;
use alloc::vec::Vec;
use ndarray::Array2;

/// `A_m = (1/m!) sum_{sigma in S_m} (-1)^sigma pi(sigma)`.
pub fn antisymmetrizer(m: usize, n: usize) -> Array2<C64> {
    let dim = n.pow(m as u32);
    let mut acc = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
    let perms = permutations_with_sign(m);
    let fact = perms.len() as f64;
    for (sigma, sign) in perms {
        acc = acc + permutation_operator(n, &sigma).mapv(|x| x * sign);
    }
    acc.mapv(|x| x / fact)
}

/// Same projector by the recursion
/// `A^{[0,m]} = (1/m)(A^{[0,m-1]} - (m-1) A^{[0,m-1]} pi(s_{m-1,m}) A^{[0,m-1]})`,
/// used as an independent cross-check of the direct construction.
pub fn antisymmetrizer_recursive(m: usize, n: usize) -> Array2<C64> {
    if m <= 1 {
        return linalg::identity(n.pow(m as u32));
    }
    let prev = antisymmetrizer_recursive(m - 1, n);
    let prev = embed_numeric(n, m, &(0..m - 1).collect::<Vec<_>>(), &prev);
    let mut swap: Vec<usize> = (0..m).collect();
    swap.swap(m - 2, m - 1);
    let p = permutation_operator(n, &swap);
    let corr = prev.dot(&p).dot(&prev);
    (&prev - &corr.mapv(|x| x * (m as f64 - 1.0))).mapv(|x| x / m as f64)
}

/// `A^{[k,m]}`: the antisymmetrizer of legs `k+1..m` (1-based in the
/// customary notation), embedded into `total` legs of dimension `n`.
/// Here legs are 0-based: acts on legs `k..m`.
pub fn a_block(k: usize, m: usize, n: usize, total: usize) -> Array2<C64> {
    let a = antisymmetrizer(m - k, n);
    embed_numeric(n, total, &(k..m).collect::<Vec<_>>(), &a)
}

/// Embed a numeric operator living on `target_legs` (in that order) into
/// `total` legs, identity elsewhere.
pub fn embed_numeric(
    n: usize,
    total: usize,
    target_legs: &[usize],
    op: &Array2<C64>,
) -> Array2<C64> {
    let dim = n.pow(total as u32);
    let mut out = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
    for row in 0..dim {
        let rd = digits(row, n, total);
        for col in 0..dim {
            let cd = digits(col, n, total);
            // Identity off the target legs.
            if rd
                .iter()
                .zip(cd.iter())
                .enumerate()
                .any(|(l, (a, b))| !target_legs.contains(&l) && a != b)
            {
                continue;
            }
            let r_small: Vec<usize> = target_legs.iter().map(|&l| rd[l]).collect();
            let c_small: Vec<usize> = target_legs.iter().map(|&l| cd[l]).collect();
            let v = op[(from_digits(&r_small, n), from_digits(&c_small, n))];
            if v != C64::new(0.0, 0.0) {
                out[(row, col)] = v;
            }
        }
    }
    out
}

#[cfg(test)]
fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r *= (n - i) as f64 / (i + 1) as f64;
    }
    r
}
