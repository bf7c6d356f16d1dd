//! The odd theta function `theta(u | tau)` and its `u`-derivatives.
//!
//! `theta` is the unique holomorphic function with
//!
//! ```text
//! theta(u+1)   = -theta(u)
//! theta(u+tau) = -exp(-2 pi i u - pi i tau) theta(u)
//! theta'(0)    = 1
//! ```
//!
//! realized here as `theta(u) = theta_1(pi u, q) / (pi theta_1'(0, q))`
//! with the nome `q = e^{i pi tau}` and
//! `theta_1(z,q) = 2 sum_{k>=0} (-1)^k q^{(k+1/2)^2} sin((2k+1)z)`.
//!
//! Arguments are reduced modulo the period lattice before summation, with
//! the quasi-periodicity prefactor accumulated in log space, so shifted
//! arguments like `u + k hbar` produced by normal ordering never overflow
//! the series.

use crate::cmath::{cabs, cexp};
use crate::ctx::EllipticParams;
use crate::error::{Error, Result};
use crate::report::{mixed_rel, ResidualReport};
use crate::sampling::{Sampler, SamplingPolicy};
use crate::C64;
#[allow(unused_imports)]
use num_traits::Float;

use core::f64::consts::PI;

/// Highest supported derivative order.  Nothing in the verified identity
/// set needs more than `theta''''`.
pub const MAX_DERIV: usize = 4;

/// Write `u = u0 + a + b tau` with `|Re u0| <= 1/2`, `|Im u0| <= Im tau / 2`.
pub fn lattice_reduce(u: C64, tau: C64) -> (C64, i64, i64) {
    let b = (u.im / tau.im).round();
    let up = u - tau * b;
    let a = up.re.round();
    (up - a, a as i64, b as i64)
}

/// Distance of `u` from the nearest period-lattice point (the zero set of
/// `theta`).
pub fn lattice_distance(u: C64, tau: C64) -> f64 {
    cabs(lattice_reduce(u, tau).0)
}

fn binom(m: usize, j: usize) -> f64 {
    const TABLE: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    TABLE[m][j]
}

/// `theta_1^{(d)}(pi u0, q)` for all `d <= order`, by term-wise
/// differentiation of the sine series.  Each term is assembled from two
/// exponentials whose exponents are combined before `exp`, so partial
/// factors never overflow individually.
fn raw_series(u0: C64, order: usize, p: &EllipticParams) -> Result<[C64; MAX_DERIV + 1]> {
    let ipitau = C64::i() * PI * p.tau;
    let z = C64::i() * PI * u0;
    let mut sums = [C64::new(0.0, 0.0); MAX_DERIV + 1];
    let mut scale = [0.0f64; MAX_DERIV + 1];
    let mut quiet_streak = 0usize;
    let mut last_term = 0.0f64;

    for k in 0..p.max_terms {
        let kk = k as f64;
        let gauss = ipitau * (kk + 0.5) * (kk + 0.5);
        let m = 2.0 * kk + 1.0;
        let e_plus = cexp(gauss + z * m);
        let e_minus = cexp(gauss - z * m);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        // i^d (2k+1)^d e_plus - (-i)^d (2k+1)^d e_minus, all over i.
        let mut f_plus = C64::new(sign, 0.0);
        let mut f_minus = C64::new(sign, 0.0);
        let mut converged = true;
        last_term = 0.0;
        for d in 0..=order {
            let term = (f_plus * e_plus - f_minus * e_minus) / C64::i();
            sums[d] += term;
            let t = cabs(term);
            if t > scale[d] {
                scale[d] = t;
            }
            let s = cabs(sums[d]).max(scale[d]).max(1e-300);
            if t > p.series_tol * s {
                converged = false;
            }
            last_term = last_term.max(t);
            f_plus *= C64::i() * m;
            f_minus *= -C64::i() * m;
        }
        if converged {
            // Terms can vanish accidentally (sine zeros); require two
            // consecutive quiet terms.
            quiet_streak += 1;
            if quiet_streak >= 2 {
                return Ok(sums);
            }
        } else {
            quiet_streak = 0;
        }
    }
    Err(Error::Accuracy { last_term })
}

/// `theta_1'(0, q) = 2 sum (-1)^k (2k+1) q^{(k+1/2)^2}`, the normalization
/// enforcing `theta'(0) = 1`.
fn norm_constant(p: &EllipticParams) -> Result<C64> {
    let ipitau = C64::i() * PI * p.tau;
    let mut sum = C64::new(0.0, 0.0);
    let mut last_term = 0.0f64;
    for k in 0..p.max_terms {
        let kk = k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = cexp(ipitau * (kk + 0.5) * (kk + 0.5)) * (2.0 * (2.0 * kk + 1.0) * sign);
        sum += term;
        last_term = cabs(term);
        if last_term <= p.series_tol * cabs(sum).max(1e-300) {
            return Ok(sum);
        }
    }
    Err(Error::Accuracy { last_term })
}

/// All derivatives `theta^{(d)}(u)` for `d <= order`.
pub fn theta_derivs(order: usize, u: C64, p: &EllipticParams) -> Result<[C64; MAX_DERIV + 1]> {
    if order > MAX_DERIV {
        return Err(Error::Usage(alloc::format!(
            "theta derivative order {order} > {MAX_DERIV}"
        )));
    }
    let d0 = norm_constant(p)?;
    let (u0, a, b) = lattice_reduce(u, p.tau);
    let raw = raw_series(u0, order, p)?;
    // theta^{(d)}(u0) = pi^{d-1} theta_1^{(d)}(pi u0) / theta_1'(0).
    let mut base = [C64::new(0.0, 0.0); MAX_DERIV + 1];
    let mut pw = 1.0 / PI;
    for d in 0..=order {
        base[d] = raw[d] * pw / d0;
        pw *= PI;
    }
    if a == 0 && b == 0 {
        return Ok(base);
    }
    // theta(u) = K e^{beta u} theta(u0(u)),  K = (-1)^{a+b} e^{i pi b^2 tau},
    // beta = -2 pi i b; differentiate the product m times.
    let bb = b as f64;
    let beta = -C64::i() * 2.0 * PI * bb;
    let sign = if (a + b).rem_euclid(2) == 1 { -1.0 } else { 1.0 };
    let pref = cexp(C64::i() * PI * bb * bb * p.tau + beta * u) * sign;
    let mut out = [C64::new(0.0, 0.0); MAX_DERIV + 1];
    for m in 0..=order {
        let mut acc = C64::new(0.0, 0.0);
        let mut beta_j = C64::new(1.0, 0.0);
        for j in 0..=m {
            acc += base[m - j] * beta_j * binom(m, j);
            beta_j *= beta;
        }
        out[m] = pref * acc;
    }
    Ok(out)
}

/// The odd theta function itself.
pub fn theta(u: C64, p: &EllipticParams) -> Result<C64> {
    Ok(theta_derivs(0, u, p)?[0])
}

/// `m`-th derivative of `theta` at `u`; `m <= 4`.
pub fn theta_deriv(order: usize, u: C64, p: &EllipticParams) -> Result<C64> {
    Ok(theta_derivs(order, u, p)?[order])
}

/// Max over sampled `u` of
/// `|theta(u+tau) + e^{-2 pi i u - pi i tau} theta(u)| / (1 + |theta(u)|)`.
///
/// Samples have `|Im u| <= Im tau` so both reduction branches are hit.
pub fn theta_quasi_periodicity_residual(
    samples: u32,
    p: &EllipticParams,
    rng_seed: u64,
) -> Result<ResidualReport> {
    let policy = SamplingPolicy {
        samples,
        seed: rng_seed,
        re_range: (-0.5, 0.5),
        im_range: (-p.tau.im, p.tau.im),
        max_retries: 20,
    };
    let mut s = Sampler::new(policy);
    let mut rep = ResidualReport::new("theta:quasi-period-tau", "theta-props", 1e-10, rng_seed);
    for _ in 0..samples {
        let u = s.complex();
        let t_u = theta(u, p)?;
        let t_ut = theta(u + p.tau, p)?;
        let pref = cexp(-C64::i() * PI * (u * 2.0 + p.tau));
        let diff = cabs(t_ut + pref * t_u);
        rep.record(diff, mixed_rel(diff, cabs(t_u)));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::ComplexFloat;

    fn params(tau: C64) -> EllipticParams {
        EllipticParams::with_tau(tau).unwrap()
    }

    fn tau11() -> EllipticParams {
        params(C64::new(0.0, 1.1))
    }

    #[test]
    fn vanishes_at_origin() {
        let t = theta(C64::new(0.0, 0.0), &tau11()).unwrap();
        assert!(t.abs() < 1e-15, "theta(0) = {t}");
    }

    #[test]
    fn derivative_at_origin_is_one() {
        let d = theta_deriv(1, C64::new(0.0, 0.0), &tau11()).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "theta'(0) = {d}");
        // Finite-difference slope agrees.
        let eps = 1e-6;
        let slope = (theta(C64::new(eps, 0.0), &tau11()).unwrap()
            - theta(C64::new(-eps, 0.0), &tau11()).unwrap())
            / (2.0 * eps);
        assert!((slope - 1.0).abs() < 1e-6, "slope = {slope}");
    }

    #[test]
    fn even_derivatives_vanish_at_origin() {
        let p = tau11();
        let d2 = theta_deriv(2, C64::new(0.0, 0.0), &p).unwrap();
        assert!(d2.abs() < 1e-12);
        let d4 = theta_deriv(4, C64::new(0.0, 0.0), &p).unwrap();
        assert!(d4.abs() < 1e-10);
    }

    #[test]
    fn order_zero_is_theta_and_high_order_rejected() {
        let p = tau11();
        let u = C64::new(0.21, -0.13);
        assert_eq!(theta(u, &p).unwrap(), theta_deriv(0, u, &p).unwrap());
        assert!(theta_deriv(5, u, &p).is_err());
    }

    #[test]
    fn frozen_values() {
        // Independent high-precision evaluations of the same function.
        let t = theta(C64::new(0.5, 0.0), &params(C64::new(0.0, 1.0))).unwrap();
        assert!((t - 0.3207009754142229).abs() < 1e-14, "theta(0.5|i) = {t}");
        let p = tau11();
        let a = theta(C64::new(0.25, 0.0), &p).unwrap();
        assert!((a - 0.22552889597595928).abs() < 1e-14);
        let b = theta(C64::new(0.35, 0.0), &p).unwrap();
        assert!((b - 0.28451614685558976).abs() < 1e-14);
        let d3 = theta_deriv(3, C64::new(0.0, 0.0), &p).unwrap();
        assert!((d3 + 9.632913913949645).abs() < 1e-11, "theta'''(0) = {d3}");
    }

    #[test]
    fn periodicity_in_one() {
        let p = tau11();
        let u = C64::new(0.31, 0.17);
        let lhs = theta(u + 1.0, &p).unwrap();
        let rhs = -theta(u, &p).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn oddness_over_random_points() {
        let p = tau11();
        let mut s = Sampler::new(SamplingPolicy {
            samples: 100,
            seed: 7,
            re_range: (-0.5, 0.5),
            im_range: (-0.55, 0.55),
            max_retries: 20,
        });
        for _ in 0..100 {
            let u = s.complex();
            let a = theta(u, &p).unwrap();
            let b = theta(-u, &p).unwrap();
            assert!((a + b).abs() / (1.0 + a.abs()) < 1e-12, "u = {u}");
        }
    }

    #[test]
    fn quasi_periodicity_residuals() {
        for tau in [C64::new(0.0, 1.1), C64::new(0.2, 0.9)] {
            let p = params(tau);
            let rep = theta_quasi_periodicity_residual(8, &p, 3).unwrap();
            assert!(rep.max_rel < 1e-10, "tau={tau}: {}", rep.max_rel);
            assert!(rep.pass);
        }
    }

    #[test]
    fn quasi_periodicity_single_point_at_origin() {
        // theta(tau) = -e^{-pi i tau} theta(0) = 0.
        let p = tau11();
        let t = theta(p.tau, &p).unwrap();
        assert!(t.abs() < 1e-10, "theta(tau) = {t}");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = tau11();
        let u = C64::new(0.3, 0.1);
        let h = 1e-5;
        for order in 0..=1 {
            let d = theta_deriv(order + 1, u, &p).unwrap();
            let fd = (theta_deriv(order, u + h, &p).unwrap()
                - theta_deriv(order, u - h, &p).unwrap())
                / (2.0 * h);
            assert!((d - fd).abs() / (1.0 + d.abs()) < 1e-6);
        }
    }

    #[test]
    fn frozen_derivative_values() {
        let p = tau11();
        let u = C64::new(0.3, 0.1);
        let t = theta(u, &p).unwrap();
        assert!((t - C64::new(0.27099608809188453, 0.06025851447269623)).abs() < 1e-14);
        let d1 = theta_deriv(1, u, &p).unwrap();
        assert!((d1 - C64::new(0.6230941258786645, -0.25812793804228345)).abs() < 1e-13);
        let d2 = theta_deriv(2, u, &p).unwrap();
        assert!((d2 - C64::new(-2.6631538835303405, -0.6207221718431939)).abs() < 1e-12);
    }

    #[test]
    fn truncation_is_monotone() {
        // Halving series_tol never worsens the quasi-periodicity residual
        // by more than a factor of 2.
        let mut tol = 1e-8;
        let mut prev = f64::MAX;
        while tol >= 1e-15 {
            let p = EllipticParams::new(C64::new(0.0, 1.1), tol, 200).unwrap();
            let rep = theta_quasi_periodicity_residual(16, &p, 11).unwrap();
            assert!(
                rep.max_rel <= 2.0 * prev,
                "tol={tol}: {} vs prev {prev}",
                rep.max_rel
            );
            prev = rep.max_rel.max(1e-16);
            tol /= 2.0;
        }
    }

    #[test]
    fn reduction_handles_far_arguments() {
        let p = tau11();
        // Far off the fundamental cell: still finite and consistent with
        // stepwise application of the two laws.
        let u = C64::new(3.3, 4.6);
        let direct = theta(u, &p).unwrap();
        let (u0, a, b) = lattice_reduce(u, p.tau);
        assert!(u0.re.abs() <= 0.5 + 1e-12 && u0.im.abs() <= 0.55 + 1e-12);
        let mut v = theta(u0, &p).unwrap();
        let mut x = u0;
        for _ in 0..a.unsigned_abs() {
            v = -v;
            x += 1.0;
        }
        for _ in 0..b.unsigned_abs() {
            v = -(-C64::i() * PI * (x * 2.0 + p.tau)).exp() * v;
            x += p.tau;
        }
        assert!((v - direct).abs() / (1.0 + direct.abs()) < 1e-10);
    }
}
