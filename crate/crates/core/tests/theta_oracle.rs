//! Cross-check of the theta evaluator against an independent direct
//! summation of the defining sine series (no argument reduction, no
//! combined-exponent assembly, ten times the term budget).

use dynell_core::ctx::EllipticParams;
use dynell_core::theta::{theta, theta_deriv};
use dynell_core::C64;
use num_complex::ComplexFloat;

/// Straightforward `theta_1(pi u, q) / (pi theta_1'(0, q))` with
/// `theta_1(z,q) = 2 sum (-1)^k q^{(k+1/2)^2} sin((2k+1)z)`.
///
/// The term count is an order of magnitude beyond where the engine's
/// truncation rule stops (about twenty terms at these moduli); far past
/// that the Gaussian factor underflows to zero while `sin` is still
/// finite, so the extra terms contribute exactly nothing.
fn theta_direct(u: C64, tau: C64, terms: usize) -> C64 {
    let q = (C64::i() * core::f64::consts::PI * tau).exp();
    let z = u * core::f64::consts::PI;
    let mut num = C64::new(0.0, 0.0);
    let mut den = C64::new(0.0, 0.0);
    for k in 0..terms {
        let kk = k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let qp = q.powf((kk + 0.5) * (kk + 0.5));
        num += qp * (z * (2.0 * kk + 1.0)).sin() * 2.0 * sign;
        den += qp * (2.0 * (2.0 * kk + 1.0) * sign);
    }
    num / (den * core::f64::consts::PI)
}

#[test]
fn matches_long_direct_series() {
    let cases = [
        (C64::new(0.5, 0.0), C64::new(0.0, 1.0)),
        (C64::new(0.25, 0.0), C64::new(0.0, 1.1)),
        (C64::new(0.31, 0.17), C64::new(0.0, 1.1)),
        (C64::new(-0.13, 0.27), C64::new(0.2, 0.9)),
        (C64::new(0.42, -0.31), C64::new(0.0, 1.1)),
    ];
    for (u, tau) in cases {
        let p = EllipticParams::with_tau(tau).unwrap();
        let got = theta(u, &p).unwrap();
        let want = theta_direct(u, tau, 200);
        assert!(
            (got - want).abs() < 1e-13 * (1.0 + want.abs()),
            "theta({u} | {tau}): {got} vs oracle {want}"
        );
    }
}

#[test]
fn frozen_value_at_half_period() {
    let p = EllipticParams::with_tau(C64::new(0.0, 1.0)).unwrap();
    let got = theta(C64::new(0.5, 0.0), &p).unwrap();
    let oracle = theta_direct(C64::new(0.5, 0.0), C64::new(0.0, 1.0), 200);
    assert!((got - oracle).abs() < 1e-14);
    assert!((got - 0.3207009754142229).abs() < 1e-14);
}

#[test]
fn derivatives_match_direct_finite_differences() {
    // Central differences of the direct series.
    let tau = C64::new(0.0, 1.1);
    let p = EllipticParams::with_tau(tau).unwrap();
    let u = C64::new(0.21, 0.09);
    let h = 1e-5;
    let fd1 = (theta_direct(u + h, tau, 200) - theta_direct(u - h, tau, 200)) / (2.0 * h);
    let d1 = theta_deriv(1, u, &p).unwrap();
    assert!((d1 - fd1).abs() < 1e-9);
    let fd2 = (theta_direct(u + h, tau, 200) - theta_direct(u, tau, 200) * 2.0
        + theta_direct(u - h, tau, 200))
        / (h * h);
    let d2 = theta_deriv(2, u, &p).unwrap();
    assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()));
}
