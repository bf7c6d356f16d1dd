//! Bit-stable complex transcendentals.
//!
//! All magnitude and exponential evaluations go through `libm` directly,
//! never through `std` intrinsics, so results are identical across
//! platforms and across builds regardless of how downstream feature
//! unification configures `num-traits`.  This is what makes the report
//! determinism contract ("identical config and seed give byte-identical
//! reports") hold as a property of the workspace rather than of one
//! particular compilation.

use crate::C64;

/// `|z|` via `hypot`.
#[inline]
pub fn cabs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// `e^z`.
#[inline]
pub fn cexp(z: C64) -> C64 {
    let e = libm::exp(z.re);
    C64::new(e * libm::cos(z.im), e * libm::sin(z.im))
}

/// Principal logarithm.
#[inline]
pub fn cln(z: C64) -> C64 {
    C64::new(libm::log(cabs(z)), libm::atan2(z.im, z.re))
}

/// Principal square root.
#[inline]
pub fn csqrt(z: C64) -> C64 {
    if z.re == 0.0 && z.im == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let r = cabs(z);
    let re = libm::sqrt((r + z.re) * 0.5);
    let im = libm::sqrt((r - z.re) * 0.5);
    C64::new(re, if z.im >= 0.0 { im } else { -im })
}

/// `z^w` on the principal branch.
#[inline]
pub fn cpowc(z: C64, w: C64) -> C64 {
    cexp(w * cln(z))
}

/// Complex sine (used by oracle-style direct series).
#[inline]
pub fn csin(z: C64) -> C64 {
    C64::new(
        libm::sin(z.re) * libm::cosh(z.im),
        libm::cos(z.re) * libm::sinh(z.im),
    )
}
