use crate::error::{Error, Result};
use crate::C64;
use alloc::format;

/// Maximum `gl_n` rank supported by an engine instance.  Determinant cost
/// grows like `n! *` (ring-product cost), so larger ranks are rejected at
/// construction.
pub const MAX_RANK: usize = 4;

/// Elliptic curve module `tau` together with the truncation policy of the
/// theta q-series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticParams {
    pub tau: C64,
    /// Relative term-size cutoff for the q-series.
    pub series_tol: f64,
    pub max_terms: usize,
}

impl EllipticParams {
    pub const DEFAULT_SERIES_TOL: f64 = 1e-16;
    pub const DEFAULT_MAX_TERMS: usize = 200;
    /// The series is considered divergent when `|e^{i pi tau}|` reaches
    /// this bound.
    pub const NOME_BOUND: f64 = 0.995;

    pub fn new(tau: C64, series_tol: f64, max_terms: usize) -> Result<Self> {
        if !(tau.im > 0.0) {
            return Err(Error::Construction(format!(
                "Im tau must be positive, got {}",
                tau.im
            )));
        }
        let nome = crate::cmath::cabs(crate::cmath::cexp(C64::i() * core::f64::consts::PI * tau));
        if !(nome < Self::NOME_BOUND) {
            return Err(Error::Construction(format!(
                "|e^{{i pi tau}}| = {nome} >= {}; q-series diverges",
                Self::NOME_BOUND
            )));
        }
        if !(series_tol > 0.0) || max_terms == 0 {
            return Err(Error::Construction(
                "series_tol must be positive and max_terms >= 1".into(),
            ));
        }
        Ok(Self { tau, series_tol, max_terms })
    }

    /// Defaults with the given modulus.
    pub fn with_tau(tau: C64) -> Result<Self> {
        Self::new(tau, Self::DEFAULT_SERIES_TOL, Self::DEFAULT_MAX_TERMS)
    }
}

/// Engine context: rank, elliptic parameters, the deformation step `hbar`
/// and the numeric guard policy.  Cheap to copy; passed by reference into
/// every construction and evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ctx {
    /// Number of dynamical parameters `lambda_1..lambda_n` (= `gl_n` rank).
    pub n: usize,
    pub ell: EllipticParams,
    /// Additive shift step for `u` and `lambda_k`; `z` shifts
    /// multiplicatively by `q^2 = e^{2 pi i hbar}`.
    pub hbar: C64,
    /// Minimum `|theta(..)|` tolerated in a denominator before the point
    /// is rejected for resampling.
    pub theta_guard: f64,
    /// Minimum distance of a theta argument from the period lattice when
    /// the theta sits in a denominator.
    pub lattice_guard: f64,
    /// Relative magnitude below which a ring term is dropped by numeric
    /// pruning (witnessed at [`Ctx::PRUNE_POINTS`] sample points).
    pub prune_tol: f64,
    /// Seed for the fixed pruning sample set.
    pub prune_seed: u64,
    /// Condition-number guard for pointwise matrix inversion.
    pub cond_limit: f64,
}

impl Ctx {
    pub const DEFAULT_HBAR: C64 = C64::new(0.137, 0.071);
    pub const PRUNE_POINTS: usize = 8;

    pub fn new(n: usize, ell: EllipticParams, hbar: C64) -> Result<Self> {
        if n == 0 || n > MAX_RANK {
            return Err(Error::Construction(format!(
                "rank n must be in 1..={MAX_RANK}, got {n}"
            )));
        }
        Ok(Self {
            n,
            ell,
            hbar,
            theta_guard: 0.05,
            lattice_guard: 1e-3,
            prune_tol: 1e-13,
            prune_seed: 0x70c4_1e55,
            cond_limit: 1e10,
        })
    }

    /// `n` with `tau = 1.1i` and the default `hbar`.
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(
            n,
            EllipticParams::with_tau(C64::new(0.0, 1.1))?,
            Self::DEFAULT_HBAR,
        )
    }

    /// Multiplicative step `q^2 = e^{2 pi i hbar}` used by the `z`
    /// variable.
    pub fn q_squared(&self) -> C64 {
        crate::cmath::cexp(C64::i() * 2.0 * core::f64::consts::PI * self.hbar)
    }

    /// `q = e^{i pi hbar}` of the trigonometric degeneration.
    pub fn q_trig(&self) -> C64 {
        crate::cmath::cexp(C64::i() * core::f64::consts::PI * self.hbar)
    }

    pub fn with_hbar(mut self, hbar: C64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn with_tau(mut self, tau: C64) -> Result<Self> {
        self.ell = EllipticParams::new(tau, self.ell.series_tol, self.ell.max_terms)?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_divergent_nome() {
        // Im tau too small: |q| >= 0.995.
        let tau = C64::new(0.0, 1e-4);
        assert!(EllipticParams::with_tau(tau).is_err());
        // Negative Im tau rejected outright.
        assert!(EllipticParams::with_tau(C64::new(0.0, -1.0)).is_err());
    }

    #[test]
    fn accepts_standard_modulus() {
        let p = EllipticParams::with_tau(C64::new(0.0, 1.1)).unwrap();
        assert_eq!(p.max_terms, 200);
        let c = Ctx::standard(2).unwrap();
        assert_eq!(c.n, 2);
        assert!(Ctx::standard(5).is_err());
    }
}
