//! Per-identity residual records.

use alloc::string::String;

/// Outcome of one verified identity.
///
/// `pass` is defined as `max_rel < tol`; `max_rel` uses the mixed
/// normalization `|lhs - rhs| / (1 + max(|lhs|, |rhs|))` so it degrades
/// gracefully to an absolute residual near zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualReport {
    /// Stable machine identifier, e.g. `"DYBE:n=2"` or `"tt_tt0:m=1,s=2"`.
    pub identity_id: String,
    /// Equation tag the identity instantiates, e.g. `"DYBE"`.
    pub paper_anchor: String,
    pub samples_used: u64,
    pub max_abs: f64,
    pub max_rel: f64,
    pub tol: f64,
    pub pass: bool,
    /// `"ok"`, or `"error"` when the check crashed before producing a
    /// residual.
    #[cfg_attr(feature = "serde", serde(default = "default_status"))]
    pub status: String,
    pub wall_time_ms: u64,
    pub seed: u64,
}

#[allow(dead_code)]
fn default_status() -> String {
    String::from("ok")
}

impl ResidualReport {
    pub fn new(identity_id: &str, paper_anchor: &str, tol: f64, seed: u64) -> Self {
        Self {
            identity_id: identity_id.into(),
            paper_anchor: paper_anchor.into(),
            samples_used: 0,
            max_abs: 0.0,
            max_rel: 0.0,
            tol,
            pass: true,
            status: String::from("ok"),
            wall_time_ms: 0,
            seed,
        }
    }

    /// Fold one residual observation into the record.
    pub fn record(&mut self, abs: f64, rel: f64) {
        if abs > self.max_abs {
            self.max_abs = abs;
        }
        if rel > self.max_rel {
            self.max_rel = rel;
        }
        self.samples_used += 1;
        self.pass = self.max_rel < self.tol;
    }

    /// Merge another report's residuals (same identity, several
    /// sub-checks).
    pub fn absorb(&mut self, other: &ResidualReport) {
        if other.max_abs > self.max_abs {
            self.max_abs = other.max_abs;
        }
        if other.max_rel > self.max_rel {
            self.max_rel = other.max_rel;
        }
        self.samples_used += other.samples_used;
        self.pass = self.max_rel < self.tol;
    }
}

/// Mixed absolute/relative residual of two complex magnitudes.
pub fn mixed_rel(diff: f64, scale: f64) -> f64 {
    diff / (1.0 + scale)
}
