//! Run configuration: CLI arguments layered over an optional JSON config
//! file (pointed to by `DYNELL_CONFIG`), over built-in defaults.

use anyhow::{anyhow, bail, Context, Result};
use dynell_core::opalg::SiteKind;
use dynell_core::{Ctx, EllipticParams, SamplingPolicy, C64};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Theta,
    Felder,
    Manin,
    Commfam,
    Gaudin,
    Sl2,
    Trig,
    Newton,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Theta,
        Suite::Felder,
        Suite::Manin,
        Suite::Commfam,
        Suite::Gaudin,
        Suite::Sl2,
        Suite::Trig,
        Suite::Newton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theta => "theta",
            Suite::Felder => "felder",
            Suite::Manin => "manin",
            Suite::Commfam => "commfam",
            Suite::Gaudin => "gaudin",
            Suite::Sl2 => "sl2",
            Suite::Trig => "trig",
            Suite::Newton => "newton",
        }
    }

    pub fn parse(s: &str) -> Result<Option<Suite>> {
        Ok(match s {
            "all" => None,
            "theta" => Some(Suite::Theta),
            "felder" => Some(Suite::Felder),
            "manin" => Some(Suite::Manin),
            "commfam" => Some(Suite::Commfam),
            "gaudin" => Some(Suite::Gaudin),
            "sl2" => Some(Suite::Sl2),
            "trig" => Some(Suite::Trig),
            "newton" => Some(Suite::Newton),
            other => bail!("unknown suite '{other}'"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub suites: BTreeSet<Suite>,
    pub tau: C64,
    pub hbar: C64,
    pub seed: u64,
    /// Uniform tolerance override; per-identity class defaults otherwise.
    pub tol: Option<f64>,
    pub samples: u32,
    pub sites: Vec<(SiteKind, C64)>,
    pub output: Option<PathBuf>,
    /// Zero out `wall_time_ms` so reports are byte-stable.
    pub zero_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            suites: Suite::ALL.into_iter().collect(),
            tau: C64::new(0.0, 1.1),
            hbar: Ctx::DEFAULT_HBAR,
            seed: 1,
            tol: None,
            samples: 8,
            sites: default_sites(2),
            output: None,
            zero_wall_time: false,
        }
    }
}

pub fn default_sites(n: usize) -> Vec<(SiteKind, C64)> {
    if n == 3 {
        // Three defining sites; the joint zero-weight subspace appears
        // after the traceless projection.
        vec![
            (SiteKind::Defining, C64::new(0.1, 0.0)),
            (SiteKind::Defining, C64::new(0.45, 0.0)),
            (SiteKind::Defining, C64::new(-0.21, 0.0)),
        ]
    } else {
        vec![
            (SiteKind::Defining, C64::new(0.1, 0.0)),
            (SiteKind::Dual, C64::new(0.45, 0.0)),
        ]
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 3 {
            bail!("n must be 1..=3 (determinants with quantum legs cap the rank)");
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                bail!("tol must be positive");
            }
        }
        if self.samples == 0 {
            bail!("samples must be >= 1");
        }
        if self.sites.is_empty() {
            bail!("at least one site is required");
        }
        EllipticParams::with_tau(self.tau).map_err(|e| anyhow!("{e}"))?;
        Ok(())
    }

    pub fn ctx(&self) -> Result<Ctx> {
        Ok(Ctx::new(
            self.n,
            EllipticParams::with_tau(self.tau).map_err(|e| anyhow!("{e}"))?,
            self.hbar,
        )
        .map_err(|e| anyhow!("{e}"))?)
    }

    pub fn policy(&self) -> SamplingPolicy {
        SamplingPolicy::new(self.samples, self.seed)
    }

    /// Per-identity tolerance: the uniform override when given, the class
    /// default otherwise.  The override applies to identity residuals
    /// (class tolerances tighter than 1e-6); limit-extrapolation and
    /// trend checks measure convergence rates and keep their own
    /// tolerances.
    pub fn tol_for(&self, class_default: f64) -> f64 {
        match self.tol {
            Some(t) if class_default < 1e-6 => t,
            _ => class_default,
        }
    }
}

/// `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`.
pub fn parse_complex(s: &str) -> Result<C64> {
    let t = s.trim().replace(' ', "");
    if t.is_empty() {
        bail!("empty complex literal");
    }
    let parse_imag_unit = |x: &str| -> Result<f64> {
        Ok(match x {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other.parse::<f64>().context("bad imaginary part")?,
        })
    };
    if let Some(head) = t.strip_suffix('i') {
        // Find the split between real and imaginary parts: the last
        // '+'/'-' that is not an exponent sign and not the leading sign.
        let bytes = head.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            let ch = bytes[idx] as char;
            if (ch == '+' || ch == '-') && bytes[idx - 1] as char != 'e' && bytes[idx - 1] as char != 'E' {
                split = Some(idx);
                break;
            }
        }
        match split {
            Some(idx) => {
                let re: f64 = head[..idx].parse().context("bad real part")?;
                let im = parse_imag_unit(&head[idx..])?;
                Ok(C64::new(re, im))
            }
            None => Ok(C64::new(0.0, parse_imag_unit(head)?)),
        }
    } else {
        Ok(C64::new(t.parse::<f64>().context("bad real literal")?, 0.0))
    }
}

pub fn format_complex(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.im < 0.0 {
        format!("{}{}i", c.re, c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

/// `defining@0.1,dual@0.45` (evaluation points may be complex literals).
pub fn parse_sites(s: &str) -> Result<Vec<(SiteKind, C64)>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let (kind, at) = part
            .split_once('@')
            .ok_or_else(|| anyhow!("site '{part}' must look like kind@point"))?;
        let kind = match kind.trim() {
            "defining" | "def" => SiteKind::Defining,
            "dual" => SiteKind::Dual,
            other => bail!("unknown site kind '{other}'"),
        };
        out.push((kind, parse_complex(at)?));
    }
    Ok(out)
}

pub fn format_sites(sites: &[(SiteKind, C64)]) -> String {
    sites
        .iter()
        .map(|(k, v)| {
            let kind = match k {
                SiteKind::Defining => "defining",
                SiteKind::Dual => "dual",
            };
            format!("{kind}@{}", format_complex(*v))
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Serializable mirror of [`RunConfig`] for the optional config file and
/// for the JSON report header.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub suites: Option<Vec<String>>,
    pub tau: Option<String>,
    pub hbar: Option<String>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub samples: Option<u32>,
    pub sites: Option<String>,
}

impl FileConfig {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(n) = self.n {
            cfg.n = n;
            cfg.sites = default_sites(n);
        }
        if let Some(suites) = &self.suites {
            cfg.suites = parse_suite_list(suites)?;
        }
        if let Some(tau) = &self.tau {
            cfg.tau = parse_complex(tau)?;
        }
        if let Some(hbar) = &self.hbar {
            cfg.hbar = parse_complex(hbar)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.tol.is_some() {
            cfg.tol = self.tol;
        }
        if let Some(samples) = self.samples {
            cfg.samples = samples;
        }
        if let Some(sites) = &self.sites {
            cfg.sites = parse_sites(sites)?;
        }
        Ok(())
    }
}

pub fn parse_suite_list(items: &[String]) -> Result<BTreeSet<Suite>> {
    let mut out = BTreeSet::new();
    for item in items {
        for piece in item.split(',') {
            match Suite::parse(piece.trim())? {
                None => return Ok(Suite::ALL.into_iter().collect()),
                Some(s) => {
                    out.insert(s);
                }
            }
        }
    }
    if out.is_empty() {
        out = Suite::ALL.into_iter().collect();
    }
    Ok(out)
}

/// Load the config file named by `DYNELL_CONFIG`, if any.
pub fn env_config() -> Result<Option<FileConfig>> {
    match std::env::var_os("DYNELL_CONFIG") {
        None => Ok(None),
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading config {path:?}"))?;
            Ok(Some(serde_json::from_str(&text).context("parsing config file")?))
        }
    }
}
