//! Machine-readable report document: one JSON object with a stable key
//! order and floats printed with 17 significant digits (enough to
//! round-trip f64 exactly), so identical (config, seed) runs serialize
//! byte-identically.

use crate::config::{format_complex, format_sites, RunConfig};
use crate::suites::RunOutcome;
use dynell_core::ResidualReport;
use std::fmt::Write as _;

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

pub fn write_document(cfg: &RunConfig, outcome: &RunOutcome) -> String {
    let mut s = String::new();
    s.push_str("{\n  \"schema\": 1,\n  \"config\": {");
    let suites: Vec<&str> = cfg.suites.iter().map(|x| x.name()).collect();
    let _ = write!(
        s,
        "\"n\": {}, \"suites\": [{}], \"tau\": \"{}\", \"hbar\": \"{}\", \"seed\": {}, \"tol\": {}, \"samples\": {}, \"sites\": \"{}\"",
        cfg.n,
        suites
            .iter()
            .map(|x| format!("\"{x}\""))
            .collect::<Vec<_>>()
            .join(", "),
        esc(&format_complex(cfg.tau)),
        esc(&format_complex(cfg.hbar)),
        cfg.seed,
        cfg.tol.map(fmt_f64).map(|t| format!("\"{t}\"")).unwrap_or("null".into()),
        cfg.samples,
        esc(&format_sites(&cfg.sites)),
    );
    s.push_str("},\n  \"reports\": [\n");
    for (i, r) in outcome.reports.iter().enumerate() {
        s.push_str("    ");
        s.push_str(&write_report(r));
        if i + 1 < outcome.reports.len() {
            s.push(',');
        }
        s.push('\n');
    }
    let _ = write!(
        s,
        "  ],\n  \"summary\": {{\"passed\": {}, \"failed\": {}}}\n}}\n",
        outcome.passed, outcome.failed
    );
    s
}

pub fn write_report(r: &ResidualReport) -> String {
    format!(
        "{{\"identity_id\": \"{}\", \"paper_anchor\": \"{}\", \"samples_used\": {}, \"max_abs\": \"{}\", \"max_rel\": \"{}\", \"tol\": \"{}\", \"pass\": {}, \"status\": \"{}\", \"wall_time_ms\": {}, \"seed\": {}}}",
        esc(&r.identity_id),
        esc(&r.paper_anchor),
        r.samples_used,
        fmt_f64(r.max_abs),
        fmt_f64(r.max_rel),
        fmt_f64(r.tol),
        r.pass,
        esc(&r.status),
        r.wall_time_ms,
        r.seed,
    )
}

/// Parse a document produced by [`write_document`] back into reports.
pub fn parse_reports(doc: &str) -> anyhow::Result<Vec<ResidualReport>> {
    #[derive(serde::Deserialize)]
    struct Raw {
        identity_id: String,
        paper_anchor: String,
        samples_used: u64,
        max_abs: String,
        max_rel: String,
        tol: String,
        pass: bool,
        status: String,
        wall_time_ms: u64,
        seed: u64,
    }
    #[derive(serde::Deserialize)]
    struct Doc {
        schema: u32,
        reports: Vec<Raw>,
    }
    let doc: Doc = serde_json::from_str(doc)?;
    anyhow::ensure!(doc.schema == 1, "unsupported schema {}", doc.schema);
    doc.reports
        .into_iter()
        .map(|r| {
            Ok(ResidualReport {
                identity_id: r.identity_id,
                paper_anchor: r.paper_anchor,
                samples_used: r.samples_used,
                max_abs: r.max_abs.parse()?,
                max_rel: r.max_rel.parse()?,
                tol: r.tol.parse()?,
                pass: r.pass,
                status: r.status,
                wall_time_ms: r.wall_time_ms,
                seed: r.seed,
            })
        })
        .collect()
}
