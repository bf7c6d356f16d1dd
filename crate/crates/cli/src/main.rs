use anyhow::Result;
use clap::{Parser, Subcommand};
use dynell_cli::config::{
    default_sites, env_config, parse_complex, parse_sites, parse_suite_list, RunConfig,
};
use dynell_cli::{catalogue, output, run};
use std::io::Write;

#[derive(Parser)]
#[command(
    name = "dynell",
    about = "Residual verification of dynamical elliptic R-matrix, Manin matrix and Gaudin identities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and report residuals.
    Verify(VerifyArgs),
    /// Print every identity id with its equation anchor.
    ListIdentities {
        /// Rank to enumerate for (some checks depend on it).
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Comma-separated suites: theta, felder, manin, commfam, gaudin,
    /// sl2, trig, newton, or "all".
    #[arg(long, value_delimiter = ',')]
    suites: Vec<String>,
    /// gl_n rank (1..=3).
    #[arg(long)]
    n: Option<usize>,
    /// Elliptic modulus, e.g. "0+1.1i".
    #[arg(long)]
    tau: Option<String>,
    /// Deformation step, e.g. "0.137+0.071i".
    #[arg(long)]
    hbar: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Uniform tolerance override for identity residuals (limit and
    /// trend checks keep their own convergence tolerances).
    #[arg(long)]
    tol: Option<f64>,
    /// Sample points per identity.
    #[arg(long)]
    samples: Option<u32>,
    /// Quantum sites, e.g. "defining@0.1,dual@0.45".
    #[arg(long)]
    sites: Option<String>,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<std::path::PathBuf>,
    /// Zero out wall_time_ms for byte-stable reports.
    #[arg(long)]
    zero_wall_time: bool,
}

fn build_config(args: &VerifyArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(file_cfg) = env_config()? {
        file_cfg.apply(&mut cfg)?;
    }
    if let Some(n) = args.n {
        cfg.n = n;
        if args.sites.is_none() {
            cfg.sites = default_sites(n);
        }
    }
    if !args.suites.is_empty() {
        cfg.suites = parse_suite_list(&args.suites)?;
    }
    if let Some(t) = &args.tau {
        cfg.tau = parse_complex(t)?;
    }
    if let Some(h) = &args.hbar {
        cfg.hbar = parse_complex(h)?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.tol.is_some() {
        cfg.tol = args.tol;
    }
    if let Some(s) = args.samples {
        cfg.samples = s;
    }
    if let Some(s) = &args.sites {
        cfg.sites = parse_sites(s)?;
    }
    cfg.output = args.json.clone();
    cfg.zero_wall_time = args.zero_wall_time;
    Ok(cfg)
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify(args) => match build_config(&args).and_then(|cfg| {
            cfg.validate()?;
            Ok(cfg)
        }) {
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
            Ok(cfg) => match verify(&cfg) {
                Ok(all_passed) => {
                    if all_passed {
                        0
                    } else {
                        1
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            },
        },
        Command::ListIdentities { n } => {
            let mut cfg = RunConfig::default();
            if let Some(n) = n {
                cfg.n = n;
                cfg.sites = default_sites(n);
            }
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e}");
                std::process::exit(2);
            }
            let checks = catalogue(&cfg);
            for c in &checks {
                println!("{:<34} {}", c.id, c.anchor);
            }
            println!("{} identities", checks.len());
            0
        }
    };
    std::process::exit(code);
}

fn verify(cfg: &RunConfig) -> Result<bool> {
    let outcome = run(cfg)?;
    for r in &outcome.reports {
        let verdict = if r.status != "ok" {
            "ERROR"
        } else if r.pass {
            "pass"
        } else {
            "FAIL"
        };
        println!(
            "{verdict:<5} {:<34} max_rel {:.3e}  tol {:.1e}  ({} samples, {} ms)",
            r.identity_id, r.max_rel, r.tol, r.samples_used, r.wall_time_ms
        );
    }
    println!("passed {} / {}", outcome.passed, outcome.reports.len());
    let doc = output::write_document(cfg, &outcome);
    if let Some(path) = &cfg.output {
        let mut f = std::fs::File::create(path)?;
        f.write_all(doc.as_bytes())?;
        println!("report written to {}", path.display());
    }
    Ok(outcome.all_passed())
}
