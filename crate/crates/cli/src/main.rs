use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kzsim::runner::{self, FigureKind, RunConfig, Severity, Store};

#[derive(Parser)]
#[command(name = "kzsim", version, about = "Kibble-Zurek ramps of the 2D staggered-field XX model")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every ramp of a TOML configuration into its record store.
    Run { config: PathBuf },
    /// Fit correlation lengths and score collapses for a store.
    Analyze { store: PathBuf },
    /// Emit plot files and their CSV tables.
    Figures {
        store: PathBuf,
        /// Figures to draw (comma separated): error, collapse_sc, xi_scaling,
        /// collapse_edges, xi_finite, energy_finite, or all.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        which: Vec<String>,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
}

fn figure_list(names: &[String]) -> kzsim::Result<Vec<FigureKind>> {
    let mut out = Vec::new();
    for n in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        if n == "all" {
            out.extend(FigureKind::ALL);
        } else {
            out.push(n.parse()?);
        }
    }
    out.dedup();
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res: kzsim::Result<bool> = (|| match cli.cmd {
        Cmd::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let m = runner::run(&cfg)?;
            for e in &m.trajectories {
                println!("t_r = {:<8} {:?} ({:.1} s)", e.t_r, e.outcome, e.seconds);
            }
            println!("store: {}", cfg.output.display());
            Ok(m.trajectories.iter().all(|e| e.outcome.is_final()))
        }
        Cmd::Analyze { store } => {
            let s = runner::analyze(&Store::new(store))?;
            println!("{} fits, {} samples without signal", s.fits, s.skipped.len());
            if let Some(best) = s.best_collapse_s {
                println!("best collapse at s = {best:.4}");
            }
            if let Some(p) = &s.xi_at_tc_power_law {
                println!("xi(t_c) ~ t_r^{:.3} ± {:.3}", p.exponent, p.exponent_err);
            }
            for e in &s.energy {
                if let Some(slope) = e.tail_slope {
                    println!("dE(s = {:.3}) slow-ramp slope {slope:.3}", e.s);
                }
            }
            Ok(true)
        }
        Cmd::Figures { store, which } => {
            let kinds = figure_list(&which)?;
            if kinds.is_empty() {
                println!("no figures selected; nothing written");
                return Ok(true);
            }
            for p in runner::emit_figures(&Store::new(store), &kinds)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Cmd::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let findings = runner::validate(&cfg);
            for f in &findings {
                println!("{f}");
            }
            if findings.is_empty() {
                println!("ok");
            }
            Ok(findings.iter().all(|f| f.severity != Severity::Error))
        }
    })();
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
