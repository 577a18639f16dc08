//! Config-driven sweep: run every ramp into a record store, analyze it and
//! emit figures, as the `kzsim` binary does.
//!
//! `cargo run --release --example sweep -- [config.toml]` (defaults to a 2x4
//! exact sweep written to a temporary directory)

use kzsim::runner::{self, emit_figures, FigureKind, RunConfig, Store};

const DEFAULT: &str = r#"
backend = "exact"
output = "store"

[lattice]
rows = 2
cols = 4

[ramp]
t_r = [1.0, 2.0, 4.0, 8.0]

[measure]
energy = true
edges = true

[analysis.window]
r_min = 1
"#;

fn main() -> kzsim::Result<()> {
    let tmp = tempfile::tempdir()?;
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::load(path.as_ref())?,
        None => {
            let mut c = RunConfig::from_toml(DEFAULT)?;
            c.output = tmp.path().join("store");
            c
        }
    };
    for f in runner::validate(&cfg) {
        println!("{f}");
    }
    let manifest = runner::run(&cfg)?;
    for e in &manifest.trajectories {
        println!("t_r = {:<5} {:?} in {:.1} s", e.t_r, e.outcome, e.seconds);
    }
    let store = Store::new(&cfg.output);
    let summary = runner::analyze(&store)?;
    println!("{} fits, {} samples without signal", summary.fits, summary.skipped.len());
    if let Some(s) = summary.best_collapse_s {
        println!("best correlator collapse at s = {s:.3}");
    }
    for (t_r, xi, err) in &summary.xi_at_tc {
        println!("xi(t_c) at t_r = {t_r}: {xi:.4} +- {err:.1e}");
    }
    let files = emit_figures(&store, &FigureKind::ALL)?;
    println!("{} figure files under {}", files.len(), store.root.join("figures").display());
    Ok(())
}
