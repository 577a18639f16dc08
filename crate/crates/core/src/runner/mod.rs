//! Configured sweeps over ramp times, the record store, analysis tables and
//! figure emission.

pub mod config;
pub mod figures;
pub mod store;
pub mod trajectory;

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{check, validate, Finding, RunConfig, Severity};
pub use figures::{emit_figures, FigureKind};
pub use store::{RunManifest, Store, TrajectoryEntry};
pub use trajectory::Outcome;

use crate::analysis::{
    collapse_correlators, collapse_edges, collapse_xi_of_t, curve_of, edge_s, fit_all, fit_power_law, group_samples,
    EdgeCollapse, PowerLawFit,
};
use crate::error::{Error, Result};
use crate::records::{Backend, CorrRecord, EnergyRecord, FitRecord};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "KZSIM_WORKERS";

/// Worker count from [`WORKERS_ENV`], falling back to the available cores.
pub fn workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs every ramp of the configuration that the store does not already
/// hold, then rebuilds the merged record files.
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    run_with_workers(cfg, workers()?)
}

pub fn run_with_workers(cfg: &RunConfig, n_workers: usize) -> Result<RunManifest> {
    for f in check(cfg)? {
        log::warn!("{f}");
    }
    let store = Store::new(&cfg.output);
    let hash = cfg.hash();
    if let Some(m) = store.manifest()? {
        if m.config_hash != hash {
            return Err(Error::Store(format!(
                "{} holds a run of a different configuration (hash {})",
                cfg.output.display(),
                m.config_hash
            )));
        }
    }
    store.write_config(cfg)?;

    let mut t_rs: Vec<f64> = Vec::new();
    for &t in &cfg.ramp.t_r {
        if !t_rs.contains(&t) {
            t_rs.push(t);
        }
    }
    let mut done = Vec::new();
    let mut pending = Vec::new();
    for &t in &t_rs {
        match store.finished(t)? {
            Some(e) => {
                log::info!("t_r = {t}: already in the store, skipping");
                done.push(e);
            }
            None => pending.push(t),
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;

    let refs: Vec<(f64, f64)> = if cfg.measure.energy && cfg.backend != Backend::Ipeps && !pending.is_empty() {
        let mut s_all: Vec<f64> = Vec::new();
        for &t in &pending {
            s_all.extend(trajectory::s_points(cfg, t)?);
        }
        s_all.sort_by(f64::total_cmp);
        s_all.dedup();
        let e = pool.install(|| {
            s_all
                .par_iter()
                .map(|&s| trajectory::reference_energies(cfg, &[s]).map(|v| v[0]))
                .collect::<Result<Vec<f64>>>()
        })?;
        s_all.into_iter().zip(e).collect()
    } else {
        Vec::new()
    };

    let fresh: Vec<TrajectoryEntry> = pool.install(|| {
        pending
            .par_iter()
            .map(|&t_r| {
                let start = Instant::now();
                let snap = cfg.measure.snapshots.then(|| store.trajectory_dir(t_r).join("snapshots"));
                let (outcome, data) = match trajectory::run_trajectory(cfg, t_r, &refs, snap.as_deref()) {
                    Ok(x) => x,
                    Err(e) => {
                        log::error!("t_r = {t_r} failed: {e}");
                        (Outcome::Failed { error: e.to_string() }, Default::default())
                    }
                };
                let entry = TrajectoryEntry {
                    t_r,
                    outcome,
                    seconds: start.elapsed().as_secs_f64(),
                    final_delta: data.final_delta,
                    bond_history: data.bond_history.clone(),
                };
                store.save_trajectory(&entry, &data)?;
                log::info!("t_r = {t_r}: {:?} in {:.1} s", entry.outcome, entry.seconds);
                Ok(entry)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut trajectories: Vec<TrajectoryEntry> = done.into_iter().chain(fresh).collect();
    trajectories.sort_by(|a, b| a.t_r.total_cmp(&b.t_r));
    let manifest = RunManifest {
        config_hash: hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        trajectories,
    };
    store.write_manifest(&manifest)?;
    store.merge(&manifest)?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFit {
    pub t_r: f64,
    pub s: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseAtS {
    pub s: f64,
    pub residual: f64,
    pub curves: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyScaling {
    pub s: f64,
    /// Log-log slope between the two slowest ramps.
    pub tail_slope: Option<f64>,
    /// Power law over all ramps with positive `ΔE`.
    pub fit: Option<PowerLawFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub fits: usize,
    pub skipped: Vec<SkippedFit>,
    pub collapse_by_s: Vec<CollapseAtS>,
    /// Shared `s` with the smallest collapse residual.
    pub best_collapse_s: Option<f64>,
    /// `(t_r, ξ(t_c), error)`.
    pub xi_at_tc: Vec<(f64, f64, f64)>,
    pub xi_at_tc_power_law: Option<PowerLawFit>,
    pub xi_of_t_residual: Option<f64>,
    pub edges: Option<EdgeCollapse>,
    pub energy: Vec<EnergyScaling>,
}

pub(crate) fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Correlator curves at ramp parameter `s`, one per `t_r`.
pub(crate) fn curves_at(corr: &[CorrRecord], s: impl Fn(f64) -> Option<f64>) -> Vec<(f64, Vec<(usize, f64)>)> {
    group_samples(corr)
        .into_iter()
        .filter(|((t_r, sv), _)| s(*t_r).is_some_and(|target| same(*sv, target)))
        .map(|((t_r, _), recs)| (t_r, curve_of(&recs)))
        .collect()
}

/// `s` values measured on at least two ramps.
pub(crate) fn shared_s(corr: &[CorrRecord]) -> Vec<f64> {
    let mut per_s: Vec<(f64, BTreeSet<u64>)> = Vec::new();
    for r in corr {
        match per_s.iter_mut().find(|(s, _)| same(*s, r.s)) {
            Some((_, set)) => {
                set.insert(r.t_r.to_bits());
            }
            None => per_s.push((r.s, BTreeSet::from([r.t_r.to_bits()]))),
        }
    }
    let mut out: Vec<f64> = per_s.into_iter().filter(|(_, t)| t.len() > 1).map(|(s, _)| s).collect();
    out.sort_by(f64::total_cmp);
    out
}

pub(crate) fn xi_at(fits: &[FitRecord], s_of: impl Fn(f64) -> f64) -> Vec<(f64, f64, f64)> {
    let mut v: Vec<(f64, f64, f64)> = fits
        .iter()
        .filter(|f| same(f.s, s_of(f.t_r)))
        .map(|f| (f.t_r, f.xi, f.xi_err))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

pub(crate) fn energy_scaling(energy: &[EnergyRecord]) -> Vec<EnergyScaling> {
    let mut s_vals: Vec<f64> = energy.iter().map(|e| e.s).collect();
    s_vals.sort_by(f64::total_cmp);
    s_vals.dedup();
    s_vals
        .into_iter()
        .map(|s| {
            let mut pts: Vec<(f64, f64)> = energy
                .iter()
                .filter(|e| e.s == s && e.de_per_site > 0.0)
                .map(|e| (e.t_r, e.de_per_site))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let tail_slope = (pts.len() >= 2).then(|| {
                let (a, b) = (pts[pts.len() - 2], pts[pts.len() - 1]);
                (b.1 / a.1).ln() / (b.0 / a.0).ln()
            });
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            EnergyScaling {
                s,
                tail_slope,
                fit: fit_power_law(&x, &y).ok(),
            }
        })
        .collect()
}

/// Fits every stored sample and writes `fits.csv`, `collapse.csv` and
/// `analysis.json` next to the records.
pub fn analyze(store: &Store) -> Result<AnalysisSummary> {
    let cfg = store.config()?;
    let kz = cfg.analysis.kz;
    let s_c = cfg.ramp.s_c;
    let corr = store.corr()?;
    let (fits, skipped) = fit_all(&corr, &cfg.analysis.window);
    store::write_csv(&store.path(store::FITS), &fits)?;

    let mut collapse_by_s = Vec::new();
    for s in shared_s(&corr) {
        let curves = curves_at(&corr, |_| Some(s));
        match collapse_correlators(&curves, &kz) {
            Ok(c) => collapse_by_s.push(CollapseAtS {
                s,
                residual: c.residual,
                curves: curves.len(),
            }),
            Err(e) => log::warn!("no collapse at s = {s}: {e}"),
        }
    }
    store::write_csv(&store.path("collapse.csv"), &collapse_by_s)?;
    let best_collapse_s = collapse_by_s
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .map(|c| c.s);

    let xi_at_tc = xi_at(&fits, |_| s_c);
    let xi_at_tc_power_law = (xi_at_tc.len() >= 3)
        .then(|| {
            let (x, y): (Vec<f64>, Vec<f64>) = xi_at_tc.iter().map(|p| (p.0, p.1)).unzip();
            fit_power_law(&x, &y).ok()
        })
        .flatten();

    let mut xi_curves: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for f in &fits {
        let t = match corr.iter().find(|r| r.t_r == f.t_r && r.s == f.s) {
            Some(r) => r.t,
            None => continue,
        };
        match xi_curves.iter_mut().find(|c| c.0 == f.t_r) {
            Some(c) => c.1.push((t, f.xi)),
            None => xi_curves.push((f.t_r, vec![(t, f.xi)])),
        }
    }
    let xi_of_t_residual = if xi_curves.len() > 1 {
        collapse_xi_of_t(&xi_curves, &kz, s_c).ok().map(|c| c.residual)
    } else {
        None
    };

    let edge_target = |sign: f64| move |t_r: f64| edge_s(t_r, s_c, sign, &kz).ok();
    let minus = curves_at(&corr, edge_target(-1.0));
    let plus = curves_at(&corr, edge_target(1.0));
    let edges = if !minus.is_empty() && !plus.is_empty() {
        collapse_edges(&minus, &plus, &kz).ok()
    } else {
        None
    };

    let summary = AnalysisSummary {
        fits: fits.len(),
        skipped: skipped
            .into_iter()
            .map(|((t_r, s), reason)| SkippedFit { t_r, s, reason })
            .collect(),
        collapse_by_s,
        best_collapse_s,
        xi_at_tc,
        xi_at_tc_power_law,
        xi_of_t_residual,
        edges,
        energy: energy_scaling(&store.energy()?),
    };
    std::fs::write(store.path("analysis.json"), serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}
