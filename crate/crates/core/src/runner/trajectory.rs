//! One ramp on one backend, producing flat records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExactMethod, RunConfig};
use crate::analysis::edge_s;
use crate::error::{Error, Result};
use crate::exact::{self, Method, SectorBasis, StateVector};
use crate::ipeps::{evolve_ramp, CtmOpts, RampOpts, TrajectoryStatus};
use crate::lattice::Lattice;
use crate::model::{segmented_steps, RampSchedule};
use crate::mps::{self, dmrg_ground, measure, mpo_at, DmrgOpts, Mps, SnakeMap, Tdvp, TdvpOpts};
use crate::records::{average_rows, row_correlator, Backend, CorrRecord, EnergyRecord, ErrorRecord, RowCorrRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    TerminatedAtS { s: f64 },
    Failed { error: String },
}

impl Outcome {
    /// Whether a rerun may reuse the trajectory.
    pub fn is_final(&self) -> bool {
        !matches!(self, Outcome::Failed { .. })
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrajectoryData {
    pub corr: Vec<CorrRecord>,
    pub rows: Vec<RowCorrRecord>,
    pub energy: Vec<EnergyRecord>,
    pub errors: Vec<ErrorRecord>,
    /// `(t, largest bond)` whenever it changed.
    pub bond_history: Vec<(f64, usize)>,
    pub final_delta: Option<f64>,
}

/// Measurement points of one ramp: the configured grid plus, optionally,
/// the edges of the KZ stage. Sorted and deduplicated.
pub fn s_points(cfg: &RunConfig, t_r: f64) -> Result<Vec<f64>> {
    let mut s = cfg.measure.s.clone();
    if cfg.measure.edges {
        for sign in [-1.0, 1.0] {
            let e = edge_s(t_r, cfg.ramp.s_c, sign, &cfg.analysis.kz)?;
            if (0.0..=1.0).contains(&e) {
                s.push(e);
            }
        }
    }
    s.sort_by(f64::total_cmp);
    s.dedup();
    Ok(s)
}

fn schedule(cfg: &RunConfig, t_r: f64) -> Result<RampSchedule> {
    RampSchedule::new(t_r, cfg.ramp.shape, cfg.ramp.s_c)
}

fn lattice(cfg: &RunConfig) -> Result<Lattice> {
    let l = cfg
        .lattice
        .ok_or_else(|| Error::Config(format!("the {} backend needs a lattice", cfg.backend)))?;
    Ok(Lattice::new(l.rows, l.cols))
}

/// Ground-state energies `E_GS(s)` of the finite lattice, one per point.
pub fn reference_energies(cfg: &RunConfig, s: &[f64]) -> Result<Vec<f64>> {
    let lat = lattice(cfg)?;
    match cfg.backend {
        Backend::Exact => {
            let basis = SectorBasis::new(lat, exact::neel_magnetization(&lat))?;
            s.iter()
                .map(|&s| Ok(exact::ground_state_in(&basis, s, &cfg.model, 1)?[0].0))
                .collect()
        }
        Backend::Mps => {
            let snake = SnakeMap::new(lat);
            s.iter()
                .map(|&s| {
                    let mpo = mpo_at(&snake, &cfg.model, s)?;
                    let opts = DmrgOpts {
                        seed: cfg.seed,
                        ..DmrgOpts::new(cfg.bond.d)
                    };
                    Ok(dmrg_ground(&snake, &mpo, opts)?.energy)
                })
                .collect()
        }
        Backend::Ipeps => Err(Error::Config("no reference energies on the infinite lattice".into())),
    }
}

fn energy_record(t_r: f64, s: f64, e: f64, e_gs: f64, n: usize) -> EnergyRecord {
    EnergyRecord {
        t_r,
        s,
        e,
        e_gs,
        de_per_site: (e - e_gs) / n as f64,
    }
}

fn lookup(refs: &[(f64, f64)], s: f64) -> Result<f64> {
    refs.iter()
        .find(|r| r.0 == s)
        .map(|r| r.1)
        .ok_or_else(|| Error::Numerical(format!("no reference energy at s = {s}")))
}

/// Runs one ramp. `refs` holds `(s, E_GS)` pairs when energies are recorded.
pub fn run_trajectory(cfg: &RunConfig, t_r: f64, refs: &[(f64, f64)], snapshot_dir: Option<&Path>) -> Result<(Outcome, TrajectoryData)> {
    let sched = schedule(cfg, t_r)?;
    let s_pts = s_points(cfg, t_r)?;
    match cfg.backend {
        Backend::Exact => run_exact(cfg, &sched, &s_pts, refs),
        Backend::Mps => run_mps(cfg, &sched, &s_pts, refs),
        Backend::Ipeps => run_ipeps(cfg, &sched, &s_pts, snapshot_dir),
    }
}

fn central(rows: &[RowCorrRecord], lat: &Lattice) -> Vec<CorrRecord> {
    average_rows(rows, &lat.central_rows())
}

fn run_exact(cfg: &RunConfig, sched: &RampSchedule, s_pts: &[f64], refs: &[(f64, f64)]) -> Result<(Outcome, TrajectoryData)> {
    let lat = lattice(cfg)?;
    let method = match cfg.measure.exact_method {
        ExactMethod::Krylov => Method::ExactPropagator,
        ExactMethod::Trotter => Method::Trotter,
    };
    let mut psi = exact::neel_state(lat)?;
    let mut data = TrajectoryData::default();
    let measure = |t: f64, s: f64, psi: &StateVector, data: &mut TrajectoryData| -> Result<()> {
        let mut rows = Vec::new();
        for y in 0..lat.rows {
            for (r, c) in row_correlator(&lat, y, |i, j| 2.0 * psi.sp_sm(i, j).re) {
                rows.push(RowCorrRecord {
                    backend: Backend::Exact,
                    t_r: sched.t_r,
                    s,
                    t,
                    row: y,
                    r,
                    c,
                    d: 0,
                });
            }
        }
        data.corr.extend(central(&rows, &lat));
        data.rows.extend(rows);
        if cfg.measure.energy {
            let e = psi.energy(&cfg.model, s)?;
            data.energy.push(energy_record(sched.t_r, s, e, lookup(refs, s)?, lat.n_sites()));
        }
        Ok(())
    };
    walk(sched, s_pts, |ev| match ev {
        Event::Mark(t, s) => measure(t, s, &psi, &mut data),
        Event::Step(t, h) => exact::step(&mut psi, sched, &cfg.model, t, h, method),
    })?;
    Ok((Outcome::Completed, data))
}

enum Event {
    Step(f64, f64),
    Mark(f64, f64),
}

/// Steps through `[0, t(s_max)]` on the equalized grid, emitting a mark
/// event at every measurement time.
fn walk(sched: &RampSchedule, s_pts: &[f64], mut f: impl FnMut(Event) -> Result<()>) -> Result<()> {
    let marks: Vec<f64> = s_pts.iter().map(|&s| sched.t_of_s(s)).collect();
    let t_end = marks.iter().copied().fold(0.0, f64::max);
    let eps = 1e-12 * t_end.max(1.0);
    for (k, &m) in marks.iter().enumerate() {
        if m <= eps {
            f(Event::Mark(0.0, s_pts[k]))?;
        }
    }
    if t_end <= eps {
        return Ok(());
    }
    for (t, h) in segmented_steps(0.0, t_end, sched.dt(), &marks) {
        f(Event::Step(t, h))?;
        let te = t + h;
        for (k, &m) in marks.iter().enumerate() {
            if m > eps && (m - te).abs() < eps {
                f(Event::Mark(te, s_pts[k]))?;
            }
        }
    }
    Ok(())
}

fn run_mps(cfg: &RunConfig, sched: &RampSchedule, s_pts: &[f64], refs: &[(f64, f64)]) -> Result<(Outcome, TrajectoryData)> {
    let lat = lattice(cfg)?;
    let snake = SnakeMap::new(lat);
    let d = cfg.bond.d;
    let mut tdvp = Tdvp::new(Mps::neel(&snake), TdvpOpts::new(d))?;
    let mut data = TrajectoryData::default();
    let measure = |t: f64, s: f64, mps: &mut Mps, data: &mut TrajectoryData| -> Result<()> {
        let rows = measure::row_records(mps, &snake, sched.t_r, s, t, d)?;
        data.corr.extend(central(&rows, &lat));
        data.rows.extend(rows);
        if cfg.measure.energy {
            let e = measure::energy(mps, &mpo_at(&snake, &cfg.model, s)?)?;
            data.energy.push(energy_record(sched.t_r, s, e, lookup(refs, s)?, lat.n_sites()));
        }
        Ok(())
    };
    let marks: Vec<f64> = s_pts.iter().map(|&s| sched.t_of_s(s)).collect();
    let t_end = marks.iter().copied().fold(0.0, f64::max);
    let eps = 1e-12 * t_end.max(1.0);
    for (k, &m) in marks.iter().enumerate() {
        if m <= eps {
            measure(0.0, s_pts[k], &mut tdvp.mps, &mut data)?;
        }
    }
    if t_end > eps {
        let summary = mps::tdvp_evolve(&mut tdvp, &snake, sched, &cfg.model, 0.0, t_end, &marks, |t, mps| {
            for (k, &m) in marks.iter().enumerate() {
                if m > eps && (m - t).abs() < eps {
                    measure(t, s_pts[k], mps, &mut data)?;
                }
            }
            Ok(())
        })?;
        data.bond_history = summary.bond_history;
    }
    Ok((Outcome::Completed, data))
}

fn run_ipeps(cfg: &RunConfig, sched: &RampSchedule, s_pts: &[f64], snapshot_dir: Option<&Path>) -> Result<(Outcome, TrajectoryData)> {
    let mut opts = RampOpts::new(cfg.bond.d_max, s_pts.to_vec());
    opts.ctm = CtmOpts {
        tol: cfg.bond.ctm_tol,
        max_iter: cfg.bond.ctm_max_iter,
        ..CtmOpts::new(cfg.chi())
    };
    opts.r_max = cfg.measure.r_max;
    opts.delta_budget = cfg.delta_budget;
    opts.snapshot_dir = snapshot_dir.map(Path::to_path_buf);
    let run = evolve_ramp(sched, &cfg.model, &opts)?;
    let outcome = match run.status {
        TrajectoryStatus::Completed => Outcome::Completed,
        TrajectoryStatus::TerminatedAtS { s } => Outcome::TerminatedAtS { s },
    };
    let data = TrajectoryData {
        corr: run.corr,
        final_delta: Some(run.ledger.total),
        bond_history: vec![(run.errors.last().map_or(0.0, |e| e.t), run.state.max_bond())],
        errors: run.errors,
        ..Default::default()
    };
    Ok((outcome, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(backend: &str, extra: &str) -> RunConfig {
        RunConfig::from_toml(&format!(
            "backend = \"{backend}\"\noutput = \"o\"\n{extra}\n[lattice]\nrows = 2\ncols = 3\n[ramp]\nt_r = [1.0]\n[measure]\ns = [0.0, 0.5, 1.0]\nenergy = true\n"
        ))
        .unwrap()
    }

    #[test]
    fn exact_and_mps_agree_on_small_lattice() {
        let ce = cfg("exact", "");
        let mut cm = cfg("mps", "");
        cm.bond.d = 16;
        let s = s_points(&ce, 1.0).unwrap();
        let re: Vec<(f64, f64)> = s.iter().copied().zip(reference_energies(&ce, &s).unwrap()).collect();
        let rm: Vec<(f64, f64)> = s.iter().copied().zip(reference_energies(&cm, &s).unwrap()).collect();
        let (_, de) = run_trajectory(&ce, 1.0, &re, None).unwrap();
        let (_, dm) = run_trajectory(&cm, 1.0, &rm, None).unwrap();
        assert_eq!(de.corr.len(), dm.corr.len());
        assert_eq!(de.corr.len(), 3 * 2);
        for (a, b) in de.corr.iter().zip(&dm.corr) {
            assert_eq!((a.r, a.s), (b.r, b.s));
            assert!((a.c - b.c).abs() < 1e-8, "{a:?} {b:?}");
        }
        for (a, b) in de.energy.iter().zip(&dm.energy) {
            assert!((a.e - b.e).abs() < 1e-8);
            assert!((a.e_gs - b.e_gs).abs() < 1e-8);
        }
        // Néel state at s = 0 is the ground state
        assert!(de.energy[0].de_per_site.abs() < 1e-10);
    }

    #[test]
    fn edges_add_points() {
        let mut c = cfg("exact", "");
        c.measure.edges = true;
        let s = s_points(&c, 1.0).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.iter().any(|&x| (x - 0.09).abs() < 1e-12));
        assert!(s.iter().any(|&x| (x - 0.81).abs() < 1e-12));
    }
}
