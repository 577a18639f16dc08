//! Ramp evolution of the iPEPS with the accumulated truncation error ledger.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ctm::{corr_records, ctmrg_run, magnetization, CtmEnv, CtmOpts};
use super::ntu::{apply_gate_ntu, NtuOpts};
use super::{save_state, BondKind, IpepsState, Sub};
use crate::error::{Error, Result};
use crate::model::{field_gate, segmented_steps, trotter_plan, two_site_gate, Layer, ModelParams, RampSchedule};
use crate::records::{Backend, CorrRecord, ErrorRecord};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub gate: usize,
    pub bond: BondKind,
    pub delta_i: f64,
    pub regularized: bool,
}

/// Per-gate truncation errors and their running sum `δ = Σ δ_i`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TruncationLedger {
    pub entries: Vec<LedgerEntry>,
    pub total: f64,
}

impl TruncationLedger {
    pub fn push(&mut self, bond: BondKind, delta_i: f64, regularized: bool) {
        let delta_i = delta_i.max(0.0);
        self.entries.push(LedgerEntry {
            gate: self.entries.len(),
            bond,
            delta_i,
            regularized,
        });
        self.total += delta_i;
    }

    pub fn regularized_count(&self) -> usize {
        self.entries.iter().filter(|e| e.regularized).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TrajectoryStatus {
    Completed,
    /// The accumulated error exceeded the budget; data up to `s` is kept.
    TerminatedAtS { s: f64 },
}

#[derive(Clone, Debug)]
pub struct RampOpts {
    pub d_max: usize,
    pub ctm: CtmOpts,
    pub r_max: usize,
    /// Ramp parameters at which correlators are measured.
    pub s_points: Vec<f64>,
    /// Largest tolerated accumulated error before the run stops.
    pub delta_budget: f64,
    /// Directory for a snapshot at every measurement point.
    pub snapshot_dir: Option<std::path::PathBuf>,
}

impl RampOpts {
    pub fn new(d_max: usize, s_points: Vec<f64>) -> Self {
        Self {
            d_max,
            ctm: CtmOpts::new((2 * d_max * d_max).max(8)),
            r_max: 8,
            s_points,
            delta_budget: 0.1,
            snapshot_dir: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IpepsRun {
    pub corr: Vec<CorrRecord>,
    /// Accumulated error after every step.
    pub errors: Vec<ErrorRecord>,
    pub ledger: TruncationLedger,
    pub status: TrajectoryStatus,
    pub state: IpepsState,
    /// `(s, ⟨σ^z_A⟩, ⟨σ^z_B⟩)` at each measurement point.
    pub magnetization: Vec<(f64, f64, f64)>,
}

/// Applies one symmetric Trotter step.
fn trotter_step(state: &mut IpepsState, plan: &crate::model::TrotterPlan, ntu: &NtuOpts, ledger: &mut TruncationLedger) -> Result<()> {
    for layer in &plan.layers {
        match *layer {
            Layer::Field(d) => {
                for s in [Sub::A, Sub::B] {
                    state.apply_site(s, &field_gate(plan.g, s.field_sign(), d)?)?;
                }
            }
            Layer::Bonds(g, d) => {
                let bond = BondKind::from_group(g);
                let (next, rep) = apply_gate_ntu(state, bond, &two_site_gate(plan.j, d), ntu)?;
                ledger.push(bond, rep.delta, rep.regularized);
                *state = next;
            }
        }
    }
    Ok(())
}

/// Evolves the Néel product state along the ramp, measuring at `opts.s_points`
/// and stopping early once the accumulated error exceeds the budget.
pub fn evolve_ramp(sched: &RampSchedule, params: &ModelParams, opts: &RampOpts) -> Result<IpepsRun> {
    let mut s_points = opts.s_points.clone();
    s_points.sort_by(|a, b| a.partial_cmp(b).expect("finite s"));
    if s_points.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::Range("measurement points must lie in [0, 1]".into()));
    }
    let marks: Vec<f64> = s_points.iter().map(|&s| sched.t_of_s(s)).collect();
    let t_end = marks.last().copied().unwrap_or(0.0);
    let ntu = NtuOpts::new(opts.d_max);
    let mut state = IpepsState::neel();
    let mut ledger = TruncationLedger::default();
    let mut env: Option<CtmEnv> = None;
    let mut run = IpepsRun {
        corr: Vec::new(),
        errors: Vec::new(),
        ledger: TruncationLedger::default(),
        status: TrajectoryStatus::Completed,
        state: state.clone(),
        magnetization: Vec::new(),
    };
    let eps = 1e-12 * t_end.max(1.0);
    let measure = |t: f64, s: f64, state: &IpepsState, ledger: &TruncationLedger, env: &mut Option<CtmEnv>, run: &mut IpepsRun| -> Result<()> {
        let e = ctmrg_run(state, &opts.ctm, env.take())?;
        if !e.converged {
            log::warn!(
                "CTMRG at s = {s:.4} (t_r = {}) stopped at corner change {:.3e}",
                sched.t_r,
                e.history.last().copied().unwrap_or(f64::NAN)
            );
        }
        run.corr.extend(corr_records(&e, state, opts.r_max, sched.t_r, s, t)?);
        let [za, zb] = magnetization(&e, state)?;
        run.magnetization.push((s, za, zb));
        if let Some(dir) = &opts.snapshot_dir {
            save_snapshot(&dir.join(format!("s_{s:.4}")), state, ledger, &e)?;
        }
        *env = Some(e);
        Ok(())
    };
    for (k, &tm) in marks.iter().enumerate() {
        if tm <= eps {
            measure(0.0, s_points[k], &state, &ledger, &mut env, &mut run)?;
        }
    }
    'steps: for (t, h) in segmented_steps(0.0, t_end, sched.dt(), &marks) {
        let plan = trotter_plan(4, sched, params, t, h)?;
        trotter_step(&mut state, &plan, &ntu, &mut ledger)?;
        let te = t + h;
        let s = sched.s(te);
        run.errors.push(ErrorRecord {
            backend: Backend::Ipeps,
            t_r: sched.t_r,
            s,
            t: te,
            delta: ledger.total,
            d: opts.d_max,
        });
        if ledger.total > opts.delta_budget {
            log::info!("t_r = {}: δ = {:.3e} exceeds budget at s = {s:.4}", sched.t_r, ledger.total);
            run.status = TrajectoryStatus::TerminatedAtS { s };
            break 'steps;
        }
        for (k, &tm) in marks.iter().enumerate() {
            if (tm - te).abs() < eps {
                measure(te, s_points[k], &state, &ledger, &mut env, &mut run)?;
            }
        }
    }
    if ledger.regularized_count() > 0 {
        log::warn!("{} NTU metrics needed regularization", ledger.regularized_count());
    }
    run.ledger = ledger;
    run.state = state;
    Ok(run)
}

/// Writes state tensors, ledger and environment tensors under `dir`.
pub fn save_snapshot(dir: &Path, state: &IpepsState, ledger: &TruncationLedger, env: &CtmEnv) -> Result<()> {
    save_state(dir, state)?;
    std::fs::write(dir.join("ledger.json"), serde_json::to_vec(ledger)?)?;
    for (k, site) in env.sites.iter().enumerate() {
        for (i, t) in site.c.iter().chain(site.t.iter()).enumerate() {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("env_{k}_{i}.symt")))?);
            symtensor::io::write_tensor(t, &mut w)?;
        }
    }
    Ok(())
}

/// Reads a snapshot written by [`save_snapshot`].
pub fn load_snapshot(dir: &Path) -> Result<(IpepsState, TruncationLedger, CtmEnv)> {
    let state = super::load_state(dir)?;
    let ledger: TruncationLedger = serde_json::from_slice(&std::fs::read(dir.join("ledger.json"))?)?;
    let read = |k: usize, i: usize| -> Result<symtensor::SymTensor> {
        let mut r = std::io::BufReader::new(std::fs::File::open(dir.join(format!("env_{k}_{i}.symt")))?);
        Ok(symtensor::io::read_tensor(&mut r)?)
    };
    let site = |k: usize| -> Result<super::ctm::SiteEnv> {
        Ok(super::ctm::SiteEnv {
            c: [read(k, 0)?, read(k, 1)?, read(k, 2)?, read(k, 3)?],
            t: [read(k, 4)?, read(k, 5)?, read(k, 6)?, read(k, 7)?],
        })
    };
    let chi = read(0, 0)?.leg(0).dim();
    let env = CtmEnv {
        sites: [site(0)?, site(1)?],
        chi,
        history: Vec::new(),
        converged: true,
    };
    Ok((state, ledger, env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RampShape;

    fn short_run(d: usize, t_r: f64, s_points: Vec<f64>) -> IpepsRun {
        let sched = RampSchedule::new(t_r, RampShape::Linear, 0.45).unwrap();
        let mut opts = RampOpts::new(d, s_points);
        opts.ctm = CtmOpts::new(8);
        opts.r_max = 3;
        evolve_ramp(&sched, &ModelParams::default(), &opts).unwrap()
    }

    #[test]
    fn ledger_is_monotone_and_exact_while_bond_grows() {
        let run = short_run(2, 1.0, vec![0.0, 0.1]);
        assert!(run.ledger.entries[0].delta_i < 1e-12);
        for w in run.errors.windows(2) {
            assert!(w[1].delta >= w[0].delta);
        }
        assert_eq!(run.status, TrajectoryStatus::Completed);
        // two measurement points
        assert_eq!(run.magnetization.len(), 2);
        assert!((run.magnetization[0].1 + 1.0).abs() < 1e-12);
        assert_eq!(run.corr.len(), 6);
    }

    #[test]
    fn budget_terminates_with_partial_data() {
        let sched = RampSchedule::new(1.0, RampShape::Linear, 0.45).unwrap();
        let mut opts = RampOpts::new(1, vec![0.0, 0.5]);
        opts.ctm = CtmOpts::new(4);
        opts.delta_budget = 1e-3;
        let run = evolve_ramp(&sched, &ModelParams::default(), &opts).unwrap();
        match run.status {
            TrajectoryStatus::TerminatedAtS { s } => assert!(s < 0.5),
            other => panic!("expected termination, got {other:?}"),
        }
        assert!(!run.corr.is_empty());
    }

    #[test]
    fn snapshot_round_trip() {
        let st = IpepsState::neel();
        let env = super::super::ctm::ctmrg(&st, &CtmOpts::new(4), None).unwrap();
        let mut ledger = TruncationLedger::default();
        ledger.push(BondKind::VerticalAB, 1e-3, false);
        let dir = tempfile::tempdir().unwrap();
        save_snapshot(dir.path(), &st, &ledger, &env).unwrap();
        let (s2, l2, e2) = load_snapshot(dir.path()).unwrap();
        assert_eq!(s2.a, st.a);
        assert_eq!(l2.total, ledger.total);
        assert!(e2.fits(&s2));
    }
}
