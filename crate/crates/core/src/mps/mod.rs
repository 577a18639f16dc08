//! Finite open-boundary lattices as snake-ordered MPS: TDVP ramps, DMRG
//! references and correlators.

pub mod dmrg;
pub mod env;
pub mod measure;
pub mod mpo;
pub mod snake;
pub mod state;
pub mod tdvp;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dmrg::{dmrg_ground, DmrgOpts, DmrgResult};
pub use mpo::{build_mpo, Mpo};
pub use snake::SnakeMap;
pub use state::Mps;
pub use tdvp::{Scheme, StepStats, Tdvp, TdvpOpts};

use crate::error::{Error, Result};
use crate::model::{segmented_steps, ModelParams, RampSchedule};

/// MPO of `H(s)`.
pub fn mpo_at(snake: &SnakeMap, params: &ModelParams, s: f64) -> Result<Mpo> {
    let (j, g) = params.ramp_values(s)?;
    Ok(build_mpo(snake, j, g))
}

/// Summary of one TDVP ramp segment.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvolveSummary {
    pub steps: usize,
    /// Time at which the one-site scheme took over, if it did.
    pub switched_at: Option<f64>,
    pub max_trunc_err: f64,
    /// `(t, largest bond)` after every step at which the largest bond changed.
    pub bond_history: Vec<(f64, usize)>,
}

/// Evolves the integrator's state from `t0` to `t1` along the ramp with the
/// Hamiltonian frozen at each step's midpoint. `observe(t, mps)` runs at every
/// mark reached (marks are exact step boundaries) and at `t1`.
pub fn tdvp_evolve(
    tdvp: &mut Tdvp,
    snake: &SnakeMap,
    sched: &RampSchedule,
    params: &ModelParams,
    t0: f64,
    t1: f64,
    marks: &[f64],
    mut observe: impl FnMut(f64, &mut Mps) -> Result<()>,
) -> Result<EvolveSummary> {
    let steps = segmented_steps(t0, t1, sched.dt(), marks);
    let mut summary = EvolveSummary::default();
    let eps = 1e-12 * t1.abs().max(1.0);
    let mut last_bond = tdvp.mps.max_bond();
    summary.bond_history.push((t0, last_bond));
    for (t, h) in steps {
        let mpo = mpo_at(snake, params, sched.s(t + 0.5 * h))?;
        let before = tdvp.scheme;
        let st = tdvp.step(&mpo, h)?;
        summary.steps += 1;
        summary.max_trunc_err = summary.max_trunc_err.max(st.max_trunc_err);
        if before == Scheme::TwoSite && tdvp.scheme == Scheme::OneSite {
            summary.switched_at = Some(t + h);
        }
        if st.max_bond != last_bond {
            last_bond = st.max_bond;
            summary.bond_history.push((t + h, last_bond));
        }
        let te = t + h;
        if marks.iter().any(|&m| (m - te).abs() < eps) || (te - t1).abs() < eps {
            observe(te, &mut tdvp.mps)?;
        }
    }
    Ok(summary)
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    sites: usize,
    center: usize,
    time: f64,
    tensor_format: u32,
}

/// Writes `dir/meta.json` and one `site_<k>.symt` file per tensor.
pub fn save_checkpoint(dir: &Path, mps: &Mps, time: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, t) in mps.tensors.iter().enumerate() {
        let mut w = BufWriter::new(File::create(dir.join(format!("site_{k}.symt")))?);
        symtensor::io::write_tensor(t, &mut w)?;
    }
    let meta = CheckpointMeta {
        sites: mps.len(),
        center: mps.center,
        time,
        tensor_format: symtensor::io::FORMAT_VERSION,
    };
    std::fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

/// Reads a checkpoint, returning the state and its time.
pub fn load_checkpoint(dir: &Path) -> Result<(Mps, f64)> {
    let meta: CheckpointMeta = serde_json::from_slice(&std::fs::read(dir.join("meta.json"))?)?;
    if meta.tensor_format != symtensor::io::FORMAT_VERSION {
        return Err(Error::Store(format!("unsupported tensor format {}", meta.tensor_format)));
    }
    let mut tensors = Vec::with_capacity(meta.sites);
    for k in 0..meta.sites {
        let mut r = BufReader::new(File::open(dir.join(format!("site_{k}.symt")))?);
        tensors.push(symtensor::io::read_tensor(&mut r)?);
    }
    Ok((
        Mps {
            tensors,
            center: meta.center,
        },
        meta.time,
    ))
}
