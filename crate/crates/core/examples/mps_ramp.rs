//! TDVP ramp of a 4x4 lattice as a snake-ordered MPS, with DMRG supplying the
//! instantaneous ground-state energy at the end of the ramp.
//!
//! `cargo run --release --example mps_ramp -- [t_r] [D]`

use kzsim::model::RampSchedule;
use kzsim::mps::{self, dmrg::DmrgOpts, measure, Mps, SnakeMap, Tdvp, TdvpOpts};
use kzsim::{Lattice, ModelParams};

fn main() -> kzsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let t_r: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let d: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(32);
    let lat = Lattice::new(4, 4);
    let snake = SnakeMap::new(lat);
    let params = ModelParams::default();
    let sched = RampSchedule::linear(t_r);

    let mut tdvp = Tdvp::new(Mps::neel(&snake), TdvpOpts::new(d))?;
    let marks: Vec<f64> = [0.25, 0.45, 0.75, 1.0].iter().map(|&s| sched.t_of_s(s)).collect();
    println!("4x4 lattice, D = {d}, J_r t_r = {t_r}");
    let summary = mps::tdvp_evolve(&mut tdvp, &snake, &sched, &params, 0.0, t_r, &marks, |t, m| {
        let rows = measure::row_records(m, &snake, t_r, sched.s(t), t, d)?;
        let c: Vec<String> = rows.iter().filter(|r| r.row == 1).map(|r| format!("{:+.3e}", r.c)).collect();
        println!("s = {:.2}: row 1 C(R) = [{}], bond {}", sched.s(t), c.join(", "), m.max_bond());
        Ok(())
    })?;
    println!(
        "{} steps, largest discarded weight {:.2e}, one-site scheme from t = {:?}",
        summary.steps, summary.max_trunc_err, summary.switched_at
    );

    let mpo = mps::mpo_at(&snake, &params, 1.0)?;
    let gs = mps::dmrg::dmrg_ground(&snake, &mpo, DmrgOpts::new(d))?;
    let de = measure::excitation_energy(&tdvp.mps, &mpo, gs.energy)?;
    println!("E_GS(s = 1) = {:.8} ({} sweeps), dE/N = {de:.4e}", gs.energy, gs.sweep_energies.len());
    Ok(())
}
