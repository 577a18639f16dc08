//! Linear ramp of a 2x4 lattice with the exact state vector: the staggered
//! correlator of the central rows and the excitation energy along the way.
//!
//! `cargo run --example exact_ramp -- [t_r]`

use kzsim::exact::{self, Method};
use kzsim::model::RampSchedule;
use kzsim::records::row_correlator;
use kzsim::{Lattice, ModelParams};

fn main() -> kzsim::Result<()> {
    let t_r: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4.0);
    let lat = Lattice::new(2, 4);
    let params = ModelParams::default();
    let sched = RampSchedule::linear(t_r);
    let mut psi = exact::neel_state(lat)?;
    println!("2x4 lattice, {} states in the Neel sector, J_r t_r = {t_r}", psi.basis.dim());
    println!("{:>6} {:>11} {:>11} {:>11} {:>11}", "s", "C(1)", "C(2)", "C(3)", "dE/N");

    let mut t = 0.0;
    for k in 1..=10 {
        let s = k as f64 / 10.0;
        let t_next = sched.t_of_s(s);
        let (n, h) = exact::step_grid(t, t_next, sched.dt());
        for i in 0..n {
            exact::step(&mut psi, &sched, &params, t + i as f64 * h, h, Method::ExactPropagator)?;
        }
        t = t_next;

        let c = row_correlator(&lat, 0, |i, j| 2.0 * psi.sp_sm(i, j).re);
        let e_gs = exact::ground_state(s, &params, lat, 1)?[0].0;
        let de = (psi.energy(&params, s)? - e_gs) / lat.n_sites() as f64;
        println!("{s:>6.2} {:>11.3e} {:>11.3e} {:>11.3e} {de:>11.3e}", c[0].1, c[1].1, c[2].1);
    }
    Ok(())
}
