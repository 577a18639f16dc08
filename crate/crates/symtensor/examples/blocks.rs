//! U(1) block-sparse tensors: a two-spin state, an operator acting on it, and
//! a truncated SVD across the bond.

use symtensor::{contract, truncated_svd, ChargeLeg, Direction, SymTensor, Truncation, C64};

fn main() -> symtensor::Result<()> {
    // spin-1/2 with charges -1 (down) and +1 (up)
    let p = ChargeLeg::new(Direction::Out, vec![(-1, 1), (1, 1)])?;

    // (|ud> - |du>) / sqrt 2 lives in the charge-0 sector only
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = SymTensor::from_fn(vec![p.clone(), p.clone()], 0, |i| match (i[0], i[1]) {
        (1, 0) => C64::new(r, 0.0),
        (0, 1) => C64::new(-r, 0.0),
        _ => C64::new(0.0, 0.0),
    });
    println!("singlet: {} blocks, {} stored numbers, norm {:.3}", singlet.num_blocks(), singlet.stored_len(), singlet.norm());

    // sigma^+ on the first spin raises the total charge by 2
    let sp = SymTensor::from_fn(vec![p.clone(), p.dual()], 2, |i| {
        C64::new(if i[0] == 1 && i[1] == 0 { 1.0 } else { 0.0 }, 0.0)
    })
    .pruned();
    let raised = contract(&sp, &singlet, &[(1, 0)])?;
    println!("sigma^+_1 |singlet>: total charge {}, norm {:.3}", raised.total_charge(), raised.norm());

    // a random charge-0 two-site state, cut to bond dimension 1
    let mut rng = rand::thread_rng();
    let big = ChargeLeg::new(Direction::Out, vec![(-1, 3), (0, 2), (1, 3)])?;
    let psi = SymTensor::random(vec![big.clone(), big], 0, &mut rng);
    let full = truncated_svd(&psi, 1, Truncation::default())?;
    let cut = truncated_svd(&psi, 1, Truncation::max_dim(4))?;
    println!("spectrum {:?}", full.spectrum().iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>());
    println!("kept {} of {} values, relative error {:.3}", cut.bond_dim(), full.bond_dim(), cut.rel_err);
    Ok(())
}
