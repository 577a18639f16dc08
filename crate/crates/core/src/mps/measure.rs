use symtensor::{contract, SymTensor, C64};

use super::mpo::Mpo;
use super::snake::SnakeMap;
use super::state::Mps;
use crate::error::{Error, Result};
use crate::model::phys_leg;
use crate::records::{row_correlator, Backend, RowCorrRecord};

fn site_op(charge: i32, f: impl Fn(usize, usize) -> f64) -> SymTensor {
    let p = phys_leg();
    SymTensor::from_fn(vec![p.clone(), p.dual()], charge, |idx| C64::new(f(idx[0], idx[1]), 0.0)).pruned()
}

fn sigma_plus() -> SymTensor {
    site_op(2, |o, i| if o == 1 && i == 0 { 1.0 } else { 0.0 })
}

fn sigma_minus() -> SymTensor {
    site_op(-2, |o, i| if o == 0 && i == 1 { 1.0 } else { 0.0 })
}

fn sigma_z() -> SymTensor {
    site_op(0, |o, i| if o != i { 0.0 } else if o == 1 { 1.0 } else { -1.0 })
}

/// Transfer `[ket In, bra Out]` with `op` inserted on the centre tensor `a`.
fn open(a: &SymTensor, op: &SymTensor) -> Result<SymTensor> {
    let x = contract(a, op, &[(1, 1)])?; // [l, r, pout]
    Ok(contract(&x, &a.conj(), &[(0, 0), (2, 1)])?)
}

fn close(e: &SymTensor, a: &SymTensor, op: &SymTensor) -> Result<C64> {
    let x = contract(e, a, &[(0, 0)])?; // [bra, p, r]
    let x = contract(&x, op, &[(1, 1)])?; // [bra, r, pout]
    let v = contract(&x, &a.conj(), &[(0, 0), (1, 2), (2, 1)])?;
    Ok(v.scalar().unwrap_or(C64::new(0.0, 0.0)))
}

fn pass(e: &SymTensor, a: &SymTensor) -> Result<SymTensor> {
    let x = contract(e, a, &[(0, 0)])?; // [bra, p, r]
    Ok(contract(&x, &a.conj(), &[(0, 0), (1, 1)])?)
}

/// `⟨σ^+_i σ^-_j⟩` in chain coordinates for every `j > i`; entry `j - i - 1`.
/// Moves the centre to `i`.
pub fn sp_sm_row(mps: &mut Mps, i: usize, j_max: usize) -> Result<Vec<C64>> {
    mps.move_center(i)?;
    let n = mps.len();
    let j_max = j_max.min(n - 1);
    let sm = sigma_minus();
    let mut e = open(&mps.tensors[i], &sigma_plus())?;
    let mut out = Vec::new();
    for j in i + 1..=j_max {
        out.push(close(&e, &mps.tensors[j], &sm)?);
        if j < j_max {
            e = pass(&e, &mps.tensors[j])?;
        }
    }
    Ok(out)
}

/// `⟨σ^z⟩` on chain site `i`. Moves the centre to `i`.
pub fn sz(mps: &mut Mps, i: usize) -> Result<f64> {
    mps.move_center(i)?;
    let a = &mps.tensors[i];
    let x = contract(a, &sigma_z(), &[(1, 1)])?; // [l, r, pout]
    let v = contract(&x, &a.conj(), &[(0, 0), (1, 2), (2, 1)])?;
    Ok(v.scalar().unwrap_or(C64::new(0.0, 0.0)).re)
}

/// `⟨σ^+_a σ^-_b⟩` between lattice sites.
pub fn sp_sm(mps: &mut Mps, snake: &SnakeMap, a: usize, b: usize) -> Result<C64> {
    let (ca, cb) = (snake.chain(a), snake.chain(b));
    if ca < cb {
        Ok(sp_sm_row(mps, ca, cb)?[cb - ca - 1])
    } else {
        // ⟨σ^+_a σ^-_b⟩ = conj ⟨σ^+_b σ^-_a⟩
        Ok(sp_sm_row(mps, cb, ca)?[ca - cb - 1].conj())
    }
}

/// Staggered correlator of every lattice row, one record per `(row, R)`.
/// `⟨σ^x⟩ = ⟨σ^y⟩ = 0` holds structurally, so no one-point term appears.
pub fn row_records(mps: &mut Mps, snake: &SnakeMap, t_r: f64, s: f64, t: f64, d: usize) -> Result<Vec<RowCorrRecord>> {
    let lat = snake.lattice();
    let mut out = Vec::new();
    for y in 0..lat.rows {
        // chain sites of row y are contiguous
        let lo = y * lat.cols;
        let hi = lo + lat.cols - 1;
        let mut table = vec![vec![C64::new(0.0, 0.0); lat.cols]; lat.cols];
        for i in lo..hi {
            let vals = sp_sm_row(mps, i, hi)?;
            for (k, v) in vals.into_iter().enumerate() {
                table[i - lo][i + 1 + k - lo] = v;
            }
        }
        let mut err = None;
        let rows = row_correlator(&lat, y, |a, b| {
            let (ca, cb) = (snake.chain(a), snake.chain(b));
            let v = table[ca.min(cb) - lo][ca.max(cb) - lo];
            if v.re.is_nan() {
                err = Some(Error::Numerical("NaN correlator".into()));
            }
            2.0 * v.re
        });
        if let Some(e) = err {
            return Err(e);
        }
        out.extend(rows.into_iter().map(|(r, c)| RowCorrRecord {
            backend: Backend::Mps,
            t_r,
            s,
            t,
            row: y,
            r,
            c,
            d,
        }));
    }
    Ok(out)
}

/// `⟨H⟩` for the given MPO.
pub fn energy(mps: &Mps, mpo: &Mpo) -> Result<f64> {
    Ok(super::env::expectation(mps, mpo)?.re)
}

/// Excitation energy per site `(⟨H⟩ - E_GS) / N`.
///
/// Values below `-1e-6` (total, i.e. `-1e-6·N` before dividing) mean the
/// reference is worse than the state and are logged.
pub fn excitation_energy(mps: &Mps, mpo: &Mpo, e_gs: f64) -> Result<f64> {
    let n = mps.len() as f64;
    let de = energy(mps, mpo)? - e_gs;
    if de < -1e-6 * n {
        log::warn!("negative excitation energy {de:.3e}: ground-state reference not converged");
    }
    Ok(de / n)
}
