//! Left/right environments of `⟨ψ|W|ψ⟩` and the projected Hamiltonians used
//! by DMRG and TDVP.
//!
//! Left environments have legs `[ket In, mpo In, bra Out]`, right environments
//! `[ket Out, mpo Out, bra In]`.

use symtensor::{contract, ChargeLeg, SymTensor, C64};

use super::mpo::Mpo;
use super::state::Mps;
use crate::error::Result;

fn unit(legs: Vec<ChargeLeg>) -> SymTensor {
    SymTensor::from_fn(legs, 0, |_| C64::new(1.0, 0.0))
}

/// Environment left of site 0.
pub fn left_boundary(mps: &Mps, mpo: &Mpo) -> SymTensor {
    let a = mps.tensors[0].leg(0);
    unit(vec![a.dual(), mpo.left_leg().dual(), a.clone()])
}

/// Environment right of the last site.
pub fn right_boundary(mps: &Mps, mpo: &Mpo) -> SymTensor {
    let a = mps.tensors[mps.len() - 1].leg(2);
    unit(vec![a.dual(), mpo.right_leg().dual(), a.clone()])
}

pub fn extend_left(l: &SymTensor, a: &SymTensor, w: &SymTensor) -> Result<SymTensor> {
    let x = contract(l, a, &[(0, 0)])?; // [w, b, p, r]
    let x = contract(&x, w, &[(0, 0), (2, 2)])?; // [b, r, pout, wr]
    let x = contract(&x, &a.conj(), &[(0, 0), (2, 1)])?; // [r, wr, r*]
    Ok(x)
}

pub fn extend_right(r: &SymTensor, a: &SymTensor, w: &SymTensor) -> Result<SymTensor> {
    let x = contract(a, r, &[(2, 0)])?; // [l, p, w, b]
    let x = contract(w, &x, &[(3, 2), (2, 1)])?; // [wl, pout, l, b]
    let x = contract(&x, &a.conj(), &[(1, 1), (3, 2)])?; // [wl, l, l*]
    Ok(x.permute(&[1, 0, 2]))
}

/// `H_eff θ` for a two-site tensor `θ = [l, p1, p2, r]`.
pub fn apply_two(l: &SymTensor, w1: &SymTensor, w2: &SymTensor, r: &SymTensor, theta: &SymTensor) -> SymTensor {
    let x = contract(l, theta, &[(0, 0)]).expect("env/θ"); // [w, b, p1, p2, r]
    let x = contract(&x, w1, &[(0, 0), (2, 2)]).expect("W1"); // [b, p2, r, p1', w]
    let x = contract(&x, w2, &[(4, 0), (1, 2)]).expect("W2"); // [b, r, p1', p2', w]
    let x = contract(&x, r, &[(1, 0), (4, 1)]).expect("R"); // [b, p1', p2', b']
    x
}

/// `H_eff A` for a one-site tensor `[l, p, r]`.
pub fn apply_one(l: &SymTensor, w: &SymTensor, r: &SymTensor, a: &SymTensor) -> SymTensor {
    let x = contract(l, a, &[(0, 0)]).expect("env/A"); // [w, b, p, r]
    let x = contract(&x, w, &[(0, 0), (2, 2)]).expect("W"); // [b, r, p', w]
    contract(&x, r, &[(1, 0), (3, 1)]).expect("R") // [b, p', b']
}

/// `H_eff C` for a bond matrix `[l Out, r In]` between the two environments.
pub fn apply_zero(l: &SymTensor, r: &SymTensor, c: &SymTensor) -> SymTensor {
    let x = contract(l, c, &[(0, 0)]).expect("env/C"); // [w, b, r]
    contract(&x, r, &[(2, 0), (0, 1)]).expect("R") // [b, b']
}

/// Full environment stacks for an MPS in canonical form.
pub struct Environments {
    pub left: Vec<Option<SymTensor>>,
    pub right: Vec<Option<SymTensor>>,
}

impl Environments {
    /// Builds `left[0]` and all right environments `right[k]` for `k ≥ 1`
    /// (the state's centre must be at site 0).
    pub fn from_right(mps: &Mps, mpo: &Mpo) -> Result<Self> {
        let n = mps.len();
        let mut left = vec![None; n];
        let mut right = vec![None; n];
        left[0] = Some(left_boundary(mps, mpo));
        right[n - 1] = Some(right_boundary(mps, mpo));
        for k in (0..n - 1).rev() {
            let r = right[k + 1].as_ref().unwrap();
            right[k] = Some(extend_right(r, &mps.tensors[k + 1], &mpo.tensors[k + 1])?);
        }
        Ok(Self { left, right })
    }

    pub fn l(&self, k: usize) -> &SymTensor {
        self.left[k].as_ref().expect("left environment available")
    }

    pub fn r(&self, k: usize) -> &SymTensor {
        self.right[k].as_ref().expect("right environment available")
    }
}

/// `⟨ψ|W|ψ⟩` for any gauge.
pub fn expectation(mps: &Mps, mpo: &Mpo) -> Result<C64> {
    let mut l = left_boundary(mps, mpo);
    for (a, w) in mps.tensors.iter().zip(&mpo.tensors) {
        l = extend_left(&l, a, w)?;
    }
    let r = right_boundary(mps, mpo);
    Ok(contract(&l, &r, &[(0, 0), (1, 1), (2, 2)])?.scalar().unwrap_or(C64::new(0.0, 0.0)))
}

/// `⟨ψ|φ⟩`.
pub fn overlap(psi: &Mps, phi: &Mps) -> Result<C64> {
    if psi.magnetization() != phi.magnetization() {
        return Ok(C64::new(0.0, 0.0));
    }
    // e: [phi In, psi* Out]
    let mut e = SymTensor::identity(&phi.tensors[0].leg(0).dual());
    for (a, b) in psi.tensors.iter().zip(&phi.tensors) {
        let x = contract(&e, b, &[(0, 0)])?; // [psi*, p, r]
        e = contract(&x, &a.conj(), &[(0, 0), (1, 1)])?; // [r, r*]
    }
    // both edge legs are the one-dimensional total-magnetization sector
    let m = phi.magnetization();
    Ok(e.block(&[m, m]).map(|b| b[0]).unwrap_or(C64::new(0.0, 0.0)))
}
