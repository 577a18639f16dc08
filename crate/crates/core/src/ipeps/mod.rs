//! Infinite two-sublattice PEPS: neighbourhood tensor update, corner
//! transfer matrix environments and ramp evolution.
//!
//! Site tensors have legs `[p, t, r, b, l]` (physical, then the virtual legs
//! clockwise from the top). `A` sits on the sublattice with field sign
//! `h = +1` and has every virtual leg `Out`; `B` has every virtual leg `In`,
//! so `A.r` contracts with `B.l`, `A.b` with `B.t` and so on.

pub mod ctm;
pub mod evolve;
pub mod ntu;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use symtensor::{contract, ChargeLeg, Direction, SymTensor, C64};

use crate::error::{Error, Result};
use crate::model::phys_leg;

pub use ctm::{correlator, ctmrg, CtmEnv, CtmOpts};
pub use evolve::{evolve_ramp, IpepsRun, RampOpts, TrajectoryStatus, TruncationLedger};
pub use ntu::{apply_gate_ntu, build_ntu_metric, NtuCluster, NtuOpts};

/// Leg positions in a site tensor.
pub const P: usize = 0;
pub const T: usize = 1;
pub const R: usize = 2;
pub const B: usize = 3;
pub const L: usize = 4;

/// Sublattice label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sub {
    A,
    B,
}

impl Sub {
    pub fn other(self) -> Self {
        match self {
            Sub::A => Sub::B,
            Sub::B => Sub::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sub::A => 0,
            Sub::B => 1,
        }
    }

    /// Staggered field sign of the sublattice.
    pub fn field_sign(self) -> i32 {
        match self {
            Sub::A => 1,
            Sub::B => -1,
        }
    }
}

/// The four inequivalent nearest-neighbour bonds, in Trotter group order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondKind {
    /// `A` left of `B`.
    HorizontalAB,
    /// `B` left of `A`.
    HorizontalBA,
    /// `A` above `B`.
    VerticalAB,
    /// `B` above `A`.
    VerticalBA,
}

impl BondKind {
    pub const ALL: [BondKind; 4] = [
        BondKind::HorizontalAB,
        BondKind::HorizontalBA,
        BondKind::VerticalAB,
        BondKind::VerticalBA,
    ];

    pub fn from_group(g: usize) -> Self {
        Self::ALL[g]
    }

    /// Sublattice of the left site once the bond is rotated to horizontal.
    pub fn left(self) -> Sub {
        match self {
            BondKind::HorizontalAB | BondKind::VerticalAB => Sub::A,
            BondKind::HorizontalBA | BondKind::VerticalBA => Sub::B,
        }
    }

    /// Whether the bond is brought to horizontal by one counter-clockwise
    /// quarter turn.
    pub fn is_vertical(self) -> bool {
        matches!(self, BondKind::VerticalAB | BondKind::VerticalBA)
    }
}

/// Leg permutation of a counter-clockwise quarter turn: the new top leg is
/// the old right leg.
pub const ROTATE_CCW: [usize; 5] = [0, 2, 3, 4, 1];
/// Inverse of [`ROTATE_CCW`].
pub const ROTATE_CW: [usize; 5] = [0, 4, 1, 2, 3];

#[derive(Clone, Debug)]
pub struct IpepsState {
    pub a: SymTensor,
    pub b: SymTensor,
}

impl IpepsState {
    /// Néel product state (`D = 1`): every spin anti-aligned with its field.
    pub fn neel() -> Self {
        let site = |sub: Sub| {
            let q = -sub.field_sign();
            let dir = match sub {
                Sub::A => Direction::Out,
                Sub::B => Direction::In,
            };
            let v = ChargeLeg::trivial(dir);
            let legs = vec![phys_leg(), v.clone(), v.clone(), v.clone(), v];
            let mut t = SymTensor::zeros(legs, q);
            t.insert_block(vec![q, 0, 0, 0, 0], vec![C64::new(1.0, 0.0)]).expect("product block");
            t
        };
        Self {
            a: site(Sub::A),
            b: site(Sub::B),
        }
    }

    pub fn tensor(&self, s: Sub) -> &SymTensor {
        match s {
            Sub::A => &self.a,
            Sub::B => &self.b,
        }
    }

    pub fn tensor_mut(&mut self, s: Sub) -> &mut SymTensor {
        match s {
            Sub::A => &mut self.a,
            Sub::B => &mut self.b,
        }
    }

    /// Largest virtual dimension.
    pub fn max_bond(&self) -> usize {
        (1..5).map(|i| self.a.leg(i).dim()).max().unwrap_or(1)
    }

    /// Dimensions of the bonds `[A.t, A.r, A.b, A.l]`.
    pub fn bond_dims(&self) -> [usize; 4] {
        [self.a.leg(T).dim(), self.a.leg(R).dim(), self.a.leg(B).dim(), self.a.leg(L).dim()]
    }

    /// The state seen after a counter-clockwise quarter turn of the lattice.
    pub fn rotated_ccw(&self) -> Self {
        Self {
            a: self.a.permute(&ROTATE_CCW),
            b: self.b.permute(&ROTATE_CCW),
        }
    }

    pub fn rotated_cw(&self) -> Self {
        Self {
            a: self.a.permute(&ROTATE_CW),
            b: self.b.permute(&ROTATE_CW),
        }
    }

    /// Applies a single-site operator `[p out, p in]` to one sublattice.
    pub fn apply_site(&mut self, s: Sub, op: &SymTensor) -> Result<()> {
        let t = self.tensor(s);
        let new = contract(op, t, &[(1, P)])?;
        *self.tensor_mut(s) = new;
        Ok(())
    }

    /// Rescales both tensors to unit largest entry.
    pub fn normalize(&mut self) {
        for s in [Sub::A, Sub::B] {
            let m = self.tensor(s).max_abs();
            if m > 0.0 {
                let t = self.tensor(s).scale_real(1.0 / m);
                *self.tensor_mut(s) = t;
            }
        }
    }

    /// Checks the bond pairing between the two tensors.
    pub fn check(&self) -> Result<()> {
        let pairs = [(T, B), (R, L), (B, T), (L, R)];
        for (ia, ib) in pairs {
            if !self.a.leg(ia).pairs_with(self.b.leg(ib)) {
                return Err(Error::Numerical(format!("A leg {ia} does not pair with B leg {ib}")));
            }
        }
        Ok(())
    }
}

/// Writes the two site tensors to `dir/a.symt` and `dir/b.symt`.
pub fn save_state(dir: &Path, state: &IpepsState) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, t) in [("a", &state.a), ("b", &state.b)] {
        let mut w = BufWriter::new(File::create(dir.join(format!("{name}.symt")))?);
        symtensor::io::write_tensor(t, &mut w)?;
    }
    Ok(())
}

pub fn load_state(dir: &Path) -> Result<IpepsState> {
    let read = |name: &str| -> Result<SymTensor> {
        let mut r = BufReader::new(File::open(dir.join(format!("{name}.symt")))?);
        Ok(symtensor::io::read_tensor(&mut r)?)
    };
    let state = IpepsState {
        a: read("a")?,
        b: read("b")?,
    };
    state.check()?;
    Ok(state)
}
