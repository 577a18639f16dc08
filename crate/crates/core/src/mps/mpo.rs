//! Matrix-product operator for `H(s)` along the snake.
//!
//! The operator is a finite-state machine. Channel `Start` has not yet
//! placed any operator, `End` has completed a term, and channel `(i, ±)`
//! carries a σ^± placed at chain site `i` whose σ^∓ partner lies further
//! right. Channel charges are the magnetization change already applied:
//! 0 for `Start`/`End`, ±2 for the open channels.

use symtensor::{ChargeLeg, Direction, SymTensor, C64};

use super::snake::SnakeMap;
use crate::model::phys_leg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Channel {
    Start,
    End,
    /// Operator placed at chain site `.0`; `.1` is `true` for σ^+.
    Open(usize, bool),
}

impl Channel {
    fn charge(self) -> i32 {
        match self {
            Channel::Start | Channel::End => 0,
            Channel::Open(_, true) => 2,
            Channel::Open(_, false) => -2,
        }
    }
}

/// Channels of the bond right of chain site `k` (`k = -1` for the left edge),
/// ordered by charge and then by role, as laid out on the leg.
fn bond_channels(n: usize, partners: &[Vec<usize>], k: isize) -> Vec<Channel> {
    let mut ch = Vec::new();
    if k < 0 {
        ch.push(Channel::Start);
    } else if k as usize == n - 1 {
        ch.push(Channel::End);
    } else {
        ch.push(Channel::Start);
        ch.push(Channel::End);
        for i in 0..=(k as usize) {
            if partners[i].iter().any(|&j| j > k as usize) {
                ch.push(Channel::Open(i, true));
                ch.push(Channel::Open(i, false));
            }
        }
    }
    ch.sort_by_key(|c| (c.charge(), *c));
    ch
}

fn channel_leg(ch: &[Channel], dir: Direction) -> ChargeLeg {
    ChargeLeg::from_unsorted(dir, ch.iter().map(|c| (c.charge(), 1))).expect("valid channels")
}

/// 2×2 single-site operators indexed `[out][in]` in the basis `↓, ↑`.
fn op_identity() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}

fn op_sz() -> [[f64; 2]; 2] {
    [[-1.0, 0.0], [0.0, 1.0]]
}

fn op_sp() -> [[f64; 2]; 2] {
    [[0.0, 0.0], [1.0, 0.0]]
}

fn op_sm() -> [[f64; 2]; 2] {
    [[0.0, 1.0], [0.0, 0.0]]
}

/// MPO tensors with legs `[left Out, phys out Out, phys in In, right In]`.
#[derive(Clone, Debug)]
pub struct Mpo {
    pub tensors: Vec<SymTensor>,
}

impl Mpo {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Largest virtual dimension.
    pub fn bond_dim(&self) -> usize {
        self.tensors.iter().map(|w| w.leg(3).dim()).max().unwrap_or(1)
    }

    /// Left boundary leg (to be matched by the left environment).
    pub fn left_leg(&self) -> &ChargeLeg {
        self.tensors[0].leg(0)
    }

    pub fn right_leg(&self) -> &ChargeLeg {
        self.tensors[self.len() - 1].leg(3)
    }
}

/// `H = (J/2) Σ_<ij>(XX + YY) + (G/2) Σ_j h_j Z_j` on the snake.
pub fn build_mpo(snake: &SnakeMap, j: f64, g: f64) -> Mpo {
    let n = snake.len();
    let mut partners = vec![Vec::new(); n];
    for (a, b) in snake.chain_bonds() {
        partners[a].push(b);
    }
    let p = phys_leg();
    let mut tensors = Vec::with_capacity(n);
    for k in 0..n {
        let left = bond_channels(n, &partners, k as isize - 1);
        let right = bond_channels(n, &partners, k as isize);
        let h = snake.stagger(k) as f64;
        let lookup = |ch: &[Channel], c: Channel| ch.iter().position(|&x| x == c);
        let mut entries: Vec<(usize, usize, [[f64; 2]; 2], f64)> = Vec::new();
        let mut add = |l: Channel, r: Channel, op: [[f64; 2]; 2], coef: f64| {
            if let (Some(a), Some(b)) = (lookup(&left, l), lookup(&right, r)) {
                entries.push((a, b, op, coef));
            }
        };
        add(Channel::Start, Channel::Start, op_identity(), 1.0);
        add(Channel::End, Channel::End, op_identity(), 1.0);
        add(Channel::Start, Channel::End, op_sz(), 0.5 * g * h);
        // open new terms
        add(Channel::Start, Channel::Open(k, true), op_sp(), 1.0);
        add(Channel::Start, Channel::Open(k, false), op_sm(), 1.0);
        for i in 0..k {
            for plus in [true, false] {
                let c = Channel::Open(i, plus);
                // carry through
                add(c, c, op_identity(), 1.0);
                // close: J (σ+_i σ-_k + σ-_i σ+_k)
                if partners[i].contains(&k) {
                    add(c, Channel::End, if plus { op_sm() } else { op_sp() }, j);
                }
            }
        }
        let lleg = channel_leg(&left, Direction::Out);
        let rleg = channel_leg(&right, Direction::In);
        let legs = vec![lleg, p.clone(), p.dual(), rleg];
        let mut w = SymTensor::from_fn(legs, 0, |idx| {
            let mut v = 0.0;
            for &(a, b, op, coef) in &entries {
                if a == idx[0] && b == idx[3] {
                    v += coef * op[idx[1]][idx[2]];
                }
            }
            C64::new(v, 0.0)
        });
        w = w.pruned();
        tensors.push(w);
    }
    Mpo { tensors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    #[test]
    fn channels_sorted_by_charge_match_leg_layout() {
        let snake = SnakeMap::new(Lattice::new(3, 3));
        let mpo = build_mpo(&snake, 0.5, 0.7);
        for w in &mpo.tensors {
            for k in w.keys() {
                assert!(w.satisfies_rule(k));
            }
        }
        assert_eq!(mpo.left_leg().dim(), 1);
        assert_eq!(mpo.right_leg().dim(), 1);
        // structure does not depend on the couplings
        let other = build_mpo(&snake, 0.9, 0.1);
        assert_eq!(other.bond_dim(), mpo.bond_dim());
    }
}
