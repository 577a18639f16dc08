use rand::SeedableRng;
use symtensor::{contract, lq, qr, truncated_svd, ChargeLeg, Direction, SymTensor, Truncation, C64};

use super::snake::SnakeMap;
use crate::error::{Error, Result};
use crate::exact::{SectorBasis, StateVector};
use crate::model::phys_leg;

/// Finite MPS with tensors `[left Out, phys Out, right In]` of charge 0. The
/// charge on a bond is the magnetization of everything to its left; the right
/// edge leg carries the total magnetization.
#[derive(Clone, Debug)]
pub struct Mps {
    pub tensors: Vec<SymTensor>,
    /// Orthogonality centre: tensors left of it are left-isometric, tensors
    /// right of it right-isometric.
    pub center: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

impl Mps {
    /// Product state with the given σ^z value (±1) on each chain site.
    pub fn product(spins: &[i32]) -> Self {
        let p = phys_leg();
        let mut q = 0;
        let mut tensors = Vec::with_capacity(spins.len());
        for &sz in spins {
            assert!(sz == 1 || sz == -1);
            let l = ChargeLeg::single(Direction::Out, q);
            let r = ChargeLeg::single(Direction::In, q + sz);
            let mut t = SymTensor::zeros(vec![l, p.clone(), r], 0);
            t.insert_block(vec![q, sz, q + sz], vec![C64::new(1.0, 0.0)]).expect("product block");
            tensors.push(t);
            q += sz;
        }
        Self { tensors, center: 0 }
    }

    /// Néel state σ^z = -h on every site.
    pub fn neel(snake: &SnakeMap) -> Self {
        let spins: Vec<i32> = (0..snake.len()).map(|c| -snake.stagger(c)).collect();
        Self::product(&spins)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn magnetization(&self) -> i32 {
        self.tensors[self.len() - 1].leg(2).charges().next().expect("edge charge")
    }

    /// Dimension of the bond right of site `k`.
    pub fn bond_dim(&self, k: usize) -> usize {
        self.tensors[k].leg(2).dim()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        (0..self.len() - 1).map(|k| self.bond_dim(k)).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Largest useful dimension of every bond given the charge sector.
    pub fn full_bond_dims(&self) -> Vec<usize> {
        let n = self.len();
        let m = self.magnetization();
        (0..n - 1)
            .map(|k| {
                let nl = k + 1;
                let nr = n - nl;
                let mut total: u128 = 0;
                for up_l in 0..=nl {
                    let ml = 2 * up_l as i32 - nl as i32;
                    let mr = m - ml;
                    if (mr + nr as i32) % 2 != 0 || mr.unsigned_abs() as usize > nr {
                        continue;
                    }
                    let up_r = ((mr + nr as i32) / 2) as usize;
                    total += binomial(nl, up_l).min(binomial(nr, up_r));
                }
                total.min(usize::MAX as u128) as usize
            })
            .collect()
    }

    /// Moves the orthogonality centre one site to the right with a QR step.
    pub fn shift_right(&mut self) -> Result<()> {
        let k = self.center;
        let (q, r) = qr(&self.tensors[k], 2)?;
        self.tensors[k] = q;
        self.tensors[k + 1] = contract(&r, &self.tensors[k + 1], &[(1, 0)])?;
        self.center = k + 1;
        Ok(())
    }

    /// Moves the orthogonality centre one site to the left with an LQ step.
    pub fn shift_left(&mut self) -> Result<()> {
        let k = self.center;
        let (l, q) = lq(&self.tensors[k], 1)?;
        self.tensors[k] = q;
        self.tensors[k - 1] = contract(&self.tensors[k - 1], &l, &[(2, 0)])?;
        self.center = k - 1;
        Ok(())
    }

    /// Brings the centre to `k`, sweeping in from the far end so that every
    /// other tensor is an isometry regardless of the starting gauge.
    pub fn canonicalize(&mut self, k: usize) -> Result<()> {
        self.center = self.len() - 1;
        while self.center > 0 {
            self.shift_left()?;
        }
        while self.center < k {
            self.shift_right()?;
        }
        Ok(())
    }

    pub fn move_center(&mut self, k: usize) -> Result<()> {
        while self.center < k {
            self.shift_right()?;
        }
        while self.center > k {
            self.shift_left()?;
        }
        Ok(())
    }

    /// Norm from the centre tensor (valid in canonical form).
    pub fn center_norm(&self) -> f64 {
        self.tensors[self.center].norm()
    }

    pub fn normalize(&mut self) {
        let n = self.center_norm();
        if n > 0.0 {
            let c = self.center;
            self.tensors[c] = self.tensors[c].scale_real(1.0 / n);
        }
    }

    /// Grows every bond to `min(max_dim, full)` with zero-weight directions,
    /// leaving the state unchanged. The centre ends at site 0.
    pub fn pad(&mut self, max_dim: usize) -> Result<()> {
        let n = self.len();
        if n < 2 {
            return Ok(());
        }
        self.canonicalize(0)?;
        let trunc = Truncation::keep_all(Some(max_dim));
        for _ in 0..4 {
            let before = self.bond_dims();
            for k in 0..n - 1 {
                let theta = contract(&self.tensors[k], &self.tensors[k + 1], &[(2, 0)])?.with_all_blocks();
                let svd = truncated_svd(&theta, 2, trunc)?;
                self.tensors[k] = svd.u.clone();
                self.tensors[k + 1] = svd.sv();
            }
            for k in (0..n - 1).rev() {
                let theta = contract(&self.tensors[k], &self.tensors[k + 1], &[(2, 0)])?.with_all_blocks();
                let svd = truncated_svd(&theta, 2, trunc)?;
                self.tensors[k] = svd.us();
                self.tensors[k + 1] = svd.v.clone();
            }
            self.center = 0;
            if self.bond_dims() == before {
                break;
            }
        }
        Ok(())
    }

    /// Random state with the bond structure of the padded Néel state, in
    /// canonical form with centre 0 and unit norm.
    pub fn random_padded(snake: &SnakeMap, max_dim: usize, seed: u64) -> Result<Self> {
        let mut mps = Self::neel(snake);
        mps.pad(max_dim)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for t in mps.tensors.iter_mut() {
            *t = SymTensor::random_real(t.legs().to_vec(), 0, &mut rng);
        }
        mps.canonicalize(0)?;
        mps.normalize();
        Ok(mps)
    }

    /// Amplitudes on an exact sector basis (small lattices only).
    pub fn to_state_vector(&self, snake: &SnakeMap, basis: std::sync::Arc<SectorBasis>) -> Result<StateVector> {
        if basis.magnetization() != self.magnetization() {
            return Err(Error::Config("sector mismatch between MPS and basis".into()));
        }
        let mut amp = Vec::with_capacity(basis.dim());
        for &cfg in basis.configs() {
            // row vector over the current bond sector
            let mut q = 0;
            let mut vec = vec![C64::new(1.0, 0.0)];
            let mut zero = false;
            for (c, t) in self.tensors.iter().enumerate() {
                let site = snake.site(c);
                let sz = if cfg >> site & 1 == 1 { 1 } else { -1 };
                let qr = q + sz;
                let Some(b) = t.block(&[q, sz, qr]) else {
                    zero = true;
                    break;
                };
                let dl = t.leg(0).degeneracy(q).unwrap();
                let dr = t.leg(2).degeneracy(qr).unwrap();
                let mut next = vec![C64::new(0.0, 0.0); dr];
                for (i, v) in vec.iter().enumerate().take(dl) {
                    for (jj, x) in next.iter_mut().enumerate() {
                        *x += v * b[i * dr + jj];
                    }
                }
                vec = next;
                q = qr;
            }
            amp.push(if zero { C64::new(0.0, 0.0) } else { vec[0] });
        }
        Ok(StateVector { basis, amp })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{neel_state, SectorBasis};
    use crate::lattice::Lattice;

    #[test]
    fn neel_matches_exact_neel() {
        let lat = Lattice::new(2, 3);
        let snake = SnakeMap::new(lat);
        let mps = Mps::neel(&snake);
        assert_eq!(mps.magnetization(), 0);
        let exact = neel_state(lat).unwrap();
        let v = mps.to_state_vector(&snake, exact.basis.clone()).unwrap();
        assert!((v.fidelity(&exact) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn padding_reaches_full_rank_and_keeps_state() {
        let lat = Lattice::new(2, 4);
        let snake = SnakeMap::new(lat);
        let mut mps = Mps::neel(&snake);
        mps.pad(64).unwrap();
        assert_eq!(mps.bond_dims(), mps.full_bond_dims());
        let basis = SectorBasis::new(lat, 0).unwrap();
        let v = mps.to_state_vector(&snake, basis).unwrap();
        let exact = neel_state(lat).unwrap();
        assert!((v.overlap(&exact).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_moves_preserve_state() {
        let lat = Lattice::new(2, 3);
        let snake = SnakeMap::new(lat);
        let mps = Mps::random_padded(&snake, 4, 3).unwrap();
        let basis = SectorBasis::new(lat, 0).unwrap();
        let v0 = mps.to_state_vector(&snake, basis.clone()).unwrap();
        assert!((v0.norm() - 1.0).abs() < 1e-12);
        let mut m2 = mps.clone();
        m2.move_center(4).unwrap();
        assert!((m2.center_norm() - 1.0).abs() < 1e-12);
        let v1 = m2.to_state_vector(&snake, basis).unwrap();
        assert!((v0.overlap(&v1).norm() - 1.0).abs() < 1e-12);
    }
}
