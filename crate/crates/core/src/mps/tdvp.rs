//! Real-time TDVP with symmetric (second-order) sweeps.
//!
//! Bonds start padded to `min(D, full)` with zero-weight directions so the
//! two-site integrator can populate them. Once every bond carries that many
//! significant singular values the projector error of the one-site scheme is
//! no larger than that of the two-site one, and the cheaper one-site sweep
//! takes over.

use symtensor::{contract, qr, lq, truncated_svd, Truncation};

use super::env::{apply_one, apply_two, apply_zero, extend_left, extend_right, Environments};
use super::mpo::Mpo;
use super::state::Mps;
use crate::error::Result;
use crate::krylov::expm_krylov;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    TwoSite,
    OneSite,
}

#[derive(Clone, Copy, Debug)]
pub struct TdvpOpts {
    pub max_bond: usize,
    /// Relative singular-value cutoff for two-site truncation.
    pub cutoff: f64,
    /// A bond counts as saturated when this many values exceed
    /// `saturation_floor · s_max`.
    pub saturation_floor: f64,
    pub krylov_tol: f64,
    pub max_krylov: usize,
    /// Never switch to the one-site scheme.
    pub two_site_only: bool,
}

impl TdvpOpts {
    pub fn new(max_bond: usize) -> Self {
        Self {
            max_bond,
            cutoff: 0.0,
            saturation_floor: 1e-12,
            krylov_tol: 1e-12,
            max_krylov: 30,
            two_site_only: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct StepStats {
    /// Largest discarded weight `‖θ - θ_trunc‖ / ‖θ‖` over the step.
    pub max_trunc_err: f64,
    pub max_bond: usize,
}

/// TDVP integrator holding the state and its scheme.
pub struct Tdvp {
    pub mps: Mps,
    pub opts: TdvpOpts,
    pub scheme: Scheme,
    full: Vec<usize>,
}

impl Tdvp {
    pub fn new(mut mps: Mps, opts: TdvpOpts) -> Result<Self> {
        mps.pad(opts.max_bond)?;
        let full = mps.full_bond_dims();
        Ok(Self {
            mps,
            opts,
            scheme: Scheme::TwoSite,
            full,
        })
    }

    /// One symmetric step of length `dt` under the time-independent `mpo`.
    pub fn step(&mut self, mpo: &Mpo, dt: f64) -> Result<StepStats> {
        if self.mps.len() < 2 {
            let a = &self.mps.tensors[0];
            let envs = Environments::from_right(&self.mps, mpo)?;
            let (l, r, w) = (envs.l(0), envs.r(0), &mpo.tensors[0]);
            self.mps.tensors[0] =
                expm_krylov(|x| apply_one(l, w, r, x), a, dt, self.opts.krylov_tol, self.opts.max_krylov);
            return Ok(StepStats {
                max_trunc_err: 0.0,
                max_bond: 1,
            });
        }
        self.mps.move_center(0)?;
        let stats = match self.scheme {
            Scheme::TwoSite => self.sweep_two(mpo, dt)?,
            Scheme::OneSite => self.sweep_one(mpo, dt)?,
        };
        Ok(stats)
    }

    fn krylov(&self, apply: impl FnMut(&symtensor::SymTensor) -> symtensor::SymTensor, v: &symtensor::SymTensor, dt: f64) -> symtensor::SymTensor {
        expm_krylov(apply, v, dt, self.opts.krylov_tol, self.opts.max_krylov)
    }

    fn sweep_two(&mut self, mpo: &Mpo, dt: f64) -> Result<StepStats> {
        let n = self.mps.len();
        let half = 0.5 * dt;
        let trunc = Truncation {
            max_dim: Some(self.opts.max_bond),
            cutoff: self.opts.cutoff,
            multiplet_tol: 0.0,
        };
        let mut envs = Environments::from_right(&self.mps, mpo)?;
        let mut stats = StepStats::default();
        let mut saturated = true;
        for k in 0..n - 1 {
            let theta = contract(&self.mps.tensors[k], &self.mps.tensors[k + 1], &[(2, 0)])?.with_all_blocks();
            let (l, r) = (envs.l(k), envs.r(k + 1));
            let (w1, w2) = (&mpo.tensors[k], &mpo.tensors[k + 1]);
            let theta = self.krylov(|x| apply_two(l, w1, w2, r, x), &theta, half);
            let svd = truncated_svd(&theta, 2, trunc)?;
            stats.max_trunc_err = stats.max_trunc_err.max(svd.rel_err);
            self.mps.tensors[k] = svd.u.clone();
            self.mps.tensors[k + 1] = renormalized(svd.sv(), svd.rel_err);
            envs.left[k + 1] = Some(extend_left(envs.l(k), &self.mps.tensors[k], &mpo.tensors[k])?);
            if k + 1 < n - 1 {
                let (l, r, w) = (envs.l(k + 1), envs.r(k + 1), &mpo.tensors[k + 1]);
                self.mps.tensors[k + 1] = self.krylov(|x| apply_one(l, w, r, x), &self.mps.tensors[k + 1], -half);
            }
        }
        for k in (0..n - 1).rev() {
            let theta = contract(&self.mps.tensors[k], &self.mps.tensors[k + 1], &[(2, 0)])?.with_all_blocks();
            let (l, r) = (envs.l(k), envs.r(k + 1));
            let (w1, w2) = (&mpo.tensors[k], &mpo.tensors[k + 1]);
            let theta = self.krylov(|x| apply_two(l, w1, w2, r, x), &theta, half);
            let svd = truncated_svd(&theta, 2, trunc)?;
            stats.max_trunc_err = stats.max_trunc_err.max(svd.rel_err);
            saturated &= self.is_saturated(k, &svd.spectrum());
            self.mps.tensors[k] = renormalized(svd.us(), svd.rel_err);
            self.mps.tensors[k + 1] = svd.v.clone();
            envs.right[k] = Some(extend_right(envs.r(k + 1), &self.mps.tensors[k + 1], &mpo.tensors[k + 1])?);
            if k > 0 {
                let (l, r, w) = (envs.l(k), envs.r(k), &mpo.tensors[k]);
                self.mps.tensors[k] = self.krylov(|x| apply_one(l, w, r, x), &self.mps.tensors[k], -half);
            }
        }
        self.mps.center = 0;
        if saturated && !self.opts.two_site_only {
            self.scheme = Scheme::OneSite;
        }
        stats.max_bond = self.mps.max_bond();
        Ok(stats)
    }

    fn is_saturated(&self, bond: usize, spectrum: &[f64]) -> bool {
        let target = self.opts.max_bond.min(self.full[bond]);
        let smax = spectrum.iter().cloned().fold(0.0, f64::max);
        let count = spectrum.iter().filter(|&&s| s > self.opts.saturation_floor * smax).count();
        count >= target
    }

    fn sweep_one(&mut self, mpo: &Mpo, dt: f64) -> Result<StepStats> {
        let n = self.mps.len();
        let half = 0.5 * dt;
        let mut envs = Environments::from_right(&self.mps, mpo)?;
        for k in 0..n {
            let (l, r, w) = (envs.l(k), envs.r(k), &mpo.tensors[k]);
            self.mps.tensors[k] = self.krylov(|x| apply_one(l, w, r, x), &self.mps.tensors[k], half);
            if k + 1 < n {
                let (q, c) = qr(&self.mps.tensors[k], 2)?;
                self.mps.tensors[k] = q;
                envs.left[k + 1] = Some(extend_left(envs.l(k), &self.mps.tensors[k], &mpo.tensors[k])?);
                let (l, r) = (envs.l(k + 1), envs.r(k));
                let c = self.krylov(|x| apply_zero(l, r, x), &c, -half);
                self.mps.tensors[k + 1] = contract(&c, &self.mps.tensors[k + 1], &[(1, 0)])?;
            }
        }
        for k in (0..n).rev() {
            let (l, r, w) = (envs.l(k), envs.r(k), &mpo.tensors[k]);
            self.mps.tensors[k] = self.krylov(|x| apply_one(l, w, r, x), &self.mps.tensors[k], half);
            if k > 0 {
                let (c, q) = lq(&self.mps.tensors[k], 1)?;
                self.mps.tensors[k] = q;
                envs.right[k - 1] = Some(extend_right(envs.r(k), &self.mps.tensors[k], &mpo.tensors[k])?);
                let (l, r) = (envs.l(k), envs.r(k - 1));
                let c = self.krylov(|x| apply_zero(l, r, x), &c, -half);
                self.mps.tensors[k - 1] = contract(&self.mps.tensors[k - 1], &c, &[(2, 0)])?;
            }
        }
        self.mps.center = 0;
        Ok(StepStats {
            max_trunc_err: 0.0,
            max_bond: self.mps.max_bond(),
        })
    }
}

/// Restores unit norm after discarding a relative weight `rel_err`.
fn renormalized(t: symtensor::SymTensor, rel_err: f64) -> symtensor::SymTensor {
    if rel_err > 0.0 {
        let n = t.norm();
        if n > 0.0 {
            return t.scale_real(1.0 / n);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{neel_state, step_plan, Method, SectorBasis};
    use crate::lattice::Lattice;
    use crate::model::frozen_plan;
    use crate::mps::env::expectation;
    use crate::mps::mpo::build_mpo;
    use crate::mps::snake::SnakeMap;

    fn run(lat: Lattice, scheme_switch: bool) {
        let snake = SnakeMap::new(lat);
        let (j, g, dt) = (1.0, 1.5, 0.05);
        let mpo = build_mpo(&snake, j, g);
        let mut opts = TdvpOpts::new(64);
        opts.two_site_only = !scheme_switch;
        let mut tdvp = Tdvp::new(Mps::neel(&snake), opts).unwrap();
        let mut psi = neel_state(lat).unwrap();
        let e0 = expectation(&tdvp.mps, &mpo).unwrap().re;
        let plan = frozen_plan(psi.basis.n_groups(), j, g, dt);
        for _ in 0..20 {
            tdvp.step(&mpo, dt).unwrap();
            step_plan(&mut psi, &plan, Method::ExactPropagator);
        }
        let basis = SectorBasis::new(lat, 0).unwrap();
        let v = tdvp.mps.to_state_vector(&snake, basis).unwrap();
        assert!((v.fidelity(&psi) - 1.0).abs() < 1e-9, "fidelity {}", v.fidelity(&psi));
        let e1 = expectation(&tdvp.mps, &mpo).unwrap().re;
        assert!((e1 - e0).abs() < 1e-9);
        if scheme_switch {
            assert_eq!(tdvp.scheme, Scheme::OneSite);
        }
    }

    #[test]
    fn full_rank_two_site_is_exact() {
        run(Lattice::new(2, 3), false);
    }

    #[test]
    fn switches_to_one_site_and_stays_exact() {
        run(Lattice::new(2, 2), true);
    }
}
