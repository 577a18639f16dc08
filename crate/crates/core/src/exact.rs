//! State vectors restricted to one magnetization sector.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use symtensor::C64;

use crate::error::{Error, Result};
use crate::krylov::{expm_krylov, lanczos_ground, KrylovVec, LanczosOpts};
use crate::lattice::Lattice;
use crate::model::{Layer, ModelParams, RampSchedule, TrotterPlan};

/// Largest lattice the exact backend accepts.
pub const MAX_SPINS: usize = 16;

/// Configurations of one magnetization sector, in increasing bit-string order.
/// Bit `i` set means site `i` has σ^z = +1.
#[derive(Debug)]
pub struct SectorBasis {
    lattice: Lattice,
    magnetization: i32,
    configs: Vec<u64>,
    index: HashMap<u64, usize>,
    /// `Σ_j h_j σ^z_j` for each configuration.
    stagger_sum: Vec<f64>,
    /// Per bond group, per bond: pairs `(i, k)` where `i` has the bond in
    /// state ↑↓ (lower site up) and `k` is `i` with both spins flipped.
    group_pairs: Vec<Vec<Vec<(usize, usize)>>>,
}

impl SectorBasis {
    pub fn new(lattice: Lattice, magnetization: i32) -> Result<Arc<Self>> {
        let n = lattice.n_sites();
        if n > MAX_SPINS {
            return Err(Error::Capacity {
                requested: format!("{n} spins ({}x{})", lattice.rows, lattice.cols),
                limit: format!("{MAX_SPINS} spins"),
            });
        }
        if (magnetization + n as i32) % 2 != 0 || magnetization.unsigned_abs() as usize > n {
            return Err(Error::Config(format!("no sector with magnetization {magnetization} on {n} spins")));
        }
        let n_up = ((magnetization + n as i32) / 2) as u32;
        let configs: Vec<u64> = (0u64..(1u64 << n)).filter(|c| c.count_ones() == n_up).collect();
        let index = configs.iter().enumerate().map(|(i, &c)| (c, i)).collect::<HashMap<_, _>>();
        let stagger_sum = configs
            .iter()
            .map(|&c| {
                (0..n)
                    .map(|j| lattice.stagger(j) as f64 * if c >> j & 1 == 1 { 1.0 } else { -1.0 })
                    .sum()
            })
            .collect();
        let group_pairs = lattice
            .bond_groups()
            .iter()
            .map(|g| {
                g.iter()
                    .map(|b| {
                        configs
                            .iter()
                            .enumerate()
                            .filter(|(_, &c)| (c >> b.a & 1) == 1 && (c >> b.b & 1) == 0)
                            .map(|(i, &c)| (i, index[&(c ^ (1 << b.a) ^ (1 << b.b))]))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Arc::new(Self {
            lattice,
            magnetization,
            configs,
            index,
            stagger_sum,
            group_pairs,
        }))
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn magnetization(&self) -> i32 {
        self.magnetization
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn position(&self, config: u64) -> Option<usize> {
        self.index.get(&config).copied()
    }

    pub fn n_groups(&self) -> usize {
        self.group_pairs.len()
    }

    /// `H ψ` at couplings `(J, G)`.
    pub fn apply_h(&self, j: f64, g: f64, psi: &[C64]) -> Vec<C64> {
        let mut out: Vec<C64> = psi
            .iter()
            .zip(&self.stagger_sum)
            .map(|(a, d)| a * (0.5 * g * d))
            .collect();
        if j != 0.0 {
            for group in &self.group_pairs {
                for bond in group {
                    for &(i, k) in bond {
                        out[i] += psi[k] * j;
                        out[k] += psi[i] * j;
                    }
                }
            }
        }
        out
    }

    /// Applies one layer of a Trotter step in place.
    pub fn apply_layer(&self, plan: &TrotterPlan, layer: Layer, psi: &mut [C64]) {
        match layer {
            Layer::Field(dt) => {
                for (a, d) in psi.iter_mut().zip(&self.stagger_sum) {
                    *a *= C64::from_polar(1.0, -0.5 * plan.g * d * dt);
                }
            }
            Layer::Bonds(group, dt) => {
                let c = C64::new((plan.j * dt).cos(), 0.0);
                let s = C64::new(0.0, -(plan.j * dt).sin());
                for bond in &self.group_pairs[group] {
                    for &(i, k) in bond {
                        let (a, b) = (psi[i], psi[k]);
                        psi[i] = c * a + s * b;
                        psi[k] = s * a + c * b;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    pub basis: Arc<SectorBasis>,
    pub amp: Vec<C64>,
}

impl StateVector {
    pub fn basis_state(basis: Arc<SectorBasis>, config: u64) -> Result<Self> {
        let i = basis
            .position(config)
            .ok_or_else(|| Error::Config(format!("configuration {config:#b} not in sector")))?;
        let mut amp = vec![C64::new(0.0, 0.0); basis.dim()];
        amp[i] = C64::new(1.0, 0.0);
        Ok(Self { basis, amp })
    }

    /// Deterministic random normalized state.
    pub fn random(basis: Arc<SectorBasis>, seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut amp: Vec<C64> = (0..basis.dim())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let n = amp.norm();
        amp.scale(C64::new(1.0 / n, 0.0));
        Self { basis, amp }
    }

    pub fn norm(&self) -> f64 {
        self.amp.norm()
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.amp.dot(&other.amp)
    }

    /// Energy `⟨H(s)⟩`.
    pub fn energy(&self, params: &ModelParams, s: f64) -> Result<f64> {
        let (j, g) = params.ramp_values(s)?;
        Ok(self.energy_jg(j, g))
    }

    pub fn energy_jg(&self, j: f64, g: f64) -> f64 {
        self.amp.dot(&self.basis.apply_h(j, g, &self.amp)).re
    }

    /// `⟨σ^z_i⟩`.
    pub fn sz(&self, i: usize) -> f64 {
        self.basis
            .configs()
            .iter()
            .zip(&self.amp)
            .map(|(&c, a)| a.norm_sqr() * if c >> i & 1 == 1 { 1.0 } else { -1.0 })
            .sum()
    }

    /// `⟨σ^x_i⟩`, which vanishes identically inside a sector.
    pub fn sx(&self, _i: usize) -> f64 {
        0.0
    }

    /// `⟨σ^y_i⟩`, which vanishes for the same reason as [`Self::sx`].
    pub fn sy(&self, _i: usize) -> f64 {
        0.0
    }

    /// `⟨σ^+_i σ^-_j⟩` for `i ≠ j`.
    pub fn sp_sm(&self, i: usize, j: usize) -> C64 {
        assert_ne!(i, j);
        let mut acc = C64::new(0.0, 0.0);
        for (k, &c) in self.basis.configs().iter().enumerate() {
            // σ^+_i σ^-_j |c⟩ is nonzero when j is up and i is down
            if c >> j & 1 == 1 && c >> i & 1 == 0 {
                let t = c ^ (1 << i) ^ (1 << j);
                let m = self.basis.position(t).expect("same sector");
                acc += self.amp[m].conj() * self.amp[k];
            }
        }
        acc
    }

    /// Connected staggered correlator
    /// `C = (-1)^R / 2 [⟨X_i X_j⟩ - ⟨X_i⟩⟨X_j⟩ + (X → Y)]` for sites at distance `r`.
    pub fn staggered_corr(&self, i: usize, j: usize, r: usize) -> f64 {
        let xx_yy_half = 2.0 * self.sp_sm(i, j).re;
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        sign * (xx_yy_half - 0.5 * (self.sx(i) * self.sx(j) + self.sy(i) * self.sy(j)))
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.overlap(other).norm_sqr()
    }
}

/// Néel configuration with every spin anti-aligned to its field: σ^z_j = -h_j.
pub fn neel_config(lattice: &Lattice) -> u64 {
    (0..lattice.n_sites())
        .filter(|&j| lattice.stagger(j) < 0)
        .fold(0u64, |c, j| c | (1 << j))
}

pub fn neel_magnetization(lattice: &Lattice) -> i32 {
    (0..lattice.n_sites()).map(|j| -lattice.stagger(j)).sum()
}

pub fn neel_state(lattice: Lattice) -> Result<StateVector> {
    let basis = SectorBasis::new(lattice, neel_magnetization(&lattice))?;
    StateVector::basis_state(basis, neel_config(&lattice))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Trotter,
    ExactPropagator,
}

/// Splits `[t0, t1]` into the fewest equal steps no longer than `dt`.
pub fn step_grid(t0: f64, t1: f64, dt: f64) -> (usize, f64) {
    let n = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    (n, (t1 - t0) / n as f64)
}

/// One step `[t, t + dt]`; couplings are frozen at the midpoint for both methods.
pub fn step(psi: &mut StateVector, sched: &RampSchedule, params: &ModelParams, t: f64, dt: f64, method: Method) -> Result<()> {
    let plan = crate::model::trotter_plan(psi.basis.n_groups(), sched, params, t, dt)?;
    step_plan(psi, &plan, method);
    Ok(())
}

pub fn step_plan(psi: &mut StateVector, plan: &TrotterPlan, method: Method) {
    match method {
        Method::Trotter => {
            for &layer in &plan.layers {
                psi.basis.apply_layer(plan, layer, &mut psi.amp);
            }
        }
        Method::ExactPropagator => {
            let basis = psi.basis.clone();
            psi.amp = expm_krylov(|v| basis.apply_h(plan.j, plan.g, v), &psi.amp, plan.dt, 1e-12, 40);
        }
    }
}

/// Evolves from `t0` to `t1`, calling `observe(t, ψ)` at `t0` and after every step.
pub fn evolve(
    psi: &StateVector,
    sched: &RampSchedule,
    params: &ModelParams,
    t0: f64,
    t1: f64,
    dt: f64,
    method: Method,
    mut observe: impl FnMut(f64, &StateVector),
) -> Result<StateVector> {
    let (n, h) = step_grid(t0, t1, dt);
    let mut psi = psi.clone();
    observe(t0, &psi);
    for k in 0..n {
        let t = t0 + k as f64 * h;
        step(&mut psi, sched, params, t, h, method)?;
        observe(t0 + (k + 1) as f64 * h, &psi);
    }
    Ok(psi)
}

/// The `k` lowest eigenpairs of `H(s)` in the Néel sector, by Lanczos with
/// deflation.
pub fn ground_state(s: f64, params: &ModelParams, lattice: Lattice, k: usize) -> Result<Vec<(f64, StateVector)>> {
    let basis = SectorBasis::new(lattice, neel_magnetization(&lattice))?;
    ground_state_in(&basis, s, params, k)
}

pub fn ground_state_in(basis: &Arc<SectorBasis>, s: f64, params: &ModelParams, k: usize) -> Result<Vec<(f64, StateVector)>> {
    let (j, g) = params.ramp_values(s)?;
    let k = k.min(basis.dim());
    let mut found: Vec<Vec<C64>> = Vec::new();
    let mut out = Vec::new();
    let opts = LanczosOpts {
        max_krylov: 80,
        max_restarts: 100,
        tol: 1e-10,
    };
    for n in 0..k {
        let v0 = StateVector::random(basis.clone(), 1000 + n as u64).amp;
        let (e, v, _) = lanczos_ground(|x| basis.apply_h(j, g, x), &v0, &found, opts)?;
        found.push(v.clone());
        out.push((
            e,
            StateVector {
                basis: basis.clone(),
                amp: v,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::frozen_plan;

    /// Dense sector Hamiltonian from spin operators on the full 2^N space.
    fn dense_h(basis: &SectorBasis, j: f64, g: f64) -> Vec<C64> {
        let lat = basis.lattice();
        let n = basis.dim();
        let mut h = vec![C64::new(0.0, 0.0); n * n];
        for (col, &c) in basis.configs().iter().enumerate() {
            for site in 0..lat.n_sites() {
                let z = if c >> site & 1 == 1 { 1.0 } else { -1.0 };
                h[col * n + col] += 0.5 * g * lat.stagger(site) as f64 * z;
            }
            for b in lat.bonds() {
                // (XX + YY)/2 flips antiparallel pairs with amplitude 1
                if (c >> b.a & 1) != (c >> b.b & 1) {
                    let row = basis.position(c ^ (1 << b.a) ^ (1 << b.b)).unwrap();
                    h[row * n + col] += C64::new(j, 0.0);
                }
            }
        }
        h
    }

    fn dense_lowest(h: &[C64], n: usize) -> Vec<f64> {
        let m = faer::Mat::<C64>::from_fn(n, n, |i, j| h[i * n + j]);
        let d = m.self_adjoint_eigen(faer::Side::Lower).unwrap();
        (0..n).map(|i| d.S().column_vector()[i].re).collect()
    }

    #[test]
    fn neel_is_field_eigenstate() {
        let lat = Lattice::new(2, 3);
        let p = ModelParams::default();
        let psi = neel_state(lat).unwrap();
        assert_eq!(psi.basis.magnetization(), 0);
        assert!((psi.energy(&p, 0.0).unwrap() + 6.0 * 1.5 / 2.0).abs() < 1e-12);
        let hpsi = psi.basis.apply_h(0.0, 1.5, &psi.amp);
        let e = -4.5;
        let res: f64 = hpsi.iter().zip(&psi.amp).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt();
        assert!(res < 1e-12);
        for j in 0..6 {
            assert_eq!(psi.sz(j), -(lat.stagger(j) as f64));
        }
        let gs = ground_state(0.0, &p, lat, 1).unwrap();
        assert!((gs[0].0 + 4.5).abs() < 1e-10);
        assert!((gs[0].1.fidelity(&psi) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ground_state_matches_dense() {
        let lat = Lattice::new(2, 2);
        let p = ModelParams::default();
        let basis = SectorBasis::new(lat, 0).unwrap();
        for &s in &[0.3, 1.0] {
            let (j, g) = p.ramp_values(s).unwrap();
            let dense = dense_lowest(&dense_h(&basis, j, g), basis.dim());
            let got = ground_state_in(&basis, s, &p, 2).unwrap();
            assert!((got[0].0 - dense[0]).abs() < 1e-9);
            assert!((got[1].0 - dense[1]).abs() < 1e-8);
            assert!(got[0].1.overlap(&got[1].1).norm() < 1e-8);
        }
    }

    #[test]
    fn sparse_h_matches_dense_h() {
        let lat = Lattice::new(2, 3);
        let basis = SectorBasis::new(lat, 0).unwrap();
        let h = dense_h(&basis, 0.7, 0.4);
        let psi = StateVector::random(basis.clone(), 5);
        let n = basis.dim();
        let want: Vec<C64> = (0..n).map(|i| (0..n).map(|k| h[i * n + k] * psi.amp[k]).sum()).collect();
        let got = basis.apply_h(0.7, 0.4, &psi.amp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn two_site_oscillation() {
        // 1x2 lattice: Néel |↓↑⟩ mixes with |↑↓⟩ at frequency set by sqrt(G² + J²)
        let lat = Lattice::new(1, 2);
        let psi = neel_state(lat).unwrap();
        let (j, g) = (0.8, 0.6);
        let plan = frozen_plan(1, j, g, 0.01);
        let mut phi = psi.clone();
        for _ in 0..150 {
            step_plan(&mut phi, &plan, Method::ExactPropagator);
        }
        let t: f64 = 1.5;
        // two-level system {|↓↑⟩, |↑↓⟩}: diag ±G (site 0 has h=+1), coupling J
        let w = (g * g + j * j).sqrt();
        let p_flip = (j / w).powi(2) * (w * t).sin().powi(2);
        let want_sz0 = -1.0 + 2.0 * p_flip;
        assert!((phi.sz(0) - want_sz0).abs() < 1e-10, "{} vs {want_sz0}", phi.sz(0));
    }

    #[test]
    fn frozen_field_only_is_phase() {
        let lat = Lattice::new(2, 3);
        let psi = neel_state(lat).unwrap();
        // s = 0 held fixed
        let plan = frozen_plan(psi.basis.n_groups(), 0.0, 1.5, 0.01);
        let mut phi = psi.clone();
        for _ in 0..100 {
            step_plan(&mut phi, &plan, Method::Trotter);
        }
        assert!((phi.fidelity(&psi) - 1.0).abs() < 1e-12);
        for j in 0..6 {
            assert!((phi.sz(j) - psi.sz(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn capacity_error() {
        let err = SectorBasis::new(Lattice::new(4, 5), 0).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(err.to_string().contains("16"));
    }

    #[test]
    fn correlators_match_dense_operators() {
        let lat = Lattice::new(2, 3);
        let basis = SectorBasis::new(lat, 0).unwrap();
        let psi = StateVector::random(basis.clone(), 9);
        // ⟨σ+_0 σ-_2⟩ by explicit operator action on basis configurations
        let (i, j) = (0usize, 2usize);
        let mut acc = C64::new(0.0, 0.0);
        for (col, &c) in basis.configs().iter().enumerate() {
            if c >> j & 1 == 1 && c >> i & 1 == 0 {
                let row = basis.position((c | 1 << i) & !(1 << j)).unwrap();
                acc += psi.amp[row].conj() * psi.amp[col];
            }
        }
        assert!((psi.sp_sm(i, j) - acc).norm() < 1e-14);
        // Hermiticity: ⟨σ+_i σ-_j⟩ = conj⟨σ+_j σ-_i⟩
        assert!((psi.sp_sm(i, j) - psi.sp_sm(j, i).conj()).norm() < 1e-14);
    }
}
