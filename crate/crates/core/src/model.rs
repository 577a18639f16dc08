//! Hamiltonian `H(s) = (J/2) Σ_<ij> (XX + YY) + (G/2) Σ_j h_j Z_j` with
//! `J = s J_r`, `G = (1 - s) G_r`, ramp schedules and Trotter gates.
//!
//! Time is dimensionless, `τ = J_r t`, so `J_r = 1` internally and the ramp is
//! fixed by `J_r t_r` and `G_r / J_r`.

use serde::{Deserialize, Serialize};
use symtensor::{ChargeLeg, Direction, SymTensor, C64};

use crate::error::{Error, Result};

/// `J_r` of the reference device in rad/μs (2π × 20 MHz).
pub const J_R_RAD_PER_US: f64 = 2.0 * std::f64::consts::PI * 20.0;

/// Longest time step in μs.
pub const DT_CAP_US: f64 = 0.001;

/// Largest time step as a fraction of the ramp time.
pub const DT_RAMP_FRACTION: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub j_r: f64,
    pub g_r: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { j_r: 1.0, g_r: 1.5 }
    }
}

impl ModelParams {
    pub fn new(j_r: f64, g_r: f64) -> Result<Self> {
        if !(j_r > 0.0 && g_r > 0.0) {
            return Err(Error::Config(format!("J_r and G_r must be positive, got {j_r} and {g_r}")));
        }
        Ok(Self { j_r, g_r })
    }

    /// Couplings `(J, G)` at ramp parameter `s`.
    pub fn ramp_values(&self, s: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Range(format!("ramp parameter s = {s} outside [0, 1]")));
        }
        Ok((s * self.j_r, (1.0 - s) * self.g_r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    Linear,
    SmoothStart,
}

/// `s = (t / t_r) (1 - exp(-40 t / t_r))`.
pub fn smooth_s(t: f64, t_r: f64) -> f64 {
    let u = t / t_r;
    u * (1.0 - (-40.0 * u).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    /// Ramp time in units of `1 / J_r`.
    pub t_r: f64,
    pub shape: RampShape,
    pub s_c: f64,
}

impl RampSchedule {
    pub fn new(t_r: f64, shape: RampShape, s_c: f64) -> Result<Self> {
        if !(t_r > 0.0) {
            return Err(Error::Config(format!("ramp time must be positive, got {t_r}")));
        }
        if !(s_c > 0.0 && s_c < 1.0) {
            return Err(Error::Config(format!("s_c = {s_c} outside (0, 1)")));
        }
        Ok(Self { t_r, shape, s_c })
    }

    pub fn linear(t_r: f64) -> Self {
        Self::new(t_r, RampShape::Linear, 0.45).expect("valid ramp")
    }

    /// Ramp parameter at time `t`, clamped to `[0, 1]`.
    pub fn s(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.t_r);
        let s = match self.shape {
            RampShape::Linear => t / self.t_r,
            RampShape::SmoothStart => smooth_s(t, self.t_r),
        };
        s.clamp(0.0, 1.0)
    }

    /// Time at which the ramp reaches `s`, found by bisection for the smooth
    /// shape (which is strictly increasing on `(0, t_r]`).
    pub fn t_of_s(&self, s: f64) -> f64 {
        match self.shape {
            RampShape::Linear => s * self.t_r,
            RampShape::SmoothStart => {
                let (mut lo, mut hi) = (0.0, self.t_r);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.s(mid) < s {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn tau_q(&self) -> f64 {
        self.t_r
    }

    pub fn t_c(&self) -> f64 {
        self.s_c * self.t_r
    }

    /// `ε(t) = (t - t_c) / τ_Q`.
    pub fn epsilon(&self, t: f64) -> f64 {
        (t - self.t_c()) / self.tau_q()
    }

    pub fn dt(&self) -> f64 {
        time_step(self.t_r)
    }

    /// Number of steps to cover `[0, t_r]`, rounding so that the last step
    /// lands exactly on `t_r`.
    pub fn n_steps(&self) -> usize {
        (self.t_r / self.dt() - 1e-9).ceil().max(1.0) as usize
    }
}

/// Steps `(t, h)` covering `[t0, t1]` with `h ≤ dt`, splitting the interval at
/// every mark strictly inside it so that each mark is an exact step boundary.
/// Within each segment the steps are equal.
pub fn segmented_steps(t0: f64, t1: f64, dt: f64, marks: &[f64]) -> Vec<(f64, f64)> {
    let eps = 1e-12 * t1.abs().max(1.0);
    let mut cuts: Vec<f64> = marks.iter().copied().filter(|&m| m > t0 + eps && m < t1 - eps).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < eps);
    let mut out = Vec::new();
    let mut a = t0;
    for b in cuts.into_iter().chain(std::iter::once(t1)) {
        let n = ((b - a) / dt - 1e-9).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        for k in 0..n {
            out.push((a + k as f64 * h, h));
        }
        a = b;
    }
    out
}

/// Time step in μs for a ramp time `t_r` in μs.
pub fn time_step_us(t_r_us: f64) -> f64 {
    DT_CAP_US.min(DT_RAMP_FRACTION * t_r_us)
}

/// Time step in units of `1 / J_r` for a dimensionless ramp time `J_r t_r`.
pub fn time_step(t_r: f64) -> f64 {
    (DT_CAP_US * J_R_RAD_PER_US).min(DT_RAMP_FRACTION * t_r)
}

/// The spin-1/2 physical leg: σ^z = -1 is charge -1 (index 0), σ^z = +1 is
/// charge +1 (index 1).
pub fn phys_leg() -> ChargeLeg {
    ChargeLeg::new(Direction::Out, vec![(-1, 1), (1, 1)]).expect("valid leg")
}

/// Dense 4×4 matrix of `exp(-i dt (J/2)(XX + YY))` in the basis
/// `|a b⟩ → 2a + b` with `0 = ↓`, `1 = ↑`.
pub fn two_site_matrix(j: f64, dt: f64) -> [[C64; 4]; 4] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let c = C64::new((j * dt).cos(), 0.0);
    let s = C64::new(0.0, -(j * dt).sin());
    [[one, z, z, z], [z, c, s, z], [z, s, c, z], [z, z, z, one]]
}

/// Diagonal phases `[⟨↓|U|↓⟩, ⟨↑|U|↑⟩]` of `exp(-i dt (G/2) h Z)`.
pub fn field_phases(g: f64, h: i32, dt: f64) -> Result<[C64; 2]> {
    if h != 1 && h != -1 {
        return Err(Error::Config(format!("staggering must be ±1, got {h}")));
    }
    let a = 0.5 * g * h as f64 * dt;
    Ok([C64::from_polar(1.0, a), C64::from_polar(1.0, -a)])
}

/// Two-site gate as a tensor with legs `[p1 out, p2 out, p1 in, p2 in]`.
pub fn two_site_gate(j: f64, dt: f64) -> SymTensor {
    let m = two_site_matrix(j, dt);
    let p = phys_leg();
    let legs = vec![p.clone(), p.clone(), p.dual(), p.dual()];
    SymTensor::from_fn(legs, 0, |i| m[2 * i[0] + i[1]][2 * i[2] + i[3]]).pruned()
}

/// Single-site field gate with legs `[p out, p in]`.
pub fn field_gate(g: f64, h: i32, dt: f64) -> Result<SymTensor> {
    let ph = field_phases(g, h, dt)?;
    let p = phys_leg();
    Ok(SymTensor::from_fn(vec![p.clone(), p.dual()], 0, |i| {
        if i[0] == i[1] {
            ph[i[0]]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// One layer of a symmetric Trotter step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Layer {
    /// All single-site field gates for duration `dt`.
    Field(f64),
    /// All two-site gates of bond group `group` for duration `dt`.
    Bonds(usize, f64),
}

/// Second-order step `F(dt/2) B_1(dt/2) … B_{k-1}(dt/2) B_k(dt) B_{k-1}(dt/2) … F(dt/2)`
/// with couplings frozen at the step midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct TrotterPlan {
    pub j: f64,
    pub g: f64,
    pub dt: f64,
    pub layers: Vec<Layer>,
}

impl TrotterPlan {
    pub fn is_palindrome(&self) -> bool {
        self.layers.iter().eq(self.layers.iter().rev())
    }
}

/// Plan for the step `[t, t + dt]` over `n_groups` disjoint bond groups.
pub fn trotter_plan(n_groups: usize, sched: &RampSchedule, params: &ModelParams, t: f64, dt: f64) -> Result<TrotterPlan> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let (j, g) = params.ramp_values(sched.s(t + 0.5 * dt))?;
    Ok(TrotterPlan {
        j,
        g,
        dt,
        layers: symmetric_layers(n_groups, dt),
    })
}

/// Same as [`trotter_plan`] with explicit couplings.
pub fn frozen_plan(n_groups: usize, j: f64, g: f64, dt: f64) -> TrotterPlan {
    TrotterPlan {
        j,
        g,
        dt,
        layers: symmetric_layers(n_groups, dt),
    }
}

fn symmetric_layers(n_groups: usize, dt: f64) -> Vec<Layer> {
    let mut layers = vec![Layer::Field(0.5 * dt)];
    if n_groups > 0 {
        for g in 0..n_groups - 1 {
            layers.push(Layer::Bonds(g, 0.5 * dt));
        }
        layers.push(Layer::Bonds(n_groups - 1, dt));
        for g in (0..n_groups - 1).rev() {
            layers.push(Layer::Bonds(g, 0.5 * dt));
        }
    }
    layers.push(Layer::Field(0.5 * dt));
    layers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        let p = ModelParams::default();
        assert_eq!(p.ramp_values(0.0).unwrap(), (0.0, 1.5));
        assert_eq!(p.ramp_values(1.0).unwrap(), (1.0, 0.0));
        assert_eq!(p.ramp_values(0.5).unwrap(), (0.5, 0.75));
        assert!(matches!(p.ramp_values(1.01), Err(Error::Range(_))));
        assert!(p.ramp_values(-0.1).is_err());
    }

    #[test]
    fn smooth_shape_values() {
        assert_eq!(smooth_s(0.0, 3.0), 0.0);
        // ds/dt at 0: (s(h) - s(0)) / h -> 0
        let h = 1e-7;
        assert!(smooth_s(h, 1.0) / h < 1e-4);
        assert!((smooth_s(3.0, 3.0) - (1.0 - (-40.0f64).exp())).abs() < 1e-15);
        assert!((smooth_s(0.1, 1.0) - 0.1 * (1.0 - (-4.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn time_step_rule() {
        assert!((time_step_us(1.0) - 0.001).abs() < 1e-15);
        assert!((time_step_us(0.1) - 0.0005).abs() < 1e-15);
        assert!((time_step_us(0.2) - 0.001).abs() < 1e-15);
        // J_r t_r = 1 is far below the cap
        assert!((time_step(1.0) - 0.005).abs() < 1e-15);
        assert!((time_step(1000.0) - 0.001 * J_R_RAD_PER_US).abs() < 1e-12);
    }

    #[test]
    fn epsilon_definition() {
        let r = RampSchedule::linear(4.0);
        assert_eq!(r.epsilon(r.t_c()), 0.0);
        assert!((r.epsilon(r.t_c() + 0.7) - 0.7 / 4.0).abs() < 1e-15);
        for &s in &[0.1, 0.45, 0.9] {
            assert!((r.epsilon(r.t_of_s(s)) - (s - 0.45)).abs() < 1e-14);
        }
    }

    #[test]
    fn half_period_swap() {
        let m = two_site_matrix(1.0, std::f64::consts::FRAC_PI_2);
        // |↑↓⟩ = index 2 maps to -i |↓↑⟩ = index 1
        assert!((m[1][2] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(m[2][2].norm() < 1e-15);
    }

    #[test]
    fn field_gate_phases() {
        let a = field_phases(0.8, 1, 0.3).unwrap();
        let b = field_phases(0.8, -1, 0.3).unwrap();
        assert!((a[0] - b[0].conj()).norm() < 1e-15);
        assert!(field_phases(1.0, 0, 0.1).is_err());
        let one = field_phases(0.0, 1, 0.3).unwrap();
        assert_eq!(one, [C64::new(1.0, 0.0); 2]);
        let half = field_phases(0.8, -1, 0.15).unwrap();
        for k in 0..2 {
            assert!((half[k] * half[k] - b[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn single_bond_plan() {
        let plan = frozen_plan(1, 1.0, 1.0, 0.1);
        assert_eq!(plan.layers, vec![Layer::Field(0.05), Layer::Bonds(0, 0.1), Layer::Field(0.05)]);
        let four = frozen_plan(4, 1.0, 1.0, 0.1);
        assert!(four.is_palindrome());
        assert_eq!(four.layers.len(), 9);
    }

    #[test]
    fn plan_uses_midpoint_couplings() {
        let r = RampSchedule::linear(2.0);
        let p = trotter_plan(2, &r, &ModelParams::default(), 1.0, 0.2).unwrap();
        assert!((p.j - 0.55).abs() < 1e-15);
        assert!((p.g - 0.45 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn segmented_steps_hit_marks() {
        let steps = segmented_steps(0.0, 1.0, 0.1, &[0.45, 0.45, 0.333, 2.0]);
        let ends: Vec<f64> = steps.iter().map(|(t, h)| t + h).collect();
        for m in [0.333, 0.45, 1.0] {
            assert!(ends.iter().any(|e| (e - m).abs() < 1e-12));
        }
        assert!(steps.iter().all(|&(_, h)| h <= 0.1 + 1e-15));
        let total: f64 = steps.iter().map(|s| s.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
