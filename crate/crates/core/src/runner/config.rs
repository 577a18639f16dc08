//! Declarative run configuration and its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{KzConfig, WindowPolicy};
use crate::error::{Error, Result};
use crate::exact::MAX_SPINS;
use crate::model::{ModelParams, RampShape};
use crate::records::Backend;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RampConfig {
    pub shape: RampShape,
    /// Ramp times `J_r t_r`.
    pub t_r: Vec<f64>,
    pub s_c: f64,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            shape: RampShape::Linear,
            t_r: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            s_c: 0.45,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BondConfig {
    /// MPS bond dimension.
    pub d: usize,
    /// Largest iPEPS bond dimension.
    pub d_max: usize,
    /// CTMRG environment dimension; `2 D_max²` when absent.
    pub chi: Option<usize>,
    pub ctm_tol: f64,
    pub ctm_max_iter: usize,
}

impl Default for BondConfig {
    fn default() -> Self {
        Self {
            d: 64,
            d_max: 6,
            chi: None,
            ctm_tol: 1e-8,
            ctm_max_iter: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMethod {
    /// Krylov propagator with the couplings frozen at each step's midpoint.
    Krylov,
    Trotter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureConfig {
    /// Ramp parameters at which correlators (and energies) are recorded.
    pub s: Vec<f64>,
    /// Largest distance for the iPEPS correlator.
    pub r_max: usize,
    /// Record `E(s)`, `E_GS(s)` and `ΔE` on finite lattices.
    pub energy: bool,
    /// Also measure at `s_c ± t̂/t_r` for each ramp.
    pub edges: bool,
    /// Keep iPEPS state and environment snapshots at every measurement.
    pub snapshots: bool,
    pub exact_method: ExactMethod,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            s: (1..=20).map(|k| k as f64 / 20.0).collect(),
            r_max: 8,
            energy: false,
            edges: false,
            snapshots: false,
            exact_method: ExactMethod::Krylov,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub kz: KzConfig,
    pub window: WindowPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: Backend,
    /// Required for the finite backends, absent for iPEPS.
    #[serde(default)]
    pub lattice: Option<LatticeConfig>,
    #[serde(default)]
    pub ramp: RampConfig,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub bond: BondConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default = "default_budget")]
    pub delta_budget: f64,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_budget() -> f64 {
    0.1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; a relative `output` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if cfg.output.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output = dir.join(&cfg.output);
            }
        }
        Ok(cfg)
    }

    pub fn chi(&self) -> usize {
        self.bond.chi.unwrap_or((2 * self.bond.d_max * self.bond.d_max).max(8))
    }

    /// Hex SHA-256 of the configuration without its output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Checks a configuration without computing anything.
pub fn validate(cfg: &RunConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut err = |m: String| {
        out.push(Finding {
            severity: Severity::Error,
            message: m,
        })
    };
    if cfg.ramp.t_r.is_empty() {
        err("ramp.t_r is empty".into());
    }
    for &t in &cfg.ramp.t_r {
        if !(t > 0.0 && t.is_finite()) {
            err(format!("ramp time {t} must be positive and finite"));
        }
    }
    if !(cfg.ramp.s_c > 0.0 && cfg.ramp.s_c < 1.0) {
        err(format!("s_c = {} must lie in (0, 1)", cfg.ramp.s_c));
    }
    if cfg.measure.s.is_empty() && !cfg.measure.edges {
        err("measure.s is empty".into());
    }
    for &s in &cfg.measure.s {
        if !(0.0..=1.0).contains(&s) {
            err(format!("measurement point s = {s} outside [0, 1]"));
        }
    }
    if let Err(e) = ModelParams::new(cfg.model.j_r, cfg.model.g_r) {
        err(e.to_string());
    }
    if !(cfg.delta_budget > 0.0) {
        err(format!("delta_budget = {} must be positive", cfg.delta_budget));
    }
    match (cfg.backend, cfg.lattice) {
        (Backend::Ipeps, Some(_)) => err("the ipeps backend is infinite; remove [lattice]".into()),
        (Backend::Exact | Backend::Mps, None) => err(format!("the {} backend needs [lattice]", cfg.backend)),
        (_, Some(l)) if l.rows == 0 || l.cols == 0 => err("lattice dimensions must be positive".into()),
        (Backend::Exact, Some(l)) if l.rows * l.cols > MAX_SPINS => err(
            Error::Capacity {
                requested: format!("{} spins ({}x{})", l.rows * l.cols, l.rows, l.cols),
                limit: format!("{MAX_SPINS} spins for the exact backend"),
            }
            .to_string(),
        ),
        _ => {}
    }
    if cfg.backend == Backend::Mps && cfg.bond.d == 0 {
        err("bond.d must be at least 1".into());
    }
    if cfg.backend == Backend::Ipeps {
        if cfg.bond.d_max == 0 {
            err("bond.d_max must be at least 1".into());
        }
        if cfg.bond.chi == Some(0) {
            err("bond.chi must be at least 1".into());
        }
    }
    let mut warn = |m: String| {
        out.push(Finding {
            severity: Severity::Warning,
            message: m,
        })
    };
    if cfg.backend == Backend::Ipeps {
        if cfg.chi() < cfg.bond.d_max * cfg.bond.d_max {
            warn(format!("chi = {} is below D_max² = {}", cfg.chi(), cfg.bond.d_max * cfg.bond.d_max));
        }
        if cfg.measure.energy {
            warn("energy records are only produced on finite lattices".into());
        }
    }
    if cfg.measure.edges && cfg.ramp.shape != RampShape::Linear {
        warn("edge points s_c ± t̂/t_r assume a linear ramp".into());
    }
    if cfg.analysis.window.r_min + 2 > max_distance(cfg) {
        warn(format!(
            "fit window starts at R = {} but the largest distance is {}; ξ fits need three points",
            cfg.analysis.window.r_min,
            max_distance(cfg)
        ));
    }
    out
}

fn max_distance(cfg: &RunConfig) -> usize {
    match cfg.lattice {
        Some(l) if cfg.backend != Backend::Ipeps => l.cols.saturating_sub(1),
        _ => cfg.measure.r_max,
    }
}

/// [`validate`], failing on the first error finding.
pub fn check(cfg: &RunConfig) -> Result<Vec<Finding>> {
    let findings = validate(cfg);
    let errors: Vec<String> = findings
        .iter()
        .filter(|f| f.severity == Severity::Error)
        .map(|f| f.message.clone())
        .collect();
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("; ")));
    }
    Ok(findings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig::from_toml(
            r#"
            backend = "exact"
            output = "out"
            [lattice]
            rows = 2
            cols = 3
            [ramp]
            t_r = [1.0, 2.0]
            "#,
        )
        .unwrap()
    }

    fn errors(cfg: &RunConfig) -> Vec<String> {
        validate(cfg)
            .into_iter()
            .filter(|f| f.severity == Severity::Error)
            .map(|f| f.message)
            .collect()
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = base();
        assert_eq!(cfg.ramp.s_c, 0.45);
        assert_eq!(cfg.measure.s.len(), 20);
        assert_eq!(cfg.delta_budget, 0.1);
        assert!(errors(&cfg).is_empty());
        let geo = RampConfig::default().t_r;
        assert_eq!(geo, vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r = RunConfig::from_toml("backend = \"exact\"\noutput = \"o\"\nflavour = 3\n");
        assert!(r.is_err());
        let r = RunConfig::from_toml("backend = \"exact\"\noutput = \"o\"\n[ramp]\ntr = [1.0]\n");
        assert!(r.is_err());
    }

    #[test]
    fn bad_values_are_errors() {
        let mut cfg = base();
        cfg.ramp.t_r = vec![-1.0];
        assert!(errors(&cfg)[0].contains("positive"));
        let mut cfg = base();
        cfg.ramp.s_c = 1.2;
        assert!(errors(&cfg)[0].contains("s_c"));
        let mut cfg = base();
        cfg.lattice = Some(LatticeConfig { rows: 4, cols: 5 });
        let e = errors(&cfg);
        assert!(e[0].contains("capacity") && e[0].contains("16"), "{e:?}");
        assert!(check(&cfg).is_err());
    }

    #[test]
    fn backend_lattice_consistency() {
        let mut cfg = base();
        cfg.backend = Backend::Ipeps;
        assert!(!errors(&cfg).is_empty());
        cfg.lattice = None;
        assert!(errors(&cfg).is_empty());
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = base();
        let mut b = base();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 3;
        assert_ne!(a.hash(), b.hash());
    }
}
