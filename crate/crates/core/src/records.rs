//! Flat measurement records shared by every backend and the record store.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Mps,
    Ipeps,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Mps => "mps",
            Backend::Ipeps => "ipeps",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One correlator sample `C(t, R)`. `t_r` and `t` are in units of `1/J_r`;
/// `d` is the bond dimension in force (0 for the exact backend).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrRecord {
    pub backend: Backend,
    pub t_r: f64,
    pub s: f64,
    pub t: f64,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: usize,
}

/// Per-row correlator on finite lattices, before averaging over rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowCorrRecord {
    pub backend: Backend,
    pub t_r: f64,
    pub s: f64,
    pub t: f64,
    pub row: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub t_r: f64,
    pub s: f64,
    pub xi: f64,
    pub xi_err: f64,
    pub rmin: usize,
    pub rmax: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t_r: f64,
    pub s: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E_GS")]
    pub e_gs: f64,
    #[serde(rename = "dE_per_site")]
    pub de_per_site: f64,
}

/// Accumulated truncation error after a gate layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub backend: Backend,
    pub t_r: f64,
    pub s: f64,
    pub t: f64,
    pub delta: f64,
    #[serde(rename = "D")]
    pub d: usize,
}

/// Averages per-row samples over the given rows into one record per `R`.
pub fn average_rows(rows: &[RowCorrRecord], keep: &[usize]) -> Vec<CorrRecord> {
    let mut acc: std::collections::BTreeMap<usize, (f64, usize, &RowCorrRecord)> = Default::default();
    for rec in rows.iter().filter(|r| keep.contains(&r.row)) {
        let e = acc.entry(rec.r).or_insert((0.0, 0, rec));
        e.0 += rec.c;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(r, (sum, n, rec))| CorrRecord {
            backend: rec.backend,
            t_r: rec.t_r,
            s: rec.s,
            t: rec.t,
            r,
            c: sum / n as f64,
            d: rec.d,
        })
        .collect()
}

/// Staggered correlator of row `y` for every distance `R ≥ 1`, averaged over
/// all pairs `(x, x + R)` in the row. `xx_yy(i, j)` must return
/// `(⟨X_i X_j⟩ + ⟨Y_i Y_j⟩) / 2` with one-point terms already subtracted.
pub fn row_correlator(
    lattice: &crate::lattice::Lattice,
    y: usize,
    mut xx_yy: impl FnMut(usize, usize) -> f64,
) -> Vec<(usize, f64)> {
    let mut sums = vec![0.0; lattice.cols];
    let mut counts = vec![0usize; lattice.cols];
    for x0 in 0..lattice.cols {
        for (r, i, j) in lattice.row_pairs(y, x0) {
            sums[r] += xx_yy(i, j);
            counts[r] += 1;
        }
    }
    (1..lattice.cols)
        .map(|r| {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            (r, sign * sums[r] / counts[r] as f64)
        })
        .collect()
}
