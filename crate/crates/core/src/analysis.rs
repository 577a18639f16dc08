//! Correlation-length fits, Kibble-Zurek scales and scaling collapses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{CorrRecord, FitRecord};

/// Critical exponents and prefactors of the KZ scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KzConfig {
    pub z: f64,
    pub nu: f64,
    pub eta: f64,
    /// `zν` entering the `t̂` exponent.
    pub z_nu_t: f64,
    pub prefactor_t: f64,
    pub prefactor_xi: f64,
}

impl Default for KzConfig {
    fn default() -> Self {
        Self {
            z: 1.0,
            nu: 0.67169,
            eta: 0.03810,
            z_nu_t: 0.67,
            prefactor_t: 0.36,
            prefactor_xi: 1.0,
        }
    }
}

impl KzConfig {
    /// Exponent of `t̂` in `J_r t_r`.
    pub fn t_exponent(&self) -> f64 {
        self.z_nu_t / (1.0 + self.z_nu_t)
    }

    /// Exponent of `ξ̂` in `J_r t_r`.
    pub fn xi_exponent(&self) -> f64 {
        self.nu / (1.0 + self.z * self.nu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KzScales {
    /// `J_r t_r`.
    pub t_r: f64,
    /// `J_r t̂`.
    pub t_hat: f64,
    /// `ξ̂` in lattice units.
    pub xi_hat: f64,
    pub config: KzConfig,
}

/// KZ time and length scales for a ramp of duration `t_r` (units of `1/J_r`).
pub fn kz_scales(t_r: f64, config: &KzConfig) -> Result<KzScales> {
    if !(t_r > 0.0 && t_r.is_finite()) {
        return Err(Error::Range(format!("ramp time must be positive, got {t_r}")));
    }
    Ok(KzScales {
        t_r,
        t_hat: config.prefactor_t * t_r.powf(config.t_exponent()),
        xi_hat: config.prefactor_xi * t_r.powf(config.xi_exponent()),
        config: *config,
    })
}

/// Which distances enter an exponential fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowPolicy {
    pub r_min: usize,
    /// Hard upper limit on `R`, on top of the floor rule.
    pub r_max: Option<usize>,
    /// The window ends at the largest `R` with `C > floor`.
    pub floor: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            r_min: 2,
            r_max: None,
            floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub xi: f64,
    pub xi_err: f64,
    pub window: (usize, usize),
    /// Root of the weighted sum of squared residuals of `ln C`.
    pub residual: f64,
    /// Points inside the window dropped for `C ≤ 0`.
    pub excluded: usize,
    pub points: usize,
}

/// Weighted straight-line fit `y = a + b x` with the parameter covariance
/// scaled by the residual variance.
#[derive(Clone, Copy, Debug)]
struct LineFit {
    a: f64,
    b: f64,
    var_a: f64,
    var_b: f64,
    /// `sqrt(Σ w r²)`.
    residual: f64,
    /// Coefficient of determination.
    r2: f64,
}

fn line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 3 {
        return Err(Error::NoSignal(format!("{n} points, need at least 3")));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::NoSignal("abscissae are all equal".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr: f64 = (0..n).map(|i| w[i] * (y[i] - a - b * x[i]).powi(2)).sum();
    let s2 = ssr / (n - 2) as f64;
    Ok(LineFit {
        a,
        b,
        var_a: s2 * (1.0 / sw + mx * mx / sxx),
        var_b: s2 / sxx,
        residual: ssr.sqrt(),
        r2: if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 },
    })
}

/// Fits `C(R) ∝ exp(−R/ξ)` to the records of a single `(t_r, s)` sample.
///
/// The regression of `ln C` on `R` weights each point by
/// `C²/(C² + floor²)`, so samples near the noise floor count less.
pub fn fit_xi(records: &[CorrRecord], policy: &WindowPolicy) -> Result<FitResult> {
    let Some(first) = records.first() else {
        return Err(Error::NoSignal("no records".into()));
    };
    if records.iter().any(|r| r.t_r != first.t_r || r.s != first.s) {
        return Err(Error::Range("records mix several (t_r, s) samples".into()));
    }
    let mut pts: Vec<(usize, f64)> = records.iter().map(|r| (r.r, r.c)).collect();
    pts.sort_by_key(|p| p.0);
    fit_xi_points(&pts, policy)
}

/// [`fit_xi`] on bare `(R, C)` pairs sorted by `R`.
pub fn fit_xi_points(pts: &[(usize, f64)], policy: &WindowPolicy) -> Result<FitResult> {
    let r_hi = pts
        .iter()
        .filter(|p| p.0 >= policy.r_min && p.1 > policy.floor && policy.r_max.is_none_or(|m| p.0 <= m))
        .map(|p| p.0)
        .max()
        .ok_or_else(|| Error::NoSignal(format!("no C above {:.1e} at R ≥ {}", policy.floor, policy.r_min)))?;
    let inside: Vec<&(usize, f64)> = pts.iter().filter(|p| p.0 >= policy.r_min && p.0 <= r_hi).collect();
    let excluded = inside.iter().filter(|p| p.1 <= 0.0).count();
    let used: Vec<&(usize, f64)> = inside.into_iter().filter(|p| p.1 > 0.0).collect();
    let x: Vec<f64> = used.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let w: Vec<f64> = used.iter().map(|p| p.1 * p.1 / (p.1 * p.1 + policy.floor * policy.floor)).collect();
    let fit = line_fit(&x, &y, &w)?;
    if fit.b >= 0.0 {
        return Err(Error::NoSignal(format!("correlator does not decay (slope {:.3e})", fit.b)));
    }
    Ok(FitResult {
        xi: -1.0 / fit.b,
        xi_err: fit.var_b.sqrt() / (fit.b * fit.b),
        window: (policy.r_min, r_hi),
        residual: fit.residual,
        excluded,
        points: used.len(),
    })
}

/// Groups records by `(t_r, s)` in ascending order.
pub fn group_samples(records: &[CorrRecord]) -> Vec<((f64, f64), Vec<CorrRecord>)> {
    let mut map: BTreeMap<(u64, u64), Vec<CorrRecord>> = BTreeMap::new();
    for r in records {
        map.entry((ordered_bits(r.t_r), ordered_bits(r.s))).or_default().push(r.clone());
    }
    map.into_values().map(|v| ((v[0].t_r, v[0].s), v)).collect()
}

/// Bit pattern that sorts like the (non-negative) float.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if x.is_sign_negative() {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Fits every `(t_r, s)` sample; samples without signal are skipped and
/// returned separately with the reason.
pub fn fit_all(records: &[CorrRecord], policy: &WindowPolicy) -> (Vec<FitRecord>, Vec<((f64, f64), String)>) {
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for ((t_r, s), recs) in group_samples(records) {
        match fit_xi(&recs, policy) {
            Ok(f) => fits.push(FitRecord {
                t_r,
                s,
                xi: f.xi,
                xi_err: f.xi_err,
                rmin: f.window.0,
                rmax: f.window.1,
                residual: f.residual,
            }),
            Err(e) => skipped.push(((t_r, s), e.to_string())),
        }
    }
    (fits, skipped)
}

/// One curve after rescaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledCurve {
    pub t_r: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub curves: Vec<ScaledCurve>,
    /// Mean over curve pairs of the mean squared vertical distance on the
    /// common overlap.
    pub residual: f64,
    /// Pairs with a non-empty overlap.
    pub pairs: usize,
    /// Abscissa window the residual is restricted to.
    pub window: Option<(f64, f64)>,
    pub config: KzConfig,
}

/// Piecewise-linear interpolation on sorted abscissae; `None` outside.
fn interp(pts: &[(f64, f64)], x: f64) -> Option<f64> {
    let (lo, hi) = (pts.first()?.0, pts.last()?.0);
    if x < lo || x > hi {
        return None;
    }
    let k = pts.partition_point(|p| p.0 < x);
    if k < pts.len() && pts[k].0 == x {
        return Some(pts[k].1);
    }
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Mean squared distance between two curves on their overlap, evaluated at
/// the union of their abscissae. `None` if the overlap is empty.
pub fn pair_distance(a: &[(f64, f64)], b: &[(f64, f64)], window: Option<(f64, f64)>) -> Option<f64> {
    let (wlo, whi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let lo = a.first()?.0.max(b.first()?.0).max(wlo);
    let hi = a.last()?.0.min(b.last()?.0).min(whi);
    if lo > hi {
        return None;
    }
    let mut grid: Vec<f64> = a.iter().chain(b).map(|p| p.0).filter(|&x| x >= lo && x <= hi).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return None;
    }
    let sum: f64 = grid
        .iter()
        .map(|&x| {
            let d = interp(a, x).expect("inside overlap") - interp(b, x).expect("inside overlap");
            d * d
        })
        .sum();
    Some(sum / grid.len() as f64)
}

fn sorted(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.retain(|p| p.0.is_finite() && p.1.is_finite());
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    pts
}

fn score(curves: Vec<ScaledCurve>, window: Option<(f64, f64)>, config: &KzConfig) -> Result<CollapseResult> {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            if let Some(d) = pair_distance(&curves[i].points, &curves[j].points, window) {
                total += d;
                pairs += 1;
            }
        }
    }
    if curves.len() > 1 && pairs == 0 {
        return Err(Error::NoSignal("no two curves overlap after rescaling".into()));
    }
    Ok(CollapseResult {
        curves,
        residual: if pairs > 0 { total / pairs as f64 } else { 0.0 },
        pairs,
        window,
        config: *config,
    })
}

/// Rescales `C(R)` curves to `(R/ξ̂, ξ̂^{1+η} C)` and scores the collapse.
pub fn collapse_correlators(curves: &[(f64, Vec<(usize, f64)>)], config: &KzConfig) -> Result<CollapseResult> {
    let scaled = curves
        .iter()
        .map(|(t_r, pts)| {
            let k = kz_scales(*t_r, config)?;
            let amp = k.xi_hat.powf(1.0 + config.eta);
            Ok(ScaledCurve {
                t_r: *t_r,
                points: sorted(pts.iter().map(|&(r, c)| (r as f64 / k.xi_hat, amp * c)).collect()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    score(scaled, None, config)
}

/// Collapse of the correlators measured at the critical point of each ramp.
pub fn collapse_critical(curves: &[(f64, Vec<(usize, f64)>)], config: &KzConfig) -> Result<CollapseResult> {
    collapse_correlators(curves, config)
}

/// Collapse of `ξ(t)` curves to `((t − t_c)/t̂, ξ/ξ̂)`, scored on the KZ
/// window `[−1, 1]` of scaled time.
pub fn collapse_xi_of_t(curves: &[(f64, Vec<(f64, f64)>)], config: &KzConfig, s_c: f64) -> Result<CollapseResult> {
    collapse_xi_of_t_in(curves, config, s_c, (-1.0, 1.0))
}

pub fn collapse_xi_of_t_in(
    curves: &[(f64, Vec<(f64, f64)>)],
    config: &KzConfig,
    s_c: f64,
    window: (f64, f64),
) -> Result<CollapseResult> {
    if !(s_c > 0.0 && s_c < 1.0) {
        return Err(Error::Range(format!("s_c must lie in (0, 1), got {s_c}")));
    }
    let scaled = curves
        .iter()
        .map(|(t_r, pts)| {
            let k = kz_scales(*t_r, config)?;
            let t_c = s_c * t_r;
            Ok(ScaledCurve {
                t_r: *t_r,
                points: sorted(pts.iter().map(|&(t, xi)| ((t - t_c) / k.t_hat, xi / k.xi_hat)).collect()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    score(scaled, Some(window), config)
}

/// Ramp parameter `s` of the time `t_c + sign·t̂` on a linear ramp.
pub fn edge_s(t_r: f64, s_c: f64, sign: f64, config: &KzConfig) -> Result<f64> {
    let k = kz_scales(t_r, config)?;
    Ok(s_c + sign * k.t_hat / t_r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCollapse {
    pub minus: CollapseResult,
    pub plus: CollapseResult,
    /// Mean pair distance between a curve of one branch and one of the other.
    pub inter_branch: f64,
}

/// Separate collapses of the correlators at `t_c − t̂` and `t_c + t̂`.
pub fn collapse_edges(
    minus: &[(f64, Vec<(usize, f64)>)],
    plus: &[(f64, Vec<(usize, f64)>)],
    config: &KzConfig,
) -> Result<EdgeCollapse> {
    let m = collapse_correlators(minus, config)?;
    let p = collapse_correlators(plus, config)?;
    let mut total = 0.0;
    let mut pairs = 0;
    for a in &m.curves {
        for b in &p.curves {
            if let Some(d) = pair_distance(&a.points, &b.points, None) {
                total += d;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::NoSignal("the two branches do not overlap".into()));
    }
    Ok(EdgeCollapse {
        minus: m,
        plus: p,
        inter_branch: total / pairs as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_err: f64,
    pub prefactor: f64,
    /// Standard error of the prefactor propagated from its logarithm.
    pub prefactor_err: f64,
    pub x_range: (f64, f64),
    /// Coefficient of determination on log-log axes.
    pub r2: f64,
    pub residual: f64,
}

/// `y = A x^p` by least squares on log-log axes.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.len() != y.len() {
        return Err(Error::Range(format!("{} abscissae but {} ordinates", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Range("power-law fits need strictly positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit = line_fit(&lx, &ly, &vec![1.0; x.len()])?;
    let prefactor = fit.a.exp();
    Ok(PowerLawFit {
        exponent: fit.b,
        exponent_err: fit.var_b.sqrt(),
        prefactor,
        prefactor_err: prefactor * fit.var_a.sqrt(),
        x_range: (x.iter().copied().fold(f64::INFINITY, f64::min), x.iter().copied().fold(0.0, f64::max)),
        r2: fit.r2,
        residual: fit.residual,
    })
}

/// `C(R)` pairs of one sample, sorted by `R`.
pub fn curve_of(records: &[CorrRecord]) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = records.iter().map(|r| (r.r, r.c)).collect();
    v.sort_by_key(|p| p.0);
    v
}
