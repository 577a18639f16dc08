//! Plot files and the exact tables drawn in them.
//!
//! Every figure is a set of named series; the CSV next to each SVG holds
//! those series as `(series, x, y)` rows. Log axes are drawn as `log10` of
//! the data, and the CSV keeps the untransformed values.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use plotters::prelude::*;
use serde::Serialize;

use super::store::{write_csv, Store};
use super::{curves_at, energy_scaling, same, shared_s, xi_at};
use crate::analysis::{collapse_correlators, edge_s, fit_all, fit_power_law, kz_scales, KzConfig};
use crate::error::{Error, Result};
use crate::records::{CorrRecord, FitRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureKind {
    /// Accumulated truncation error against `s`.
    Error,
    /// Scaled correlators at each measured `s`.
    CollapseSc,
    /// Scaled correlation length against scaled time, and `ξ(t_c)`.
    XiScaling,
    /// Scaled correlators at `t_c ± t̂`.
    CollapseEdges,
    /// `ξ(t_c)` against ramp time on a finite lattice.
    XiFinite,
    /// Excitation energy per site against ramp time.
    EnergyFinite,
}

impl FigureKind {
    pub const ALL: [FigureKind; 6] = [
        FigureKind::Error,
        FigureKind::CollapseSc,
        FigureKind::XiScaling,
        FigureKind::CollapseEdges,
        FigureKind::XiFinite,
        FigureKind::EnergyFinite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureKind::Error => "error",
            FigureKind::CollapseSc => "collapse_sc",
            FigureKind::XiScaling => "xi_scaling",
            FigureKind::CollapseEdges => "collapse_edges",
            FigureKind::XiFinite => "xi_finite",
            FigureKind::EnergyFinite => "energy_finite",
        }
    }
}

impl FromStr for FigureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown figure {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Mark {
    Line,
    Points,
    Both,
    /// Guide line.
    Dashed,
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    mark: Mark,
}

struct Plot {
    name: String,
    title: String,
    x_label: String,
    y_label: String,
    log_x: bool,
    log_y: bool,
    series: Vec<Series>,
}

#[derive(Serialize)]
struct Row<'a> {
    series: &'a str,
    x: f64,
    y: f64,
}

fn draw_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Store(format!("plot: {e:?}"))
}

impl Plot {
    fn new(name: impl Into<String>, title: impl Into<String>, x: &str, y: &str) -> Self {
        Self {
            name: name.into(),
            title: title.into(),
            x_label: x.into(),
            y_label: y.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    fn log(mut self, x: bool, y: bool) -> Self {
        self.log_x = x;
        self.log_y = y;
        self
    }

    fn add(&mut self, label: impl Into<String>, points: Vec<(f64, f64)>, mark: Mark) {
        if !points.is_empty() {
            self.series.push(Series {
                label: label.into(),
                points,
                mark,
            });
        }
    }

    /// Writes `<name>.csv` and `<name>.svg`; returns both paths, or nothing
    /// when there is no data to draw.
    fn emit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let drawn: Vec<(&Series, Vec<(f64, f64)>)> = self
            .series
            .iter()
            .map(|s| {
                let pts = s
                    .points
                    .iter()
                    .filter(|p| (!self.log_x || p.0 > 0.0) && (!self.log_y || p.1 > 0.0))
                    .map(|&(x, y)| (tx(x), ty(y)))
                    .filter(|p| p.0.is_finite() && p.1.is_finite())
                    .collect();
                (s, pts)
            })
            .collect();
        let all: Vec<(f64, f64)> = drawn.iter().flat_map(|d| d.1.iter().copied()).collect();
        if all.is_empty() {
            log::warn!("figure {}: no data", self.name);
            return Ok(Vec::new());
        }
        let csv_path = dir.join(format!("{}.csv", self.name));
        let rows: Vec<Row> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(move |&(x, y)| Row { series: &s.label, x, y }))
            .collect();
        write_csv(&csv_path, &rows)?;

        let range = |v: Vec<f64>| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
            (lo - pad)..(hi + pad)
        };
        let xr = range(all.iter().map(|p| p.0).collect());
        let yr = range(all.iter().map(|p| p.1).collect());
        let svg_path = dir.join(format!("{}.svg", self.name));
        let root = SVGBackend::new(&svg_path, (720, 520)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let axis = |label: &str, log: bool| if log { format!("log10 {label}") } else { label.to_string() };
        let mut chart = ChartBuilder::on(&root)
            .caption(&self.title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(44)
            .y_label_area_size(64)
            .build_cartesian_2d(xr, yr)
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_desc(axis(&self.x_label, self.log_x))
            .y_desc(axis(&self.y_label, self.log_y))
            .draw()
            .map_err(draw_err)?;
        for (i, (s, pts)) in drawn.into_iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            if matches!(s.mark, Mark::Line | Mark::Both | Mark::Dashed) {
                let style = if s.mark == Mark::Dashed {
                    color.mix(0.6).stroke_width(1)
                } else {
                    color.stroke_width(2)
                };
                chart
                    .draw_series(LineSeries::new(pts.clone(), style))
                    .map_err(draw_err)?
                    .label(s.label.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
            }
            if matches!(s.mark, Mark::Points | Mark::Both) {
                let series = chart
                    .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                    .map_err(draw_err)?;
                if s.mark == Mark::Points {
                    series
                        .label(s.label.clone())
                        .legend(move |(x, y)| Circle::new((x + 9, y), 3, color.filled()));
                }
            }
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(draw_err)?;
        root.present().map_err(draw_err)?;
        drop(chart);
        drop(root);
        Ok(vec![csv_path, svg_path])
    }
}

fn label(t_r: f64) -> String {
    format!("J_r t_r = {t_r}")
}

fn add_scaled(curves: &[(f64, Vec<(usize, f64)>)], kz: &KzConfig, prefix: &str, plot: &mut Plot) -> Result<()> {
    let c = collapse_correlators(curves, kz)?;
    for sc in c.curves {
        plot.add(format!("{prefix}{}", label(sc.t_r)), sc.points, Mark::Both);
    }
    Ok(())
}

fn fits_for(store: &Store, corr: &[CorrRecord]) -> Result<Vec<FitRecord>> {
    let stored = store.fits()?;
    if !stored.is_empty() {
        return Ok(stored);
    }
    Ok(fit_all(corr, &store.config()?.analysis.window).0)
}

/// Writes the selected figures under `<store>/figures`. An empty selection
/// writes nothing.
pub fn emit_figures(store: &Store, which: &[FigureKind]) -> Result<Vec<PathBuf>> {
    if which.is_empty() {
        log::info!("no figures selected");
        return Ok(Vec::new());
    }
    let cfg = store.config()?;
    let kz = cfg.analysis.kz;
    let s_c = cfg.ramp.s_c;
    let dir = store.root.join("figures");
    std::fs::create_dir_all(&dir)?;
    let corr = store.corr()?;
    let mut out = Vec::new();
    for &kind in which {
        match kind {
            FigureKind::Error => {
                let errors = store.errors()?;
                let mut p = Plot::new("error", "Accumulated truncation error", "s", "delta").log(false, true);
                let mut t_rs: Vec<f64> = errors.iter().map(|e| e.t_r).collect();
                t_rs.sort_by(f64::total_cmp);
                t_rs.dedup();
                for t_r in t_rs {
                    let pts = errors.iter().filter(|e| e.t_r == t_r).map(|e| (e.s, e.delta)).collect();
                    p.add(label(t_r), pts, Mark::Line);
                }
                out.extend(p.emit(&dir)?);
            }
            FigureKind::CollapseSc => {
                let mut resid = Plot::new("collapse_sc_residual", "Collapse residual", "s", "residual").log(false, true);
                let mut pts = Vec::new();
                for s in shared_s(&corr) {
                    let curves = curves_at(&corr, |_| Some(s));
                    let mut p = Plot::new(
                        format!("collapse_sc_s{s:.4}"),
                        format!("Scaled correlator at s = {s:.3}"),
                        "R / xi_hat",
                        "xi_hat^(1+eta) C",
                    );
                    add_scaled(&curves, &kz, "", &mut p)?;
                    out.extend(p.emit(&dir)?);
                    if let Ok(c) = collapse_correlators(&curves, &kz) {
                        pts.push((s, c.residual));
                    }
                }
                resid.add("residual", pts, Mark::Both);
                out.extend(resid.emit(&dir)?);
            }
            FigureKind::XiScaling => {
                let fits = fits_for(store, &corr)?;
                let mut p = Plot::new("xi_scaling", "Scaled correlation length", "(t - t_c) / t_hat", "xi / xi_hat");
                let mut t_rs: Vec<f64> = fits.iter().map(|f| f.t_r).collect();
                t_rs.sort_by(f64::total_cmp);
                t_rs.dedup();
                for t_r in t_rs {
                    let k = kz_scales(t_r, &kz)?;
                    let mut pts: Vec<(f64, f64)> = fits
                        .iter()
                        .filter(|f| f.t_r == t_r)
                        .filter_map(|f| {
                            let t = corr.iter().find(|r| r.t_r == t_r && r.s == f.s)?.t;
                            Some(((t - s_c * t_r) / k.t_hat, f.xi / k.xi_hat))
                        })
                        .collect();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    p.add(label(t_r), pts, Mark::Both);
                }
                out.extend(p.emit(&dir)?);
                out.extend(xi_tc_plot("xi_tc", "Correlation length at the critical point", &fits, s_c)?.emit(&dir)?);
            }
            FigureKind::CollapseEdges => {
                let mut p = Plot::new("collapse_edges", "Scaled correlator at t_c -/+ t_hat", "R / xi_hat", "xi_hat^(1+eta) C");
                for (sign, prefix) in [(-1.0, "minus, "), (1.0, "plus, ")] {
                    let curves = curves_at(&corr, |t_r| edge_s(t_r, s_c, sign, &kz).ok());
                    if !curves.is_empty() {
                        add_scaled(&curves, &kz, prefix, &mut p)?;
                    }
                }
                out.extend(p.emit(&dir)?);
            }
            FigureKind::XiFinite => {
                let fits = fits_for(store, &corr)?;
                let title = match cfg.lattice {
                    Some(l) => format!("Correlation length at the critical point, {}x{}", l.rows, l.cols),
                    None => "Correlation length at the critical point".to_string(),
                };
                out.extend(xi_tc_plot("xi_finite", &title, &fits, s_c)?.emit(&dir)?);
            }
            FigureKind::EnergyFinite => {
                let energy = store.energy()?;
                let mut p = Plot::new("energy_finite", "Excitation energy per site", "J_r t_r", "dE / N").log(true, true);
                let mut anchor: Option<(f64, f64)> = None;
                let mut x_span = (f64::INFINITY, 0.0f64);
                for sc in energy_scaling(&energy) {
                    let mut pts: Vec<(f64, f64)> = energy
                        .iter()
                        .filter(|e| same(e.s, sc.s) && e.de_per_site > 0.0)
                        .map(|e| (e.t_r, e.de_per_site))
                        .collect();
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    for q in &pts {
                        x_span = (x_span.0.min(q.0), x_span.1.max(q.0));
                    }
                    if let Some(first) = pts.first() {
                        anchor = Some(*first);
                    }
                    p.add(format!("s = {:.3}", sc.s), pts, Mark::Both);
                }
                if let Some((x0, y0)) = anchor {
                    for slope in [-1.2, -2.0] {
                        let line = [x_span.0, x_span.1].iter().map(|&x| (x, y0 * (x / x0).powf(slope))).collect();
                        p.add(format!("slope {slope}"), line, Mark::Dashed);
                    }
                }
                out.extend(p.emit(&dir)?);
            }
        }
    }
    Ok(out)
}

fn xi_tc_plot(name: &str, title: &str, fits: &[FitRecord], s_c: f64) -> Result<Plot> {
    let pts = xi_at(fits, |_| s_c);
    let mut p = Plot::new(name, title, "J_r t_r", "xi(t_c)").log(true, true);
    let data: Vec<(f64, f64)> = pts.iter().map(|q| (q.0, q.1)).collect();
    if data.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = data.iter().copied().unzip();
        if let Ok(f) = fit_power_law(&x, &y) {
            let line = [f.x_range.0, f.x_range.1].iter().map(|&x| (x, f.prefactor * x.powf(f.exponent))).collect();
            p.add(format!("fit exponent {:.2}({:.0})", f.exponent, 100.0 * f.exponent_err), line, Mark::Dashed);
        }
    }
    p.add("xi(t_c)", data, Mark::Points);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in FigureKind::ALL {
            assert_eq!(k.name().parse::<FigureKind>().unwrap(), k);
        }
        assert!("fig9".parse::<FigureKind>().is_err());
    }

    #[test]
    fn plot_writes_csv_and_svg() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = Plot::new("t", "test", "x", "y").log(true, true);
        p.add("a", vec![(1.0, 1.0), (10.0, 0.01), (0.0, 5.0)], Mark::Both);
        let files = p.emit(dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(std::fs::read_to_string(&files[1]).unwrap().contains("<svg"));
        let empty = Plot::new("e", "empty", "x", "y");
        assert!(empty.emit(dir.path()).unwrap().is_empty());
    }
}
