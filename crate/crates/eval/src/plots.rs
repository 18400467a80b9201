//! SVG plots and the CSV series behind them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::Stats;
use crate::report::{EvalReport, InstanceRecord, ALL};
use crate::runner::ConfidenceProfile;
use crate::{EvalError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const M: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 55.0); // left, right, top, bottom
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

impl Plot {
    pub fn to_svg(&self) -> String {
        let pts = self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let (x0, x1) = nice_range(x0, x1);
        let (y0, y1) = nice_range(y0, y1);
        let (pw, ph) = (W - M.0 - M.1, H - M.2 - M.3);
        let sx = |x: f64| M.0 + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| M.2 + ph - (y - y0) / (y1 - y0) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#,
            M.0, M.2
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(xv),
                H - M.3 + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                M.0 - 6.0,
                sy(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            M.0 + pw / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            M.2 + ph / 2.0,
            M.2 + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, series) in self.series.iter().enumerate() {
            let c = COLORS[i % COLORS.len()];
            let path: Vec<String> = series
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
            for p in &path {
                let (x, y) = p.split_once(',').expect("pair");
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{c}"/>"#);
            }
            let ly = M.2 + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{ly}" fill="{c}" text-anchor="end">{}</text>"#,
                W - M.1 - 8.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Long format: `series,x,y`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["series", &self.x_label, &self.y_label])?;
        for s in &self.series {
            for &(x, y) in &s.points {
                w.write_record([s.name.clone(), x.to_string(), y.to_string()])?;
            }
        }
        crate::report::finish(w)
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Writes `<stem>.svg` and `<stem>.csv`.
pub fn emit_plot(plot: &Plot, out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let svg = out_dir.join(format!("{stem}.svg"));
    let csv = out_dir.join(format!("{stem}.csv"));
    std::fs::write(&svg, plot.to_svg())?;
    std::fs::write(&csv, plot.to_csv()?)?;
    Ok(vec![svg, csv])
}

/// A binned sweep: bin centre, statistics of the records inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBin {
    pub lo: f64,
    pub hi: f64,
    pub stats: Stats,
}

/// Splits records into `bins` equal-width intervals of `key`.
pub fn sweep(
    records: &[InstanceRecord],
    key: impl Fn(&InstanceRecord) -> f64,
    bins: usize,
) -> Vec<SweepBin> {
    let vals: Vec<f64> = records.iter().map(&key).filter(|v| v.is_finite()).collect();
    if vals.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(1e-9);
    let mut errs = vec![Vec::new(); bins];
    for r in records {
        let v = key(r);
        if v.is_finite() {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            errs[b].push(r.error_m);
        }
    }
    errs.iter()
        .enumerate()
        .filter_map(|(b, e)| {
            Stats::of(e).map(|stats| SweepBin {
                lo: lo + b as f64 * width,
                hi: lo + (b + 1) as f64 * width,
                stats,
            })
        })
        .collect()
}

fn sweep_plot(
    report: &EvalReport,
    title: &str,
    x_label: &str,
    key: impl Fn(&InstanceRecord) -> f64,
) -> Plot {
    let bins = sweep(&report.records, key, 10);
    let mid = |b: &SweepBin| 0.5 * (b.lo + b.hi);
    let name = report
        .records
        .first()
        .map(|r| r.estimator.clone())
        .unwrap_or_default();
    Plot {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "error_m".into(),
        series: vec![
            Series {
                name: format!("{name} rmse"),
                points: bins.iter().map(|b| (mid(b), b.stats.rmse)).collect(),
            },
            Series {
                name: format!("{name} mae"),
                points: bins.iter().map(|b| (mid(b), b.stats.mae)).collect(),
            },
        ],
    }
}

pub fn confidence_plot(profile: &ConfidenceProfile) -> Plot {
    const NAMES: [&str; 5] = ["r", "sin_theta", "cos_theta", "sin_phi", "cos_phi"];
    let mut pts = profile.points.clone();
    pts.sort_by(|a, b| a.min_distance_m.total_cmp(&b.min_distance_m));
    Plot {
        title: "Confidence against distance to the jammer".into(),
        x_label: "min_jammer_distance_m".into(),
        y_label: "alpha".into(),
        series: (0..5)
            .map(|k| Series {
                name: format!("alpha_{}", NAMES[k]),
                points: pts.iter().map(|p| (p.min_distance_m, p.alpha[k])).collect(),
            })
            .collect(),
    }
}

/// Error trends, parameter sweeps and, for confidence models, α profiles.
pub fn emit_plots(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.records.is_empty() || report.get(ALL).is_none() {
        return Err(EvalError::Invalid(format!(
            "empty report: missing splits [{ALL}]"
        )));
    }
    let mut files = Vec::new();
    std::fs::create_dir_all(out_dir)?;
    let agg = out_dir.join("aggregates.csv");
    std::fs::write(&agg, report.aggregates_csv()?)?;
    files.push(agg);
    let plots = [
        (
            "error_vs_min_distance",
            sweep_plot(
                report,
                "Error against closest approach",
                "min_jammer_distance_m",
                |r| r.min_jammer_distance_m,
            ),
        ),
        (
            "error_vs_max_noise",
            sweep_plot(
                report,
                "Error against strongest noise floor",
                "max_noise_dbm",
                |r| r.max_noise_dbm,
            ),
        ),
        (
            "sweep_sigma",
            sweep_plot(report, "Error against shadowing", "sigma_db", |r| {
                r.sigma_db
            }),
        ),
        (
            "sweep_tx_power",
            sweep_plot(report, "Error against jammer power", "tx_power_dbm", |r| {
                r.tx_power_dbm
            }),
        ),
        (
            "sweep_node_count",
            sweep_plot(report, "Error against node count", "node_count", |r| {
                r.node_count as f64
            }),
        ),
    ];
    for (stem, plot) in &plots {
        files.extend(emit_plot(plot, out_dir, stem)?);
    }
    let profile = ConfidenceProfile::from_report(report);
    if !profile.points.is_empty() {
        files.extend(emit_plot(
            &confidence_plot(&profile),
            out_dir,
            "confidence_vs_distance",
        )?);
    }
    Ok(files)
}
