use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Columns of a CSV file, looked up by header name.
pub struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.iter().map(str::to_owned).collect();
        let rows = r.records().map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect())).collect::<Result<_, _>>()?;
        Ok(Self { file: path.display().to_string(), headers, rows })
    }

    fn index(&self, column: &str) -> Result<usize, CliError> {
        self.headers.iter().position(|h| h == column).ok_or_else(|| CliError::MissingColumn { file: self.file.clone(), column: column.into() })
    }

    pub fn text(&self, column: &str) -> Result<Vec<String>, CliError> {
        let i = self.index(column)?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    pub fn numbers(&self, column: &str) -> Result<Vec<f64>, CliError> {
        let i = self.index(column)?;
        self.rows
            .iter()
            .map(|r| r[i].parse().map_err(|_| CliError::Config(format!("{}: `{}` in column {column} is not a number", self.file, r[i]))))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stroke {
    Solid,
    Dotted,
    Hidden,
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    stroke: Stroke,
    markers: bool,
}

struct Figure {
    title: String,
    xlabel: String,
    ylabel: String,
    log_x: bool,
    series: Vec<Series>,
    notes: Vec<String>,
}

const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 640.0;
const H: f64 = 440.0;
const L: f64 = 80.0;
const R: f64 = 170.0;
const T: f64 = 40.0;
const B: f64 = 60.0;

fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

impl Figure {
    fn svg(&self) -> String {
        let pts: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).filter(|p| p.1 > 0.0).collect();
        let (ymin, ymax) = decades(pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.1).fold(0.0, f64::max));
        let fx = |x: f64| if self.log_x { x.log10() } else { x };
        let xs: Vec<f64> = pts.iter().map(|p| fx(p.0)).collect();
        let (mut xmin, mut xmax) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        if self.log_x {
            (xmin, xmax) = decades(10f64.powf(xmin), 10f64.powf(xmax));
        } else {
            (xmin, xmax) = (xmin.floor() - 0.5, xmax.ceil() + 0.5);
        }
        let px = |x: f64| L + (fx(x) - xmin) / (xmax - xmin) * (W - L - R);
        let py = |y: f64| H - B - (y.log10() - ymin) / (ymax - ymin) * (H - T - B);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (L + W - R) / 2.0, self.title);
        let _ = writeln!(s, r#"<rect x="{L}" y="{T}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - L - R, H - T - B);
        for e in ymin as i32..=ymax as i32 {
            let y = py(10f64.powi(e));
            let _ = writeln!(s, r##"<line x1="{L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, W - R);
            let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{e}</text>"#, L - 6.0, y + 4.0);
        }
        if self.log_x {
            for e in xmin as i32..=xmax as i32 {
                let x = px(10f64.powi(e));
                let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{T}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, H - B);
                let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{e}</text>"#, H - B + 16.0);
            }
        } else {
            for k in (xmin.ceil() as i64)..=(xmax.floor() as i64) {
                let x = px(k as f64);
                let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#, H - B + 16.0);
            }
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (L + W - R) / 2.0, H - 18.0, self.xlabel);
        let _ = writeln!(s, r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#, (T + H - B) / 2.0, (T + H - B) / 2.0, self.ylabel);
        for (k, ser) in self.series.iter().enumerate() {
            let c = COLOURS[k % COLOURS.len()];
            let path: Vec<String> = ser.points.iter().filter(|p| p.1 > 0.0).map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
            let dash = if ser.stroke == Stroke::Dotted { r#" stroke-dasharray="2,4""# } else { "" };
            if ser.stroke != Stroke::Hidden {
                let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"{dash}/>"#, path.join(" "));
            }
            if ser.markers {
                for &(x, y) in ser.points.iter().filter(|p| p.1 > 0.0) {
                    let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, px(x), py(y));
                }
            }
            let ly = T + 14.0 + 18.0 * k as f64;
            let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="1.5"{dash}/>"#, W - R + 10.0, W - R + 34.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - R + 40.0, ly + 4.0, ser.label);
        }
        for (k, note) in self.notes.iter().enumerate() {
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, L + 8.0, T + 16.0 + 16.0 * k as f64, note);
        }
        s.push_str("</svg>\n");
        s
    }
}

fn grouped<K: Ord + Clone>(keys: &[K], x: &[f64], y: &[f64]) -> BTreeMap<K, Vec<(f64, f64)>> {
    let mut m: BTreeMap<K, Vec<(f64, f64)>> = BTreeMap::new();
    for ((k, &a), &b) in keys.iter().zip(x).zip(y) {
        m.entry(k.clone()).or_default().push((a, b));
    }
    for v in m.values_mut() {
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
    }
    m
}

fn benchmark_name(dir: &Path) -> String {
    fs::read_to_string(dir.join("config.txt"))
        .ok()
        .and_then(|t| t.lines().find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == "benchmark").map(|(_, v)| v.trim().to_owned())))
        .unwrap_or_else(|| "run".into())
}

/// Error against `1/Tol`: one point per replica plus the `Tol` line.
fn error_figure(t: &Table, bench: &str) -> Result<Figure, CliError> {
    let (mode, tol, err) = (t.text("mode")?, t.numbers("Tol")?, t.numbers("error")?);
    let inv: Vec<f64> = tol.iter().map(|v| 1.0 / v).collect();
    let mut series: Vec<Series> = grouped(&mode, &inv, &err)
        .into_iter()
        .map(|(m, points)| Series { label: m, points, stroke: Stroke::Hidden, markers: true })
        .collect();
    let mut line: Vec<(f64, f64)> = tol.iter().map(|&v| (1.0 / v, v)).collect();
    line.sort_by(|p, q| p.0.total_cmp(&q.0));
    line.dedup();
    series.push(Series { label: "Tol".into(), points: line, stroke: Stroke::Dotted, markers: false });
    Ok(Figure { title: format!("{bench}: H1 error"), xlabel: "1/Tol".into(), ylabel: "error".into(), log_x: true, series, notes: vec![] })
}

/// Mean cost against `1/Tol` with a `Tol^-2` guide and the fitted slopes from the CSV.
fn cost_figure(t: &Table, bench: &str) -> Result<Figure, CliError> {
    let (mode, tol, cost, slope) = (t.text("mode")?, t.numbers("Tol")?, t.numbers("mean_cost")?, t.numbers("fitted_slope")?);
    let inv: Vec<f64> = tol.iter().map(|v| 1.0 / v).collect();
    let groups = grouped(&mode, &inv, &cost);
    let notes = groups.keys().map(|m| {
        let i = mode.iter().position(|x| x == m).expect("group key comes from the column");
        format!("{m}: slope {:.3}", slope[i])
    });
    let notes = notes.collect();
    let mut series: Vec<Series> = groups.into_iter().map(|(m, points)| Series { label: m, points, stroke: Stroke::Solid, markers: true }).collect();
    let top = cost.iter().copied().fold(0.0, f64::max);
    let (xlo, xhi) = (inv.iter().copied().fold(f64::INFINITY, f64::min), inv.iter().copied().fold(0.0, f64::max));
    let guide = vec![(xlo, top * (xlo / xhi).powi(2)), (xhi, top)];
    series.push(Series { label: "Tol^-2".into(), points: guide, stroke: Stroke::Dotted, markers: false });
    Ok(Figure { title: format!("{bench}: cost"), xlabel: "1/Tol".into(), ylabel: "mean cost".into(), log_x: true, series, notes })
}

fn samples_figure(t: &Table, bench: &str) -> Result<Figure, CliError> {
    let (mode, tol, level, m) = (t.text("mode")?, t.numbers("Tol")?, t.numbers("level")?, t.numbers("avg_M")?);
    let keys: Vec<String> = mode.iter().zip(&tol).map(|(a, b)| format!("{a} Tol={b}")).collect();
    let series = grouped(&keys, &level, &m).into_iter().map(|(k, points)| Series { label: k, points, stroke: Stroke::Solid, markers: true }).collect();
    Ok(Figure { title: format!("{bench}: samples per level"), xlabel: "level".into(), ylabel: "M".into(), log_x: false, series, notes: vec![] })
}

fn dof_figure(t: &Table, bench: &str) -> Result<Figure, CliError> {
    let (level, n, slope) = (t.numbers("level")?, t.numbers("max_N")?, t.numbers("fitted_slope")?);
    let points = level.iter().copied().zip(n.iter().copied()).collect();
    Ok(Figure {
        title: format!("{bench}: maximal unknowns"),
        xlabel: "level".into(),
        ylabel: "max N".into(),
        log_x: false,
        series: vec![Series { label: "max N".into(), points, stroke: Stroke::Solid, markers: true }],
        notes: vec![format!("slope {:.3}", slope[0])],
    })
}

/// Renders SVG plots from the CSV files in `dir`; returns the files written.
pub fn plot_dir(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let bench = benchmark_name(dir);
    type Builder = fn(&Table, &str) -> Result<Figure, CliError>;
    let jobs: [(&str, &str, Builder); 4] = [
        ("errors.csv", "errors", error_figure),
        ("costs.csv", "costs", cost_figure),
        ("samples.csv", "samples", samples_figure),
        ("dofscaling.csv", "dofscaling", dof_figure),
    ];
    let mut written = Vec::new();
    for (file, stem, build) in jobs {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let table = Table::read(&path)?;
        if table.is_empty() {
            log::warn!("{}: empty sweep, nothing to plot", path.display());
            continue;
        }
        let out = dir.join(format!("{stem}_{bench}.svg"));
        fs::write(&out, build(&table, &bench)?.svg())?;
        written.push(out);
    }
    Ok(written)
}
