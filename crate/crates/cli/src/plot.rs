//! Standalone SVG line plots and heatmaps on a fixed 960×540 canvas.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Line,
    Heatmap,
}

/// A parsed CSV: optional header and a rectangular block of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut header = None;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let fields: Vec<&str> = record.iter().map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| if f.is_empty() { Ok(f64::NAN) } else { f.parse::<f64>() }).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => header = Some(fields.iter().map(|s| s.to_string()).collect()),
            Err(_) => {
                return Err(CliError::Data(format!("{}: line {} is not numeric", path.display(), i + 1)));
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no numeric rows", path.display())));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(CliError::Data(format!("{}: rows have different lengths", path.display())));
    }
    Ok(Table { header, rows })
}

/// Round step (1, 2 or 5 × 10^k) giving roughly `target` ticks over `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    if !(span > 0.0) {
        return 1.0;
    }
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi <= lo {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(svg, r##"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}" fill="none" stroke="#000"/>"##, x1 - x0, y1 - y0);
        for t in ticks(self.x.0, self.x.1) {
            let p = self.px(t);
            let _ = writeln!(svg, r##"<line x1="{p:.1}" y1="{y1}" x2="{p:.1}" y2="{:.1}" stroke="#000"/>"##, y1 + 5.0);
            let _ = writeln!(svg, r#"<text x="{p:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, y1 + 20.0, label(t));
        }
        for t in ticks(self.y.0, self.y.1) {
            let p = self.py(t);
            let _ = writeln!(svg, r##"<line x1="{:.1}" y1="{p:.1}" x2="{x0}" y2="{p:.1}" stroke="#000"/>"##, x0 - 5.0);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 8.0, p + 4.0, label(t));
        }
        let _ = writeln!(svg, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0, escape(xlabel));
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open_svg() -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>"##);
    svg
}

/// Series to draw: with a header, the first column is x and the rest are
/// named series; a single row or single column is one series over its index.
fn series(table: &Table) -> (Vec<f64>, Vec<(String, Vec<f64>)>, String) {
    let rows = &table.rows;
    let ncol = rows[0].len();
    if let Some(h) = &table.header {
        if ncol >= 2 {
            let x = rows.iter().map(|r| r[0]).collect();
            let s = (1..ncol).map(|c| (h[c].clone(), rows.iter().map(|r| r[c]).collect())).collect();
            return (x, s, h[0].clone());
        }
    }
    let y: Vec<f64> = if rows.len() == 1 { rows[0].clone() } else { rows.iter().map(|r| r[0]).collect() };
    let name = table.header.as_ref().map_or("value".to_string(), |h| h[0].clone());
    ((0..y.len()).map(|i| i as f64).collect(), vec![(name, y)], "index".into())
}

pub fn line_svg(table: &Table, title: &str) -> String {
    let (x, series, xlabel) = series(table);
    let frame = Frame {
        x: finite_range(x.iter().copied()),
        y: finite_range(series.iter().flat_map(|(_, s)| s.iter().copied())),
    };
    let mut svg = open_svg();
    let ylabel = if series.len() == 1 { series[0].0.clone() } else { String::new() };
    frame.axes(&mut svg, title, &xlabel, &ylabel);
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (xi, yi) in x.iter().zip(ys) {
            if !(xi.is_finite() && yi.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, frame.px(*xi), frame.py(*yi));
            pen_down = true;
        }
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        if series.len() > 1 {
            let ly = TOP + 16.0 + 16.0 * k as f64;
            let lx = WIDTH - RIGHT - 150.0;
            let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Grayscale-to-blue ramp: low values dark, high values bright.
fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 * t.powf(1.5)).round() as u8;
    let g = (255.0 * t).round() as u8;
    let b = (80.0 + 175.0 * t.sqrt()).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

pub fn heatmap_svg(table: &Table, title: &str) -> String {
    let rows = &table.rows;
    let (nr, nc) = (rows.len(), rows[0].len());
    let (lo, hi) = finite_range(rows.iter().flatten().copied());
    let frame = Frame {
        x: (0.0, nc as f64),
        y: (nr as f64, 0.0),
    };
    let mut svg = open_svg();
    // columns are merged (max) so that no cell is narrower than one pixel
    let plot_w = WIDTH - LEFT - RIGHT;
    let group = ((nc as f64 / plot_w).ceil() as usize).max(1);
    for (r, row) in rows.iter().enumerate() {
        let y0 = frame.py(r as f64);
        let y1 = frame.py(r as f64 + 1.0);
        for c0 in (0..nc).step_by(group) {
            let c1 = (c0 + group).min(nc);
            let v = row[c0..c1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let x0 = frame.px(c0 as f64);
            let x1 = frame.px(c1 as f64);
            let _ = writeln!(
                svg,
                r#"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                y0.min(y1),
                x1 - x0,
                (y1 - y0).abs(),
                color((v - lo) / (hi - lo))
            );
        }
    }
    frame.axes(&mut svg, title, "column", "row");
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(csv_path: &Path, kind: PlotKind, svg_path: &Path, title: &str) -> Result<(), CliError> {
    let table = read_table(csv_path)?;
    let svg = match kind {
        PlotKind::Line => line_svg(&table, title),
        PlotKind::Heatmap => heatmap_svg(&table, title),
    };
    std::fs::write(svg_path, svg).map_err(|e| CliError::Data(format!("{}: {e}", svg_path.display())))
}
