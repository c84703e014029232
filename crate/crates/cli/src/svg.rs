//! Self-contained SVG figures: node heatmaps and line plots.
//!
//! Heatmaps draw one rectangle per node inside the domain. Values are mapped
//! linearly onto a 256-step color map obtained by sampling the piecewise
//! linear ramp through [`COLOR_ANCHORS`] (dark blue, teal, green, yellow) at
//! `k / 255`, `k = 0..=255`. Output depends only on the input data.

use std::fmt::Write;

/// Anchor colors of the map, evenly spaced on `[0, 1]`.
pub const COLOR_ANCHORS: [[u8; 3]; 5] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
];

pub const COLOR_STEPS: usize = 256;

/// The color of step `k` in `0..256`.
pub fn color_step(k: usize) -> [u8; 3] {
    let t = k.min(COLOR_STEPS - 1) as f64 / (COLOR_STEPS - 1) as f64;
    let segments = COLOR_ANCHORS.len() - 1;
    let pos = t * segments as f64;
    let s = (pos.floor() as usize).min(segments - 1);
    let f = pos - s as f64;
    let (a, b) = (COLOR_ANCHORS[s], COLOR_ANCHORS[s + 1]);
    let mut c = [0u8; 3];
    for i in 0..3 {
        c[i] = (a[i] as f64 + f * (b[i] as f64 - a[i] as f64)).round() as u8;
    }
    c
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const CELL: f64 = 12.0;
const MARGIN: f64 = 40.0;

/// Heatmap of an `n x n` row-major field; `None` nodes are left blank.
/// Rows are drawn with `j` increasing upward.
pub fn heatmap(n: usize, values: &[Option<f64>], title: &str) -> String {
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let side = n as f64 * CELL;
    let width = side + 2.0 * MARGIN + 60.0;
    let height = side + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    for (k, v) in values.iter().enumerate() {
        let Some(v) = *v else { continue };
        let (i, j) = (k % n, k / n);
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        let step = (t * (COLOR_STEPS - 1) as f64).round() as usize;
        let x = MARGIN + i as f64 * CELL;
        let y = MARGIN + (n - 1 - j) as f64 * CELL;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
            hex(color_step(step))
        );
    }
    // color bar
    let bx = MARGIN + side + 15.0;
    for k in 0..COLOR_STEPS {
        let y = MARGIN + side * (1.0 - (k + 1) as f64 / COLOR_STEPS as f64);
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{y:.3}" width="12" height="{:.3}" fill="{}"/>"#,
            side / COLOR_STEPS as f64 + 0.01,
            hex(color_step(k))
        );
    }
    if lo.is_finite() {
        let _ = writeln!(
            s,
            r#"<text x="{bx}" y="{}" font-family="sans-serif" font-size="10">{hi:.4e}</text>"#,
            MARGIN - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{bx}" y="{}" font-family="sans-serif" font-size="10">{lo:.4e}</text>"#,
            MARGIN + side + 12.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One named series of a line plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
}

const PLOT_W: f64 = 480.0;
const PLOT_H: f64 = 320.0;
const SERIES_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line plot with one polyline per series. Points that are not finite, or
/// not positive on a log axis, are dropped.
pub fn line_plot(spec: &PlotSpec, series: &[Series]) -> String {
    let tx = |v: f64| if spec.log_x { v.log10() } else { v };
    let ty = |v: f64| if spec.log_y { v.log10() } else { v };
    let usable = |x: f64, y: f64| {
        x.is_finite() && y.is_finite() && (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0)
    };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.x.iter()
                .zip(&s.y)
                .filter(|(&x, &y)| usable(x, y))
                .map(|(&x, &y)| (tx(x), ty(y)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = all.fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let left = 80.0;
    let top = 40.0;
    let width = left + PLOT_W + 160.0;
    let height = top + PLOT_H + 60.0;
    let px = |x: f64| left + (x - x0) / (x1 - x0) * PLOT_W;
    let py = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * PLOT_H;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(&spec.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    let tick = |v: f64, log: bool| {
        if log {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3e}")
        }
    };
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            px(xv),
            top + PLOT_H + 16.0,
            tick(xv, spec.log_x)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(yv) + 3.0,
            tick(yv, spec.log_y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        left + PLOT_W / 2.0,
        top + PLOT_H + 40.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        top + PLOT_H / 2.0,
        top + PLOT_H / 2.0,
        escape(&spec.y_label)
    );
    for (idx, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = SERIES_COLORS[idx % SERIES_COLORS.len()];
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = top + 14.0 + 16.0 * idx as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            left + PLOT_W + 10.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
