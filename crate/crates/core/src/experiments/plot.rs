use std::fmt::Write as _;
use std::path::Path;

use super::table::{ResultTable, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Success fraction against signal sparsity, one series per `k`.
    SuccessVsS,
    /// Mean recovery error against noise amplitude, one series per solver.
    ErrorVsEps,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn key_text(v: &Value) -> String {
    match v {
        Value::Real(x) => format!("{x}"),
        other => other.to_string(),
    }
}

/// Groups rows into series in order of first appearance, sorted by x.
fn collect_series(table: &ResultTable, x: &str, y: &str, group: &str, prefix: &str) -> Result<Vec<Series>> {
    let (xi, yi, gi) = (table.require(x)?, table.require(y)?, table.require(group)?);
    let mut out: Vec<Series> = Vec::new();
    for row in &table.rows {
        let label = format!("{prefix}{}", key_text(&row[gi]));
        let (Some(px), Some(py)) = (row[xi].as_f64(), row[yi].as_f64()) else {
            return Err(Error::Schema(format!("non-numeric '{x}' or '{y}' cell")));
        };
        if !(px.is_finite() && py.is_finite()) {
            continue;
        }
        match out.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((px, py)),
            None => out.push(Series {
                label,
                points: vec![(px, py)],
            }),
        }
    }
    for s in &mut out {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(out)
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn tick_label(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == r.trunc() && r.abs() < 1e6 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a standalone SVG line chart.
pub fn render_plot(table: &ResultTable, kind: PlotKind) -> Result<String> {
    let (series, x_label, y_label, y_range) = match kind {
        PlotKind::SuccessVsS => (
            collect_series(table, "s", "success_fraction", "k", "k = ")?,
            "Sparsity of signal s",
            "Probability of success",
            Some((0.0, 1.0)),
        ),
        PlotKind::ErrorVsEps => (
            collect_series(table, "eps_amp", "mean_error", "solver", "")?,
            "Noise level \u{3b5}",
            "Recovery error",
            None,
        ),
    };
    let points = series.iter().flat_map(|s| s.points.iter());
    let (x_lo, x_hi) = points.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    let (x_lo, x_hi) = span(x_lo, x_hi);
    let (y_lo, y_hi) = y_range.unwrap_or_else(|| {
        let top = points.fold(0.0f64, |acc, p| acc.max(p.1));
        span(0.0, top * 1.05)
    });

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let t = i as f64 / TICKS as f64;
        let xv = x_lo + t * (x_hi - x_lo);
        let yv = y_lo + t * (y_hi - y_lo);
        let (gx, gy) = (px(xv), py(yv));
        let _ = writeln!(
            svg,
            r##"<line x1="{gx:.2}" y1="{:.2}" x2="{gx:.2}" y2="{:.2}" stroke="black"/><text x="{gx:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{gy:.2}" x2="{LEFT}" y2="{gy:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            gy + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = TOP + 15.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(table: &ResultTable, kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render_plot(table, kind)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
