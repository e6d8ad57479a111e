//! Minimal stacked-panel line plots.

use std::fmt::Write;

use handsoff::PiecewiseConstantControl;

const WIDTH: f64 = 820.0;
const PANEL_H: f64 = 190.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const GAP: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }

    /// Staircase of channel `i` of a piecewise-constant control.
    pub fn steps(name: impl Into<String>, u: &PiecewiseConstantControl, i: usize) -> Self {
        let mut points = Vec::with_capacity(2 * u.num_segments());
        for (t0, t1, v) in u.segments() {
            points.push((t0, v[i]));
            points.push((t1, v[i]));
        }
        Self::new(name, points)
    }
}

pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return (0.0, 1.0);
    }
    let pad = if hi - lo < 1e-12 { 1.0 } else { 0.08 * (hi - lo) };
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the panels stacked vertically on a shared time axis.
pub fn render(title: &str, panels: &[Panel]) -> String {
    let height = TOP + panels.len() as f64 * (PANEL_H + GAP) + 10.0;
    let (t0, t1) = range(
        panels
            .iter()
            .flat_map(|p| p.series.iter().flat_map(|s| s.points.iter().map(|q| q.0))),
    );
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let plot_w = WIDTH - LEFT - RIGHT;
    for (k, panel) in panels.iter().enumerate() {
        let y0 = TOP + k as f64 * (PANEL_H + GAP);
        let (lo, hi) = range(panel.series.iter().flat_map(|s| s.points.iter().map(|q| q.1)));
        let sx = |t: f64| LEFT + (t - t0) / (t1 - t0) * plot_w;
        let sy = |v: f64| y0 + PANEL_H - (v - lo) / (hi - lo) * PANEL_H;
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{y0}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{}">{}</text>"#,
            y0 - 6.0,
            escape(&panel.title)
        );
        for (v, anchor) in [(lo, y0 + PANEL_H), (hi, y0 + 10.0)] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{anchor}" text-anchor="end">{v:.3}</text>"#,
                LEFT - 6.0
            );
        }
        if lo < 0.0 && hi > 0.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" x2="{}" y1="{y}" y2="{y}" stroke="#bbb" stroke-width="0.8"/>"##,
                LEFT + plot_w,
                y = sy(0.0)
            );
        }
        for (j, s) in panel.series.iter().enumerate() {
            let color = COLORS[j % COLORS.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|q| q.1.is_finite())
                .map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
                pts.join(" ")
            );
            let lx = LEFT + plot_w - 150.0;
            let ly = y0 + 16.0 + 15.0 * j as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" x2="{}" y1="{}" y2="{}" stroke="{color}" stroke-width="1.6"{dash}/><text x="{}" y="{ly}">{}</text>"#,
                lx + 24.0,
                ly - 4.0,
                ly - 4.0,
                lx + 30.0,
                escape(&s.name)
            );
        }
    }
    for (v, anchor) in [(t0, "start"), (t1, "end")] {
        let x = if anchor == "start" { LEFT } else { WIDTH - RIGHT };
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}">t = {v:.3}</text>"#,
            height - 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}
