//! Minimal SVG charts: log-log line plots and scatter plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// One polyline per series, both axes logarithmic.
    LogLog,
    /// One dot per point, linear axes.
    Scatter,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Self { lo: 0.0, hi: 1.0, log };
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions as fractions of the axis: every power of ten for a
    /// log axis spanning at least one decade, five even steps otherwise.
    fn ticks(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        if self.log && self.hi.floor() >= self.lo.ceil() {
            let decades = (self.lo.ceil() as i32)..=(self.hi.floor() as i32);
            decades.map(|e| (e as f64 - self.lo) / span).collect()
        } else {
            (0..=4).map(|k| k as f64 / 4.0).collect()
        }
    }

    fn label(&self, f: f64) -> String {
        let v = self.lo + f * (self.hi - self.lo);
        if self.log {
            if (v - v.round()).abs() < 1e-9 {
                format!("1e{}", v.round())
            } else {
                format!("{:.1e}", 10f64.powf(v))
            }
        } else {
            format!("{v:.3}")
        }
    }
}

fn usable(style: Style, p: &(f64, f64)) -> bool {
    p.0.is_finite() && p.1.is_finite() && (style == Style::Scatter || (p.0 > 0.0 && p.1 > 0.0))
}

/// Renders `series` as a standalone SVG document.
pub fn render(title: &str, x_label: &str, y_label: &str, series: &[Series], style: Style) -> String {
    let log = style == Style::LogLog;
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| usable(style, p));
    let xa = Axis::fit(pts().map(|p| p.0), log);
    let ya = Axis::fit(pts().map(|p| p.1), log);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |v: f64| MARGIN_L + xa.frac(v) * pw;
    let sy = |v: f64| MARGIN_T + (1.0 - ya.frac(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(title)
    );
    let _ =
        writeln!(s, r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for f in xa.ticks() {
        let x = MARGIN_L + f * pw;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
            MARGIN_T + ph,
            MARGIN_T + ph - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            MARGIN_T + ph + 15.0,
            xa.label(f)
        );
    }
    for f in ya.ticks() {
        let y = MARGIN_T + (1.0 - f) * ph;
        let _ =
            writeln!(s, r#"<line x1="{MARGIN_L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/>"#, MARGIN_L + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{y:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN_L - 5.0,
            ya.label(f)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<(f64, f64)> =
            ser.points.iter().filter(|p| usable(style, p)).map(|&(x, y)| (sx(x), sy(y))).collect();
        match style {
            Style::LogLog => {
                let list: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    list.join(" ")
                );
            }
            Style::Scatter => {
                let _ = writeln!(s, r#"<g fill="{color}">"#);
                for (x, y) in &coords {
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5"/>"#);
                }
                let _ = writeln!(s, "</g>");
            }
        }
        let ly = MARGIN_T + 12.0 + 16.0 * k as f64;
        let lx = WIDTH - MARGIN_R + 10.0;
        let _ = writeln!(s, r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="4" fill="{color}"/>"#, ly - 4.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" font-family="sans-serif" font-size="10">{}</text>"#,
            lx + 16.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
