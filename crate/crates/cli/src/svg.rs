//! Minimal standalone SVG plots: scatter, polylines and cell heat maps on
//! linear axes.

use std::fmt::Write;

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// One set of axes with its content.
pub struct Panel {
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
    title: String,
    x_label: String,
    y_label: String,
    body: String,
    legend: Vec<(String, String)>,
}

impl Panel {
    pub fn new(width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Panel {
            width,
            height,
            x: widen(x),
            y: widen(y),
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            body: String::new(),
            legend: Vec::new(),
        }
    }

    pub fn title(mut self, t: &str) -> Self {
        self.title = t.into();
        self
    }

    pub fn labels(mut self, x: &str, y: &str) -> Self {
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - MARGIN_BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - MARGIN_TOP - MARGIN_BOTTOM)
    }

    pub fn points(&mut self, pts: &[[f64; 2]], fill: &str, radius: f64) {
        for p in pts {
            let _ = write!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{fill}"/>"#,
                self.px(p[0]),
                self.py(p[1])
            );
        }
        self.body.push('\n');
    }

    pub fn polyline(&mut self, pts: &[[f64; 2]], stroke: &str, width: f64, dash: Option<&str>) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", self.px(p[0]), self.py(p[1]))).collect();
        let dash = dash.map_or(String::new(), |d| format!(r#" stroke-dasharray="{d}""#));
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"{dash}/>"#,
            coords.join(" ")
        );
    }

    /// Axis-aligned rectangle in data coordinates with opacity `alpha`.
    pub fn cell(&mut self, lo: [f64; 2], hi: [f64; 2], fill: &str, alpha: f64) {
        let (x0, x1) = (self.px(lo[0]), self.px(hi[0]));
        let (y0, y1) = (self.py(hi[1]), self.py(lo[1]));
        let _ = write!(
            self.body,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="{alpha:.3}"/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    pub fn legend(&mut self, label: &str, color: &str) {
        self.legend.push((label.into(), color.into()));
    }

    fn render(&self, out: &mut String, dx: f64) {
        let _ = writeln!(out, r#"<g transform="translate({dx},0)">"#);
        let (l, r) = (MARGIN_LEFT, self.width - MARGIN_RIGHT);
        let (t, b) = (MARGIN_TOP, self.height - MARGIN_BOTTOM);
        let _ = writeln!(
            out,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="white" stroke="black"/>"#,
            r - l,
            b - t
        );
        let _ = writeln!(out, r#"<svg x="{l}" y="{t}" width="{}" height="{}" viewBox="{l} {t} {} {}" overflow="hidden">"#, r - l, b - t, r - l, b - t);
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        for v in ticks(self.x.0, self.x.1) {
            let x = self.px(v);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
                b + 4.0,
                b + 16.0,
                fmt_tick(v)
            );
        }
        for v in ticks(self.y.0, self.y.1) {
            let y = self.py(v);
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                l - 4.0,
                l - 6.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let mid_x = (l + r) / 2.0;
        let mid_y = (t + b) / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{mid_x}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
            t - 10.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{mid_x}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            self.height - 8.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{mid_y}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {mid_y})">{}</text>"#,
            escape(&self.y_label)
        );
        if !self.legend.is_empty() {
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="118" height="{}" fill="white" fill-opacity="0.85" stroke="#999999"/>"##,
                r - 126.0,
                t + 2.0,
                16.0 * self.legend.len() as f64 + 4.0
            );
        }
        for (k, (label, color)) in self.legend.iter().enumerate() {
            let y = t + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{y}" font-size="11">{}</text>"#,
                r - 120.0,
                y - 9.0,
                r - 106.0,
                escape(label)
            );
        }
        out.push_str("</g>\n");
    }
}

/// Panels laid out left to right in one document.
pub fn document(panels: &[Panel]) -> String {
    let width: f64 = panels.iter().map(|p| p.width).sum();
    let height = panels.iter().map(|p| p.height).fold(0.0, f64::max);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let mut dx = 0.0;
    for p in panels {
        p.render(&mut out, dx);
        dx += p.width;
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(0.13, 4.7);
        assert_eq!(t, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(ticks(-0.02, 0.03).iter().all(|v| (-0.02..=0.03).contains(v)));
        assert_eq!(fmt_tick(-0.0), "0");
        assert_eq!(fmt_tick(0.25), "0.25");
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn degenerate_ranges_are_widened() {
        let p = Panel::new(100.0, 100.0, (1.0, 1.0), (0.0, 1.0));
        assert!(p.px(1.0).is_finite());
    }
}
