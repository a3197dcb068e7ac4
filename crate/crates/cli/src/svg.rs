//! Minimal self-contained SVG line/scatter plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    /// Tick positions (in data units).
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut t = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                t.push(10f64.powf(e));
                e += step;
            }
            t
        } else {
            let raw = (self.hi - self.lo) / 6.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
            let mut t = Vec::new();
            let mut v = (self.lo / step).ceil() * step;
            while v <= self.hi + step * 1e-9 {
                t.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
                v += step;
            }
            t
        }
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let xa = Axis::fit(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), self.log_x);
        let ya = Axis::fit(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), self.log_y);
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |f: f64| MARGIN_L + f * pw;
        let py = |f: f64| MARGIN_T + (1.0 - f) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>"##
        );
        for t in xa.ticks() {
            if let Some(f) = xa.frac(t).filter(|f| (-1e-9..=1.0 + 1e-9).contains(f)) {
                let x = px(f);
                let _ = writeln!(
                    s,
                    r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                    MARGIN_T + ph,
                    MARGIN_T + ph + 5.0,
                    MARGIN_T + ph + 19.0,
                    label(t)
                );
            }
        }
        for t in ya.ticks() {
            if let Some(f) = ya.frac(t).filter(|f| (-1e-9..=1.0 + 1e-9).contains(f)) {
                let y = py(f);
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_L}" y2="{y:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                    MARGIN_L - 5.0,
                    MARGIN_L - 8.0,
                    y + 4.0,
                    label(t)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<(f64, f64)> =
                series.points.iter().filter_map(|&(x, y)| Some((px(xa.frac(x)?), py(ya.frac(y)?)))).collect();
            match series.style {
                Style::Line => {
                    let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                Style::Markers => {
                    for (x, y) in &pts {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#);
                    }
                }
            }
            let ly = MARGIN_T + 16.0 + 16.0 * k as f64;
            let lx = MARGIN_L + pw - 170.0;
            let _ = writeln!(
                s,
                r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="4" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                ly - 4.0,
                lx + 18.0,
                ly + 1.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_skips_nonpositive_on_log_axes() {
        let plot = Plot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series { name: "line".into(), points: vec![(1e-4, 1e-2), (1.0, 1.0)], style: Style::Line },
                Series { name: "pts".into(), points: vec![(0.0, 1.0), (0.01, 0.1)], style: Style::Markers },
            ],
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(plot.render(), svg);
    }

    #[test]
    fn linear_ticks_are_round() {
        let a = Axis { lo: 0.0, hi: 7.3, log: false };
        assert_eq!(a.ticks(), vec![0.0, 2.0, 4.0, 6.0]);
    }
}
