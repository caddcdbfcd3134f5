//! Minimal SVG line/point plotter.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Points,
}

pub struct Series<'a> {
    pub label: &'a str,
    pub y: &'a [f64],
    pub style: Style,
    pub color: &'a str,
}

/// Renders `series` against the shared abscissa `x`. Non-finite values are
/// skipped.
pub fn render(x: &[f64], series: &[Series], x_label: &str, y_label: &str) -> String {
    let finite = |v: &&f64| v.is_finite();
    let (x0, x1) = span(x.iter().filter(finite).copied());
    let (y0, y1) = span(series.iter().flat_map(|s| s.y.iter().filter(finite).copied()));
    let (y0, y1) = (y0.min(0.0), y1.max(y0.min(0.0) + 1e-12));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + ph - (v - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = x
            .iter()
            .zip(s.y)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (sx(*a), sy(*b)))
            .collect();
        match s.style {
            Style::Line => {
                let path: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                    path.join(" "),
                    s.color
                );
            }
            Style::Points => {
                for (a, b) in pts {
                    let _ = writeln!(out, r#"<circle cx="{a:.2}" cy="{b:.2}" r="2.5" fill="{}"/>"#, s.color);
                }
            }
        }
        let ly = TOP + 15.0 + 15.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" text-anchor="end" fill="{}">{}</text>"#,
            WIDTH - RIGHT - 8.0,
            s.color,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.into() }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series() {
        let x = [0.0, 1.0, 2.0];
        let svg = render(
            &x,
            &[
                Series { label: "model", y: &[0.0, 0.5, 0.25], style: Style::Line, color: "blue" },
                Series { label: "data", y: &[0.1, f64::NAN, 0.2], style: Style::Points, color: "black" },
            ],
            "x",
            "P<down>",
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("P&lt;down&gt;"));
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick(0.5), "0.5");
        assert_eq!(tick(450.0), "450");
        assert_eq!(tick(-0.0), "0");
        assert_eq!(tick(2e-5), "2.00e-5");
    }

    #[test]
    fn degenerate_ranges() {
        assert_eq!(span([1.0, 1.0].into_iter()), (0.5, 1.5));
        assert_eq!(span(std::iter::empty()), (0.0, 1.0));
    }
}
