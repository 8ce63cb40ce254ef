//! Minimal SVG line plots of regret against horizon.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_Y: f64 = 45.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One named curve of `(T, mean, stderr)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the curves with a log-scaled horizon axis, a linear regret axis
/// and `±stderr` whiskers.
pub fn render_svg(title: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x_lo, mut x_hi, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(t, m, se) in pts {
        if t > 0.0 {
            x_lo = x_lo.min(t.log10());
            x_hi = x_hi.max(t.log10());
        }
        let top = if se.is_finite() { m + se } else { m };
        if top.is_finite() {
            y_hi = y_hi.max(top);
        }
    }
    if !x_lo.is_finite() {
        (x_lo, x_hi) = (0.0, 1.0);
    }
    x_lo = x_lo.floor();
    x_hi = x_hi.ceil().max(x_lo + 1.0);
    if y_hi <= 0.0 {
        y_hi = 1.0;
    }
    y_hi *= 1.05;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let sx = |t: f64| MARGIN_LEFT + (t.log10() - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN_Y - y / y_hi * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="25" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    let (left, right) = (MARGIN_LEFT, MARGIN_LEFT + plot_w);
    let (top, bottom) = (MARGIN_Y, HEIGHT - MARGIN_Y);
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="black"/>"#
    );
    for e in x_lo as i32..=x_hi as i32 {
        let x = sx(10f64.powi(e));
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{bottom}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">1e{e}</text>"#,
            bottom + 5.0,
            bottom + 18.0
        );
    }
    for k in 0..=5 {
        let v = y_hi * k as f64 / 5.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{left}" y2="{y}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{v:.3}</text>"#,
            left - 5.0,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">T</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">regret</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0 > 0.0 && p.1.is_finite())
            .map(|&(t, m, _)| format!("{:.2},{:.2}", sx(t), sy(m)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        for &(t, m, se) in s.points.iter().filter(|p| p.0 > 0.0 && p.1.is_finite()) {
            let x = sx(t);
            let _ = writeln!(
                svg,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                sy(m)
            );
            if se.is_finite() && se > 0.0 {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    sy((m - se).max(0.0)),
                    sy(m + se)
                );
            }
        }
        let ly = MARGIN_Y + 15.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            right + 15.0,
            right + 35.0,
            right + 40.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
