//! Self-contained SVG chart writer: line charts and stacked bars, no
//! external renderer. Output is deterministic for identical inputs.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn axis_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.08;
    (lo - pad, hi + pad)
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = write!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/><text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(svg: &mut String, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = write!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x.0 + f * (x.1 - x.0);
        let yv = y.0 + f * (y.1 - y.0);
        let xp = x0 + f * (x1 - x0);
        let yp = y0 - f * (y0 - y1);
        let _ = write!(
            svg,
            r#"<text x="{xp}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{xv:.3}</text>"#,
            y0 + 16.0
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{yp}" font-family="sans-serif" font-size="11" text-anchor="end">{yv:.3}</text>"#,
            x0 - 6.0
        );
        let _ = write!(
            svg,
            r##"<line x1="{x0}" y1="{yp}" x2="{x1}" y2="{yp}" stroke="#dddddd" stroke-width="0.5"/>"##
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        x0 + (x1 - x0) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        y1 + (y0 - y1) / 2.0,
        y1 + (y0 - y1) / 2.0,
        escape(y_label)
    );
}

/// Multi-series line chart with point markers and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut svg = header(title);
    let xb = axis_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yb = axis_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    axes(&mut svg, x_label, y_label, xb, yb);
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let px = |v: f64| x0 + (v - xb.0) / (xb.1 - xb.0) * (x1 - x0);
    let py = |v: f64| y0 - (v - yb.0) / (yb.1 - yb.0) * (y0 - y1);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            path.join(" ")
        );
        for (x, y) in &s.points {
            let _ = write!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(*x),
                py(*y)
            );
        }
        let ly = MARGIN_T + 16.0 * i as f64;
        let _ = write!(
            svg,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            x1 + 10.0,
            ly,
            x1 + 24.0,
            ly + 9.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>");
    svg
}

/// Stacked bars: one bar per category, one segment per phase.
pub fn stacked_bar_chart(
    title: &str,
    y_label: &str,
    categories: &[String],
    segment_labels: &[String],
    values: &[Vec<f64>],
) -> String {
    let mut svg = header(title);
    let totals: Vec<f64> = values.iter().map(|v| v.iter().sum()).collect();
    let max = totals.iter().copied().fold(1e-12, f64::max) * 1.08;
    axes(&mut svg, "", y_label, (0.0, categories.len() as f64), (0.0, max));
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let band = (x1 - x0) / categories.len() as f64;
    for (c, cat) in categories.iter().enumerate() {
        let mut acc = 0.0;
        for (s, _) in segment_labels.iter().enumerate() {
            let v = values[c][s];
            let h = v / max * (y0 - y1);
            let yb = y0 - acc / max * (y0 - y1);
            let _ = write!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0 + c as f64 * band + band * 0.2,
                yb - h,
                band * 0.6,
                h,
                PALETTE[s % PALETTE.len()]
            );
            acc += v;
        }
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            x0 + c as f64 * band + band * 0.5,
            y0 + 16.0,
            escape(cat)
        );
    }
    for (s, label) in segment_labels.iter().enumerate() {
        let ly = MARGIN_T + 16.0 * s as f64;
        let _ = write!(
            svg,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            x1 + 10.0,
            ly,
            PALETTE[s % PALETTE.len()],
            x1 + 24.0,
            ly + 9.0,
            escape(label)
        );
    }
    svg.push_str("</svg>");
    svg
}
