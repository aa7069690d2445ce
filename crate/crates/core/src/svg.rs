//! Minimal static SVG charts.
//!
//! Everything here is deterministic: no timestamps, no randomness beyond
//! hash-derived jitter, and fixed-precision coordinate formatting, so the
//! same inputs always produce byte-identical output.

use crate::seed;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 52.0;

const PALETTE: [&str; 7] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#17becf",
];

fn fmt(v: f64) -> String {
    format!("{:.2}", v)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Frame {
        let pad = |lo: f64, hi: f64| {
            if (hi - lo).abs() < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x_min, x_max) = pad(x_min, x_max);
        let (y_min, y_max) = pad(y_min, y_max);
        Frame {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn document(title: &str, x_label: &str, y_label: &str, body: &str) -> String {
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" "#,
            r#"viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            "\n",
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            "\n",
            r#"<text x="{tx}" y="22" text-anchor="middle" font-size="15">{title}</text>"#,
            "\n",
            r#"<text x="{tx}" y="{xl_y}" text-anchor="middle">{x_label}</text>"#,
            "\n",
            r#"<text x="16" y="{yl_y}" text-anchor="middle" transform="rotate(-90 16 {yl_y})">{y_label}</text>"#,
            "\n{body}</svg>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        xl_y = HEIGHT - 12.0,
        yl_y = HEIGHT / 2.0,
        title = esc(title),
        x_label = esc(x_label),
        y_label = esc(y_label),
        body = body,
    )
}

fn axes(frame: &Frame, body: &mut String) {
    body.push_str(&format!(
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        l = fmt(MARGIN_L),
        r = fmt(WIDTH - MARGIN_R),
        b = fmt(HEIGHT - MARGIN_B),
    ));
    body.push('\n');
    body.push_str(&format!(
        r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#,
        l = fmt(MARGIN_L),
        t = fmt(MARGIN_T),
        b = fmt(HEIGHT - MARGIN_B),
    ));
    body.push('\n');
    for i in 0..=4 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 4.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 4.0;
        body.push_str(&format!(
            r#"<text x="{x}" y="{y}" text-anchor="middle">{v}</text>"#,
            x = fmt(frame.px(fx)),
            y = fmt(HEIGHT - MARGIN_B + 18.0),
            v = fmt(fx),
        ));
        body.push('\n');
        body.push_str(&format!(
            r#"<text x="{x}" y="{y}" text-anchor="end">{v}</text>"#,
            x = fmt(MARGIN_L - 6.0),
            y = fmt(frame.py(fy) + 4.0),
            v = fmt(fy),
        ));
        body.push('\n');
    }
}

/// A named polyline for `line_chart`.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Multi-series line chart with a small legend. Used for ROC curves and the
/// elbow / silhouette k-selection curves.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let x_min = all.clone().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = all.clone().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = all.clone().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = all.map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(
        if x_min.is_finite() { x_min } else { 0.0 },
        if x_max.is_finite() { x_max } else { 1.0 },
        if y_min.is_finite() { y_min } else { 0.0 },
        if y_max.is_finite() { y_max } else { 1.0 },
    );
    let mut body = String::new();
    axes(&frame, &mut body);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(frame.px(x)), fmt(frame.py(y))))
            .collect();
        body.push_str(&format!(
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            color,
        ));
        body.push('\n');
        body.push_str(&format!(
            r#"<text x="{x}" y="{y}" fill="{c}">{n}</text>"#,
            x = fmt(WIDTH - MARGIN_R - 180.0),
            y = fmt(MARGIN_T + 14.0 * (i as f64 + 1.0)),
            c = color,
            n = esc(&s.name),
        ));
        body.push('\n');
    }
    document(title, x_label, y_label, &body)
}

/// Grouped bar chart: one group per category, one bar per series entry.
/// Used for per-cluster centroid profiles.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    categories: &[String],
    series: &[Series],
) -> String {
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let frame = Frame::new(0.0, categories.len() as f64, 0.0, y_max);
    let mut body = String::new();
    axes(&frame, &mut body);
    let n_series = series.len().max(1) as f64;
    let group_w = (WIDTH - MARGIN_L - MARGIN_R) / categories.len().max(1) as f64;
    let bar_w = group_w * 0.8 / n_series;
    for (g, cat) in categories.iter().enumerate() {
        let gx = MARGIN_L + group_w * (g as f64 + 0.1);
        for (i, s) in series.iter().enumerate() {
            let v = s.points.get(g).map_or(0.0, |p| p.1);
            let y = frame.py(v);
            body.push_str(&format!(
                r#"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="{c}"/>"#,
                x = fmt(gx + bar_w * i as f64),
                y = fmt(y),
                w = fmt(bar_w),
                h = fmt((HEIGHT - MARGIN_B - y).max(0.0)),
                c = PALETTE[i % PALETTE.len()],
            ));
            body.push('\n');
        }
        body.push_str(&format!(
            r#"<text x="{x}" y="{y}" text-anchor="middle">{t}</text>"#,
            x = fmt(gx + group_w * 0.4),
            y = fmt(HEIGHT - MARGIN_B + 32.0),
            t = esc(cat),
        ));
        body.push('\n');
    }
    for (i, s) in series.iter().enumerate() {
        body.push_str(&format!(
            r#"<text x="{x}" y="{y}" fill="{c}">{n}</text>"#,
            x = fmt(WIDTH - MARGIN_R - 180.0),
            y = fmt(MARGIN_T + 14.0 * (i as f64 + 1.0)),
            c = PALETTE[i % PALETTE.len()],
            n = esc(&s.name),
        ));
        body.push('\n');
    }
    document(title, "", y_label, &body)
}

/// One feature row of a beeswarm plot: attribution on the x-axis, the
/// normalized feature value drives the point color.
pub struct BeeswarmRow {
    pub feature: String,
    /// `(attribution, normalized_value)` pairs, one per instance.
    pub points: Vec<(f64, f64)>,
}

fn value_color(v: f64) -> String {
    // Blue (low) to red (high).
    let v = v.clamp(0.0, 1.0);
    let r = (31.0 + v * (214.0 - 31.0)).round() as u8;
    let g = (119.0 + v * (39.0 - 119.0)).round() as u8;
    let b = (180.0 + v * (40.0 - 180.0)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", r, g, b)
}

/// SHAP-style beeswarm summary. Vertical jitter within each feature band is
/// derived from a hash of the row/point index, so output is reproducible.
pub fn beeswarm(title: &str, rows: &[BeeswarmRow]) -> String {
    let x_min = rows
        .iter()
        .flat_map(|r| r.points.iter().map(|p| p.0))
        .fold(0.0f64, f64::min);
    let x_max = rows
        .iter()
        .flat_map(|r| r.points.iter().map(|p| p.0))
        .fold(0.0f64, f64::max);
    let frame = Frame::new(x_min, x_max, 0.0, rows.len() as f64);
    let mut body = String::new();
    axes(&frame, &mut body);
    body.push_str(&format!(
        r##"<line x1="{x}" y1="{t}" x2="{x}" y2="{b}" stroke="#888" stroke-dasharray="4 3"/>"##,
        x = fmt(frame.px(0.0)),
        t = fmt(MARGIN_T),
        b = fmt(HEIGHT - MARGIN_B),
    ));
    body.push('\n');
    let band = (HEIGHT - MARGIN_T - MARGIN_B) / rows.len().max(1) as f64;
    for (r, row) in rows.iter().enumerate() {
        let cy = MARGIN_T + band * (r as f64 + 0.5);
        body.push_str(&format!(
            r#"<text x="{x}" y="{y}" text-anchor="end" font-size="10">{t}</text>"#,
            x = fmt(MARGIN_L - 6.0),
            y = fmt(cy + 4.0),
            t = esc(&row.feature),
        ));
        body.push('\n');
        for (i, &(phi, value)) in row.points.iter().enumerate() {
            let h = seed::splitmix64(((r as u64) << 32) ^ i as u64);
            let jitter = ((h >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * band * 0.7;
            body.push_str(&format!(
                r#"<circle cx="{x}" cy="{y}" r="2" fill="{c}" fill-opacity="0.7"/>"#,
                x = fmt(frame.px(phi)),
                y = fmt(cy + jitter),
                c = value_color(value),
            ));
            body.push('\n');
        }
    }
    document(title, "attribution", "", &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_deterministic_and_well_formed() {
        let series = [Series {
            name: "sse".into(),
            points: vec![(1.0, 9.0), (2.0, 4.0), (3.0, 2.5)],
        }];
        let a = line_chart("elbow", "k", "sse", &series);
        let b = line_chart("elbow", "k", "sse", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polyline").count(), 1);
    }

    #[test]
    fn escapes_markup_in_labels() {
        let svg = line_chart(
            "a < b & c",
            "x",
            "y",
            &[Series {
                name: "s".into(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
            }],
        );
        assert!(svg.contains("a &lt; b &amp; c"));
    }

    #[test]
    fn bar_chart_draws_one_rect_per_bar() {
        let cats = vec!["c0".to_string(), "c1".to_string()];
        let series = vec![
            Series {
                name: "f0".into(),
                points: vec![(0.0, 0.4), (1.0, 0.8)],
            },
            Series {
                name: "f1".into(),
                points: vec![(0.0, 0.2), (1.0, 0.6)],
            },
        ];
        let svg = bar_chart("profiles", "mean", &cats, &series);
        // background rect + 4 bars
        assert_eq!(svg.matches("<rect").count(), 5);
    }

    #[test]
    fn beeswarm_jitter_is_reproducible() {
        let rows = vec![BeeswarmRow {
            feature: "f".into(),
            points: vec![(0.1, 0.2), (-0.3, 0.9), (0.0, 0.5)],
        }];
        assert_eq!(beeswarm("shap", &rows), beeswarm("shap", &rows));
        assert_eq!(beeswarm("shap", &rows).matches("<circle").count(), 3);
    }
}
