//! Minimal SVG line and heatmap writer.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Plot {
    Lines {
        title: String,
        x_label: String,
        y_label: String,
        series: Vec<(String, Vec<f64>, Vec<f64>)>,
    },
    Heatmap {
        title: String,
        x_label: String,
        y_label: String,
        x: Vec<f64>,
        y: Vec<f64>,
        /// `z[row][col]`, rows along y.
        z: Vec<Vec<f64>>,
    },
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, xr: (f64, f64), yr: (f64, f64)) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let bottom = H - MARGIN + 16.0;
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{bottom}" text-anchor="start">{}</text>"#, tick(xr.0));
    let _ = writeln!(out, r#"<text x="{}" y="{bottom}" text-anchor="end">{}</text>"#, W - MARGIN, tick(xr.1));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, H - MARGIN, tick(yr.0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 10.0, tick(yr.1));
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn sx(x: f64, xr: (f64, f64)) -> f64 {
    MARGIN + (x - xr.0) / (xr.1 - xr.0) * (W - 2.0 * MARGIN)
}

fn sy(y: f64, yr: (f64, f64)) -> f64 {
    H - MARGIN - (y - yr.0) / (yr.1 - yr.0) * (H - 2.0 * MARGIN)
}

/// Blue-to-yellow ramp for `t ∈ [0, 1]`.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (68.0 + t * (253.0 - 68.0)) as u8;
    let g = (1.0 + t * (231.0 - 1.0)) as u8;
    let b = (84.0 + t * (37.0 - 84.0)) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

pub fn render(plot: &Plot) -> String {
    let mut out = String::new();
    match plot {
        Plot::Lines {
            title,
            x_label,
            y_label,
            series,
        } => {
            let xr = extent(series.iter().flat_map(|s| s.1.iter().copied()));
            let yr = extent(series.iter().flat_map(|s| s.2.iter().copied()));
            frame(&mut out, title, x_label, y_label, xr, yr);
            for (k, (name, xs, ys)) in series.iter().enumerate() {
                let colour = PALETTE[k % PALETTE.len()];
                let points: Vec<String> = xs
                    .iter()
                    .zip(ys)
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x, xr), sy(y, yr)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                    points.join(" ")
                );
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" fill="{colour}" text-anchor="end">{}</text>"#,
                    W - MARGIN - 6.0,
                    MARGIN + 16.0 * (k + 1) as f64,
                    escape(name)
                );
            }
        }
        Plot::Heatmap {
            title,
            x_label,
            y_label,
            x,
            y,
            z,
        } => {
            let xr = extent(x.iter().copied());
            let yr = extent(y.iter().copied());
            let zr = extent(z.iter().flatten().copied());
            frame(&mut out, title, x_label, y_label, xr, yr);
            let cw = (W - 2.0 * MARGIN) / x.len().max(1) as f64;
            let ch = (H - 2.0 * MARGIN) / y.len().max(1) as f64;
            for (i, row) in z.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                        MARGIN + j as f64 * cw,
                        H - MARGIN - (i + 1) as f64 * ch,
                        cw + 0.05,
                        ch + 0.05,
                        color((v - zr.0) / (zr.1 - zr.0))
                    );
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
