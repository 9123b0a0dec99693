//! Minimal SVG renderings of harness outputs. The CSV files are the numeric record.

use std::fmt::Write;

use super::curves::{CurveReport, LandscapeTable};
use super::stats::MatchStats;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{title}</text>"#,
        W / 2.0
    )
    .unwrap();
    s
}

fn close(mut s: String) -> String {
    s.push_str("</svg>\n");
    s
}

/// Blue-to-red ramp for `t` in `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    format!("rgb({},{},{})", (255.0 * t) as u8, 64, (255.0 * (1.0 - t)) as u8)
}

/// Heatmap with `p` on the x axis and `q` on the y axis, colours on a log scale.
pub fn landscape_heatmap(t: &LandscapeTable) -> String {
    let mut s = open(&format!("{} landscape", t.params.variant));
    let logs: Vec<Vec<f64>> = t
        .values
        .iter()
        .map(|r| r.iter().map(|v| (v + 1e-12).ln()).collect())
        .collect();
    let lo = logs.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let (cw, ch) = ((W - 2.0 * PAD) / t.p.len() as f64, (H - 2.0 * PAD) / t.q.len() as f64);
    for (i, row) in logs.iter().enumerate() {
        // q grows upwards
        let y = H - PAD - (i + 1) as f64 * ch;
        for (j, v) in row.iter().enumerate() {
            let x = PAD + j as f64 * cw;
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cw + 0.05,
                ch + 0.05,
                ramp((v - lo) / span)
            )
            .unwrap();
        }
    }
    axis_labels(&mut s, "p", "q");
    close(s)
}

fn axis_labels(s: &mut String, x: &str, y: &str) {
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{x}</text>"#,
        W / 2.0,
        H - 10.0
    )
    .unwrap();
    writeln!(s, r#"<text x="12" y="{}" font-size="12">{y}</text>"#, H / 2.0).unwrap();
}

fn polyline(s: &mut String, xs: &[f64], ys: &[f64], y_max: f64, color: &str, dashed: bool) {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let px = PAD + x * (W - 2.0 * PAD);
            let py = H - PAD - (y / y_max).min(1.0) * (H - 2.0 * PAD);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
    writeln!(
        s,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
        pts.join(" ")
    )
    .unwrap();
}

/// VFL (dashed) and MAL (solid) curves, one colour per soft target.
pub fn curves_plot(r: &CurveReport) -> String {
    let mut s = open("VFL (dashed) vs MAL (solid)");
    let y_max = r
        .curves
        .iter()
        .flat_map(|c| c.vfl.iter().chain(&c.mal))
        .copied()
        .fold(0.0, f64::max)
        .max(1e-12);
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (k, c) in r.curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        polyline(&mut s, &r.p, &c.vfl, y_max, color, true);
        polyline(&mut s, &r.p, &c.mal, y_max, color, false);
    }
    axis_labels(&mut s, "p", "loss");
    close(s)
}

/// Side-by-side bars of images per positive count.
pub fn match_histogram(m: &MatchStats) -> String {
    let mut s = open("images per positive count: O2O (blue) vs O2M (red)");
    let peak = m
        .histogram
        .iter()
        .map(|h| h.o2o_images.max(h.o2m_images))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let bw = (W - 2.0 * PAD) / m.histogram.len().max(1) as f64;
    for (k, h) in m.histogram.iter().enumerate() {
        for (off, n, color) in [(0.0, h.o2o_images, "#1f77b4"), (0.5, h.o2m_images, "#d62728")] {
            let bh = n as f64 / peak * (H - 2.0 * PAD);
            writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="{color}"/>"#,
                PAD + (k as f64 + off) * bw,
                H - PAD - bh,
                bw / 2.0
            )
            .unwrap();
        }
    }
    axis_labels(&mut s, "positives per image", "images");
    close(s)
}
