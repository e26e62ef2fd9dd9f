//! CSV tables and SVG plots derived from stored report data.

use std::fmt::Write;

use crate::metrics::PerEmotionReport;

const W: f64 = 640.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title)).unwrap();
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn y_axis(s: &mut String, lo: f64, hi: f64) {
    let plot_h = H - 2.0 * MARGIN;
    writeln!(s, r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#, H - MARGIN).unwrap();
    writeln!(s, r#"<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - MARGIN, W - MARGIN, H - MARGIN).unwrap();
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = H - MARGIN - plot_h * i as f64 / 4.0;
        writeln!(s, r##"<line x1="{}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##, MARGIN, W - MARGIN).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, MARGIN - 4.0, y + 4.0).unwrap();
    }
}

/// Bar chart of per-emotion AUC; undefined labels are drawn as an empty slot marked "n/a".
pub fn per_emotion_svg(report: &PerEmotionReport, title: &str) -> String {
    let mut s = svg_open(title);
    y_axis(&mut s, 0.0, 1.0);
    let plot_w = W - 2.0 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    let slot = plot_w / report.entries.len().max(1) as f64;
    for (i, e) in report.entries.iter().enumerate() {
        let x = MARGIN + slot * i as f64 + slot * 0.15;
        let label_x = MARGIN + slot * (i as f64 + 0.5);
        match e.auc {
            Some(a) => {
                let h = plot_h * a.clamp(0.0, 1.0);
                writeln!(s, r##"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#4a7bb7"/>"##, H - MARGIN - h, slot * 0.7).unwrap();
                writeln!(s, r#"<text x="{label_x:.1}" y="{:.1}" text-anchor="middle">{a:.3}</text>"#, H - MARGIN - h - 4.0).unwrap();
            }
            None => writeln!(s, r#"<text x="{label_x:.1}" y="{:.1}" text-anchor="middle">n/a</text>"#, H - MARGIN - 4.0).unwrap(),
        }
        writeln!(s, r#"<text x="{label_x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, H - MARGIN + 16.0, e.emotion).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Line plot of named series over epochs; `None` points are skipped.
pub fn series_svg(title: &str, series: &[(&str, Vec<Option<f64>>)]) -> String {
    let mut s = svg_open(title);
    let values: Vec<f64> = series.iter().flat_map(|(_, v)| v.iter().flatten().copied()).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(1.0);
    if hi <= lo {
        hi = lo + 1.0;
    }
    y_axis(&mut s, lo, hi);
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let plot_w = W - 2.0 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    let colors = ["#4a7bb7", "#d9534f", "#5cb85c", "#f0ad4e"];
    for (k, (name, points)) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let coords: Vec<String> = points
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                v.map(|v| {
                    let x = MARGIN + if n > 1 { plot_w * i as f64 / (n - 1) as f64 } else { 0.0 };
                    let y = H - MARGIN - plot_h * (v - lo) / (hi - lo);
                    format!("{x:.1},{y:.1}")
                })
            })
            .collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" ")).unwrap();
        writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{}</text>"#, W - MARGIN - 120.0, MARGIN + 14.0 * k as f64, escape(name)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#, W / 2.0, H - 12.0).unwrap();
    s.push_str("</svg>\n");
    s
}

/// CSV with a header row; `None` cells are left empty.
pub fn csv(header: &[&str], rows: &[Vec<Option<f64>>], first_column: &[String]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (row, key) in rows.iter().zip(first_column) {
        out.push_str(key);
        for v in row {
            out.push(',');
            out.push_str(&fmt_opt(*v));
        }
        out.push('\n');
    }
    out
}
