//! Minimal SVG line charts for ROC curves and metric deltas.

use std::fmt::Write as _;

use crate::eval::{MetricSet, RocCurve};
use crate::model::Variant;
use crate::report::Stamp;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];

fn color(variant: Variant) -> &'static str {
    let i = Variant::ALL.iter().position(|&v| v == variant).unwrap_or(0);
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Maps data coordinates into the plot area.
struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, stamp: &Stamp, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        "<!-- elm-misinfo config_hash={} seed={} -->",
        stamp.config_hash, stamp.seed
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (f.x(f.x_min), f.x(f.x_max), f.y(f.y_min), f.y(f.y_max));
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.2} {y1:.2} L{x0:.2} {y0:.2} L{x1:.2} {y0:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn polyline(out: &mut String, f: &Frame, points: &[(f64, f64)], stroke: &str, dashed: bool) {
    let pts: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", f.x(x), f.y(y)))
        .collect();
    let dash = if dashed {
        r#" stroke-dasharray="4 4""#
    } else {
        ""
    };
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"{dash}/>"#,
        pts.join(" ")
    );
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    for (i, (label, stroke)) in entries.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{stroke}" stroke-width="2"/>"#,
            x + 18.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            x + 24.0,
            y + 4.0,
            escape(label)
        );
    }
}

/// One ROC polyline per variant, with its AUC in the legend. The chance
/// diagonal is drawn as a dashed `line`, not a polyline.
pub fn roc_svg(curves: &[(Variant, RocCurve, f64)], stamp: &Stamp) -> String {
    let f = Frame {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };
    let mut out = String::new();
    open(&mut out, stamp, "ROC");
    axes(&mut out, &f, "False positive rate", "True positive rate");
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999999" stroke-dasharray="4 4"/>"##,
        f.x(0.0),
        f.y(0.0),
        f.x(1.0),
        f.y(1.0)
    );
    let mut entries = Vec::new();
    for (variant, curve, auc) in curves {
        polyline(&mut out, &f, &curve.points, color(*variant), false);
        entries.push((format!("{variant} (AUC {auc:.4})"), color(*variant)));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Per-metric deltas against the baseline, one line per compared variant.
pub fn improvement_svg(
    deltas: &[(Variant, MetricSet)],
    baseline: Variant,
    stamp: &Stamp,
) -> String {
    let all: Vec<f64> = deltas.iter().flat_map(|(_, m)| m.values()).collect();
    let lo = all.iter().copied().fold(0.0f64, f64::min);
    let hi = all.iter().copied().fold(0.0f64, f64::max);
    let pad = ((hi - lo) * 0.1).max(0.005);
    let f = Frame {
        x_min: -0.5,
        x_max: 4.5,
        y_min: lo - pad,
        y_max: hi + pad,
    };
    let mut out = String::new();
    open(&mut out, stamp, &format!("Improvement over {baseline}"));
    axes(&mut out, &f, "Metric", "Delta");
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999999"/>"##,
        f.x(f.x_min),
        f.y(0.0),
        f.x(f.x_max),
        f.y(0.0)
    );
    for (i, name) in MetricSet::NAMES.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="10">{name}</text>"#,
            f.x(i as f64),
            HEIGHT - MARGIN + 14.0
        );
    }
    let mut entries = Vec::new();
    for (variant, m) in deltas {
        let pts: Vec<(f64, f64)> = m
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, v))
            .collect();
        polyline(&mut out, &f, &pts, color(*variant), false);
        entries.push((format!("{variant} - {baseline}"), color(*variant)));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}
