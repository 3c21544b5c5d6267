//! Minimal static SVG figures.

use std::fmt::Write as _;

use e2h::metrics::{Histogram, RocPoint};

const SIZE: f64 = 320.0;
const MARGIN: f64 = 40.0;

fn frame(title: &str, x_label: &str, y_label: &str) -> String {
    let full = SIZE + 2.0 * MARGIN;
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" font-family="sans-serif" font-size="12">
<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>
"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        full / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        full / 2.0,
        full - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" text-anchor="middle" transform="rotate(-90 12 {})">{y_label}</text>"#,
        full / 2.0,
        full / 2.0
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn px(x: f64, y: f64) -> (f64, f64) {
    (MARGIN + x * SIZE, MARGIN + (1.0 - y) * SIZE)
}

pub fn roc_svg(title: &str, curve: &[RocPoint]) -> String {
    let mut s = frame(&format!("ROC: {title}"), "FPR", "TPR");
    let (x0, y0) = px(0.0, 0.0);
    let (x1, y1) = px(1.0, 1.0);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="gray" stroke-dasharray="4"/>"#
    );
    let points: Vec<String> = curve
        .iter()
        .map(|p| {
            let (x, y) = px(p.fpr, p.tpr);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        points.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

pub fn histogram_svg(title: &str, hist: &Histogram) -> String {
    let mut s = frame(&format!("Scores: {title}"), "score", "fraction");
    let total = |v: &[usize]| v.iter().sum::<usize>().max(1) as f64;
    let (tp, tn) = (total(&hist.pos), total(&hist.neg));
    let peak = hist
        .pos
        .iter()
        .map(|&c| c as f64 / tp)
        .chain(hist.neg.iter().map(|&c| c as f64 / tn))
        .fold(0.0, f64::max)
        .max(1e-12);
    let width = 1.0 / hist.bins as f64;
    for (series, counts, n, colour) in [("human", &hist.neg, tn, "seagreen"), ("machine", &hist.pos, tp, "firebrick")] {
        for (i, &c) in counts.iter().enumerate() {
            let h = c as f64 / n / peak;
            let (x, y) = px(i as f64 * width, h);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{colour}" fill-opacity="0.5"><title>{series}</title></rect>"#,
                width * SIZE,
                h * SIZE
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
