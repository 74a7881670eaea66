//! Minimal SVG figures: horizontal bars, line charts and heatmaps.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Horizontal bars, one per `(label, value)`, drawn top to bottom.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let row = 22.0;
    let height = MARGIN + row * bars.len() as f64 + 20.0;
    let left = 160.0;
    let max = bars.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-12);
    let mut out = String::new();
    header(&mut out, W, height, title);
    for (i, (label, v)) in bars.iter().enumerate() {
        let y = MARGIN + i as f64 * row;
        let w = (W - left - 80.0) * v.max(0.0) / max;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 14.0,
            escape(label)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{left}" y="{}" width="{w:.2}" height="{}" fill="#4a78b5"/>"##,
            y + 3.0,
            row - 6.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{}">{v:.3}</text>"#, left + w + 4.0, y + 14.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Polyline of `ys` against `xs` with labelled axis extremes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let (x0, x1) = span(xs.iter().copied());
    let (y0, y1) = span(ys.iter().copied());
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, W, H, title);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="2"/>"##,
        points.join(" ")
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}">{x0:.3}</text>"#, MARGIN, H - MARGIN + 16.0);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{x1:.3}</text>"#,
        W - MARGIN,
        H - MARGIN + 16.0
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y0:.3}</text>"#, MARGIN - 4.0, H - MARGIN);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, MARGIN - 4.0, MARGIN + 4.0);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    out.push_str("</svg>\n");
    out
}

/// Heatmap of `z[i][j]` with rows along `xs` (horizontal) and columns
/// along `ys` (vertical); blue is low, red is high.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64], z: &[Vec<f64>]) -> String {
    let (z0, z1) = span(z.iter().flatten().copied());
    let cw = (W - 2.0 * MARGIN) / xs.len().max(1) as f64;
    let ch = (H - 2.0 * MARGIN) / ys.len().max(1) as f64;
    let mut out = String::new();
    header(&mut out, W, H, title);
    for (i, row) in z.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = (v - z0) / (z1 - z0);
            let (r, b) = ((255.0 * t) as u8, (255.0 * (1.0 - t)) as u8);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},60,{b})"><title>{:.4}, {:.4}: {v:.4}</title></rect>"#,
                MARGIN + i as f64 * cw,
                H - MARGIN - (j + 1) as f64 * ch,
                cw + 0.5,
                ch + 0.5,
                xs[i],
                ys[j]
            );
        }
    }
    let label = |v: Option<&f64>| v.map_or(String::new(), |x| format!("{x:.3}"));
    let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, MARGIN, H - MARGIN + 16.0, label(xs.first()));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        W - MARGIN,
        H - MARGIN + 16.0,
        label(xs.last())
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, H - MARGIN, label(ys.first()));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 4.0, label(ys.last()));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">range {z0:.3} to {z1:.3}</text>"#, W - MARGIN, MARGIN - 8.0);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_well_formed_enough() {
        let docs = [
            bar_chart("imp", &[("a<b".into(), 0.7), ("c".into(), 0.3)]),
            line_chart("pdp", "x", "y", &[0.0, 1.0, 2.0], &[1.0, 1.0, 3.0]),
            heatmap("h", "a", "b", &[0.0, 1.0], &[5.0, 6.0], &[vec![1.0, 2.0], vec![3.0, 4.0]]),
        ];
        for d in &docs {
            assert!(d.starts_with("<svg") && d.trim_end().ends_with("</svg>"));
            assert!(!d.contains("NaN"));
        }
        assert!(docs[0].contains("a&lt;b"));
        assert_eq!(docs[2].matches("<rect x=").count(), 4);
    }

    #[test]
    fn flat_series_do_not_divide_by_zero() {
        let d = line_chart("flat", "x", "y", &[1.0, 1.0], &[2.0, 2.0]);
        assert!(!d.contains("NaN") && !d.contains("inf"));
    }
}
