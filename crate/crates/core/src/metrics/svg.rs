//! Minimal SVG 1.1 renderer for line plots, heatmaps and pie charts.

use std::fmt::Write;

use ndarray::Array2;

pub const PANEL_WIDTH: f64 = 800.0;
pub const PANEL_HEIGHT: f64 = 600.0;

const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
<rect width="{width}" height="{height}" fill="white"/>"#
    );
}

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A series for [`line_plot`].
pub struct Series<'a> {
    pub y: &'a [f64],
    pub color: &'a str,
    pub width: f64,
}

/// Line plot of several series sharing one x grid.
pub fn line_plot(title: &str, x_label: &str, x: &[f64], series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, PANEL_WIDTH, PANEL_HEIGHT);
    let (x0, x1) = bounds(x.iter().copied());
    let (_, y1) = bounds(series.iter().flat_map(|s| s.y.iter().copied()));
    let y0 = 0.0f64.min(bounds(series.iter().flat_map(|s| s.y.iter().copied())).0);
    let plot_w = PANEL_WIDTH - 2.0 * MARGIN;
    let plot_h = PANEL_HEIGHT - 2.0 * MARGIN;
    let sx = |v: f64| {
        MARGIN
            + if x1 > x0 {
                (v - x0) / (x1 - x0) * plot_w
            } else {
                0.0
            }
    };
    let sy = |v: f64| {
        PANEL_HEIGHT
            - MARGIN
            - if y1 > y0 {
                (v - y0) / (y1 - y0) * plot_h
            } else {
                0.0
            }
    };

    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="20" text-anchor="middle">{}</text>"#,
        PANEL_WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<path d="M{MARGIN},{} L{},{} M{MARGIN},{} L{MARGIN},{MARGIN}" stroke="#333" fill="none"/>"##,
        PANEL_HEIGHT - MARGIN,
        PANEL_WIDTH - MARGIN,
        PANEL_HEIGHT - MARGIN,
        PANEL_HEIGHT - MARGIN,
    );
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{v}</text>"#,
            sx(v),
            PANEL_HEIGHT - MARGIN + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        PANEL_WIDTH / 2.0,
        PANEL_HEIGHT - 15.0,
        escape(x_label)
    );
    for s in series {
        let mut d = String::new();
        for (i, (&xv, &yv)) in x.iter().zip(s.y).enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2}",
                if i == 0 { "M" } else { " L" },
                sx(xv),
                sy(yv)
            );
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{}" stroke-width="{}" fill="none"/>"#,
            s.color, s.width
        );
    }
    out.push_str("</svg>\n");
    out
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Diverging blue-white-red colour for a value in [-1, 1].
fn diverging(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}

/// Heatmap panels laid out `cols` wide; cells past the last panel stay blank.
pub fn heatmap_grid(panels: &[(String, Array2<f64>)], cols: usize, rows: usize) -> String {
    let mut out = String::new();
    header(
        &mut out,
        PANEL_WIDTH * cols as f64,
        PANEL_HEIGHT * rows as f64,
    );
    for (i, (title, m)) in panels.iter().enumerate() {
        let ox = (i % cols) as f64 * PANEL_WIDTH;
        let oy = (i / cols) as f64 * PANEL_HEIGHT;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            ox + PANEL_WIDTH / 2.0,
            oy + 30.0,
            escape(title)
        );
        let n = m.nrows().max(1) as f64;
        let side = (PANEL_WIDTH.min(PANEL_HEIGHT) - 2.0 * MARGIN) / n;
        let left = ox + (PANEL_WIDTH - side * n) / 2.0;
        let top = oy + MARGIN;
        for ((r, c), v) in m.indexed_iter() {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                left + c as f64 * side,
                top + r as f64 * side,
                side,
                side,
                diverging(*v)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Pie chart of `(label, fraction)` slices.
pub fn pie_chart(title: &str, slices: &[(String, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, PANEL_WIDTH, PANEL_HEIGHT);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="20" text-anchor="middle">{}</text>"#,
        PANEL_WIDTH / 2.0,
        escape(title)
    );
    let (cx, cy, radius) = (300.0, 320.0, 220.0);
    let total: f64 = slices.iter().map(|(_, v)| v).sum();
    let mut angle = -std::f64::consts::FRAC_PI_2;
    for (i, (label, v)) in slices.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let frac = if total > 0.0 { v / total } else { 0.0 };
        if frac >= 1.0 - 1e-12 {
            let _ = writeln!(
                out,
                r#"<circle cx="{cx}" cy="{cy}" r="{radius}" fill="{color}"/>"#
            );
        } else if frac > 0.0 {
            let end = angle + frac * std::f64::consts::TAU;
            let large = i32::from(frac > 0.5);
            let _ = writeln!(
                out,
                r#"<path d="M{cx},{cy} L{:.3},{:.3} A{radius},{radius} 0 {large} 1 {:.3},{:.3} Z" fill="{color}"/>"#,
                cx + radius * angle.cos(),
                cy + radius * angle.sin(),
                cx + radius * end.cos(),
                cy + radius * end.sin(),
            );
            angle = end;
        }
        let ly = 80.0 + 24.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="560" y="{}" width="14" height="14" fill="{color}"/><text x="582" y="{ly}" font-family="sans-serif" font-size="13">{} ({:.1}%)</text>"#,
            ly - 12.0,
            escape(label),
            100.0 * frac
        );
    }
    out.push_str("</svg>\n");
    out
}
