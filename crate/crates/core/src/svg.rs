//! Minimal standalone SVG drawings: heatmaps of time × state grids and
//! road networks with mass-proportional edge widths.

use std::fmt::Write;

use crate::network::NetworkModel;

const CELL_W: f64 = 6.0;
const CELL_H: f64 = 8.0;
const MARGIN: f64 = 30.0;

fn shade(x: f64) -> String {
    let x = x.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * x).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

/// `rows[t][i]` drawn with time downwards and states to the right.
pub fn heatmap(title: &str, rows: &[Vec<f64>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let top = rows.iter().flatten().cloned().fold(0.0f64, f64::max);
    let width = 2.0 * MARGIN + cols as f64 * CELL_W;
    let height = 2.0 * MARGIN + rows.len() as f64 * CELL_H;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
        MARGIN - 10.0,
        escape(title)
    )
    .unwrap();
    for (t, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            let level = if top > 0.0 { v / top } else { 0.0 };
            writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{CELL_W}" height="{CELL_H}" fill="{}"/>"#,
                MARGIN + i as f64 * CELL_W,
                MARGIN + t as f64 * CELL_H,
                shade(level)
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

/// The network at one time step; each directed edge is drawn slightly
/// offset from its reverse so both stay visible.
pub fn network(title: &str, model: &NetworkModel, mass: &[f64], total: f64) -> String {
    let scale = 120.0;
    let (min_x, max_x) = model.nodes.iter().fold((f64::MAX, f64::MIN), |(a, b), n| (a.min(n.x), b.max(n.x)));
    let (min_y, max_y) = model.nodes.iter().fold((f64::MAX, f64::MIN), |(a, b), n| (a.min(n.y), b.max(n.y)));
    let width = 2.0 * MARGIN + (max_x - min_x) * scale;
    let height = 2.0 * MARGIN + (max_y - min_y) * scale;
    let px = |x: f64| MARGIN + (x - min_x) * scale;
    let py = |y: f64| height - MARGIN - (y - min_y) * scale;
    let node = |id: usize| model.nodes.iter().find(|n| n.id == id).unwrap();
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{MARGIN}" y="18" font-family="sans-serif" font-size="12">{}</text>"#,
        escape(title)
    )
    .unwrap();
    for (i, &(a, b)) in model.edges.iter().enumerate() {
        let (p, q) = (node(a), node(b));
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        let len = dx.hypot(dy).max(f64::MIN_POSITIVE);
        let (ox, oy) = (-dy / len * 3.0, dx / len * 3.0);
        let w = 0.5 + 20.0 * mass.get(i).copied().unwrap_or(0.0) / total.max(f64::MIN_POSITIVE);
        writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#08306b" stroke-opacity="0.8" stroke-width="{w:.3}"/>"##,
            px(p.x) + ox,
            py(p.y) - oy,
            px(q.x) + ox,
            py(q.y) - oy
        )
        .unwrap();
    }
    for n in &model.nodes {
        writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#444"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"##,
            px(n.x),
            py(n.y),
            px(n.x) + 5.0,
            py(n.y) - 5.0,
            n.id
        )
        .unwrap();
    }
    for s in &model.sensors {
        writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="#d94801"/>"##,
            px(s.x) - 3.0,
            py(s.y) - 3.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
