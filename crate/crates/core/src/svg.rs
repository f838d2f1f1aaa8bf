//! Minimal hand-rolled SVG output: basin-slice maps, bifurcation diagrams,
//! and tercile box plots. Deterministic: the same inputs always produce the
//! same bytes.

use std::fmt::Write;

use crate::analysis::TercileReport;
use crate::bifurcation::{BifurcationBranch, RegimeReport};
use crate::equilibria::{BasinGrid, BranchLabel};

// Shared palette (also used by the basin legend).
const POOR: &str = "#b5651d";
const WELL: &str = "#2e7d52";
const OTHER: &str = "#7a7a7a";
const UNRESOLVED: &str = "#e0e0e0";

/// Color conventions shared by the plots.
pub fn label_color(label: BranchLabel) -> &'static str {
    match label {
        BranchLabel::Poor => POOR,
        BranchLabel::WellBeing => WELL,
        BranchLabel::Other => OTHER,
    }
}

// Incremental SVG document builder.
struct Doc {
    body: String,
    width: f64,
    height: f64,
}

impl Doc {
    fn new(width: f64, height: f64) -> Self {
        Self { body: String::new(), width, height }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64, dash: &str) {
        let dash_attr =
            if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width:.2}"{dash_attr}/>"#
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let escaped = content.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(
            self.body,
            r##"<text x="{x:.2}" y="{y:.2}" font-size="{size:.1}" font-family="sans-serif" fill="#222">{escaped}</text>"##
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.0} {:.0}\" \
             width=\"{:.0}\" height=\"{:.0}\">\n<rect width=\"100%\" height=\"100%\" \
             fill=\"#ffffff\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// Basin map: three k_i slices (bottom, middle, top of the grid), k_a on the
/// horizontal axis and k_s on the vertical, cells colored by basin label.
pub fn basin_svg(grid: &BasinGrid) -> String {
    let [ra, rs, ri] = grid.spec.resolution;
    let slices = [0, (ri - 1) / 2, ri - 1];
    let panel = 240.0;
    let margin = 40.0;
    let gap = 30.0;
    let width = margin * 2.0 + panel * 3.0 + gap * 2.0;
    let height = margin * 2.0 + panel + 40.0;
    let mut doc = Doc::new(width, height);

    let cell_w = panel / ra as f64;
    let cell_h = panel / rs as f64;
    for (pi, ki) in slices.iter().enumerate() {
        let x0 = margin + pi as f64 * (panel + gap);
        let y0 = margin;
        for ia in 0..ra {
            for is in 0..rs {
                let idx = (ia * rs + is) * ri + ki;
                let fill = match grid.labels[idx] {
                    Some(l) => label_color(grid.equilibria[l].label),
                    None => UNRESOLVED,
                };
                // SVG y grows downward; k_s grows upward.
                doc.rect(
                    x0 + ia as f64 * cell_w,
                    y0 + panel - (is + 1) as f64 * cell_h,
                    cell_w + 0.5,
                    cell_h + 0.5,
                    fill,
                );
            }
        }
        // Attractor markers projected onto the slice.
        for eq in grid.equilibria.iter().filter(|e| e.is_attractor()) {
            let fx = (eq.state.k_a - grid.spec.lo.k_a) / (grid.spec.hi.k_a - grid.spec.lo.k_a);
            let fy = (eq.state.k_s - grid.spec.lo.k_s) / (grid.spec.hi.k_s - grid.spec.lo.k_s);
            if (0.0..=1.0).contains(&fx) && (0.0..=1.0).contains(&fy) {
                doc.circle(x0 + fx * panel, y0 + panel - fy * panel, 5.0, "#ffffff", "#000000");
            }
        }
        let ki_val = grid.spec.lo.k_i
            + (grid.spec.hi.k_i - grid.spec.lo.k_i) * *ki as f64 / (ri - 1).max(1) as f64;
        doc.text(x0, margin - 10.0, 13.0, &format!("k_i = {ki_val:.3}"));
        doc.text(x0 + panel / 2.0 - 10.0, margin + panel + 18.0, 12.0, "k_a");
    }
    doc.text(8.0, margin + panel / 2.0, 12.0, "k_s");
    // Legend.
    let ly = height - 16.0;
    for (i, (color, name)) in
        [(POOR, "poor"), (WELL, "well-being"), (OTHER, "other"), (UNRESOLVED, "unresolved")]
            .iter()
            .enumerate()
    {
        let lx = margin + i as f64 * 140.0;
        doc.rect(lx, ly - 10.0, 12.0, 12.0, color);
        doc.text(lx + 18.0, ly, 12.0, name);
    }
    doc.finish()
}

/// Bifurcation diagram: swept parameter on the horizontal axis, equilibrium
/// assets on the vertical; attractors filled, saddles hollow, regime spans
/// shaded, tipping points as dashed lines.
pub fn branch_svg(branch: &BifurcationBranch, report: Option<&RegimeReport>) -> String {
    let width = 720.0;
    let height = 420.0;
    let m = 50.0;
    let mut doc = Doc::new(width, height);
    let (vlo, vhi) = (branch.values[0], *branch.values.last().unwrap());
    let ka_max = branch
        .equilibria
        .iter()
        .flatten()
        .map(|e| e.state.k_a)
        .fold(0.0, f64::max)
        .max(1e-9);
    let to_x = |v: f64| m + (v - vlo) / (vhi - vlo) * (width - 2.0 * m);
    let to_y = |ka: f64| height - m - ka / (ka_max * 1.05) * (height - 2.0 * m);

    if let Some(rep) = report {
        for span in &rep.regimes {
            let fill = match span.regime.name() {
                "monostable-poor" => "#f3e0d3",
                "bistable" => "#e9f0e6",
                _ => "#dcead533",
            };
            doc.rect(to_x(span.lo), m, to_x(span.hi) - to_x(span.lo), height - 2.0 * m, fill);
        }
        for tp in &rep.tipping_points {
            doc.line(to_x(tp.value), m, to_x(tp.value), height - m, "#333333", 1.0, "4,3");
            doc.text(to_x(tp.value) + 3.0, m + 12.0, 11.0, tp.kind.name());
        }
    }
    // Axes.
    doc.line(m, height - m, width - m, height - m, "#000000", 1.0, "");
    doc.line(m, m, m, height - m, "#000000", 1.0, "");
    doc.text(width / 2.0 - 20.0, height - 12.0, 12.0, &branch.param_name);
    doc.text(10.0, m - 10.0, 12.0, "k_a");
    doc.text(m - 4.0, height - m + 16.0, 11.0, &format!("{vlo:.2}"));
    doc.text(width - m - 16.0, height - m + 16.0, 11.0, &format!("{vhi:.2}"));

    for (value, eqs) in branch.values.iter().zip(branch.equilibria.iter()) {
        for eq in eqs {
            let (fill, stroke) = if eq.is_attractor() {
                (label_color(eq.label), "#00000000")
            } else {
                ("#ffffff", OTHER)
            };
            doc.circle(to_x(*value), to_y(eq.state.k_a), 2.6, fill, stroke);
        }
    }
    doc.finish()
}

/// Tercile box plots: one panel per innovator attribute, three boxes each
/// (low, mid, high efficiency tercile).
pub fn tercile_svg(report: &TercileReport) -> String {
    let attrs: [(&str, fn(&crate::analysis::TercileStats) -> crate::analysis::BoxStats); 4] = [
        ("innovation capital", |t| t.innovation_capital),
        ("capital efficiency", |t| t.capital_efficiency),
        ("knowledge efficiency", |t| t.knowledge_efficiency),
        ("innovation demand", |t| t.innovation_demand),
    ];
    let panel_w = 220.0;
    let panel_h = 220.0;
    let m = 36.0;
    let gap = 26.0;
    let width = m * 2.0 + panel_w * 2.0 + gap;
    let height = m * 2.0 + panel_h * 2.0 + gap + 20.0;
    let mut doc = Doc::new(width, height);

    for (ai, (name, get)) in attrs.iter().enumerate() {
        let px = m + (ai % 2) as f64 * (panel_w + gap);
        let py = m + (ai / 2) as f64 * (panel_h + gap + 20.0);
        let boxes: Vec<crate::analysis::BoxStats> =
            report.terciles.iter().map(|t| get(t)).collect();
        let lo = boxes.iter().map(|b| b.min).fold(f64::INFINITY, f64::min);
        let hi = boxes.iter().map(|b| b.max).fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-12);
        let to_y = |v: f64| py + panel_h - (v - lo) / (span * 1.1) * panel_h;

        doc.line(px, py + panel_h, px + panel_w, py + panel_h, "#000000", 1.0, "");
        doc.line(px, py, px, py + panel_h, "#000000", 1.0, "");
        doc.text(px, py - 8.0, 12.0, name);

        let colors = ["#c9b29b", "#9bb7c9", WELL];
        let box_w = 34.0;
        for (ti, b) in boxes.iter().enumerate() {
            let cx = px + (ti as f64 + 0.5) * panel_w / 3.0;
            // Whiskers.
            doc.line(cx, to_y(b.min), cx, to_y(b.q1), "#444444", 1.0, "");
            doc.line(cx, to_y(b.q3), cx, to_y(b.max), "#444444", 1.0, "");
            // Interquartile box and the median line.
            doc.rect(cx - box_w / 2.0, to_y(b.q3), box_w, to_y(b.q1) - to_y(b.q3), colors[ti]);
            doc.line(cx - box_w / 2.0, to_y(b.median), cx + box_w / 2.0, to_y(b.median), "#111111", 2.0, "");
            doc.text(
                cx - 12.0,
                py + panel_h + 14.0,
                11.0,
                ["low", "mid", "high"][ti],
            );
        }
    }
    doc.finish()
}
