//! Cell-raster heatmaps over a `(θ, θ₁)` grid.
//!
//! `θ` runs left to right and `θ₁` bottom to top. Vertically adjacent cells
//! of the same class are merged into one rectangle, which keeps a 500×500
//! raster to a few thousand elements.

use std::fmt::Write as _;

use crate::error::Result;
use crate::grid::{GridSpec, Spacing};
use crate::period_two::{RegionScanReport, Sign};
use crate::phase::PhaseScanRow;
use crate::report::Metadata;

const PLOT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const LEGEND_WIDTH: f64 = 200.0;

pub struct LegendEntry {
    pub label: String,
    pub color: &'static str,
}

/// Class index per cell, row-major with `θ` outer, and one legend entry
/// per class.
pub struct Raster<'a> {
    pub title: &'a str,
    pub grid: &'a GridSpec,
    pub classes: Vec<usize>,
    pub legend: Vec<LegendEntry>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(x: f64) -> String {
    if x == 0.0 || (1e-2..1e4).contains(&x.abs()) {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.1e}")
    }
}

fn axis_note(spacing: Spacing, centers: bool) -> &'static str {
    match (spacing, centers) {
        (Spacing::Logarithmic, _) => " (log)",
        (Spacing::Linear, true) => " (cell centres)",
        (Spacing::Linear, false) => "",
    }
}

pub fn render(raster: &Raster, meta: &Metadata) -> Result<String> {
    let nt = raster.grid.theta.points;
    let nt1 = raster.grid.theta1.points;
    let (cw, ch) = (PLOT / nt as f64, PLOT / nt1 as f64);
    let width = MARGIN_LEFT + PLOT + LEGEND_WIDTH;
    let height = MARGIN_TOP + PLOT + MARGIN_BOTTOM;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", escape(&serde_json::to_string(meta)?));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16">{}</text>"#,
        MARGIN_LEFT,
        escape(raster.title)
    );

    let _ = writeln!(s, r#"<g id="cells">"#);
    for i in 0..nt {
        let column = &raster.classes[i * nt1..(i + 1) * nt1];
        let mut j = 0;
        while j < nt1 {
            let class = column[j];
            let start = j;
            while j < nt1 && column[j] == class {
                j += 1;
            }
            let x = MARGIN_LEFT + i as f64 * cw;
            let y = MARGIN_TOP + PLOT - j as f64 * ch;
            let color = raster.legend.get(class).map_or("#000000", |e| e.color);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{cw:.3}" height="{:.3}" fill="{color}"/>"#,
                (j - start) as f64 * ch
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );
    let g = raster.grid;
    let bottom = MARGIN_TOP + PLOT;
    let labels = [
        (MARGIN_LEFT, bottom + 18.0, "middle", tick(g.theta.min)),
        (MARGIN_LEFT + PLOT, bottom + 18.0, "middle", tick(g.theta.max)),
        (MARGIN_LEFT - 6.0, bottom, "end", tick(g.theta1.min)),
        (MARGIN_LEFT - 6.0, MARGIN_TOP + 4.0, "end", tick(g.theta1.max)),
    ];
    for (x, y, anchor, text) in labels {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-family="sans-serif" font-size="12">{text}</text>"#
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">θ{}</text>"#,
        MARGIN_LEFT + PLOT / 2.0,
        bottom + 40.0,
        axis_note(g.theta.spacing, g.theta.centers)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 20 {})">θ₁{}</text>"#,
        MARGIN_TOP + PLOT / 2.0,
        MARGIN_TOP + PLOT / 2.0,
        axis_note(g.theta1.spacing, g.theta1.centers)
    );

    let _ = writeln!(s, r#"<g id="legend">"#);
    for (k, entry) in raster.legend.iter().enumerate() {
        let x = MARGIN_LEFT + PLOT + 20.0;
        let y = MARGIN_TOP + 10.0 + 24.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="16" height="16" fill="{}" stroke="black"/>"#,
            entry.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            x + 24.0,
            y + 12.0,
            escape(&entry.label)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

/// Two colours: `B ≥ 0` shaded, `B < 0` light. Violations of the
/// exclusion region, if any, get a third colour.
pub fn period2_sign_raster<'a>(report: &'a RegionScanReport, title: &'a str) -> Raster<'a> {
    let classes = report
        .cells
        .iter()
        .map(|c| {
            if c.is_violation() {
                2
            } else if c.sign_b == Sign::Negative {
                1
            } else {
                0
            }
        })
        .collect();
    Raster {
        title,
        grid: &report.grid,
        classes,
        legend: vec![
            LegendEntry {
                label: "B ≥ 0".into(),
                color: "#4a6fa5",
            },
            LegendEntry {
                label: "B < 0".into(),
                color: "#f2f2f2",
            },
            LegendEntry {
                label: "B < 0 and D ≥ 0".into(),
                color: "#d62728",
            },
        ],
    }
}

/// Colours by the number of fixed points on `v = 1`.
pub fn phase_raster<'a>(grid: &'a GridSpec, rows: &[PhaseScanRow], title: &'a str) -> Raster<'a> {
    Raster {
        title,
        grid,
        classes: rows.iter().map(|r| r.root_count.clamp(1, 3) - 1).collect(),
        legend: vec![
            LegendEntry {
                label: "1 fixed point".into(),
                color: "#f2f2f2",
            },
            LegendEntry {
                label: "2 fixed points".into(),
                color: "#ff7f0e",
            },
            LegendEntry {
                label: "3 fixed points".into(),
                color: "#4a6fa5",
            },
        ],
    }
}
