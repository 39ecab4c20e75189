//! SVG scatter of a 2-D latent layout colored by nucleus.

use std::fmt::Write as _;

use thalparc_core::{Label, LabelSet};

pub const SIZE: f64 = 1000.0;
const PLOT_LEFT: f64 = 40.0;
const PLOT_SIDE: f64 = 800.0;
const LEGEND_X: f64 = 870.0;

const PALETTE: [&str; 13] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a", "#637939",
];
const UNLABELED: &str = "#c8c8c8";

fn color(labels: LabelSet) -> &'static str {
    labels
        .nuclei()
        .iter()
        .next()
        .map_or(UNLABELED, |l| PALETTE[l.index()])
}

/// Renders points `(x, y, labels)`; the first nucleus of each set picks the
/// color.
pub fn scatter_svg(points: &[(f64, f64, LabelSet)]) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, _) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0);
    let scale = if span > 0.0 { PLOT_SIDE / span } else { 1.0 };
    let top = (SIZE - PLOT_SIDE) / 2.0;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
    s.push_str("<g id=\"points\">\n");
    for &(x, y, l) in points {
        let px = PLOT_LEFT + (x - x0) * scale;
        // latent y grows upward
        let py = top + PLOT_SIDE - (y - y0) * scale;
        writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="{}"/>"#, color(l)).unwrap();
    }
    s.push_str("</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"16\">\n");
    for (n, l) in Label::NUCLEI.iter().enumerate() {
        let y = top + 20.0 + 28.0 * n as f64;
        writeln!(
            s,
            r#"<rect x="{LEGEND_X}" y="{:.0}" width="14" height="14" fill="{}"/><text x="{:.0}" y="{:.0}">{l}</text>"#,
            y - 12.0,
            PALETTE[l.index()],
            LEGEND_X + 22.0,
            y
        )
        .unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    s
}
