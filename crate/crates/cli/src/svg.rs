//! SVG output. Every stroke becomes one `M … L …` path, coordinates are
//! printed with two decimals, and class colors come from a fixed palette, so
//! identical input renders to identical bytes.

use std::fmt::Write;

use anyhow::{bail, Result};
use strokeseg::sketch::{category_classes, Sketch};

/// Class colors by index in the category's class list.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
pub const MONOCHROME: &str = "#222222";

const PANEL: f64 = 256.0;
const MARGIN: f64 = 12.0;
const CAPTION: f64 = 20.0;
const LEGEND_ROW: f64 = 18.0;

/// Class list used to color a sketch: the category's closed label set when
/// known, otherwise the sorted labels present.
pub fn classes_for(sketch: &Sketch) -> Vec<String> {
    match category_classes(sketch.category()) {
        Some(c) => c.iter().map(|s| s.to_string()).collect(),
        None => {
            let mut v: Vec<String> = sketch.labels().unwrap_or_default().iter().map(|s| s.to_string()).collect();
            v.sort();
            v.dedup();
            v
        }
    }
}

/// One panel of a figure.
pub struct Panel<'a> {
    pub sketch: &'a Sketch,
    pub caption: String,
    /// Color strokes by label; unlabeled sketches are drawn in one color
    /// either way.
    pub colored: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn stroke_colors(p: &Panel<'_>) -> Result<Vec<&'static str>> {
    let n = p.sketch.num_strokes();
    let labels = match p.sketch.labels() {
        Some(l) if p.colored => l,
        _ => return Ok(vec![MONOCHROME; n]),
    };
    let classes = classes_for(p.sketch);
    labels
        .iter()
        .map(|l| match classes.iter().position(|c| c == l) {
            Some(i) if i < PALETTE.len() => Ok(PALETTE[i]),
            Some(_) => bail!("category {} has more classes than palette colors", p.sketch.category()),
            None => bail!("unknown label {l:?} for category {}", p.sketch.category()),
        })
        .collect()
}

/// Legend entries (label, color) for the classes present in the panel, in
/// class-list order.
fn legend(p: &Panel<'_>) -> Result<Vec<(String, &'static str)>> {
    let Some(labels) = p.sketch.labels().filter(|_| p.colored) else {
        return Ok(Vec::new());
    };
    let colors = stroke_colors(p)?;
    let classes = classes_for(p.sketch);
    Ok(classes
        .into_iter()
        .filter_map(|c| labels.iter().position(|l| *l == c).map(|i| (c, colors[i])))
        .collect())
}

/// Panels side by side, each scaled to fit its own bounding box, with a
/// caption and, for labeled panels, a legend below each.
pub fn render_panels(panels: &[Panel<'_>]) -> Result<String> {
    let legends = panels.iter().map(legend).collect::<Result<Vec<_>>>()?;
    let legend_rows = legends.iter().map(Vec::len).max().unwrap_or(0);
    let width = MARGIN + panels.len() as f64 * (PANEL + MARGIN);
    let height = MARGIN + PANEL + CAPTION + legend_rows as f64 * LEGEND_ROW + MARGIN;

    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )?;
    writeln!(out, r##"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="#ffffff"/>"##)?;
    for (k, (p, leg)) in panels.iter().zip(&legends).enumerate() {
        let x0 = MARGIN + k as f64 * (PANEL + MARGIN);
        let bb = p.sketch.bounding_box();
        let inner = PANEL - 8.0;
        let scale = if bb.extent() > 0.0 { inner / bb.extent() } else { 1.0 };
        // center the drawing in the panel
        let ox = x0 + 4.0 + (inner - bb.width() * scale) / 2.0;
        let oy = MARGIN + 4.0 + (inner - bb.height() * scale) / 2.0;
        writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{MARGIN:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="none" stroke="#cccccc"/>"##
        )?;
        writeln!(out, r#"<g fill="none" stroke-width="2" stroke-linecap="round" stroke-linejoin="round">"#)?;
        for (st, color) in p.sketch.strokes().iter().zip(stroke_colors(p)?) {
            let mut d = String::new();
            for (i, q) in st.points().iter().enumerate() {
                let cmd = if i == 0 { "M" } else { " L" };
                write!(d, "{cmd}{:.2} {:.2}", ox + (q.x - bb.min.x) * scale, oy + (q.y - bb.min.y) * scale)?;
            }
            writeln!(out, r#"<path d="{d}" stroke="{color}"/>"#)?;
        }
        writeln!(out, "</g>")?;
        let cy = MARGIN + PANEL + CAPTION - 6.0;
        writeln!(
            out,
            r#"<text x="{:.2}" y="{cy:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            x0 + PANEL / 2.0,
            escape(&p.caption)
        )?;
        for (r, (label, color)) in leg.iter().enumerate() {
            let y = MARGIN + PANEL + CAPTION + r as f64 * LEGEND_ROW;
            writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{color}"/>"#, x0 + 4.0, y + 2.0)?;
            writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
                x0 + 22.0,
                y + 12.0,
                escape(label)
            )?;
        }
    }
    writeln!(out, "</svg>")?;
    Ok(out)
}
