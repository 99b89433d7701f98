//! Deterministic SVG scatter of an embedding.

use std::fmt::Write;

use crate::embedding::Embedding;
use crate::model::Outcome;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 32.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

/// Points are colored by cluster, drawn as circles (purchase) or squares
/// (non-purchase); medoids get a black outline.
pub fn scatter(embedding: &Embedding, clusters: Option<&[usize]>, labels: &[Outcome], medoids: &[usize]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &embedding.xy {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = (0..2).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let scale = if span > 0.0 { (SIZE - 2.0 * MARGIN) / span } else { 0.0 };
    let project = |p: &[f64; 2]| {
        (
            MARGIN + (p[0] - lo[0]) * scale,
            SIZE - MARGIN - (p[1] - lo[1]) * scale,
        )
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in embedding.xy.iter().enumerate() {
        let (x, y) = project(p);
        let color = clusters.map_or("#444444", |c| PALETTE[c[i] % PALETTE.len()]);
        let stroke = if medoids.contains(&i) {
            r#" stroke="black" stroke-width="2""#
        } else {
            ""
        };
        let id = &embedding.ids[i];
        match labels.get(i) {
            Some(Outcome::NonPurchase) => {
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{color}"{stroke}><title>{id}</title></rect>"#,
                    x - 4.0,
                    y - 4.0
                );
            }
            _ => {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="4.5" fill="{color}"{stroke}><title>{id}</title></circle>"#
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
