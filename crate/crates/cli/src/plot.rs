//! ROC curve artifacts: CSV, SVG and a pointwise dominance check.

use std::fmt::Write;

use gancmp::metrics::RocPoint;

/// One labelled curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub id: String,
    pub auc: f64,
    pub points: Vec<RocPoint>,
}

/// Gives repeated ids a `#n` suffix so every curve stays addressable.
pub fn unique_ids(ids: &[String]) -> Vec<String> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| {
            let seen = ids[..i].iter().filter(|x| *x == id).count();
            if seen == 0 {
                id.clone()
            } else {
                format!("{id}#{}", seen + 1)
            }
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `curve,fpr,tpr` rows, one per point of every curve.
pub fn roc_csv(curves: &[Curve]) -> String {
    let mut out = String::from("curve,fpr,tpr\n");
    for c in curves {
        let id = csv_field(&c.id);
        for p in &c.points {
            writeln!(out, "{id},{},{}", p.fpr, p.tpr).expect("string write");
        }
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Unit-square ROC plot: axes, chance diagonal, one polyline per curve and a legend.
pub fn roc_svg(curves: &[Curve]) -> String {
    let total = SIZE + 2.0 * MARGIN;
    let x = |f: f64| MARGIN + f * SIZE;
    let y = |t: f64| MARGIN + (1.0 - t) * SIZE;
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#).unwrap();
    writeln!(w, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#).unwrap();
    writeln!(w, r#"<rect class="axes" x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#).unwrap();
    for tick in [0.0, 0.5, 1.0] {
        writeln!(w, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{tick:.1}</text>"#, x(tick), y(0.0) + 18.0).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{tick:.1}</text>"#, x(0.0) - 6.0, y(tick) + 4.0).unwrap();
    }
    writeln!(w, r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">false positive rate</text>"#, x(0.5), total - 8.0).unwrap();
    writeln!(
        w,
        r#"<text x="14" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.1})">true positive rate</text>"#,
        y(0.5),
        y(0.5)
    )
    .unwrap();
    writeln!(
        w,
        r#"<line class="chance" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 4"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    )
    .unwrap();
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c.points.iter().map(|p| format!("{:.3},{:.3}", x(p.fpr), y(p.tpr))).collect();
        writeln!(w, r#"<polyline class="roc" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" ")).unwrap();
        let ly = y(0.0) - 16.0 * (curves.len() - i) as f64;
        writeln!(w, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, x(0.55), x(0.62)).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="{:.1}" font-size="12">{} (AUC {:.3})</text>"#, x(0.64), ly + 4.0, xml_escape(&c.id), c.auc).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Curve value at `fpr` by linear interpolation; on a vertical run the
/// highest point counts.
pub fn tpr_at(points: &[RocPoint], fpr: f64) -> f64 {
    points
        .windows(2)
        .filter(|w| w[0].fpr <= fpr && fpr <= w[1].fpr)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if b.fpr == a.fpr {
                a.tpr.max(b.tpr)
            } else {
                a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr)
            }
        })
        .fold(f64::NAN, f64::max)
}

/// Evenly spaced fpr values on which curves are compared.
pub const DOMINANCE_GRID: usize = 101;

/// True when `upper` is at least `lower` at every grid fpr.
pub fn dominates(upper: &[RocPoint], lower: &[RocPoint]) -> bool {
    (0..DOMINANCE_GRID).all(|i| {
        let f = i as f64 / (DOMINANCE_GRID - 1) as f64;
        tpr_at(upper, f) >= tpr_at(lower, f) - 1e-12
    })
}

/// One line per ordered pair where the first curve dominates the second.
pub fn dominance_lines(curves: &[Curve]) -> Vec<String> {
    let mut lines = Vec::new();
    for (i, a) in curves.iter().enumerate() {
        for (j, b) in curves.iter().enumerate() {
            if i != j && dominates(&a.points, &b.points) && !(j < i && dominates(&b.points, &a.points)) {
                lines.push(format!(
                    "dominance: {} is above {} at every grid fpr (AUC {:.4} vs {:.4})",
                    a.id, b.id, a.auc, b.auc
                ));
            }
        }
    }
    lines
}
