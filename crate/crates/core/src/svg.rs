//! Deterministic SVG rendering of a scattering diagram. Floats appear only here.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::lattice::{Point, RelativeClass};
use crate::scattering::{ScatteringDiagram, WallKind};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const SIZE: f64 = 600.0;

struct Frame {
    lo: (f64, f64),
    hi: (f64, f64),
}

impl Frame {
    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        let sx = SIZE / (self.hi.0 - self.lo.0);
        let sy = SIZE / (self.hi.1 - self.lo.1);
        ((p.0 - self.lo.0) * sx, SIZE - (p.1 - self.lo.1) * sy)
    }

    /// Largest t >= 0 with p + t d inside the frame.
    fn exit(&self, p: (f64, f64), d: (f64, f64)) -> f64 {
        let mut t = f64::INFINITY;
        for (pc, dc, lo, hi) in [(p.0, d.0, self.lo.0, self.hi.0), (p.1, d.1, self.lo.1, self.hi.1)] {
            if dc > 0.0 {
                t = t.min((hi - pc) / dc);
            } else if dc < 0.0 {
                t = t.min((lo - pc) / dc);
            }
        }
        t.max(0.0)
    }
}

fn frame(d: &ScatteringDiagram, extra: &[Point]) -> Frame {
    let mut pts: Vec<(f64, f64)> = d.walls().iter().map(|w| w.base.to_f64()).collect();
    pts.extend(d.crossing_points().iter().map(|p| p.to_f64()));
    pts.extend(extra.iter().map(|p| p.to_f64()));
    if pts.is_empty() {
        pts.push((0.0, 0.0));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let pad = ((x1 - x0).max(y1 - y0) * 0.5).max(1.0);
    // square frame so angles are preserved
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let half = (x1 - x0).max(y1 - y0) / 2.0 + pad;
    Frame { lo: (cx - half, cy - half), hi: (cx + half, cy + half) }
}

fn slab_label(slab: &BTreeMap<u64, crate::lattice::Rat>) -> String {
    let parts: Vec<String> = slab.iter().map(|(d, c)| format!("{d}:{c}")).collect();
    parts.join(" ")
}

/// Walls as colored segments (one color per class), labels at the far end, crossings as dots,
/// singular points as crosses.
pub fn render(d: &ScatteringDiagram, singular_points: &[Point]) -> String {
    let f = frame(d, singular_points);
    let mut colors: BTreeMap<&RelativeClass, &str> = BTreeMap::new();
    let mut classes: Vec<&RelativeClass> = d.walls().iter().map(|w| &w.class).collect();
    classes.sort();
    classes.dedup();
    for (i, c) in classes.into_iter().enumerate() {
        colors.insert(c, PALETTE[i % PALETTE.len()]);
    }
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, w) in d.walls().iter().enumerate() {
        let b = w.base.to_f64();
        let dir = w.direction.to_f64();
        let t1 = f.exit(b, dir);
        let t0 = if w.kind == WallKind::Line { -f.exit(b, (-dir.0, -dir.1)) } else { 0.0 };
        let p0 = f.map((b.0 + t0 * dir.0, b.1 + t0 * dir.1));
        let p1 = f.map((b.0 + t1 * dir.0, b.1 + t1 * dir.1));
        let col = colors[&w.class];
        let _ = writeln!(
            s,
            r#"<line id="wall{i}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{col}" stroke-width="2"/>"#,
            p0.0, p0.1, p1.0, p1.1
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-size="11" fill="{col}">{} [{}]</text>"#,
            (p1.0 - 4.0).clamp(4.0, SIZE - 90.0),
            (p1.1 + 12.0).clamp(12.0, SIZE - 4.0),
            w.class,
            slab_label(&w.slab)
        );
    }
    for p in d.crossing_points() {
        let q = f.map(p.to_f64());
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="black"><title>{p}</title></circle>"#, q.0, q.1);
    }
    for p in singular_points {
        let q = f.map(p.to_f64());
        let _ = writeln!(
            s,
            r#"<path d="M{:.3} {:.3} l8 8 m0 -8 l-8 8" stroke="black" stroke-width="2"/>"#,
            q.0 - 4.0,
            q.1 - 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
