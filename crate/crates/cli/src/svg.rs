//! Minimal SVG figures: polylines and filled squares in domain coordinates.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use wired_ust::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stroke {
    pub points: Vec<[f64; 2]>,
    pub color: String,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tile {
    pub center: [f64; 2],
    pub size: f64,
    pub color: String,
}

/// Drawable content of a run output, stored in its JSON document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure {
    pub strokes: Vec<Stroke>,
    pub tiles: Vec<Tile>,
}

impl Figure {
    pub fn line(&mut self, pts: &[Point], color: &str, width: f64) {
        self.strokes.push(Stroke { points: pts.iter().map(|p| [p.x, p.y]).collect(), color: color.into(), width });
    }

    fn bounds(&self) -> Option<([f64; 2], [f64; 2])> {
        let pts = self
            .strokes
            .iter()
            .flat_map(|s| s.points.iter().map(move |p| (*p, s.width)))
            .chain(self.tiles.iter().map(|t| (t.center, t.size)));
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (p, pad) in pts {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k] - pad);
                hi[k] = hi[k].max(p[k] + pad);
            }
        }
        lo[0].is_finite().then_some((lo, hi))
    }

    pub fn to_svg(&self) -> String {
        let (lo, hi) = self.bounds().unwrap_or(([0.0, 0.0], [1.0, 1.0]));
        let (w, h) = ((hi[0] - lo[0]).max(1e-9), (hi[1] - lo[1]).max(1e-9));
        let scale = 800.0 / w.max(h);
        let tx = |x: f64| (x - lo[0]) * scale;
        let ty = |y: f64| (hi[1] - y) * scale;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.1}" height="{:.1}" viewBox="0 0 {:.1} {:.1}">"#,
            w * scale,
            h * scale,
            w * scale,
            h * scale
        );
        for t in &self.tiles {
            let half = t.size / 2.0;
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                tx(t.center[0] - half),
                ty(t.center[1] + half),
                t.size * scale,
                t.size * scale,
                t.color
            );
        }
        for st in &self.strokes {
            let pts: Vec<String> = st.points.iter().map(|p| format!("{:.3},{:.3}", tx(p[0]), ty(p[1]))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{:.3}" stroke-linecap="round" stroke-linejoin="round"/>"#,
                pts.join(" "),
                st.color,
                (st.width * scale).max(0.5)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Well-separated hues for branch `i`.
pub fn palette(i: usize) -> String {
    let hue = (i as f64 * 137.508) % 360.0;
    format!("hsl({hue:.1},70%,45%)")
}

/// Blue–white–red map of `t ∈ [-1, 1]`.
pub fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let u = 1.0 + t;
        (u, u, 1.0)
    } else {
        (1.0, 1.0 - t, 1.0 - t)
    };
    let c = |x: f64| (x * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(r), c(g), c(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_each_element() {
        let mut f = Figure::default();
        f.line(&[Point::new(0.0, 0.0), Point::new(1.0, 1.0)], "black", 0.1);
        f.tiles.push(Tile { center: [0.5, 0.5], size: 0.2, color: diverging(0.0) });
        let s = f.to_svg();
        assert_eq!(s.matches("<polyline").count(), 1);
        assert_eq!(s.matches("<rect").count(), 1);
        assert!(s.contains("#ffffff"));
    }
}
