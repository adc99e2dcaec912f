//! Planar geometry helpers: points, segments, polylines and curve distances.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn arg(self) -> f64 {
        self.y.atan2(self.x)
    }
    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

pub(crate) const GEOM_EPS: f64 = 1e-12;

/// Smallest parameters `t ∈ [0,1]` on `p→q` where it meets the closed segment `a→b`.
pub fn segment_hit(p: Point, q: Point, a: Point, b: Point) -> Option<f64> {
    let r = q - p;
    let s = b - a;
    let denom = r.cross(s);
    let scale = r.norm().max(s.norm()).max(1.0);
    let tol = GEOM_EPS * scale * scale;
    let ap = a - p;
    if denom.abs() <= tol {
        // parallel; touching counts only if collinear
        if ap.cross(r).abs() > tol {
            return None;
        }
        let rr = r.dot(r);
        if rr <= tol {
            return (point_segment_dist(p, a, b) <= 1e-12 * scale).then_some(0.0);
        }
        let t0 = ap.dot(r) / rr;
        let t1 = (b - p).dot(r) / rr;
        let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        if hi < -1e-12 || lo > 1.0 + 1e-12 {
            return None;
        }
        return Some(lo.max(0.0));
    }
    let t = ap.cross(s) / denom;
    let u = ap.cross(r) / denom;
    let e = 1e-12;
    if t >= -e && t <= 1.0 + e && u >= -e && u <= 1.0 + e {
        Some(t.clamp(0.0, 1.0))
    } else {
        None
    }
}

pub fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

/// Distance from `p` to a polyline.
pub fn point_polyline_dist(p: Point, line: &[Point]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => p.dist(line[0]),
        _ => line
            .windows(2)
            .map(|w| point_segment_dist(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Signed angle from `u` to `v` in `(-π, π]`.
pub fn signed_angle(u: Point, v: Point) -> f64 {
    u.cross(v).atan2(u.dot(v))
}

pub fn polyline_length(line: &[Point]) -> f64 {
    line.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Largest pairwise distance; quadratic in the number of points.
pub fn diameter(points: &[Point]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max(p.dist(*q));
        }
    }
    best
}

/// Largest pairwise distance via the convex hull; fast on large point sets.
pub fn hull_diameter(points: &[Point]) -> f64 {
    if points.len() < 3 {
        return diameter(points);
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    diameter(&hull)
}

/// Resample a polyline so consecutive points are at most `step` apart.
pub fn densify(line: &[Point], step: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(line.len());
    for w in line.windows(2) {
        let len = w[0].dist(w[1]);
        let k = (len / step).ceil().max(1.0) as usize;
        for j in 0..k {
            out.push(w[0].lerp(w[1], j as f64 / k as f64));
        }
    }
    if let Some(last) = line.last() {
        out.push(*last);
    }
    out
}

/// Discrete Fréchet distance between two point sequences.
///
/// Upper-bounds the uniform distance up to reparametrisation between the
/// polylines through the points.
pub fn discrete_frechet(a: &[Point], b: &[Point]) -> f64 {
    frechet_prefix_profile(a, b).last().copied().unwrap_or(f64::INFINITY)
}

/// For every prefix `a[..=i]`, the discrete Fréchet distance between that
/// prefix and the whole of `b`.
pub fn frechet_prefix_profile(a: &[Point], b: &[Point]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![f64::INFINITY; a.len()];
    }
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    let mut out = Vec::with_capacity(a.len());
    for (i, &p) in a.iter().enumerate() {
        for j in 0..m {
            let d = p.dist(b[j]);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        out.push(cur[m - 1]);
        std::mem::swap(&mut prev, &mut cur);
    }
    out
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }
    pub fn of_points(points: &[Point]) -> Option<Self> {
        let first = *points.first()?;
        let mut b = BBox::new(first, first);
        for p in points {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }
    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn crossing_segments_hit() {
        let t = segment_hit(
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, -1.0),
            Point::new(1.0, 1.0),
        );
        assert!((t.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn touching_endpoint_counts() {
        let t = segment_hit(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, -1.0),
            Point::new(1.0, 1.0),
        );
        assert_eq!(t, Some(1.0));
    }

    #[test]
    fn disjoint_segments_miss() {
        assert!(segment_hit(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0)
        )
        .is_none());
    }

    #[test]
    fn frechet_of_identical_curves_is_zero() {
        let a = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)];
        assert_eq!(discrete_frechet(&a, &a), 0.0);
    }

    #[test]
    fn frechet_detects_order() {
        let a = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        let b = vec![Point::new(1.0, 0.0), Point::new(0.0, 0.0)];
        assert!((discrete_frechet(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_diameter_agrees_with_brute_force() {
        let pts: Vec<Point> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.7;
                Point::new(t.sin() * (1.0 + 0.1 * t), t.cos() * 0.5)
            })
            .collect();
        assert!((hull_diameter(&pts) - diameter(&pts)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn frechet_is_symmetric(xs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8),
                                ys in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8)) {
            let a: Vec<Point> = xs.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let b: Vec<Point> = ys.iter().map(|&(x, y)| Point::new(x, y)).collect();
            prop_assert!((discrete_frechet(&a, &b) - discrete_frechet(&b, &a)).abs() < 1e-12);
        }
    }
}
