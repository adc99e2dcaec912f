//! Continuum domains and their boundary bookkeeping.

use crate::error::{invalid, Result};
use crate::geom::{point_polyline_dist, point_segment_dist, segment_hit, Point, GEOM_EPS};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disc { center: Point, radius: f64 },
    Rectangle { min: Point, max: Point },
    Polygon { vertices: Vec<Point> },
    Slit { base: Box<Shape>, slit: Vec<Point> },
    Difference { base: Box<Shape>, removed: Vec<Shape> },
}

/// A boundary point together with the side it is approached from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkedPoint {
    pub point: Point,
    /// A point of the domain near `point`; picks the prime end on slits.
    #[serde(default)]
    pub approach_from: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub shape: Shape,
    #[serde(default)]
    pub marked: Option<MarkedPoint>,
}

const DISC_TRACE_POINTS: usize = 2048;

impl Shape {
    pub fn disc(center: Point, radius: f64) -> Self {
        Shape::Disc { center, radius }
    }

    pub fn rectangle(min: Point, max: Point) -> Self {
        Shape::Rectangle { min, max }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Disc { radius, .. } => {
                if !(*radius > 0.0) {
                    return invalid("disc radius must be positive");
                }
            }
            Shape::Rectangle { min, max } => {
                if !(max.x > min.x && max.y > min.y) {
                    return invalid("rectangle must have positive width and height");
                }
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return invalid("polygon needs at least three vertices");
                }
                if signed_area(vertices).abs() <= GEOM_EPS {
                    return invalid("polygon has zero area");
                }
                let n = vertices.len();
                for i in 0..n {
                    for j in i + 1..n {
                        let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                        if adjacent {
                            continue;
                        }
                        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                        let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                        if segment_hit(a, b, c, d).is_some() {
                            return invalid(format!("polygon edges {i} and {j} intersect"));
                        }
                    }
                }
            }
            Shape::Slit { base, slit } => {
                base.validate()?;
                if slit.len() < 2 {
                    return invalid("slit needs at least two points");
                }
                for p in slit {
                    if !base.contains(*p) && base.boundary_distance(*p) > 1e-9 {
                        return invalid("slit leaves the closure of its base shape");
                    }
                }
            }
            Shape::Difference { base, removed } => {
                base.validate()?;
                for r in removed {
                    r.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Strict interior membership.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Disc { center, radius } => p.dist(*center) < *radius - GEOM_EPS,
            Shape::Rectangle { min, max } => {
                p.x > min.x + GEOM_EPS
                    && p.x < max.x - GEOM_EPS
                    && p.y > min.y + GEOM_EPS
                    && p.y < max.y - GEOM_EPS
            }
            Shape::Polygon { vertices } => {
                point_polyline_dist(p, &closed(vertices)) > GEOM_EPS && winding_number(vertices, p) != 0
            }
            Shape::Slit { base, slit } => base.contains(p) && point_polyline_dist(p, slit) > GEOM_EPS,
            Shape::Difference { base, removed } => {
                base.contains(p)
                    && removed
                        .iter()
                        .all(|r| !r.contains(p) && r.boundary_distance(p) > GEOM_EPS)
            }
        }
    }

    /// Smallest parameter at which the segment `p→q` touches the boundary,
    /// with `p` assumed strictly inside.
    pub fn first_boundary_hit(&self, p: Point, q: Point) -> Option<f64> {
        match self {
            Shape::Disc { center, radius } => {
                let d = q - p;
                let f = p - *center;
                let a = d.dot(d);
                if a == 0.0 {
                    return None;
                }
                let b = 2.0 * f.dot(d);
                let c = f.dot(f) - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b + disc.sqrt()) / (2.0 * a);
                (t <= 1.0 + 1e-12).then_some(t.clamp(0.0, 1.0))
            }
            Shape::Rectangle { min, max } => {
                let corners = [*min, Point::new(max.x, min.y), *max, Point::new(min.x, max.y)];
                polyline_first_hit(p, q, &closed(&corners))
            }
            Shape::Polygon { vertices } => polyline_first_hit(p, q, &closed(vertices)),
            Shape::Slit { base, slit } => min_opt(base.first_boundary_hit(p, q), polyline_first_hit(p, q, slit)),
            Shape::Difference { base, removed } => {
                let mut best = base.first_boundary_hit(p, q);
                for r in removed {
                    best = min_opt(best, r.first_touch_from_outside(p, q));
                }
                best
            }
        }
    }

    fn first_touch_from_outside(&self, p: Point, q: Point) -> Option<f64> {
        match self {
            Shape::Disc { center, radius } => {
                if point_segment_dist(*center, p, q) > *radius + GEOM_EPS {
                    return None;
                }
                let d = q - p;
                let f = p - *center;
                let a = d.dot(d);
                let b = 2.0 * f.dot(d);
                let c = f.dot(f) - radius * radius;
                let disc = (b * b - 4.0 * a * c).max(0.0);
                let t = (-b - disc.sqrt()) / (2.0 * a);
                (-1e-12..=1.0 + 1e-12).contains(&t).then_some(t.clamp(0.0, 1.0))
            }
            other => polyline_first_hit(p, q, &other.boundary_trace()),
        }
    }

    /// Distance from `p` to the boundary (including slits and holes).
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            Shape::Disc { center, radius } => (p.dist(*center) - radius).abs(),
            Shape::Slit { base, slit } => base.boundary_distance(p).min(point_polyline_dist(p, slit)),
            Shape::Difference { base, removed } => removed
                .iter()
                .map(|r| r.boundary_distance(p))
                .fold(base.boundary_distance(p), f64::min),
            _ => point_polyline_dist(p, &self.boundary_trace()),
        }
    }

    /// Closed boundary loop traversed counterclockwise (domain on the left).
    ///
    /// Slits are inserted as an out-and-back excursion at their attachment
    /// point, so each side of a slit gets its own stretch of the trace. Holes of
    /// a difference are not part of the trace.
    pub fn boundary_trace(&self) -> Vec<Point> {
        match self {
            Shape::Disc { center, radius } => (0..=DISC_TRACE_POINTS)
                .map(|k| {
                    let a = TAU * k as f64 / DISC_TRACE_POINTS as f64;
                    Point::new(center.x + radius * a.cos(), center.y + radius * a.sin())
                })
                .collect(),
            Shape::Rectangle { min, max } => closed(&[*min, Point::new(max.x, min.y), *max, Point::new(min.x, max.y)]),
            Shape::Polygon { vertices } => {
                let mut v = vertices.clone();
                if signed_area(&v) < 0.0 {
                    v.reverse();
                }
                closed(&v)
            }
            Shape::Slit { base, slit } => {
                let mut trace = base.boundary_trace();
                let attach = slit[0];
                // locate attachment segment on the outer trace
                let (mut best_i, mut best_d) = (0, f64::INFINITY);
                for i in 0..trace.len() - 1 {
                    let d = point_segment_dist(attach, trace[i], trace[i + 1]);
                    if d < best_d {
                        best_d = d;
                        best_i = i;
                    }
                }
                let mut excursion = vec![attach];
                excursion.extend_from_slice(&slit[1..]);
                excursion.extend(slit.iter().rev().skip(1).copied());
                let tail = trace.split_off(best_i + 1);
                trace.extend(excursion);
                trace.extend(tail);
                trace
            }
            Shape::Difference { base, .. } => base.boundary_trace(),
        }
    }

    pub fn is_simply_connected(&self) -> bool {
        match self {
            Shape::Difference { removed, .. } => removed.is_empty(),
            Shape::Slit { base, .. } => base.is_simply_connected(),
            _ => true,
        }
    }

    /// Rough bounding box of the shape.
    pub fn bbox(&self) -> (Point, Point) {
        match self {
            Shape::Disc { center, radius } => (
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            ),
            Shape::Rectangle { min, max } => (*min, *max),
            Shape::Polygon { vertices } => {
                let b = crate::geom::BBox::of_points(vertices).expect("validated polygon");
                (b.min, b.max)
            }
            Shape::Slit { base, .. } | Shape::Difference { base, .. } => base.bbox(),
        }
    }
}

impl DomainSpec {
    pub fn new(shape: Shape) -> Self {
        Self { shape, marked: None }
    }

    pub fn with_marked(mut self, point: Point, approach_from: Option<Point>) -> Self {
        self.marked = Some(MarkedPoint { point, approach_from });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()
    }

    /// Coordinate of a boundary point along the boundary trace, measured from
    /// the marked point when present. `from` is a point of the domain on the
    /// side the boundary is approached from.
    pub fn arc_coordinate(&self, hit: Point, from: Point) -> f64 {
        let trace = self.shape.boundary_trace();
        let total = crate::geom::polyline_length(&trace);
        let raw = trace_coordinate(&trace, hit, from);
        let origin = match &self.marked {
            Some(m) => trace_coordinate(&trace, m.point, m.approach_from.unwrap_or(m.point)),
            None => 0.0,
        };
        if total <= 0.0 {
            return 0.0;
        }
        (raw - origin).rem_euclid(total)
    }
}

fn trace_coordinate(trace: &[Point], hit: Point, from: Point) -> f64 {
    let mut acc = 0.0;
    let mut best: Option<(f64, f64, bool)> = None; // (distance, coordinate, on-left)
    for w in trace.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.dist(b);
        let d = point_segment_dist(hit, a, b);
        if len > 0.0 {
            let t = ((hit - a).dot(b - a) / (len * len)).clamp(0.0, 1.0);
            let left = (b - a).cross(from - a) > 0.0;
            let coord = acc + t * len;
            let better = match best {
                None => true,
                Some((bd, _, bl)) => {
                    if (d - bd).abs() <= 1e-9 {
                        left && !bl
                    } else {
                        d < bd
                    }
                }
            };
            if better {
                best = Some((d, coord, left));
            }
        }
        acc += len;
    }
    best.map(|b| b.1).unwrap_or(0.0)
}

fn closed(v: &[Point]) -> Vec<Point> {
    let mut out = v.to_vec();
    if let Some(f) = v.first() {
        out.push(*f);
    }
    out
}

fn polyline_first_hit(p: Point, q: Point, line: &[Point]) -> Option<f64> {
    line.windows(2)
        .filter_map(|w| segment_hit(p, q, w[0], w[1]))
        .filter(|t| *t > 1e-12 || p.dist(q) == 0.0)
        .fold(None, |acc, t| min_opt(acc, Some(t)))
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

pub(crate) fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() / 2.0
}

fn winding_number(v: &[Point], p: Point) -> i32 {
    let n = v.len();
    let mut wn = 0;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if a.y <= p.y {
            if b.y > p.y && (b - a).cross(p - a) > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && (b - a).cross(p - a) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_hit_parameter() {
        let d = Shape::disc(Point::new(0.0, 0.0), 1.0);
        let t = d.first_boundary_hit(Point::new(0.0, 0.0), Point::new(2.0, 0.0)).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        assert!(d.first_boundary_hit(Point::new(0.0, 0.0), Point::new(0.5, 0.0)).is_none());
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let bow = Shape::Polygon {
            vertices: vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
        };
        assert!(bow.validate().is_err());
    }

    #[test]
    fn slit_excludes_its_points() {
        let s = Shape::Slit {
            base: Box::new(Shape::rectangle(Point::new(0.0, 0.0), Point::new(1.0, 1.0))),
            slit: vec![Point::new(0.5, 0.0), Point::new(0.5, 0.5)],
        };
        s.validate().unwrap();
        assert!(!s.contains(Point::new(0.5, 0.25)));
        assert!(s.contains(Point::new(0.25, 0.25)));
        let t = s.first_boundary_hit(Point::new(0.25, 0.25), Point::new(0.75, 0.25)).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slit_sides_get_distinct_coordinates() {
        let d = DomainSpec::new(Shape::Slit {
            base: Box::new(Shape::rectangle(Point::new(0.0, 0.0), Point::new(1.0, 1.0))),
            slit: vec![Point::new(0.5, 0.0), Point::new(0.5, 0.5)],
        });
        let hit = Point::new(0.5, 0.25);
        let left = d.arc_coordinate(hit, Point::new(0.25, 0.25));
        let right = d.arc_coordinate(hit, Point::new(0.75, 0.25));
        assert!((left - right).abs() > 0.4, "left {left} right {right}");
    }

    #[test]
    fn rectangle_arc_coordinate_ccw() {
        let d = DomainSpec::new(Shape::rectangle(Point::new(0.0, 0.0), Point::new(1.0, 1.0)));
        let bottom = d.arc_coordinate(Point::new(0.5, 0.0), Point::new(0.5, 0.1));
        let right = d.arc_coordinate(Point::new(1.0, 0.5), Point::new(0.9, 0.5));
        let top = d.arc_coordinate(Point::new(0.5, 1.0), Point::new(0.5, 0.9));
        assert!(bottom < right && right < top);
    }
}
