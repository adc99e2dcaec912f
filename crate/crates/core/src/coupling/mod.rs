//! Couplings of spanning trees in nested domains: the boundary-following
//! coupling, the loop-soup/reversal coupling and the annulus experiment.

mod annulus;
mod lower;
mod upper;

pub use annulus::{annulus_experiment, exact_annulus_ratios, AnnulusConfig, AnnulusReport, ExactAnnulusReport};
pub use lower::{
    build_x1_tilde, build_x2_tilde, capped_loop_mass, epsilon_good, lower_coupling_experiment, GoodFailure, LowerState,
    X1Outcome, X2Tilde,
};
pub use upper::{shared_wilson, upper_coupling_experiment, ErMethod, ErOutcome, ErSampler, SharedReport};

use crate::domain::{DomainSpec, Shape};
use crate::erasure::SimplePath;
use crate::error::{invalid, Error, Result};
use crate::geom::{point_segment_dist, polyline_length, Point};
use crate::lattice::{build_square_lattice, discretize, WiredGraph};
use crate::ust::PartialTree;
use crate::walk::Tube;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::TAU;

fn default_l_max() -> usize {
    6
}
fn default_tries() -> u64 {
    10_000
}

/// Parameters shared by the coupling experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub d1: Shape,
    pub d2: Shape,
    /// Observation region.
    pub u: Shape,
    pub u1: Shape,
    pub u2: Shape,
    pub u3: Shape,
    pub mesh: f64,
    /// Boundary-following tolerance and loop diameter cap.
    pub r: f64,
    pub epsilon: f64,
    /// Longest loop kept in the capped soup.
    #[serde(default = "default_l_max")]
    pub loop_l_max: usize,
    /// Half-width of the tubes used to follow curves; `ε²/4` (at least
    /// one and a half mesh steps) when absent.
    #[serde(default)]
    pub tube_half_width: Option<f64>,
    #[serde(default = "default_tries")]
    pub max_tries: u64,
    /// Extra turns of the domain map across the annulus `D₂ ∖ U₃`.
    #[serde(default)]
    pub twist: i32,
}

impl CouplingConfig {
    /// Concentric discs of radii 1 and 1.5 with observation disc 0.3.
    pub fn concentric(mesh: f64) -> Self {
        let o = Point::new(0.0, 0.0);
        Self {
            d1: Shape::Disc { center: o, radius: 1.0 },
            d2: Shape::Disc { center: o, radius: 1.5 },
            u: Shape::Disc { center: o, radius: 0.3 },
            u1: Shape::Disc { center: o, radius: 0.4 },
            u2: Shape::Disc { center: o, radius: 0.5 },
            u3: Shape::Disc { center: o, radius: 0.65 },
            mesh,
            r: 0.0625,
            epsilon: 0.25,
            loop_l_max: default_l_max(),
            tube_half_width: None,
            max_tries: default_tries(),
            twist: 0,
        }
    }

    pub fn tube_width(&self) -> f64 {
        self.tube_half_width.unwrap_or((self.epsilon * self.epsilon / 4.0).max(1.5 * self.mesh))
    }

    /// Copies at `ε_n = ε/4ⁿ` for `n < levels`, everything else unchanged.
    pub fn eps_ladder(&self, levels: usize) -> Vec<Self> {
        (0..levels)
            .map(|n| Self { epsilon: self.epsilon / 4f64.powi(n as i32), ..self.clone() })
            .collect()
    }

    fn check_basic(&self) -> Result<()> {
        if !(self.mesh > 0.0 && self.r > 0.0 && self.epsilon > 0.0 && self.epsilon < 1.0) {
            return invalid("mesh and r must be positive and ε in (0, 1)");
        }
        for s in [&self.d1, &self.d2, &self.u, &self.u1, &self.u2, &self.u3] {
            s.validate()?;
        }
        Ok(())
    }

    /// Nesting needed by the boundary-following coupling: `U ⊂ D₁ ⊆ D₂`, with
    /// `r` below the gap between `∂D₁` and `∂D₂` unless they coincide.
    pub fn validate_upper(&self) -> Result<()> {
        self.check_basic()?;
        gap(&self.u, &self.d1).filter(|g| *g > 0.0).ok_or_else(|| Error::InvalidInput("U must lie inside D₁".into()))?;
        if self.d1 != self.d2 {
            let g = gap(&self.d1, &self.d2).ok_or_else(|| Error::InvalidInput("D₁ must lie inside D₂".into()))?;
            if g <= self.r {
                return invalid("r must be smaller than the gap between ∂D₁ and ∂D₂");
            }
        }
        Ok(())
    }

    /// Full nesting `U ⊂ U₁ ⊂ U₂ ⊂ U₃ ⊂ D₁ ⊆ D₂` with every gap above `r`.
    pub fn validate_lower(&self) -> Result<()> {
        self.check_basic()?;
        let chain = [&self.u, &self.u1, &self.u2, &self.u3, &self.d1];
        for w in chain.windows(2) {
            match gap(w[0], w[1]) {
                Some(g) if g > self.r => {}
                Some(_) => return invalid("r must be smaller than every gap between nested regions"),
                None => return invalid("regions must be strictly nested"),
            }
        }
        if self.d1 != self.d2 && gap(&self.d1, &self.d2).is_none_or(|g| g <= 0.0) {
            return invalid("D₁ must lie inside D₂");
        }
        Ok(())
    }
}

/// Smallest distance from `∂inner` to `∂outer` when `inner ⊂ outer`.
fn gap(inner: &Shape, outer: &Shape) -> Option<f64> {
    let mut best = f64::INFINITY;
    for p in inner.boundary_trace() {
        if !outer.contains(p) {
            return None;
        }
        best = best.min(outer.boundary_distance(p));
    }
    Some(best)
}

/// Distance from `p` to the closure of `shape` (zero inside).
pub(crate) fn distance_to(shape: &Shape, p: Point) -> f64 {
    if shape.contains(p) {
        0.0
    } else {
        shape.boundary_distance(p)
    }
}

/// Distance along the ray from `c` in direction `angle` to `∂shape`, for a
/// shape star-shaped around `c`.
fn radius_along(shape: &Shape, c: Point, angle: f64) -> f64 {
    let (lo_b, hi_b) = shape.bbox();
    let mut hi = 2.0 * (hi_b - lo_b).norm() + (c - lo_b).norm();
    let mut lo = 0.0;
    let d = Point::new(angle.cos(), angle.sin());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if shape.contains(c + d * mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Homeomorphism `φ: D₂ → D₁`, the identity on `U₃` and a radial
/// interpolation (with an optional angular shear of `2π·twist`) outside.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMap {
    pub center: Point,
    pub inner: Shape,
    pub from: Shape,
    pub to: Shape,
    pub twist: i32,
}

impl DomainMap {
    pub fn new(cfg: &CouplingConfig) -> Self {
        let (a, b) = cfg.u3.bbox();
        Self { center: a.lerp(b, 0.5), inner: cfg.u3.clone(), from: cfg.d2.clone(), to: cfg.d1.clone(), twist: cfg.twist }
    }

    fn radii(&self, angle: f64) -> (f64, f64, f64) {
        (
            radius_along(&self.inner, self.center, angle),
            radius_along(&self.from, self.center, angle),
            radius_along(&self.to, self.center, angle),
        )
    }

    pub fn apply(&self, p: Point) -> Point {
        if self.inner.contains(p) {
            return p;
        }
        let v = p - self.center;
        let (s, th) = (v.norm(), v.arg());
        let (a, b2, b1) = self.radii(th);
        if s <= a {
            return p;
        }
        let t = ((s - a) / (b2 - a)).min(1.0);
        let s1 = a + t * (b1 - a);
        let th1 = th + TAU * self.twist as f64 * t;
        self.center + Point::new(th1.cos(), th1.sin()) * s1
    }

    pub fn invert(&self, q: Point) -> Point {
        if self.inner.contains(q) {
            return q;
        }
        let v = q - self.center;
        let (s1, th1) = (v.norm(), v.arg());
        let mut th = th1;
        let mut t = 0.0;
        for _ in 0..200 {
            let (a, _, b1) = self.radii(th);
            t = ((s1 - a) / (b1 - a)).clamp(0.0, 1.0);
            let next = th1 - TAU * self.twist as f64 * t;
            if (next - th).abs() < 1e-15 {
                break;
            }
            th = next;
        }
        let (a, b2, _) = self.radii(th);
        let s = a + t * (b2 - a);
        self.center + Point::new(th.cos(), th.sin()) * s
    }
}

/// Both domains discretized on one lattice, with the vertex and edge
/// correspondences and the region masks.
#[derive(Debug, Clone)]
pub struct CouplingSetup {
    pub cfg: CouplingConfig,
    pub g1: WiredGraph,
    pub g2: WiredGraph,
    /// `D₂` index → `D₁` index.
    pub to1: Vec<Option<usize>>,
    /// `D₁` index → `D₂` index.
    pub to2: Vec<usize>,
    /// `(D₁ tail, source edge)` → `D₁` edge.
    edge1: HashMap<(usize, usize), usize>,
    pub phi: DomainMap,
}

/// Region masks over the interior of a graph.
pub(crate) fn mask(g: &WiredGraph, shape: &Shape) -> Vec<bool> {
    g.positions.iter().map(|&p| shape.contains(p)).collect()
}

impl CouplingSetup {
    pub fn new(cfg: &CouplingConfig) -> Result<Self> {
        let (lo, hi) = cfg.d2.bbox();
        let (lo1, hi1) = cfg.d1.bbox();
        let snap = |x: f64, up: bool| {
            let k = x / cfg.mesh;
            (if up { k.ceil() + 1.0 } else { k.floor() - 1.0 }) * cfg.mesh
        };
        let min = Point::new(snap(lo.x.min(lo1.x), false), snap(lo.y.min(lo1.y), false));
        let max = Point::new(snap(hi.x.max(hi1.x), true), snap(hi.y.max(hi1.y), true));
        let lattice = build_square_lattice(cfg.mesh, min, max)?;
        let g1 = discretize(&lattice, &DomainSpec::new(cfg.d1.clone()))?;
        let g2 = discretize(&lattice, &DomainSpec::new(cfg.d2.clone()))?;
        let idx2 = g2.index_of_source();
        let mut to1 = vec![None; g2.n_interior()];
        let mut to2 = Vec::with_capacity(g1.n_interior());
        for (v1, s) in g1.source_vertex.iter().enumerate() {
            let v2 = *s.and_then(|s| idx2.get(&s)).ok_or_else(|| Error::InvalidInput("D₁ must lie inside D₂".into()))?;
            to1[v2] = Some(v1);
            to2.push(v2);
        }
        let edge1 = g1
            .edges
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.source.map(|s| ((e.tail, s), i)))
            .collect();
        Ok(Self { phi: DomainMap::new(cfg), cfg: cfg.clone(), g1, g2, to1, to2, edge1 })
    }

    /// `D₁` edge taking the same lattice step as the `D₂` edge `e2` from a
    /// vertex of `D₁` (a boundary edge when the step leaves `D₁`).
    pub fn edge_in_d1(&self, e2: usize) -> Option<usize> {
        let e = &self.g2.edges[e2];
        let t1 = self.to1[e.tail]?;
        self.edge1.get(&(t1, e.source?)).copied()
    }

    pub fn u_mask1(&self, shape: &Shape) -> Vec<bool> {
        mask(&self.g1, shape)
    }

    pub fn u_mask2(&self, shape: &Shape) -> Vec<bool> {
        mask(&self.g2, shape)
    }
}

/// Lattice key of a point, for comparing configurations across graphs.
pub(crate) fn key_of(p: Point, mesh: f64) -> (i64, i64) {
    ((p.x / mesh * 4.0).round() as i64, (p.y / mesh * 4.0).round() as i64)
}

/// Whether two partial trees agree on the vertices of `region1` (`D₁`
/// indices): each vertex is covered by both or neither, with parent edges
/// ending at the same point.
pub fn trees_agree(setup: &CouplingSetup, t1: &PartialTree, t2: &PartialTree, region1: &[bool]) -> bool {
    (0..setup.g1.n_interior()).filter(|&v| region1[v]).all(|v| {
        let v2 = setup.to2[v];
        match (t1.parent[v], t2.parent[v2]) {
            (None, None) => true,
            (Some(a), Some(b)) => {
                let pa = *setup.g1.edges[a].polyline.last().unwrap();
                let pb = *setup.g2.edges[b].polyline.last().unwrap();
                key_of(pa, setup.cfg.mesh) == key_of(pb, setup.cfg.mesh)
            }
            _ => false,
        }
    })
}

/// Set of directed lattice steps of a path with tail inside `shape`.
pub(crate) fn steps_inside(g: &WiredGraph, path: &SimplePath, shape: &Shape) -> Vec<((i64, i64), (i64, i64))> {
    let mut out: Vec<_> = path
        .edges
        .iter()
        .filter(|&&e| shape.contains(g.positions[g.tail(e)]))
        .map(|&e| {
            let a = g.positions[g.tail(e)];
            let b = *g.edges[e].polyline.last().unwrap();
            (key_of(a, g.mesh), key_of(b, g.mesh))
        })
        .collect();
    out.sort_unstable();
    out
}

/// Points spaced `step` apart along a polyline, keeping both ends.
pub(crate) fn resample(line: &[Point], step: f64) -> Vec<Point> {
    let total = polyline_length(line);
    if line.len() < 2 || total == 0.0 {
        return line.first().map(|p| vec![*p]).unwrap_or_default();
    }
    let k = (total / step).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(k + 1);
    let mut seg = 0;
    let mut acc = 0.0;
    for j in 0..=k {
        let target = total * j as f64 / k as f64;
        while seg + 1 < line.len() - 1 && acc + line[seg].dist(line[seg + 1]) < target {
            acc += line[seg].dist(line[seg + 1]);
            seg += 1;
        }
        let len = line[seg].dist(line[seg + 1]);
        let t = if len > 0.0 { ((target - acc) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(line[seg].lerp(line[seg + 1], t));
    }
    out
}

/// Tubes following the polyline `nodes`: tube `k` is the `w`-neighbourhood
/// of the segment `[nodes[k], nodes[k+1]]` and its target the `w`-ball around
/// `nodes[k+1]`, both with `forbidden` removed.
pub(crate) fn tubes_along(g: &WiredGraph, nodes: &[Point], w: f64, forbidden: &[bool]) -> Vec<Tube> {
    let n = g.n_interior();
    nodes
        .windows(2)
        .map(|s| {
            let allowed: Vec<bool> =
                (0..n).map(|v| !forbidden[v] && point_segment_dist(g.positions[v], s[0], s[1]) <= w).collect();
            let target: Vec<bool> = (0..n).map(|v| allowed[v] && g.positions[v].dist(s[1]) <= w).collect();
            Tube { allowed, target }
        })
        .collect()
}

/// Per-run outcome of a coupling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub agree_u: bool,
    pub agree_u1: Option<bool>,
    pub agree_shrunk: Option<bool>,
    /// `d(Ỹ₁, φ(Y₂))`.
    pub curve_distance: Option<f64>,
    /// `d(X̃₂, Y₂)`.
    pub walk_distance: Option<f64>,
    /// `d(X̃₁, φ(X̃₂))`.
    pub follow_distance: Option<f64>,
    pub good: Option<bool>,
    pub failing: Option<GoodFailure>,
    pub rejections: u64,
    pub soup_rejections: u64,
    pub segment_failures: u64,
    pub winding_agree: Option<bool>,
}

impl RunRecord {
    pub fn new(run: usize) -> Self {
        Self {
            run,
            agree_u: false,
            agree_u1: None,
            agree_shrunk: None,
            curve_distance: None,
            walk_distance: None,
            follow_distance: None,
            good: None,
            failing: None,
            rejections: 0,
            soup_rejections: 0,
            segment_failures: 0,
            winding_agree: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub count: u64,
    pub n: u64,
    pub value: f64,
    pub stderr: f64,
}

impl Frequency {
    pub fn new(count: u64, n: u64) -> Self {
        let value = if n == 0 { 0.0 } else { count as f64 / n as f64 };
        let stderr = if n == 0 { 0.0 } else { (value * (1.0 - value) / n as f64).sqrt() };
        Self { count, n, value, stderr }
    }
}

/// Aggregate of a coupling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub runs: Vec<RunRecord>,
    pub agree_u: Frequency,
    pub agree_u1: Option<Frequency>,
    pub agree_shrunk: Option<Frequency>,
    pub good: Option<Frequency>,
    pub winding_agree: Option<Frequency>,
    /// Quantiles (0.5, 0.9, 0.95, 1) of the measured curve distances.
    pub curve_distance_quantiles: Vec<(f64, f64)>,
    pub walk_distance_max: Option<f64>,
    pub follow_distance_quantiles: Vec<(f64, f64)>,
    pub rejections: u64,
    pub soup_rejections: u64,
    pub segment_failures: u64,
    /// Log of the constant importance weight `1/P(G_r)` of the capped soup.
    pub log_importance_weight: Option<f64>,
    pub parameters: serde_json::Value,
}

fn quantiles(mut xs: Vec<f64>) -> Vec<(f64, f64)> {
    if xs.is_empty() {
        return Vec::new();
    }
    xs.sort_by(f64::total_cmp);
    [0.5, 0.9, 0.95, 1.0]
        .iter()
        .map(|&q| {
            let i = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len()) - 1;
            (q, xs[i])
        })
        .collect()
}

fn freq_of(runs: &[RunRecord], f: impl Fn(&RunRecord) -> Option<bool>) -> Option<Frequency> {
    let vals: Vec<bool> = runs.iter().filter_map(f).collect();
    (!vals.is_empty()).then(|| Frequency::new(vals.iter().filter(|x| **x).count() as u64, vals.len() as u64))
}

impl CouplingReport {
    pub fn from_runs(runs: Vec<RunRecord>, parameters: serde_json::Value) -> Self {
        let agree_u = Frequency::new(runs.iter().filter(|r| r.agree_u).count() as u64, runs.len() as u64);
        let curve: Vec<f64> = runs.iter().filter(|r| r.good != Some(false)).filter_map(|r| r.curve_distance).collect();
        let follow: Vec<f64> = runs.iter().filter(|r| r.good != Some(false)).filter_map(|r| r.follow_distance).collect();
        let walk_distance_max = runs.iter().filter_map(|r| r.walk_distance).reduce(f64::max);
        Self {
            agree_u,
            agree_u1: freq_of(&runs, |r| r.agree_u1),
            agree_shrunk: freq_of(&runs, |r| r.agree_shrunk),
            good: freq_of(&runs, |r| r.good),
            winding_agree: freq_of(&runs, |r| r.winding_agree),
            curve_distance_quantiles: quantiles(curve),
            walk_distance_max,
            follow_distance_quantiles: quantiles(follow),
            rejections: runs.iter().map(|r| r.rejections).sum(),
            soup_rejections: runs.iter().map(|r| r.soup_rejections).sum(),
            segment_failures: runs.iter().map(|r| r.segment_failures).sum(),
            log_importance_weight: None,
            runs,
            parameters,
        }
    }

    pub fn to_csv(&self) -> String {
        let opt_b = |x: Option<bool>| x.map(|b| (b as u8).to_string()).unwrap_or_default();
        let opt_f = |x: Option<f64>| x.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let mut s = String::from(
            "run,agree_u,agree_u1,agree_shrunk,curve_distance,walk_distance,follow_distance,good,failing,rejections,soup_rejections,segment_failures,winding_agree\n",
        );
        for r in &self.runs {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.run,
                r.agree_u as u8,
                opt_b(r.agree_u1),
                opt_b(r.agree_shrunk),
                opt_f(r.curve_distance),
                opt_f(r.walk_distance),
                opt_f(r.follow_distance),
                opt_b(r.good),
                r.failing.map(|f| format!("{f:?}")).unwrap_or_default(),
                r.rejections,
                r.soup_rejections,
                r.segment_failures,
                opt_b(r.winding_agree),
            ));
        }
        s
    }
}

/// Winding around its start of a branch continued along `∂D` counterclockwise
/// to the marked point and then to infinity. The marked point is the start of
/// the boundary trace; discs leave along the positive horizontal ray, and
/// rectangles first drop below the domain.
pub fn branch_winding(g: &WiredGraph, path: &SimplePath, shape: &Shape) -> Result<f64> {
    let mut pts = path.geometry(g);
    pts.dedup_by(|a, b| a.dist(*b) < 1e-15);
    if !g.is_cemetery(path.end()) {
        return invalid("branch must end on the boundary");
    }
    let trace = shape.boundary_trace();
    let b = *pts.last().unwrap();
    let mut best = (0, f64::INFINITY);
    for i in 0..trace.len() - 1 {
        let d = point_segment_dist(b, trace[i], trace[i + 1]);
        if d < best.1 {
            best = (i, d);
        }
    }
    pts.extend_from_slice(&trace[best.0 + 1..]);
    match shape {
        Shape::Disc { .. } => {}
        Shape::Rectangle { min, max } => pts.push(*min - Point::new(0.0, (max.y - min.y).max(1.0))),
        _ => return invalid("winding continuation is defined for discs and rectangles"),
    }
    pts.dedup_by(|a, b| a.dist(*b) < 1e-15);
    crate::dimer::winding_from_start(&pts, Some(Point::new(1.0, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_map_round_trip() {
        let mut cfg = CouplingConfig::concentric(1.0 / 16.0);
        for twist in [0, 1, -2] {
            cfg.twist = twist;
            let phi = DomainMap::new(&cfg);
            for k in 0..50 {
                let a = k as f64 * 0.37;
                let s = 1.49 * ((k * 7919) % 97) as f64 / 97.0;
                let p = Point::new(s * a.cos(), s * a.sin());
                let q = phi.apply(p);
                assert!(q.norm() < 1.0 + 1e-12);
                assert!(phi.invert(q).dist(p) < 1e-9, "{p:?}");
                if p.norm() < 0.65 {
                    assert_eq!(q, p);
                }
            }
        }
    }

    #[test]
    fn validation_rejects_bad_nesting() {
        let mut cfg = CouplingConfig::concentric(0.1);
        assert!(cfg.validate_lower().is_ok());
        cfg.r = 0.2;
        assert!(cfg.validate_lower().is_err());
        let mut cfg = CouplingConfig::concentric(0.1);
        cfg.u2 = Shape::Disc { center: Point::new(0.0, 0.0), radius: 0.9 };
        assert!(cfg.validate_lower().is_err());
    }

    #[test]
    fn resample_keeps_ends() {
        let line = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)];
        let r = resample(&line, 0.3);
        assert_eq!(r[0], line[0]);
        assert!(r.last().unwrap().dist(line[2]) < 1e-12);
        for w in r.windows(2) {
            assert!(w[0].dist(w[1]) <= 0.3 + 1e-12);
        }
    }

    #[test]
    fn setup_correspondence() {
        let setup = CouplingSetup::new(&CouplingConfig::concentric(0.125)).unwrap();
        for (v1, &v2) in setup.to2.iter().enumerate() {
            assert_eq!(setup.to1[v2], Some(v1));
            assert_eq!(setup.g1.positions[v1], setup.g2.positions[v2]);
        }
        for e2 in 0..setup.g2.edges.len() {
            if let Some(e1) = setup.edge_in_d1(e2) {
                assert_eq!(setup.g1.positions[setup.g1.tail(e1)], setup.g2.positions[setup.g2.tail(e2)]);
            }
        }
    }
}
