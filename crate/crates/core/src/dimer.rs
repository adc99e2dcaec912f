//! Temperley's bijection between wired spanning trees and dimers on the
//! superposition graph, winding of curves, the winding height field, and
//! matching counts.

use crate::domain::Shape;
use crate::error::{invalid, Error, Result};
use crate::geom::{signed_angle, Point};
use crate::lattice::WiredGraph;
use crate::ust::SpanningTree;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::f64::consts::{PI, TAU};

/// Winding of a polyline around a point not on it.
pub fn winding_around(polyline: &[Point], z: Point) -> Result<f64> {
    if crate::geom::point_polyline_dist(z, polyline) < 1e-12 {
        return invalid("reference point lies on the curve");
    }
    Ok(polyline.windows(2).map(|w| signed_angle(w[0] - z, w[1] - z)).sum())
}

/// Winding of a polyline around its own starting point:
/// `arg(γ(1) − γ(0)) − lim arg(γ(ε) − γ(0))`, continuous along the curve.
/// With `tail` set, the curve continues to infinity along that direction
/// from its last point, and `arg(γ(1) − γ(0))` is the direction's argument.
pub fn winding_from_start(polyline: &[Point], tail: Option<Point>) -> Result<f64> {
    if polyline.len() < 2 {
        return invalid("curve needs at least two points");
    }
    let p0 = polyline[0];
    let mut w = 0.0;
    for s in polyline[1..].windows(2) {
        let (a, b) = (s[0] - p0, s[1] - p0);
        if a.norm() < 1e-12 || b.norm() < 1e-12 || crate::geom::point_segment_dist(p0, s[0], s[1]) < 1e-12 {
            return invalid("curve returns to its starting point");
        }
        w += signed_angle(a, b);
    }
    if let Some(d) = tail {
        w += signed_angle(*polyline.last().unwrap() - p0, d);
    }
    Ok(w)
}

/// Sum of turning angles between consecutive segments.
pub fn turning_angle(polyline: &[Point]) -> f64 {
    polyline.windows(3).map(|w| signed_angle(w[1] - w[0], w[2] - w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// Primal vertex; interior ones carry their wired-graph index.
    Primal { vertex: Option<usize> },
    Dual,
    Intersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupNode {
    pub kind: NodeKind,
    /// Doubled lattice coordinates relative to the domain corner.
    pub coord: (i64, i64),
    pub pos: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfEdge {
    /// Primal or dual endpoint.
    pub black: usize,
    /// Intersection endpoint.
    pub white: usize,
    pub weight: f64,
}

/// A face of the superposition graph around an interior primal vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupFace {
    pub primal: usize,
    pub dual: usize,
    /// Intersections on the horizontal and vertical primal edges.
    pub sides: [usize; 2],
    pub centroid: Point,
}

/// Superposition of a lattice-aligned rectangle's wired graph and its dual.
#[derive(Debug, Clone)]
pub struct SuperpositionGraph {
    pub nodes: Vec<SupNode>,
    pub half_edges: Vec<HalfEdge>,
    pub removed: Vec<bool>,
    pub reference_dual: usize,
    /// Marked boundary point: the lower-left corner.
    pub marked: Point,
    pub faces: Vec<SupFace>,
    origin: Point,
    mesh: f64,
    size: (i64, i64),
    node_at: HashMap<(i64, i64), usize>,
    /// Intersection node of each wired edge.
    edge_node: Vec<usize>,
    /// Node of each interior wired vertex.
    vertex_node: Vec<usize>,
    /// Half-edge ids at each node.
    incident: Vec<Vec<usize>>,
}

/// Perfect matching as the sorted list of matched half-edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Matching {
    pub half_edges: Vec<usize>,
}

impl SuperpositionGraph {
    fn coord_of(&self, p: Point) -> (i64, i64) {
        let q = (p - self.origin) * (2.0 / self.mesh);
        (q.x.round() as i64, q.y.round() as i64)
    }

    fn pos_of(&self, c: (i64, i64)) -> Point {
        self.origin + Point::new(c.0 as f64, c.1 as f64) * (self.mesh / 2.0)
    }

    pub fn node(&self, c: (i64, i64)) -> Option<usize> {
        self.node_at.get(&c).copied()
    }

    /// Number of vertices left after removal.
    pub fn reduced_size(&self) -> usize {
        self.removed.iter().filter(|r| !**r).count()
    }

    pub fn count_removed(&self) -> usize {
        self.removed.iter().filter(|r| **r).count()
    }

    pub fn count_kind(&self, pred: impl Fn(&NodeKind) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(&n.kind)).count()
    }

    /// The reduced graph as a bipartite adjacency (black index → white indices
    /// with half-edge ids), for counting and enumeration.
    pub fn reduced_bipartite(&self) -> Bipartite {
        let blacks: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| !self.removed[i] && !matches!(self.nodes[i].kind, NodeKind::Intersection))
            .collect();
        let whites: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| !self.removed[i] && matches!(self.nodes[i].kind, NodeKind::Intersection))
            .collect();
        let widx: HashMap<usize, usize> = whites.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let adj = blacks
            .iter()
            .map(|&b| {
                self.incident[b]
                    .iter()
                    .filter_map(|&h| widx.get(&self.half_edges[h].white).map(|&w| (w, h)))
                    .collect()
            })
            .collect();
        Bipartite { n_white: whites.len(), adj }
    }

    pub fn matching_weight(&self, m: &Matching) -> f64 {
        m.half_edges.iter().map(|&h| self.half_edges[h].weight).product()
    }

    /// Lines `black white` of matched node ids.
    pub fn matching_to_text(&self, m: &Matching) -> String {
        m.half_edges
            .iter()
            .map(|&h| format!("{} {}\n", self.half_edges[h].black, self.half_edges[h].white))
            .collect()
    }
}

/// Superposition graph of a wired graph built on a square lattice inside a
/// rectangle whose sides lie on lattice lines.
pub fn build_superposition(g: &WiredGraph) -> Result<SuperpositionGraph> {
    let Some(domain) = &g.domain else {
        return invalid("superposition needs the domain of the wired graph");
    };
    let Shape::Rectangle { min, max } = domain.shape else {
        return invalid("superposition is supported on lattice-aligned rectangles only");
    };
    let mesh = g.mesh;
    let w = ((max.x - min.x) / mesh).round() as i64;
    let h = ((max.y - min.y) / mesh).round() as i64;
    if ((max.x - min.x) / mesh - w as f64).abs() > 1e-6 || ((max.y - min.y) / mesh - h as f64).abs() > 1e-6 {
        return invalid("rectangle sides must be whole multiples of the mesh");
    }
    let mut sup = SuperpositionGraph {
        nodes: Vec::new(),
        half_edges: Vec::new(),
        removed: Vec::new(),
        reference_dual: usize::MAX,
        marked: min,
        faces: Vec::new(),
        origin: min,
        mesh,
        size: (w, h),
        node_at: HashMap::new(),
        edge_node: vec![usize::MAX; g.edges.len()],
        vertex_node: vec![usize::MAX; g.n_interior()],
        incident: Vec::new(),
    };
    let add = |sup: &mut SuperpositionGraph, kind: NodeKind, c: (i64, i64)| -> usize {
        if let Some(&i) = sup.node_at.get(&c) {
            return i;
        }
        let i = sup.nodes.len();
        let pos = sup.pos_of(c);
        sup.nodes.push(SupNode { kind, coord: c, pos });
        sup.removed.push(false);
        sup.incident.push(Vec::new());
        sup.node_at.insert(c, i);
        i
    };
    for v in 0..g.n_interior() {
        let c = sup.coord_of(g.positions[v]);
        if c.0 % 2 != 0 || c.1 % 2 != 0 || sup.pos_of(c).dist(g.positions[v]) > 1e-6 * mesh {
            return invalid("vertex is not on the lattice of the rectangle");
        }
        sup.vertex_node[v] = add(&mut sup, NodeKind::Primal { vertex: Some(v) }, c);
    }
    // edges: intersections at midpoints; boundary primal vertices at crossings
    let mut primal_half: Vec<(usize, usize, f64)> = Vec::new();
    for (id, e) in g.edges.iter().enumerate() {
        let a = g.positions[e.tail];
        let b = *e.polyline.last().unwrap();
        let cm = sup.coord_of(a.lerp(b, 0.5));
        let cb = sup.coord_of(b);
        if (cm.0 + cm.1) % 2 == 0 {
            return invalid("edge is not a unit lattice edge");
        }
        let m = add(&mut sup, NodeKind::Intersection, cm);
        sup.edge_node[id] = m;
        if g.is_cemetery(e.head) {
            let bn = add(&mut sup, NodeKind::Primal { vertex: None }, cb);
            sup.removed[bn] = true;
            primal_half.push((bn, m, 1.0));
        }
        primal_half.push((sup.vertex_node[e.tail], m, g.prob(id)));
    }
    for (b, m, wgt) in primal_half {
        let hid = sup.half_edges.len();
        sup.half_edges.push(HalfEdge { black: b, white: m, weight: wgt });
        sup.incident[b].push(hid);
        sup.incident[m].push(hid);
    }
    // duals: unit squares; joined to the intersections on their sides
    for j in 0..h {
        for i in 0..w {
            let c = (2 * i + 1, 2 * j + 1);
            let d = add(&mut sup, NodeKind::Dual, c);
            for s in [(c.0 - 1, c.1), (c.0 + 1, c.1), (c.0, c.1 - 1), (c.0, c.1 + 1)] {
                if let Some(&m) = sup.node_at.get(&s) {
                    let hid = sup.half_edges.len();
                    sup.half_edges.push(HalfEdge { black: d, white: m, weight: 1.0 });
                    sup.incident[d].push(hid);
                    sup.incident[m].push(hid);
                }
            }
        }
    }
    let reference = sup.node_at[&(1, 1)];
    sup.reference_dual = reference;
    sup.removed[reference] = true;
    for m in 0..sup.nodes.len() {
        if matches!(sup.nodes[m].kind, NodeKind::Intersection) && sup.incident[m].len() != 4 {
            return Err(Error::Numeric(format!("intersection {m} has degree {}", sup.incident[m].len())));
        }
    }
    // faces around interior primal vertices
    for v in 0..g.n_interior() {
        let p = sup.vertex_node[v];
        let (x, y) = sup.nodes[p].coord;
        for (sx, sy) in [(1, 1), (-1, 1), (-1, -1), (1, -1)] {
            let (Some(d), Some(mh), Some(mv)) =
                (sup.node((x + sx, y + sy)), sup.node((x + sx, y)), sup.node((x, y + sy)))
            else {
                continue;
            };
            let centroid = sup.pos_of((x, y)).lerp(sup.pos_of((x + sx, y + sy)), 0.5);
            sup.faces.push(SupFace { primal: p, dual: d, sides: [mh, mv], centroid });
        }
    }
    Ok(sup)
}

fn half_edge_between(sup: &SuperpositionGraph, black: usize, white: usize) -> Option<usize> {
    sup.incident[black].iter().copied().find(|&h| sup.half_edges[h].white == white)
}

/// The two dual nodes on either side of an intersection.
fn duals_across(sup: &SuperpositionGraph, m: usize) -> [Option<usize>; 2] {
    let (x, y) = sup.nodes[m].coord;
    if x % 2 != 0 {
        [sup.node((x, y - 1)), sup.node((x, y + 1))]
    } else {
        [sup.node((x - 1, y)), sup.node((x + 1, y))]
    }
}

/// Each primal vertex takes the half-edge towards its parent; each dual
/// vertex takes the half-edge towards its parent in the dual tree rooted at
/// the reference dual vertex.
pub fn tree_to_dimer(g: &WiredGraph, tree: &SpanningTree, sup: &SuperpositionGraph) -> Result<Matching> {
    if tree.parent.len() != g.n_interior() {
        return invalid("tree does not match the graph");
    }
    let mut used = vec![false; sup.nodes.len()];
    let mut out = Vec::with_capacity(sup.reduced_size() / 2);
    for (v, &e) in tree.parent.iter().enumerate() {
        let m = sup.edge_node[e];
        let p = sup.vertex_node[v];
        let h = half_edge_between(sup, p, m).ok_or_else(|| Error::InvalidInput("edge without half-edge".into()))?;
        if used[m] {
            return invalid("tree uses an edge in both directions");
        }
        used[m] = true;
        used[p] = true;
        out.push(h);
    }
    let mut seen = vec![false; sup.nodes.len()];
    seen[sup.reference_dual] = true;
    let mut queue = VecDeque::from([sup.reference_dual]);
    while let Some(d) = queue.pop_front() {
        for &h in &sup.incident[d] {
            let m = sup.half_edges[h].white;
            if used[m] {
                continue;
            }
            for other in duals_across(sup, m).into_iter().flatten() {
                if other != d && !seen[other] {
                    seen[other] = true;
                    used[m] = true;
                    let ho = half_edge_between(sup, other, m).unwrap();
                    out.push(ho);
                    queue.push_back(other);
                }
            }
        }
    }
    let all_matched = (0..sup.nodes.len()).all(|i| sup.removed[i] || used[i] || seen[i]);
    if !all_matched || out.len() * 2 != sup.reduced_size() {
        return Err(Error::Numeric("dual edges do not form a spanning tree".into()));
    }
    out.sort_unstable();
    Ok(Matching { half_edges: out })
}

/// Inverse of [`tree_to_dimer`]: each primal vertex's matched intersection
/// gives its parent edge.
pub fn dimer_to_tree(g: &WiredGraph, m: &Matching, sup: &SuperpositionGraph) -> Result<SpanningTree> {
    let mut parent = vec![usize::MAX; g.n_interior()];
    let mut matched_white: HashMap<usize, usize> = HashMap::new();
    for &h in &m.half_edges {
        let he = &sup.half_edges[h];
        if matched_white.insert(he.white, he.black).is_some() {
            return invalid("intersection matched twice");
        }
        if let NodeKind::Primal { vertex: Some(v) } = sup.nodes[he.black].kind {
            if parent[v] != usize::MAX {
                return invalid("primal vertex matched twice");
            }
            let e = g
                .out_edges(v)
                .iter()
                .copied()
                .find(|&e| sup.edge_node[e] == he.white)
                .ok_or_else(|| Error::InvalidInput("matched half-edge is not an edge of the graph".into()))?;
            parent[v] = e;
        }
    }
    if parent.contains(&usize::MAX) {
        return invalid("matching leaves a primal vertex unmatched");
    }
    let t = SpanningTree { parent };
    if !t.is_valid(g) {
        return invalid("matching does not come from a spanning tree");
    }
    Ok(t)
}

/// Reference ray: down from the marked corner by `depth`, then to +∞
/// along a horizontal line below the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRay {
    pub depth: f64,
}

impl Default for ReferenceRay {
    fn default() -> Self {
        Self { depth: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    /// Height of each face of the superposition graph, in face order.
    pub heights: Vec<f64>,
    pub centroids: Vec<Point>,
    pub ray: ReferenceRay,
}

impl HeightField {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("face,x,y,height\n");
        for (i, (c, h)) in self.centroids.iter().zip(&self.heights).enumerate() {
            s.push_str(&format!("{i},{:.16e},{:.16e},{:.16e}\n", c.x, c.y, h));
        }
        s
    }
}

impl SuperpositionGraph {
    /// Corners of the rectangle in counterclockwise order from the marked one.
    fn corners(&self) -> [Point; 4] {
        let (w, h) = (self.size.0 as f64 * self.mesh, self.size.1 as f64 * self.mesh);
        let o = self.origin;
        [o, o + Point::new(w, 0.0), o + Point::new(w, h), o + Point::new(0.0, h)]
    }

    /// Boundary path counterclockwise from `b` back to the marked corner.
    fn boundary_path(&self, b: Point) -> Vec<Point> {
        let c = self.corners();
        let tol = 1e-9 * self.mesh;
        // side k runs from c[k] to c[k+1]
        let side = if (b.y - c[0].y).abs() < tol && b.x > c[0].x {
            0
        } else if (b.x - c[1].x).abs() < tol {
            1
        } else if (b.y - c[2].y).abs() < tol {
            2
        } else {
            3
        };
        let mut out = vec![b];
        for k in side + 1..4 {
            out.push(c[k]);
        }
        out.push(c[0]);
        out
    }

    /// Polyline of `γ_f` up to the start of the horizontal tail.
    pub fn face_curve(&self, g: &WiredGraph, tree: &SpanningTree, face: usize, ray: ReferenceRay) -> Vec<Point> {
        let f = &self.faces[face];
        let mut pts = vec![f.centroid];
        let NodeKind::Primal { vertex: Some(v) } = self.nodes[f.primal].kind else {
            unreachable!("faces sit at interior primal vertices")
        };
        let path = tree.branch(g, v).geometry(g);
        pts.extend_from_slice(&path);
        let b = *pts.last().unwrap();
        pts.extend_from_slice(&self.boundary_path(b)[1..]);
        pts.push(self.marked - Point::new(0.0, ray.depth));
        pts.dedup_by(|a, b| a.dist(*b) < 1e-15);
        pts
    }
}

/// Winding field of the tree divided by 2π.
pub fn height_field(g: &WiredGraph, tree: &SpanningTree, sup: &SuperpositionGraph, ray: ReferenceRay) -> Result<HeightField> {
    if ray.depth <= 0.0 {
        return invalid("reference ray must leave the domain downwards");
    }
    let mut heights = Vec::with_capacity(sup.faces.len());
    for f in 0..sup.faces.len() {
        let curve = sup.face_curve(g, tree, f, ray);
        let w = winding_from_start(&curve, Some(Point::new(1.0, 0.0)))?;
        heights.push(w / TAU);
    }
    Ok(HeightField { heights, centroids: sup.faces.iter().map(|f| f.centroid).collect(), ray })
}

fn face_sides(face: &SupFace) -> [(usize, usize); 4] {
    [
        (face.primal, face.sides[0]),
        (face.primal, face.sides[1]),
        (face.dual, face.sides[0]),
        (face.dual, face.sides[1]),
    ]
}

/// Dimer height from the matching: crossing a half-edge with its
/// intersection end on the left changes the height by `1/4 − 1[matched]`.
pub fn thurston_height(sup: &SuperpositionGraph, m: &Matching) -> Vec<f64> {
    let matched: std::collections::HashSet<usize> = m.half_edges.iter().copied().collect();
    let mut by_half: HashMap<usize, Vec<usize>> = HashMap::new();
    for (f, face) in sup.faces.iter().enumerate() {
        for (a, b) in face_sides(face) {
            if let Some(h) = half_edge_between(sup, a, b) {
                by_half.entry(h).or_default().push(f);
            }
        }
    }
    let mut h = vec![f64::NAN; sup.faces.len()];
    if sup.faces.is_empty() {
        return h;
    }
    h[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(f) = queue.pop_front() {
        let face = &sup.faces[f];
        for (a, b) in face_sides(face) {
            let Some(he) = half_edge_between(sup, a, b) else { continue };
            for &other in by_half.get(&he).into_iter().flatten() {
                if other == f || !h[other].is_nan() {
                    continue;
                }
                let dir = sup.faces[other].centroid - face.centroid;
                let white = sup.nodes[sup.half_edges[he].white].pos - face.centroid;
                let sign = if dir.cross(white) > 0.0 { 1.0 } else { -1.0 };
                let x = if matched.contains(&he) { 1.0 } else { 0.0 };
                h[other] = h[f] + sign * (0.25 - x);
                queue.push_back(other);
            }
        }
    }
    h
}

/// Bipartite graph given as black-vertex adjacency lists of
/// `(white index, edge label)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bipartite {
    pub n_white: usize,
    pub adj: Vec<Vec<(usize, usize)>>,
}

/// Largest vertex count accepted by the matching enumerator.
pub const MATCHING_LIMIT: usize = 64;

impl Bipartite {
    pub fn n_vertices(&self) -> usize {
        self.adj.len() + self.n_white
    }

    /// Visit every perfect matching as the list of chosen edge labels.
    pub fn enumerate(&self, mut visit: impl FnMut(&[usize])) -> Result<()> {
        let n = self.n_vertices();
        if n > MATCHING_LIMIT {
            return Err(Error::TooLarge { what: "matching graph", size: n, limit: MATCHING_LIMIT });
        }
        if self.adj.len() != self.n_white {
            return Ok(());
        }
        let mut white_used = vec![false; self.n_white];
        let mut black_used = vec![false; self.adj.len()];
        let mut chosen = Vec::with_capacity(self.adj.len());
        self.search(&mut black_used, &mut white_used, &mut chosen, &mut visit);
        Ok(())
    }

    fn search(
        &self,
        black_used: &mut [bool],
        white_used: &mut [bool],
        chosen: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        // branch on the free black vertex with the fewest options
        let mut best: Option<(usize, usize)> = None;
        for (b, nb) in self.adj.iter().enumerate() {
            if black_used[b] {
                continue;
            }
            let k = nb.iter().filter(|(w, _)| !white_used[*w]).count();
            if k == 0 {
                return;
            }
            if best.is_none_or(|(_, bk)| k < bk) {
                best = Some((b, k));
            }
        }
        let Some((b, _)) = best else {
            visit(chosen);
            return;
        };
        black_used[b] = true;
        for &(w, label) in &self.adj[b] {
            if white_used[w] {
                continue;
            }
            white_used[w] = true;
            chosen.push(label);
            self.search(black_used, white_used, chosen, visit);
            chosen.pop();
            white_used[w] = false;
        }
        black_used[b] = false;
    }

    pub fn count_matchings(&self) -> Result<u64> {
        let mut n = 0u64;
        self.enumerate(|_| n += 1)?;
        Ok(n)
    }
}

/// Dual graph of the unit triangles inside the hexagon with sides
/// `a, b, c, a, b, c`; its perfect matchings are the lozenge tilings.
pub fn hexagon_graph(a: usize, b: usize, c: usize) -> Result<Bipartite> {
    if a == 0 || b == 0 || c == 0 {
        return invalid("hexagon sides must be positive");
    }
    let dirs: Vec<Point> = (0..6).map(|k| Point::new((PI / 3.0 * k as f64).cos(), (PI / 3.0 * k as f64).sin())).collect();
    let lens = [a, b, c, a, b, c];
    let mut corners = vec![Point::new(0.0, 0.0)];
    for k in 0..5 {
        let p = *corners.last().unwrap() + dirs[k] * lens[k] as f64;
        corners.push(p);
    }
    let inside = |p: Point| {
        (0..6).all(|k| {
            let (u, v) = (corners[k], corners[(k + 1) % 6]);
            (v - u).cross(p - u) > 1e-9
        })
    };
    let e1 = Point::new(1.0, 0.0);
    let e2 = Point::new(0.5, 3f64.sqrt() / 2.0);
    let at = |i: i64, j: i64| e1 * i as f64 + e2 * j as f64;
    let span = (a + b + c) as i64 + 2;
    let mut up = HashMap::new();
    let mut down = HashMap::new();
    for i in -span..=span {
        for j in -span..=span {
            let cu = (at(i, j) + at(i + 1, j) + at(i, j + 1)) * (1.0 / 3.0);
            if inside(cu) {
                let k = up.len();
                up.insert((i, j), k);
            }
            let cd = (at(i + 1, j) + at(i, j + 1) + at(i + 1, j + 1)) * (1.0 / 3.0);
            if inside(cd) {
                let k = down.len();
                down.insert((i, j), k);
            }
        }
    }
    let mut ups: Vec<_> = up.iter().map(|(&k, &v)| (v, k)).collect();
    ups.sort();
    let mut label = 0;
    let adj = ups
        .into_iter()
        .map(|(_, (i, j))| {
            let mut nb = Vec::new();
            for key in [(i, j), (i - 1, j), (i, j - 1)] {
                if let Some(&d) = down.get(&key) {
                    nb.push((d, label));
                    label += 1;
                }
            }
            nb
        })
        .collect();
    Ok(Bipartite { n_white: down.len(), adj })
}

/// `Π_{i≤a} Π_{j≤b} Π_{k≤c} (i+j+k−1)/(i+j+k−2)`.
pub fn macmahon(a: u32, b: u32, c: u32) -> Result<BigInt> {
    if a == 0 || b == 0 || c == 0 {
        return invalid("sides must be at least 1");
    }
    let mut p = BigRational::one();
    for i in 1..=a {
        for j in 1..=b {
            for k in 1..=c {
                let s = (i + j + k) as i64;
                p *= BigRational::new(BigInt::from(s - 1), BigInt::from(s - 2));
            }
        }
    }
    if !p.is_integer() {
        return Err(Error::Numeric("product is not an integer".into()));
    }
    Ok(p.to_integer())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_winding_around_center() {
        let sq = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.0, 0.0),
        ];
        assert!((winding_around(&sq, Point::new(0.5, 0.5)).unwrap() - TAU).abs() < 1e-12);
        assert!(winding_around(&sq, Point::new(3.0, 0.5)).unwrap().abs() < 1e-12);
        assert!(winding_around(&sq, Point::new(1.0, 0.5)).is_err());
    }

    #[test]
    fn quarter_circle_winding() {
        let arc: Vec<Point> = (0..=64)
            .map(|k| {
                let t = PI / 2.0 * k as f64 / 64.0;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        assert!((winding_around(&arc, Point::new(0.0, 0.0)).unwrap() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn macmahon_values() {
        assert_eq!(macmahon(1, 1, 1).unwrap(), BigInt::from(2));
        assert_eq!(macmahon(2, 2, 2).unwrap(), BigInt::from(20));
        assert_eq!(macmahon(1, 2, 3).unwrap(), macmahon(3, 1, 2).unwrap());
    }

    #[test]
    fn small_hexagons() {
        assert_eq!(hexagon_graph(1, 1, 1).unwrap().count_matchings().unwrap(), 2);
        assert_eq!(hexagon_graph(2, 2, 2).unwrap().count_matchings().unwrap(), 20);
    }

    #[test]
    fn unmatchable_vertex() {
        let g = Bipartite { n_white: 2, adj: vec![vec![(0, 0)], vec![]] };
        assert_eq!(g.count_matchings().unwrap(), 0);
    }
}
