//! Embedded graphs, wired discretizations of domains and matrix-tree oracles.

use crate::domain::DomainSpec;
use crate::error::{invalid, Error, Result};
use crate::geom::Point;
use crate::linalg;
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub pos: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
    pub polyline: Vec<Point>,
}

/// Weighted oriented graph with polyline edge embeddings. Ids equal indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedGraph {
    pub mesh: f64,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

/// Largest number of vertices a δ×δ cell may hold in generated lattices.
pub const DENSITY_BOUND: usize = 4;

impl EmbeddedGraph {
    /// Vertices per half-open δ×δ cell, maximised over cells.
    pub fn max_density(&self) -> usize {
        let mut counts = std::collections::HashMap::new();
        for v in &self.vertices {
            let key = ((v.pos.x / self.mesh).floor() as i64, (v.pos.y / self.mesh).floor() as i64);
            *counts.entry(key).or_insert(0usize) += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    }

    /// Checks polyline endpoints against their tail/head positions.
    pub fn check_embedding(&self) -> Result<()> {
        for e in &self.edges {
            let (Some(first), Some(last)) = (e.polyline.first(), e.polyline.last()) else {
                return invalid(format!("edge {} has empty polyline", e.id));
            };
            if e.tail >= self.vertices.len() || e.head >= self.vertices.len() {
                return invalid(format!("edge {} refers to a missing vertex", e.id));
            }
            let tol = 1e-9 * self.mesh.max(1.0);
            if first.dist(self.vertices[e.tail].pos) > tol || last.dist(self.vertices[e.head].pos) > tol {
                return invalid(format!("edge {} polyline does not join its endpoints", e.id));
            }
            if !(e.weight >= 0.0) || !e.weight.is_finite() {
                return invalid(format!("edge {} has invalid weight", e.id));
            }
        }
        Ok(())
    }
}

/// Grid `min + mesh·(i, j)` covering the box, with both orientations of every
/// nearest-neighbour pair at unit weight.
pub fn build_square_lattice(mesh: f64, min: Point, max: Point) -> Result<EmbeddedGraph> {
    if !(mesh > 0.0) || !mesh.is_finite() {
        return invalid("mesh must be positive");
    }
    if !(max.x > min.x && max.y > min.y) {
        return invalid("bounding box is degenerate");
    }
    let nx = ((max.x - min.x) / mesh + 1e-9).floor() as usize + 1;
    let ny = ((max.y - min.y) / mesh + 1e-9).floor() as usize + 1;
    if nx < 2 || ny < 2 {
        return invalid("bounding box is smaller than one mesh cell");
    }
    let idx = |i: usize, j: usize| j * nx + i;
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Vertex {
                id: idx(i, j),
                pos: Point::new(min.x + mesh * i as f64, min.y + mesh * j as f64),
            });
        }
    }
    let mut edges = Vec::with_capacity(4 * nx * ny);
    let mut push = |a: usize, b: usize, vertices: &[Vertex]| {
        let id = edges.len();
        edges.push(Edge {
            id,
            tail: a,
            head: b,
            weight: 1.0,
            polyline: vec![vertices[a].pos, vertices[b].pos],
        });
    };
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                push(idx(i, j), idx(i + 1, j), &vertices);
                push(idx(i + 1, j), idx(i, j), &vertices);
            }
            if j + 1 < ny {
                push(idx(i, j), idx(i, j + 1), &vertices);
                push(idx(i, j + 1), idx(i, j), &vertices);
            }
        }
    }
    let g = EmbeddedGraph { mesh, vertices, edges };
    debug_assert!(g.max_density() <= DENSITY_BOUND);
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryInfo {
    /// First point where the edge polyline touches ∂D.
    pub crossing: Point,
    /// Arc-length coordinate of the crossing along ∂D.
    pub arc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiredEdge {
    pub tail: usize,
    /// Interior vertex index, or the cemetery index for boundary edges.
    pub head: usize,
    pub weight: f64,
    /// Interior edges carry the full polyline; boundary edges stop at the crossing.
    pub polyline: Vec<Point>,
    /// Id of the edge in the source graph, when there is one.
    pub source: Option<usize>,
    pub boundary: Option<BoundaryInfo>,
}

/// Interior graph of a domain with every exit collapsed onto one cemetery.
///
/// Interior vertices are `0..n`; the cemetery is `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WiredGraph {
    pub mesh: f64,
    pub positions: Vec<Point>,
    /// Source-graph vertex id of each interior vertex.
    pub source_vertex: Vec<Option<usize>>,
    pub edges: Vec<WiredEdge>,
    /// Boundary edge ids ordered by arc coordinate.
    pub boundary_edges: Vec<usize>,
    pub domain: Option<DomainSpec>,
    out_start: Vec<usize>,
    out_edges: Vec<usize>,
    out_prob: Vec<f64>,
    out_cum: Vec<f64>,
}

impl WiredGraph {
    /// Graph from explicit interior edges `(tail, Some(head), weight)` and
    /// boundary edges `(tail, None, weight)`. Positions default to a row.
    pub fn from_parts(n: usize, edges: &[(usize, Option<usize>, f64)], positions: Option<Vec<Point>>) -> Result<Self> {
        let positions = match positions {
            Some(p) if p.len() == n => p,
            Some(_) => return invalid("positions length differs from vertex count"),
            None => (0..n).map(|i| Point::new(i as f64, 0.0)).collect(),
        };
        let mut wired = Vec::with_capacity(edges.len());
        for &(t, h, w) in edges {
            if t >= n || h.is_some_and(|h| h >= n) {
                return invalid("edge endpoint out of range");
            }
            let head = h.unwrap_or(n);
            let tail_pos = positions[t];
            let head_pos = match h {
                Some(h) => positions[h],
                None => tail_pos + Point::new(0.0, -0.5),
            };
            wired.push(WiredEdge {
                tail: t,
                head,
                weight: w,
                polyline: vec![tail_pos, head_pos],
                source: None,
                boundary: h.is_none().then_some(BoundaryInfo { crossing: head_pos, arc: t as f64 }),
            });
        }
        Self::assemble(1.0, positions, vec![None; n], wired, None)
    }

    fn assemble(
        mesh: f64,
        positions: Vec<Point>,
        source_vertex: Vec<Option<usize>>,
        edges: Vec<WiredEdge>,
        domain: Option<DomainSpec>,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return invalid("wired graph has empty interior");
        }
        let mut by_tail: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            if !(e.weight >= 0.0) || !e.weight.is_finite() {
                return invalid(format!("edge {id} has invalid weight"));
            }
            by_tail[e.tail].push(id);
        }
        let mut out_start = Vec::with_capacity(n + 2);
        let mut out_edges = Vec::with_capacity(edges.len());
        let mut out_prob = Vec::with_capacity(edges.len());
        let mut out_cum = Vec::with_capacity(edges.len());
        for (v, list) in by_tail.iter().enumerate() {
            out_start.push(out_edges.len());
            let total: f64 = list.iter().map(|&e| edges[e].weight).sum();
            if !(total > 0.0) {
                return invalid(format!("vertex {v} has no outgoing weight"));
            }
            let mut acc = 0.0;
            for &e in list {
                let p = edges[e].weight / total;
                acc += p;
                out_edges.push(e);
                out_prob.push(p);
                out_cum.push(acc);
            }
            if let Some(last) = out_cum.last_mut() {
                *last = 1.0;
            }
        }
        out_start.push(out_edges.len());
        // cemetery has no outgoing edges
        out_start.push(out_edges.len());
        let mut boundary_edges: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].head == n).collect();
        boundary_edges.sort_by(|&a, &b| {
            let ka = edges[a].boundary.as_ref().map_or(0.0, |b| b.arc);
            let kb = edges[b].boundary.as_ref().map_or(0.0, |b| b.arc);
            ka.total_cmp(&kb).then(a.cmp(&b))
        });
        Ok(Self {
            mesh,
            positions,
            source_vertex,
            edges,
            boundary_edges,
            domain,
            out_start,
            out_edges,
            out_prob,
            out_cum,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.positions.len()
    }

    pub fn cemetery(&self) -> usize {
        self.positions.len()
    }

    pub fn is_cemetery(&self, v: usize) -> bool {
        v == self.positions.len()
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[self.out_start[v]..self.out_start[v + 1]]
    }

    /// Transition probabilities aligned with [`Self::out_edges`].
    pub fn out_probs(&self, v: usize) -> &[f64] {
        &self.out_prob[self.out_start[v]..self.out_start[v + 1]]
    }

    /// Probability of the given edge under the jump chain.
    pub fn prob(&self, edge: usize) -> f64 {
        let t = self.edges[edge].tail;
        let pos = self.out_edges(t).iter().position(|&e| e == edge).expect("edge listed at its tail");
        self.out_probs(t)[pos]
    }

    /// Total jump probability `q(u→v)`, summed over parallel edges.
    pub fn q(&self, u: usize, v: usize) -> f64 {
        if self.is_cemetery(u) {
            return 0.0;
        }
        self.out_edges(u)
            .iter()
            .zip(self.out_probs(u))
            .filter(|(&e, _)| self.edges[e].head == v)
            .map(|(_, &p)| p)
            .sum()
    }

    /// Jump probability of an edge as `weight / total outgoing weight`,
    /// computed in the scalar type so rational weights stay exact.
    pub fn q_scalar<S: Scalar>(&self, edge: usize) -> S {
        let t = self.edges[edge].tail;
        let total = self
            .out_edges(t)
            .iter()
            .fold(S::zero(), |acc, &e| acc + S::from_f64(self.edges[e].weight));
        S::from_f64(self.edges[edge].weight) / total
    }

    /// Sample an outgoing edge of `v`.
    pub fn step<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        let lo = self.out_start[v];
        let hi = self.out_start[v + 1];
        let u: f64 = rng.random();
        let cum = &self.out_cum[lo..hi];
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.out_edges[lo + k]
    }

    pub fn head(&self, edge: usize) -> usize {
        self.edges[edge].head
    }

    pub fn tail(&self, edge: usize) -> usize {
        self.edges[edge].tail
    }

    /// Largest deviation of a kernel row sum from one.
    pub fn kernel_defect(&self) -> f64 {
        (0..self.n_interior())
            .map(|v| (self.out_probs(v).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Interior vertex nearest to `p`.
    pub fn nearest_vertex(&self, p: Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.positions.iter().enumerate() {
            let d = q.dist(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Interior index of a source-graph vertex.
    pub fn index_of_source(&self) -> std::collections::HashMap<usize, usize> {
        self.source_vertex
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (s, i)))
            .collect()
    }

    /// Interior edge from `u` to `v`, if any.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.out_edges(u).iter().copied().find(|&e| self.edges[e].head == v)
    }

    /// Reduced out-degree Laplacian with raw weights, cemetery removed.
    pub fn laplacian<S: Scalar>(&self) -> Vec<Vec<S>> {
        let n = self.n_interior();
        let mut m = vec![vec![S::zero(); n]; n];
        for e in &self.edges {
            let w = S::from_f64(e.weight);
            m[e.tail][e.tail] = m[e.tail][e.tail].clone() + w.clone();
            if e.head < n {
                m[e.tail][e.head] = m[e.tail][e.head].clone() - w;
            }
        }
        m
    }
}

/// Largest interior accepted by the dense matrix-tree determinant.
pub const MATRIX_TREE_LIMIT: usize = 3000;

/// Determinant of the reduced out-degree Laplacian: the total weight of
/// spanning trees oriented towards the cemetery.
pub fn matrix_tree_weight<S: Scalar>(g: &WiredGraph) -> Result<S> {
    let n = g.n_interior();
    if n > MATRIX_TREE_LIMIT {
        return Err(Error::TooLarge { what: "interior", size: n, limit: MATRIX_TREE_LIMIT });
    }
    let det = linalg::determinant(g.laplacian::<S>());
    if !S::is_exact() && !det.to_f64().is_finite() {
        return Err(Error::Numeric(format!(
            "determinant overflowed on {n} vertices; use matrix_tree_log_weight"
        )));
    }
    Ok(det)
}

/// Natural log of the tree weight, for graphs whose weight overflows.
pub fn matrix_tree_log_weight(g: &WiredGraph) -> Result<f64> {
    let n = g.n_interior();
    if n > MATRIX_TREE_LIMIT {
        return Err(Error::TooLarge { what: "interior", size: n, limit: MATRIX_TREE_LIMIT });
    }
    let (l, sign) = linalg::log_abs_determinant(g.laplacian::<f64>());
    if sign <= 0.0 {
        return Err(Error::Numeric("Laplacian determinant is not positive".into()));
    }
    Ok(l)
}

/// Largest interior accepted by [`enumerate_trees`].
pub const ENUMERATION_LIMIT: usize = 12;

/// Visit every spanning tree oriented to the cemetery as its parent-edge
/// vector (`parent[v]` = outgoing edge id of `v`).
pub fn enumerate_trees(g: &WiredGraph, mut visit: impl FnMut(&[usize])) -> Result<()> {
    let n = g.n_interior();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { what: "interior", size: n, limit: ENUMERATION_LIMIT });
    }
    let mut choice = vec![0usize; n];
    let mut parent = vec![0usize; n];
    let degs: Vec<usize> = (0..n).map(|v| g.out_edges(v).len()).collect();
    'outer: loop {
        for v in 0..n {
            parent[v] = g.out_edges(v)[choice[v]];
        }
        if parent_vector_is_tree(g, &parent) {
            visit(&parent);
        }
        for v in 0..n {
            choice[v] += 1;
            if choice[v] < degs[v] {
                continue 'outer;
            }
            choice[v] = 0;
        }
        break;
    }
    Ok(())
}

/// True when following parent edges from every vertex reaches the cemetery.
pub fn parent_vector_is_tree(g: &WiredGraph, parent: &[usize]) -> bool {
    let n = g.n_interior();
    // 0 = unknown, 1 = on current trail, 2 = reaches cemetery
    let mut state = vec![0u8; n];
    for s in 0..n {
        let mut v = s;
        let mut trail = Vec::new();
        while v < n && state[v] == 0 {
            state[v] = 1;
            trail.push(v);
            v = g.edges[parent[v]].head;
        }
        if v < n && state[v] == 1 {
            return false;
        }
        for t in trail {
            state[t] = 2;
        }
    }
    true
}

/// Brute-force total tree weight.
pub fn enumerate_tree_weight<S: Scalar>(g: &WiredGraph) -> Result<S> {
    let mut total = S::zero();
    enumerate_trees(g, |parent| {
        let w = parent
            .iter()
            .fold(S::one(), |acc, &e| acc * S::from_f64(g.edges[e].weight));
        total = total.clone() + w;
    })?;
    Ok(total)
}

/// Wired graph of `domain` inside `graph`.
///
/// Interior vertices are those strictly inside; an edge from an interior
/// vertex whose polyline touches ∂D becomes a boundary edge, cut at the first
/// touching point, even when its head is inside.
pub fn discretize(graph: &EmbeddedGraph, domain: &DomainSpec) -> Result<WiredGraph> {
    domain.validate()?;
    graph.check_embedding()?;
    let shape = &domain.shape;
    let mut index = vec![usize::MAX; graph.vertices.len()];
    let mut positions = Vec::new();
    let mut source_vertex = Vec::new();
    for v in &graph.vertices {
        if shape.contains(v.pos) {
            index[v.id] = positions.len();
            positions.push(v.pos);
            source_vertex.push(Some(v.id));
        }
    }
    if positions.is_empty() {
        return invalid("domain contains no lattice vertex");
    }
    let mut edges = Vec::new();
    for e in &graph.edges {
        let t = index[e.tail];
        if t == usize::MAX {
            continue;
        }
        let mut crossing = None;
        for (k, w) in e.polyline.windows(2).enumerate() {
            if let Some(s) = shape.first_boundary_hit(w[0], w[1]) {
                crossing = Some((k, s, w[0].lerp(w[1], s), w[0]));
                break;
            }
        }
        match crossing {
            None => {
                let h = index[e.head];
                if h == usize::MAX {
                    return Err(Error::Numeric(format!(
                        "edge {} leaves the domain without a detected boundary crossing",
                        e.id
                    )));
                }
                edges.push(WiredEdge {
                    tail: t,
                    head: h,
                    weight: e.weight,
                    polyline: e.polyline.clone(),
                    source: Some(e.id),
                    boundary: None,
                });
            }
            Some((k, _, point, from)) => {
                let mut polyline = e.polyline[..=k].to_vec();
                polyline.push(point);
                let arc = domain.arc_coordinate(point, from);
                edges.push(WiredEdge {
                    tail: t,
                    head: usize::MAX,
                    weight: e.weight,
                    polyline,
                    source: Some(e.id),
                    boundary: Some(BoundaryInfo { crossing: point, arc }),
                });
            }
        }
    }
    let n = positions.len();
    for e in &mut edges {
        if e.head == usize::MAX {
            e.head = n;
        }
    }
    WiredGraph::assemble(graph.mesh, positions, source_vertex, edges, Some(domain.clone()))
}

fn fmt17(x: f64) -> String {
    if x == 0.0 {
        "0.0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_point(p: Point) -> String {
    format!("[{},{}]", fmt17(p.x), fmt17(p.y))
}

/// Wired graph of `domain` in the square lattice of the given mesh, with
/// lattice points at integer multiples of the mesh.
pub fn square_lattice_domain(domain: &DomainSpec, mesh: f64) -> Result<WiredGraph> {
    if !(mesh > 0.0) {
        return invalid("mesh must be positive");
    }
    let (lo, hi) = domain.shape.bbox();
    let min = Point::new((lo.x / mesh).floor() * mesh - mesh, (lo.y / mesh).floor() * mesh - mesh);
    let max = Point::new((hi.x / mesh).ceil() * mesh + mesh, (hi.y / mesh).ceil() * mesh + mesh);
    discretize(&build_square_lattice(mesh, min, max)?, domain)
}

/// Interchange document for wired graphs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub mesh: f64,
    pub vertices: Vec<DocVertex>,
    pub edges: Vec<DocEdge>,
    pub cemetery: usize,
    pub boundary_edges: Vec<DocBoundaryEdge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocVertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocEdge {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
    pub polyline: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocBoundaryEdge {
    pub edge: usize,
    pub crossing: [f64; 2],
    pub arc: f64,
}

impl WiredGraph {
    /// JSON document with every float written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{{\"mesh\":{},\"vertices\":[", fmt17(self.mesh));
        for (i, p) in self.positions.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{{\"id\":{i},\"x\":{},\"y\":{}}}", fmt17(p.x), fmt17(p.y));
        }
        s.push_str("],\"edges\":[");
        for (i, e) in self.edges.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let poly: Vec<String> = e.polyline.iter().map(|p| fmt_point(*p)).collect();
            let _ = write!(
                s,
                "{{\"id\":{i},\"tail\":{},\"head\":{},\"weight\":{},\"polyline\":[{}]}}",
                e.tail,
                e.head,
                fmt17(e.weight),
                poly.join(",")
            );
        }
        let _ = write!(s, "],\"cemetery\":{},\"boundary_edges\":[", self.cemetery());
        for (i, &e) in self.boundary_edges.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let b = self.edges[e].boundary.as_ref().expect("boundary edge info");
            let _ = write!(
                s,
                "{{\"edge\":{e},\"crossing\":{},\"arc\":{}}}",
                fmt_point(b.crossing),
                fmt17(b.arc)
            );
        }
        s.push_str("]}");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("graph document: {e}")))?;
        let n = doc.vertices.len();
        if doc.cemetery != n {
            return invalid("cemetery id must equal the number of interior vertices");
        }
        for (i, v) in doc.vertices.iter().enumerate() {
            if v.id != i {
                return invalid("vertex ids must be 0..n in order");
            }
        }
        let mut info = std::collections::HashMap::new();
        for b in &doc.boundary_edges {
            info.insert(
                b.edge,
                BoundaryInfo { crossing: Point::new(b.crossing[0], b.crossing[1]), arc: b.arc },
            );
        }
        let mut edges = Vec::with_capacity(doc.edges.len());
        for (i, e) in doc.edges.iter().enumerate() {
            if e.id != i || e.tail >= n || e.head > n {
                return invalid(format!("edge {i} is malformed"));
            }
            let boundary = if e.head == n {
                Some(info.remove(&i).ok_or_else(|| Error::InvalidInput(format!("edge {i} lacks boundary info")))?)
            } else {
                None
            };
            edges.push(WiredEdge {
                tail: e.tail,
                head: e.head,
                weight: e.weight,
                polyline: e.polyline.iter().map(|p| Point::new(p[0], p[1])).collect(),
                source: None,
                boundary,
            });
        }
        let positions = doc.vertices.iter().map(|v| Point::new(v.x, v.y)).collect();
        Self::assemble(doc.mesh, positions, vec![None; n], edges, None)
    }
}

/// The two-vertex graph: both vertices joined to each other and to the cemetery.
pub fn two_vertex_graph() -> WiredGraph {
    WiredGraph::from_parts(
        2,
        &[(0, Some(1), 1.0), (1, Some(0), 1.0), (0, None, 1.0), (1, None, 1.0)],
        Some(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]),
    )
    .expect("static graph")
}

/// Wired `k×k` grid: interior vertices of the unit-mesh box `[0, k+1]²`.
pub fn wired_grid(k: usize) -> Result<WiredGraph> {
    let side = (k + 1) as f64;
    let g = build_square_lattice(1.0, Point::new(0.0, 0.0), Point::new(side, side))?;
    let d = DomainSpec::new(crate::domain::Shape::rectangle(Point::new(0.0, 0.0), Point::new(side, side)));
    discretize(&g, &d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;
    use num_rational::BigRational;

    #[test]
    fn square_lattice_counts() {
        let g = build_square_lattice(1.0, Point::new(0.0, 0.0), Point::new(2.0, 2.0)).unwrap();
        assert_eq!(g.vertices.len(), 9);
        assert_eq!(g.edges.len(), 24);
        let h = build_square_lattice(0.5, Point::new(0.0, 0.0), Point::new(1.0, 1.0)).unwrap();
        assert_eq!(h.vertices.len(), 9);
        assert!(build_square_lattice(1.0, Point::new(0.0, 0.0), Point::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn unit_square_discretization() {
        let g = build_square_lattice(0.25, Point::new(0.0, 0.0), Point::new(1.0, 1.0)).unwrap();
        let d = DomainSpec::new(Shape::rectangle(Point::new(0.0, 0.0), Point::new(1.0, 1.0)));
        let w = discretize(&g, &d).unwrap();
        assert_eq!(w.n_interior(), 9);
        assert_eq!(w.boundary_edges.len(), 12);
        assert!(w.kernel_defect() < 1e-12);
    }

    #[test]
    fn tiny_disc_has_one_vertex() {
        let g = build_square_lattice(0.1, Point::new(-1.0, -1.0), Point::new(1.0, 1.0)).unwrap();
        let d = DomainSpec::new(Shape::disc(Point::new(0.0, 0.0), 0.099));
        let w = discretize(&g, &d).unwrap();
        assert_eq!(w.n_interior(), 1);
        assert_eq!(w.boundary_edges.len(), 4);
        // just above one mesh step the four neighbours are strictly inside too
        let d = DomainSpec::new(Shape::disc(Point::new(0.0, 0.0), 0.101));
        assert_eq!(discretize(&g, &d).unwrap().n_interior(), 5);
    }

    #[test]
    fn two_vertex_tree_weight() {
        let g = two_vertex_graph();
        assert_eq!(matrix_tree_weight::<BigRational>(&g).unwrap(), BigRational::from_ratio(3, 1));
        assert_eq!(enumerate_tree_weight::<BigRational>(&g).unwrap(), BigRational::from_ratio(3, 1));
    }

    #[test]
    fn single_vertex_weight_five() {
        let g = WiredGraph::from_parts(1, &[(0, None, 5.0)], None).unwrap();
        assert_eq!(matrix_tree_weight::<f64>(&g).unwrap(), 5.0);
    }

    #[test]
    fn json_round_trip() {
        let g = wired_grid(2).unwrap();
        let back = WiredGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back.n_interior(), g.n_interior());
        assert_eq!(back.edges.len(), g.edges.len());
        for (a, b) in back.edges.iter().zip(&g.edges) {
            assert_eq!(a.polyline, b.polyline);
            assert_eq!(a.weight, b.weight);
        }
    }
}
