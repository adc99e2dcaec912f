//! Wired spanning trees oriented to the cemetery: Wilson's algorithm,
//! branches, the exact small-graph law and the finiteness diagnostic.

use crate::erasure::SimplePath;
use crate::error::{invalid, Error, Result};
use crate::geom::{hull_diameter, Point};
use crate::lattice::{enumerate_trees, WiredGraph};
use crate::scalar::Scalar;
use crate::walk::{Terminal, WalkPath, DEFAULT_STEP_CAP};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Spanning tree as the outgoing (parent) edge of every interior vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanningTree {
    pub parent: Vec<usize>,
}

impl SpanningTree {
    pub fn is_valid(&self, g: &WiredGraph) -> bool {
        self.parent.len() == g.n_interior()
            && self.parent.iter().enumerate().all(|(v, &e)| e < g.edges.len() && g.tail(e) == v)
            && crate::lattice::parent_vector_is_tree(g, &self.parent)
    }

    /// Path from `v` along parent edges to the cemetery.
    pub fn branch(&self, g: &WiredGraph, v: usize) -> SimplePath {
        let mut p = SimplePath { vertices: vec![v], edges: Vec::new() };
        let mut u = v;
        while !g.is_cemetery(u) {
            let e = self.parent[u];
            p.edges.push(e);
            u = g.head(e);
            p.vertices.push(u);
        }
        p
    }

    /// Canonical key: the sorted edge-id list.
    pub fn key(&self) -> Vec<usize> {
        let mut k = self.parent.clone();
        k.sort_unstable();
        k
    }

    /// Lines `tail head edge` for every tree edge.
    pub fn to_edge_list(&self, g: &WiredGraph) -> String {
        let mut s = String::new();
        for (v, &e) in self.parent.iter().enumerate() {
            s.push_str(&format!("{v} {} {e}\n", g.head(e)));
        }
        s
    }
}

/// One Wilson step: the start vertex, its walk (when recorded) and the branch added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub start: usize,
    pub walk: Option<WalkPath>,
    pub branch: SimplePath,
}

/// Tree grown over part of the graph, with the generation log.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialTree {
    pub parent: Vec<Option<usize>>,
    pub log: Vec<BranchRecord>,
}

impl PartialTree {
    pub fn new(g: &WiredGraph) -> Self {
        Self { parent: vec![None; g.n_interior()], log: Vec::new() }
    }

    pub fn contains(&self, g: &WiredGraph, v: usize) -> bool {
        g.is_cemetery(v) || self.parent[v].is_some()
    }

    pub fn size(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }

    pub fn into_tree(self) -> Result<SpanningTree> {
        let parent: Option<Vec<usize>> = self.parent.into_iter().collect();
        parent
            .map(|parent| SpanningTree { parent })
            .ok_or_else(|| Error::InvalidInput("partial tree does not span".into()))
    }

    /// Install a branch ending in the tree.
    pub fn add_branch(&mut self, g: &WiredGraph, branch: &SimplePath) -> Result<()> {
        if !self.contains(g, branch.end()) {
            return invalid("branch does not end in the tree");
        }
        for (i, &e) in branch.edges.iter().enumerate() {
            let v = branch.vertices[i];
            if self.parent[v].is_some() {
                return invalid("branch re-enters the tree");
            }
            self.parent[v] = Some(e);
        }
        Ok(())
    }

    /// Path from `v` along parent edges to the cemetery.
    pub fn branch(&self, g: &WiredGraph, v: usize) -> Option<SimplePath> {
        let mut p = SimplePath { vertices: vec![v], edges: Vec::new() };
        let mut u = v;
        while !g.is_cemetery(u) {
            let e = self.parent[u]?;
            p.edges.push(e);
            u = g.head(e);
            p.vertices.push(u);
        }
        Some(p)
    }
}

/// Order in which Wilson's algorithm picks start vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartOrder {
    Explicit(Vec<usize>),
    RowMajor,
    /// Vertices nearest to an `eps`-spaced grid over the region first, then
    /// the rest of the region, then everything else.
    EpsNet { region: Vec<bool>, eps: f64 },
}

/// Vertices nearest to the points of an `eps`-grid inside the region.
pub fn eps_net(g: &WiredGraph, region: &[bool], eps: f64) -> Vec<usize> {
    let pts: Vec<Point> = (0..g.n_interior()).filter(|&v| region[v]).map(|v| g.positions[v]).collect();
    let Some(bb) = crate::geom::BBox::of_points(&pts) else { return Vec::new() };
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let nx = (bb.width() / eps).floor() as usize;
    let ny = (bb.height() / eps).floor() as usize;
    for j in 0..=ny {
        for i in 0..=nx {
            let target = Point::new(bb.min.x + eps * i as f64, bb.min.y + eps * j as f64);
            let best = (0..g.n_interior())
                .filter(|&v| region[v])
                .min_by(|&a, &b| g.positions[a].dist(target).total_cmp(&g.positions[b].dist(target)));
            if let Some(v) = best {
                if g.positions[v].dist(target) <= eps / 2.0 && seen.insert(v) {
                    out.push(v);
                }
            }
        }
    }
    out
}

impl StartOrder {
    pub fn resolve(&self, g: &WiredGraph) -> Vec<usize> {
        let n = g.n_interior();
        let mut order = match self {
            StartOrder::Explicit(v) => v.clone(),
            StartOrder::RowMajor => {
                let mut v: Vec<usize> = (0..n).collect();
                v.sort_by(|&a, &b| {
                    let (p, q) = (g.positions[a], g.positions[b]);
                    p.y.total_cmp(&q.y).then(p.x.total_cmp(&q.x))
                });
                v
            }
            StartOrder::EpsNet { region, eps } => {
                let mut v = eps_net(g, region, *eps);
                let mut seen: std::collections::HashSet<usize> = v.iter().copied().collect();
                for u in 0..n {
                    if region[u] && seen.insert(u) {
                        v.push(u);
                    }
                }
                v
            }
        };
        // every vertex is eventually covered
        let mut present = vec![false; n];
        for &v in &order {
            if v < n {
                present[v] = true;
            }
        }
        order.extend((0..n).filter(|&v| !present[v]));
        order
    }
}

/// Grow `tree` from each start in turn: walk until hitting the tree and add
/// the forward erasure of the walk.
pub fn wilson_extend<R: Rng + ?Sized>(
    g: &WiredGraph,
    tree: &mut PartialTree,
    starts: &[usize],
    rng: &mut R,
    record_walks: bool,
) -> Result<()> {
    let n = g.n_interior();
    let mut next = vec![usize::MAX; n];
    for &s in starts {
        if s >= n {
            return invalid(format!("start {s} is not interior"));
        }
        if tree.parent[s].is_some() {
            tree.log.push(BranchRecord {
                start: s,
                walk: record_walks.then(|| WalkPath::trivial(s)),
                branch: SimplePath { vertices: vec![s], edges: Vec::new() },
            });
            continue;
        }
        let mut walk = record_walks.then(|| WalkPath::trivial(s));
        let mut u = s;
        let mut steps = 0u64;
        while !tree.contains(g, u) {
            if steps >= DEFAULT_STEP_CAP {
                return Err(Error::StepCap { cap: DEFAULT_STEP_CAP });
            }
            let e = g.step(u, rng);
            next[u] = e;
            u = g.head(e);
            steps += 1;
            if let Some(w) = walk.as_mut() {
                w.edges.push(e);
                w.vertices.push(u);
            }
        }
        if let Some(w) = walk.as_mut() {
            w.terminal = match w.edges.last() {
                Some(&e) if g.is_cemetery(g.head(e)) => Terminal::Exited { edge: e },
                _ => Terminal::HitSet,
            };
        }
        let mut branch = SimplePath { vertices: vec![s], edges: Vec::new() };
        let mut u = s;
        while !tree.contains(g, u) {
            let e = next[u];
            tree.parent[u] = Some(e);
            branch.edges.push(e);
            u = g.head(e);
            branch.vertices.push(u);
        }
        tree.log.push(BranchRecord { start: s, walk, branch });
    }
    Ok(())
}

/// Wilson's algorithm: a tree with law proportional to `Π q` over its edges.
pub fn wilson<R: Rng + ?Sized>(
    g: &WiredGraph,
    order: &StartOrder,
    rng: &mut R,
    record_walks: bool,
) -> Result<(SpanningTree, Vec<BranchRecord>)> {
    let mut tree = PartialTree::new(g);
    wilson_extend(g, &mut tree, &order.resolve(g), rng, record_walks)?;
    let log = std::mem::take(&mut tree.log);
    Ok((tree.into_tree()?, log))
}

/// Branch of `v`.
pub fn branch(g: &WiredGraph, tree: &SpanningTree, v: usize) -> SimplePath {
    tree.branch(g, v)
}

/// Largest interior accepted by [`exact_tree_distribution`].
pub const TREE_LAW_LIMIT: usize = 9;

/// Every spanning tree with its probability `Π q / Σ_T Π q`, plus the
/// unnormalised total of raw edge weights.
pub fn exact_tree_distribution<S: Scalar>(g: &WiredGraph) -> Result<(Vec<(SpanningTree, S)>, S)> {
    let n = g.n_interior();
    if n > TREE_LAW_LIMIT {
        return Err(Error::TooLarge { what: "interior", size: n, limit: TREE_LAW_LIMIT });
    }
    let mut trees = Vec::new();
    let mut total_q = S::zero();
    let mut total_w = S::zero();
    enumerate_trees(g, |parent| {
        let wq = parent.iter().fold(S::one(), |a, &e| a * g.q_scalar::<S>(e));
        let ww = parent.iter().fold(S::one(), |a, &e| a * S::from_f64(g.edges[e].weight));
        total_q = total_q.clone() + wq.clone();
        total_w = total_w.clone() + ww;
        trees.push((SpanningTree { parent: parent.to_vec() }, wq));
    })?;
    let law = trees.into_iter().map(|(t, w)| (t, w / total_q.clone())).collect();
    Ok((law, total_w))
}

/// Outcome of the finiteness diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitenessReport {
    pub k: usize,
    pub eps: f64,
    pub n_runs: usize,
    /// Per run: largest component diameter of the late part of the tree,
    /// and largest walk range after the first `k` branches.
    pub per_run: Vec<(f64, f64)>,
    pub probability: f64,
    pub stderr: f64,
}

/// Run Wilson with `k` starts from an `eps`-net near `region`, then exhaust
/// the region, and record how far the late part of the tree reaches.
pub fn finiteness_diagnostic(
    g: &WiredGraph,
    region: &[bool],
    eps: f64,
    k: usize,
    seed: u64,
    n_runs: usize,
) -> Result<FinitenessReport> {
    let mut net = eps_net(g, region, eps);
    let mut seen: std::collections::HashSet<usize> = net.iter().copied().collect();
    for v in 0..g.n_interior() {
        if region[v] && seen.insert(v) {
            net.push(v);
        }
    }
    let k = k.min(net.len());
    let (first, rest) = net.split_at(k);
    let per_run: Vec<(f64, f64)> = (0..n_runs)
        .map(|run| {
            let mut rng = crate::rng::stream(seed, run as u64);
            let mut tree = PartialTree::new(g);
            wilson_extend(g, &mut tree, first, &mut rng, false)?;
            let early: Vec<bool> = tree.parent.iter().map(|p| p.is_some()).collect();
            let before = tree.log.len();
            wilson_extend(g, &mut tree, rest, &mut rng, true)?;
            let mut range: f64 = 0.0;
            for rec in &tree.log[before..] {
                if let Some(w) = &rec.walk {
                    let o = g.positions[w.start()];
                    for &v in &w.vertices {
                        if !g.is_cemetery(v) {
                            range = range.max(g.positions[v].dist(o));
                        }
                    }
                }
            }
            Ok((late_component_diameter(g, &tree, &early), range))
        })
        .collect::<Result<_>>()?;
    let ok = per_run.iter().filter(|(d, r)| *d <= eps && *r <= eps).count();
    let p = ok as f64 / n_runs.max(1) as f64;
    let stderr = if n_runs > 1 { (p * (1.0 - p) / (n_runs - 1) as f64).sqrt() } else { 0.0 };
    Ok(FinitenessReport { k, eps, n_runs, per_run, probability: p, stderr })
}

/// Diameter of the largest connected piece of the tree added after `early`.
fn late_component_diameter(g: &WiredGraph, tree: &PartialTree, early: &[bool]) -> f64 {
    let n = g.n_interior();
    let mut comp = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        if early[v] || tree.parent[v].is_none() || comp[v] != usize::MAX {
            continue;
        }
        // follow parents until an early vertex, a labelled vertex or the cemetery
        let mut trail = vec![v];
        let mut u = g.head(tree.parent[v].unwrap());
        let label = loop {
            if g.is_cemetery(u) || early[u] {
                break None;
            }
            if comp[u] != usize::MAX {
                break Some(comp[u]);
            }
            trail.push(u);
            u = g.head(tree.parent[u].unwrap());
        };
        let c = label.unwrap_or_else(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        for t in trail {
            comp[t] = c;
            members[c].push(t);
        }
    }
    members
        .iter()
        .map(|m| {
            let pts: Vec<Point> = m.iter().map(|&v| g.positions[v]).collect();
            hull_diameter(&pts)
        })
        .fold(0.0, f64::max)
}
