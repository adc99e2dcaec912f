//! Loop measure, Poisson loop soups and the walk-from-erasure construction.

use crate::erasure::SimplePath;
use crate::error::{invalid, Error, Result};
use crate::geom::diameter;
use crate::lattice::WiredGraph;
use crate::scalar::Scalar;
use crate::walk::{Terminal, WalkPath};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// A loop as a cyclic sequence of edge ids, stored at its canonical rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnrootedLoop {
    pub edges: Vec<usize>,
    /// Tail vertex of each edge, aligned with `edges`.
    pub vertices: Vec<usize>,
    /// Number of rotations mapping the cycle to itself.
    pub symmetry: usize,
    /// `Π q / symmetry`.
    pub mass: f64,
}

impl UnrootedLoop {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn visits(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }
}

/// Rooted mass `Π q / n` of a closed edge sequence.
pub fn rooted_mass<S: Scalar>(g: &WiredGraph, edges: &[usize]) -> S {
    let p = edges.iter().fold(S::one(), |acc, &e| acc * g.q_scalar::<S>(e));
    p / S::from_f64(edges.len() as f64)
}

/// Unrooted mass `Π q / J` with `J` the rotation symmetry order.
pub fn unrooted_mass<S: Scalar>(g: &WiredGraph, edges: &[usize]) -> S {
    let p = edges.iter().fold(S::one(), |acc, &e| acc * g.q_scalar::<S>(e));
    p / S::from_f64(symmetry_order(edges) as f64)
}

/// Number of rotations fixing the sequence.
pub fn symmetry_order(seq: &[usize]) -> usize {
    let n = seq.len();
    let period = (1..=n).find(|&p| n % p == 0 && (0..n).all(|i| seq[i] == seq[(i + p) % n])).unwrap_or(n);
    n / period
}

fn rotation_less(seq: &[usize], a: usize, b: usize) -> bool {
    let n = seq.len();
    for i in 0..n {
        let (x, y) = (seq[(a + i) % n], seq[(b + i) % n]);
        if x != y {
            return x < y;
        }
    }
    false
}

/// Which loops an enumeration should produce.
#[derive(Debug, Clone, Default)]
pub struct LoopFilter {
    /// Keep only loops visiting one of these vertices.
    pub touching: Option<Vec<bool>>,
    /// Keep only loops whose vertex diameter is at most this.
    pub diameter_cap: Option<f64>,
}

/// Largest number of loops an enumeration may produce.
pub const LOOP_BUDGET: usize = 20_000_000;

/// All unrooted loops of length `1..=l_max` inside `region`.
pub fn enumerate_loops(g: &WiredGraph, region: &[bool], l_max: usize) -> Result<Vec<UnrootedLoop>> {
    enumerate_loops_filtered(g, region, l_max, &LoopFilter::default())
}

/// Enumeration restricted by `filter`. Each loop is produced once, at the
/// smallest rotation starting at a vertex of the touching set.
pub fn enumerate_loops_filtered(
    g: &WiredGraph,
    region: &[bool],
    l_max: usize,
    filter: &LoopFilter,
) -> Result<Vec<UnrootedLoop>> {
    let n = g.n_interior();
    if region.len() != n {
        return invalid("region mask has wrong length");
    }
    let anchor = |v: usize| region[v] && filter.touching.as_ref().is_none_or(|t| t[v]);
    let max_edge = g
        .edges
        .iter()
        .filter(|e| e.head < n)
        .map(|e| crate::geom::polyline_length(&e.polyline))
        .fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut edges = Vec::with_capacity(l_max);
    let mut verts = Vec::with_capacity(l_max);
    for root in 0..n {
        if !anchor(root) {
            continue;
        }
        verts.push(root);
        dfs(g, region, l_max, filter, max_edge, &anchor, root, &mut verts, &mut edges, &mut out)?;
        verts.pop();
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    g: &WiredGraph,
    region: &[bool],
    l_max: usize,
    filter: &LoopFilter,
    max_edge: f64,
    anchor: &dyn Fn(usize) -> bool,
    root: usize,
    verts: &mut Vec<usize>,
    edges: &mut Vec<usize>,
    out: &mut Vec<UnrootedLoop>,
) -> Result<()> {
    let v = *verts.last().unwrap();
    for &e in g.out_edges(v) {
        let u = g.head(e);
        if g.is_cemetery(u) || !region[u] {
            continue;
        }
        let depth = edges.len() + 1;
        if let Some(cap) = filter.diameter_cap {
            if g.positions[u].dist(g.positions[root]) > cap + 1e-12 {
                continue;
            }
        }
        let remaining = l_max - depth;
        if g.positions[u].dist(g.positions[root]) > remaining as f64 * max_edge + 1e-9 {
            continue;
        }
        edges.push(e);
        if u == root {
            if is_canonical(edges, verts, anchor) {
                let ok = filter.diameter_cap.is_none_or(|cap| {
                    let pts: Vec<_> = verts.iter().map(|&w| g.positions[w]).collect();
                    diameter(&pts) <= cap + 1e-12
                });
                if ok {
                    if out.len() >= LOOP_BUDGET {
                        return Err(Error::TooLarge { what: "loop enumeration", size: out.len(), limit: LOOP_BUDGET });
                    }
                    let symmetry = symmetry_order(edges);
                    let mass = unrooted_mass::<f64>(g, edges);
                    out.push(UnrootedLoop { edges: edges.clone(), vertices: verts.clone(), symmetry, mass });
                }
            }
        }
        if depth < l_max {
            verts.push(u);
            dfs(g, region, l_max, filter, max_edge, anchor, root, verts, edges, out)?;
            verts.pop();
        }
        edges.pop();
    }
    Ok(())
}

fn is_canonical(edges: &[usize], verts: &[usize], anchor: &dyn Fn(usize) -> bool) -> bool {
    (1..edges.len()).all(|k| !anchor(verts[k]) || !rotation_less(edges, k, 0))
}

/// Total rooted mass of loops of length `n` in `region`: `tr(Qⁿ)/n`.
pub fn total_mass_by_length<S: Scalar>(g: &WiredGraph, region: &[bool], n: usize) -> Result<S> {
    if n == 0 {
        return invalid("length must be positive");
    }
    let q = restricted_kernel::<S>(g, region);
    let m = q.len();
    if m == 0 {
        return Ok(S::zero());
    }
    let mut p = q.clone();
    for _ in 1..n {
        p = matmul(&p, &q);
    }
    let tr = (0..m).fold(S::zero(), |acc, i| acc + p[i][i].clone());
    Ok(tr / S::from_f64(n as f64))
}

fn restricted_kernel<S: Scalar>(g: &WiredGraph, region: &[bool]) -> Vec<Vec<S>> {
    let idx: Vec<usize> = (0..g.n_interior()).filter(|&v| region[v]).collect();
    let mut pos = vec![usize::MAX; g.n_interior()];
    for (i, &v) in idx.iter().enumerate() {
        pos[v] = i;
    }
    let m = idx.len();
    let mut q = vec![vec![S::zero(); m]; m];
    for (i, &v) in idx.iter().enumerate() {
        for &e in g.out_edges(v) {
            let u = g.head(e);
            if u < g.n_interior() && region[u] {
                q[i][pos[u]] = q[i][pos[u]].clone() + g.q_scalar::<S>(e);
            }
        }
    }
    q
}

fn matmul<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Vec<Vec<S>> {
    let m = a.len();
    let mut c = vec![vec![S::zero(); m]; m];
    for i in 0..m {
        for k in 0..m {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..m {
                if !b[k][j].is_zero() {
                    c[i][j] = c[i][j].clone() + a[i][k].clone() * b[k][j].clone();
                }
            }
        }
    }
    c
}

/// Mass of loops longer than `l_max` in `region`, `Σ_{n > l_max} tr(Qⁿ)/n`.
///
/// Summed term by term on small regions; on larger ones bounded by
/// `m ρ^{l+1} / ((l+1)(1−ρ))` with `ρ` a power-iteration estimate of the
/// spectral radius.
pub fn tail_mass(g: &WiredGraph, region: &[bool], l_max: usize) -> f64 {
    let q = restricted_kernel::<f64>(g, region);
    let m = q.len();
    if m == 0 {
        return 0.0;
    }
    if m <= 60 {
        let mut p = q.clone();
        for _ in 1..=l_max {
            p = matmul(&p, &q);
        }
        let mut tail = 0.0;
        let mut n = l_max + 1;
        loop {
            let term = (0..m).map(|i| p[i][i]).sum::<f64>() / n as f64;
            tail += term;
            if term < 1e-16 || n > l_max + 100_000 {
                return tail;
            }
            p = matmul(&p, &q);
            n += 1;
        }
    }
    let mut x = vec![1.0; m];
    let mut rho = 0.0;
    for _ in 0..500 {
        let y: Vec<f64> = (0..m).map(|i| (0..m).map(|j| q[i][j] * x[j]).sum()).collect();
        let norm = y.iter().cloned().fold(0.0, f64::max);
        if norm == 0.0 {
            return 0.0;
        }
        rho = norm / x.iter().cloned().fold(0.0, f64::max);
        x = y.iter().map(|v| v / norm).collect();
    }
    let l = (l_max + 1) as f64;
    m as f64 * rho.powf(l) / (l * (1.0 - rho).max(1e-12))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSoup {
    /// Distinct loops with their multiplicities.
    pub loops: Vec<(UnrootedLoop, usize)>,
    pub l_max: usize,
    pub diameter_cap: Option<f64>,
    /// Total mass of the loops the soup was drawn from.
    pub intensity: f64,
    /// Neglected mass of loops longer than `l_max`.
    pub tail_mass: f64,
    pub region_size: usize,
}

impl LoopSoup {
    pub fn empty(l_max: usize) -> Self {
        Self { loops: Vec::new(), l_max, diameter_cap: None, intensity: 0.0, tail_mass: 0.0, region_size: 0 }
    }

    pub fn count(&self) -> usize {
        self.loops.iter().map(|(_, m)| m).sum()
    }

    /// CSV rows `cycle,length,mass,multiplicity`, cycle as `-`-joined vertices.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cycle,length,mass,multiplicity\n");
        for (l, m) in &self.loops {
            let cyc: Vec<String> = l.vertices.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{},{},{:.16e},{}\n", cyc.join("-"), l.len(), l.mass, m));
        }
        s
    }
}

/// Poisson soup over pre-enumerated loops: a Poisson(total mass) count of
/// loops, each drawn proportionally to its mass, which is the same law as
/// independent Poisson multiplicities.
pub fn sample_from_loops<R: Rng + ?Sized>(loops: &[UnrootedLoop], rng: &mut R) -> Vec<(usize, usize)> {
    let total: f64 = loops.iter().map(|l| l.mass).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(total).map(|p| p.sample(rng) as usize).unwrap_or(0);
    let mut cum = Vec::with_capacity(loops.len());
    let mut acc = 0.0;
    for l in loops {
        acc += l.mass;
        cum.push(acc);
    }
    let mut picks = std::collections::BTreeMap::new();
    for _ in 0..count {
        let u = rng.random::<f64>() * total;
        let i = cum.partition_point(|&c| c <= u).min(loops.len() - 1);
        *picks.entry(i).or_insert(0usize) += 1;
    }
    picks.into_iter().collect()
}

/// Soup of loops of length at most `l_max` inside `region`; loops above the
/// diameter cap are thinned away, which conditions on their absence.
pub fn sample_soup<R: Rng + ?Sized>(
    g: &WiredGraph,
    region: &[bool],
    l_max: usize,
    diameter_cap: Option<f64>,
    rng: &mut R,
) -> Result<LoopSoup> {
    let filter = LoopFilter { touching: None, diameter_cap };
    sample_soup_filtered(g, region, l_max, &filter, rng)
}

/// As [`sample_soup`], keeping only loops that pass `filter`.
pub fn sample_soup_filtered<R: Rng + ?Sized>(
    g: &WiredGraph,
    region: &[bool],
    l_max: usize,
    filter: &LoopFilter,
    rng: &mut R,
) -> Result<LoopSoup> {
    let loops = enumerate_loops_filtered(g, region, l_max, filter)?;
    let picks = sample_from_loops(&loops, rng);
    let intensity = loops.iter().map(|l| l.mass).sum();
    let region_size = region.iter().filter(|&&x| x).count();
    let tail = if region_size <= 400 { tail_mass(g, region, l_max) } else { f64::NAN };
    Ok(LoopSoup {
        loops: picks.into_iter().map(|(i, m)| (loops[i].clone(), m)).collect(),
        l_max,
        diameter_cap: filter.diameter_cap,
        intensity,
        tail_mass: tail,
        region_size,
    })
}

/// Walk whose forward erasure is `gamma`, built by hanging the soup loops
/// on it: loops are taken in a uniform random order, each attached at the
/// first vertex of `gamma` it visits, rerooted at a uniformly chosen visit.
/// Loops missing `gamma` are dropped.
pub fn attach_loops<R: Rng + ?Sized>(g: &WiredGraph, gamma: &SimplePath, soup: &LoopSoup, rng: &mut R) -> Result<WalkPath> {
    let mut copies: Vec<&UnrootedLoop> = Vec::with_capacity(soup.count());
    for (l, m) in &soup.loops {
        for _ in 0..*m {
            copies.push(l);
        }
    }
    copies.shuffle(rng);
    let mut used = vec![false; copies.len()];
    let mut edges = Vec::new();
    for (i, &v) in gamma.vertices.iter().enumerate() {
        if g.is_cemetery(v) {
            break;
        }
        for (k, l) in copies.iter().enumerate() {
            if used[k] {
                continue;
            }
            let visits: Vec<usize> = (0..l.len()).filter(|&j| l.vertices[j] == v).collect();
            if visits.is_empty() {
                continue;
            }
            used[k] = true;
            let j = visits[rng.random_range(0..visits.len())];
            edges.extend_from_slice(&l.edges[j..]);
            edges.extend_from_slice(&l.edges[..j]);
        }
        if i < gamma.edges.len() {
            edges.push(gamma.edges[i]);
        }
    }
    let terminal = match gamma.edges.last() {
        Some(&e) if g.is_cemetery(g.head(e)) => Terminal::Exited { edge: e },
        _ => Terminal::HitSet,
    };
    WalkPath::from_edges(g, gamma.start(), edges, terminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::two_vertex_graph;
    use crate::Exact;

    #[test]
    fn two_vertex_loops() {
        let g = two_vertex_graph();
        let all = vec![true, true];
        let loops = enumerate_loops(&g, &all, 2).unwrap();
        assert_eq!(loops.len(), 1);
        assert_eq!(unrooted_mass::<Exact>(&g, &loops[0].edges), Exact::from_ratio(1, 4));
        assert!(enumerate_loops(&g, &all, 1).unwrap().is_empty());
        let four = enumerate_loops(&g, &all, 4).unwrap();
        let doubled = four.iter().find(|l| l.len() == 4).unwrap();
        assert_eq!(doubled.symmetry, 2);
        assert_eq!(unrooted_mass::<Exact>(&g, &doubled.edges), Exact::from_ratio(1, 32));
    }

    #[test]
    fn trace_formula_two_vertices() {
        let g = two_vertex_graph();
        let all = vec![true, true];
        assert_eq!(total_mass_by_length::<Exact>(&g, &all, 2).unwrap(), Exact::from_ratio(1, 4));
        assert_eq!(total_mass_by_length::<Exact>(&g, &all, 1).unwrap(), Exact::from_ratio(0, 1));
        assert_eq!(total_mass_by_length::<Exact>(&g, &all, 3).unwrap(), Exact::from_ratio(0, 1));
    }

    #[test]
    fn attach_single_loop() {
        let g = two_vertex_graph();
        let all = vec![true, true];
        let lp = enumerate_loops(&g, &all, 2).unwrap().remove(0);
        let exit0 = g.boundary_edges.iter().copied().find(|&e| g.tail(e) == 0).unwrap();
        let gamma = SimplePath { vertices: vec![0, 2], edges: vec![exit0] };
        let soup = LoopSoup { loops: vec![(lp, 1)], ..LoopSoup::empty(2) };
        let mut r = crate::rng::stream(3, 0);
        let x = attach_loops(&g, &gamma, &soup, &mut r).unwrap();
        assert_eq!(x.vertices, vec![0, 1, 0, 2]);
        let empty = attach_loops(&g, &gamma, &LoopSoup::empty(2), &mut r).unwrap();
        assert_eq!(empty.vertices, gamma.vertices);
    }
}
