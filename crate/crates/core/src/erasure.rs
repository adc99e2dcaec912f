//! Loop erasure in forward, backward and mixed time, the loop-reversal
//! bijection, the exact law of the loop-erased walk, and quasiloop scans.

use crate::error::{invalid, Error, Result};
use crate::geom::Point;
use crate::lattice::WiredGraph;
use crate::linalg;
use crate::scalar::Scalar;
use crate::walk::{StoppingSchedule, Terminal, WalkPath};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// A path without repeated vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SimplePath {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl SimplePath {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn start(&self) -> usize {
        self.vertices[0]
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().unwrap()
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.vertices.iter().all(|v| seen.insert(*v))
    }

    pub fn to_walk(&self, g: &WiredGraph) -> WalkPath {
        let terminal = match self.edges.last() {
            Some(&e) if g.is_cemetery(g.head(e)) => Terminal::Exited { edge: e },
            _ => Terminal::HitSet,
        };
        WalkPath { vertices: self.vertices.clone(), edges: self.edges.clone(), terminal }
    }

    pub fn vertex_positions(&self, g: &WiredGraph) -> Vec<Point> {
        self.to_walk(g).vertex_positions(g)
    }

    pub fn geometry(&self, g: &WiredGraph) -> Vec<Point> {
        self.to_walk(g).geometry(g)
    }
}

/// Step indices kept by chronological loop erasure of a vertex sequence.
fn forward_kept_steps(vertices: &[usize]) -> Vec<usize> {
    let mut pos: HashMap<usize, usize> = HashMap::new();
    let mut stack_v = vec![vertices[0]];
    let mut stack_s: Vec<usize> = Vec::new();
    pos.insert(vertices[0], 0);
    for (i, &v) in vertices.iter().enumerate().skip(1) {
        if let Some(&k) = pos.get(&v) {
            for w in stack_v.drain(k + 1..) {
                pos.remove(&w);
            }
            stack_s.truncate(k);
        } else {
            pos.insert(v, stack_v.len());
            stack_v.push(v);
            stack_s.push(i - 1);
        }
    }
    stack_s
}

fn from_steps(vertices: &[usize], edges: &[usize], steps: &[usize]) -> SimplePath {
    let mut out = SimplePath { vertices: vec![vertices[0]], edges: Vec::with_capacity(steps.len()) };
    for &s in steps {
        out.edges.push(edges[s]);
        out.vertices.push(vertices[s + 1]);
    }
    out
}

/// Chronological loop erasure.
pub fn forward_le(path: &WalkPath) -> SimplePath {
    let steps = forward_kept_steps(&path.vertices);
    from_steps(&path.vertices, &path.edges, &steps)
}

/// Loop erasure of the time-reversed path, reversed back.
pub fn backward_le(path: &WalkPath) -> SimplePath {
    let rev: Vec<usize> = path.vertices.iter().rev().copied().collect();
    let l = path.len();
    let mut steps: Vec<usize> = forward_kept_steps(&rev).into_iter().map(|k| l - 1 - k).collect();
    steps.reverse();
    from_steps(&path.vertices, &path.edges, &steps)
}

/// Loop erasure mixing backward erasure of the first stretch with forward
/// bookkeeping at the schedule times.
pub fn mixed_le(path: &WalkPath, schedule: &StoppingSchedule) -> Result<SimplePath> {
    schedule.validate(path)?;
    let t = &schedule.times;
    if schedule.i_max == 0 {
        return Ok(SimplePath { vertices: vec![path.start()], edges: Vec::new() });
    }
    let mut y = backward_le(&path.slice(0, t[1]));
    for i in 1..schedule.i_max {
        let (ti, tn) = (t[i], t[i + 1]);
        let seg: std::collections::HashSet<usize> = path.vertices[ti..=tn].iter().copied().collect();
        let s = y
            .vertices
            .iter()
            .position(|v| seg.contains(v))
            .ok_or_else(|| Error::InvalidInput("schedule does not match the path".into()))?;
        let target = y.vertices[s];
        let last = (ti..=tn).rev().find(|&k| path.vertices[k] == target).expect("vertex is in the segment");
        let tail = backward_le(&path.slice(last, tn));
        y.vertices.truncate(s + 1);
        y.edges.truncate(s);
        y.vertices.extend_from_slice(&tail.vertices[1..]);
        y.edges.extend_from_slice(&tail.edges);
    }
    Ok(y)
}

/// A path segment split by forward erasure into its erased path `eta` and
/// the loops `loops[j]` (edge lists rooted at `eta[j]`).
#[derive(Debug, Clone)]
struct Decomposition {
    eta: Vec<usize>,
    steps: Vec<usize>,
    loops: Vec<Vec<usize>>,
}

fn decompose(g: &WiredGraph, vertices: &[usize], edges: &[usize]) -> Decomposition {
    let kept = forward_kept_steps(vertices);
    let mut eta = vec![vertices[0]];
    let mut steps = Vec::new();
    let mut loops = Vec::new();
    let mut from = 0;
    for &k in &kept {
        loops.push(edges[from..k].to_vec());
        steps.push(edges[k]);
        eta.push(vertices[k + 1]);
        from = k + 1;
    }
    loops.push(edges[from..].to_vec());
    let _ = g;
    Decomposition { eta, steps, loops }
}

fn compose(d: &Decomposition) -> Vec<usize> {
    let mut out = Vec::new();
    for (j, l) in d.loops.iter().enumerate() {
        out.extend_from_slice(l);
        if j < d.steps.len() {
            out.push(d.steps[j]);
        }
    }
    out
}

fn loop_vertices(g: &WiredGraph, root: usize, l: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(l.len() + 1);
    v.push(root);
    v.extend(l.iter().map(|&e| g.head(e)));
    v
}

/// Exchange the avoidance order of the loops at `a` and `b`, where the loop
/// at `b` avoids `a` before the move and the loop at `a` avoids `b` after.
fn swap_forward(g: &WiredGraph, la: &[usize], lb: &[usize], a: usize, b: usize) -> (Vec<usize>, Vec<usize>) {
    let va = loop_vertices(g, a, la);
    let Some(f) = va.iter().position(|&x| x == b) else {
        return (la.to_vec(), lb.to_vec());
    };
    let sigma = va[..f].iter().rposition(|&x| x == a).unwrap();
    let gg = va.iter().rposition(|&x| x == b).unwrap();
    let tau = gg + va[gg..].iter().position(|&x| x == a).unwrap();
    let (p, q, r, s, t) = (&la[..sigma], &la[sigma..f], &la[f..gg], &la[gg..tau], &la[tau..]);
    let new_a = p.to_vec();
    let mut new_b = Vec::with_capacity(la.len() - sigma + lb.len());
    new_b.extend_from_slice(r);
    new_b.extend_from_slice(s);
    new_b.extend_from_slice(t);
    new_b.extend_from_slice(q);
    new_b.extend_from_slice(lb);
    (new_a, new_b)
}

/// Inverse of [`swap_forward`].
fn swap_backward(g: &WiredGraph, la: &[usize], lb: &[usize], a: usize, b: usize) -> (Vec<usize>, Vec<usize>) {
    let vb = loop_vertices(g, b, lb);
    let Some(last_a) = vb.iter().rposition(|&x| x == a) else {
        return (la.to_vec(), lb.to_vec());
    };
    let (rst, qlb) = (&lb[..last_a], &lb[last_a..]);
    let vq = &vb[last_a..];
    let first_b = vq.iter().position(|&x| x == b).unwrap();
    let (q, old_b) = (&qlb[..first_b], &qlb[first_b..]);
    let vr = &vb[..=last_a];
    let gg = vr.iter().rposition(|&x| x == b).unwrap();
    let tau = gg + vr[gg..].iter().position(|&x| x == a).unwrap();
    let (r, s, t) = (&rst[..gg], &rst[gg..tau], &rst[tau..]);
    let mut old_a = la.to_vec();
    old_a.extend_from_slice(q);
    old_a.extend_from_slice(r);
    old_a.extend_from_slice(s);
    old_a.extend_from_slice(t);
    (old_a, old_b.to_vec())
}

/// Rearrange the loops of one segment so that its backward erasure equals
/// the forward erasure of the input.
fn reverse_segment(g: &WiredGraph, vertices: &[usize], edges: &[usize], inverse: bool) -> Vec<usize> {
    if edges.is_empty() {
        return Vec::new();
    }
    let mut d = if inverse {
        // the input is already in backward form: its backward erasure gives eta
        let rev: Vec<usize> = vertices.iter().rev().copied().collect();
        let l = edges.len();
        let mut kept: Vec<usize> = forward_kept_steps(&rev).into_iter().map(|k| l - 1 - k).collect();
        kept.reverse();
        let mut eta = vec![vertices[0]];
        let mut steps = Vec::new();
        let mut loops = Vec::new();
        let mut from = 0;
        for &k in &kept {
            loops.push(edges[from..k].to_vec());
            steps.push(edges[k]);
            eta.push(vertices[k + 1]);
            from = k + 1;
        }
        loops.push(edges[from..].to_vec());
        Decomposition { eta, steps, loops }
    } else {
        decompose(g, vertices, edges)
    };
    let k = d.eta.len() - 1;
    if !inverse {
        let mut order: Vec<usize> = (0..=k).collect();
        for pass in 0..k {
            for m in 0..k - pass {
                let (a, b) = (order[m], order[m + 1]);
                let (na, nb) = swap_forward(g, &d.loops[a], &d.loops[b], d.eta[a], d.eta[b]);
                d.loops[a] = na;
                d.loops[b] = nb;
                order.swap(m, m + 1);
            }
        }
    } else {
        let mut order: Vec<usize> = (0..=k).rev().collect();
        for pass in (0..k).rev() {
            for m in (0..k - pass).rev() {
                // undo the forward move that produced positions m, m+1
                let (b, a) = (order[m], order[m + 1]);
                let (na, nb) = swap_backward(g, &d.loops[a], &d.loops[b], d.eta[a], d.eta[b]);
                d.loops[a] = na;
                d.loops[b] = nb;
                order.swap(m, m + 1);
            }
        }
    }
    compose(&d)
}

fn apply_by_segments(g: &WiredGraph, path: &WalkPath, schedule: &StoppingSchedule, inverse: bool) -> Result<WalkPath> {
    schedule.validate(path)?;
    let t = &schedule.times;
    if schedule.i_max == 0 {
        return Ok(path.clone());
    }
    let mut edges: Vec<usize> = Vec::with_capacity(path.len());
    let first = reverse_segment(g, &path.vertices[..=t[1]], &path.edges[..t[1]], inverse);
    edges.extend(first);
    // after each segment is rewritten, the erasure so far equals the forward
    // erasure of the original prefix, so cut points are computed on that
    let mut y = forward_le(&path.slice(0, t[1]));
    for i in 1..schedule.i_max {
        let (ti, tn) = (t[i], t[i + 1]);
        let seg: std::collections::HashSet<usize> = path.vertices[ti..=tn].iter().copied().collect();
        let s = y.vertices.iter().position(|v| seg.contains(v)).expect("segment starts on the erasure");
        let target = y.vertices[s];
        let last = (ti..=tn).rev().find(|&k| path.vertices[k] == target).unwrap();
        edges.extend_from_slice(&path.edges[ti..last]);
        edges.extend(reverse_segment(g, &path.vertices[last..=tn], &path.edges[last..tn], inverse));
        let tail = forward_le(&path.slice(last, tn));
        y.vertices.truncate(s + 1);
        y.edges.truncate(s);
        y.vertices.extend_from_slice(&tail.vertices[1..]);
        y.edges.extend_from_slice(&tail.edges);
    }
    edges.extend_from_slice(&path.edges[t[schedule.i_max]..]);
    WalkPath::from_edges(g, path.start(), edges, path.terminal)
}

/// Weight-preserving bijection on walk paths with
/// `mixed_le(reversal_map(X), S) = forward_le(X)`; the schedule of the
/// image under the same sets equals `S`.
pub fn reversal_map(g: &WiredGraph, path: &WalkPath, schedule: &StoppingSchedule) -> Result<WalkPath> {
    apply_by_segments(g, path, schedule, false)
}

/// Inverse of [`reversal_map`].
///
/// For a path `Z`, `mixed_le(Z, S)` equals the forward erasure of the preimage,
/// so the cut points are computed from the mixed erasure of `Z` itself.
pub fn reversal_map_inverse(g: &WiredGraph, path: &WalkPath, schedule: &StoppingSchedule) -> Result<WalkPath> {
    schedule.validate(path)?;
    let t = &schedule.times;
    if schedule.i_max == 0 {
        return Ok(path.clone());
    }
    let mut edges: Vec<usize> = Vec::with_capacity(path.len());
    edges.extend(reverse_segment(g, &path.vertices[..=t[1]], &path.edges[..t[1]], true));
    let mut y = backward_le(&path.slice(0, t[1]));
    for i in 1..schedule.i_max {
        let (ti, tn) = (t[i], t[i + 1]);
        let seg: std::collections::HashSet<usize> = path.vertices[ti..=tn].iter().copied().collect();
        let s = y.vertices.iter().position(|v| seg.contains(v)).expect("segment starts on the erasure");
        let target = y.vertices[s];
        let last = (ti..=tn).rev().find(|&k| path.vertices[k] == target).unwrap();
        edges.extend_from_slice(&path.edges[ti..last]);
        edges.extend(reverse_segment(g, &path.vertices[last..=tn], &path.edges[last..tn], true));
        let tail = backward_le(&path.slice(last, tn));
        y.vertices.truncate(s + 1);
        y.edges.truncate(s);
        y.vertices.extend_from_slice(&tail.vertices[1..]);
        y.edges.extend_from_slice(&tail.edges);
    }
    edges.extend_from_slice(&path.edges[t[schedule.i_max]..]);
    WalkPath::from_edges(g, path.start(), edges, path.terminal)
}

/// Largest interior accepted by [`laplacian_walk_law`].
pub const LAW_LIMIT: usize = 12;

/// Exact law of the loop erasure of the walk from `start` to the cemetery,
/// grown one step at a time with weights `q(u→v)·h(v)`, where `h(v)` is the
/// probability of reaching the cemetery before the path built so far.
pub fn laplacian_walk_law<S: Scalar>(g: &WiredGraph, start: usize) -> Result<Vec<(SimplePath, S)>> {
    let n = g.n_interior();
    if n > LAW_LIMIT {
        return Err(Error::TooLarge { what: "interior", size: n, limit: LAW_LIMIT });
    }
    if start >= n {
        return invalid("start must be interior");
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; n];
    on_path[start] = true;
    let mut path = SimplePath { vertices: vec![start], edges: Vec::new() };
    grow(g, &mut path, &mut on_path, S::one(), &mut out)?;
    Ok(out)
}

/// `h(v)` = probability from `v` of reaching the cemetery before `blocked`.
fn escape_probabilities<S: Scalar>(g: &WiredGraph, blocked: &[bool]) -> Result<Vec<S>> {
    let n = g.n_interior();
    let free: Vec<usize> = (0..n).filter(|&v| !blocked[v]).collect();
    let mut idx = vec![usize::MAX; n];
    for (i, &v) in free.iter().enumerate() {
        idx[v] = i;
    }
    let m = free.len();
    let mut a = vec![vec![S::zero(); m]; m];
    let mut b = vec![S::zero(); m];
    for (i, &v) in free.iter().enumerate() {
        a[i][i] = S::one();
        for &e in g.out_edges(v) {
            let u = g.head(e);
            let q: S = g.q_scalar(e);
            if g.is_cemetery(u) {
                b[i] = b[i].clone() + q;
            } else if !blocked[u] {
                a[i][idx[u]] = a[i][idx[u]].clone() - q;
            }
        }
    }
    let x = if m > 0 { linalg::solve(a, b)? } else { Vec::new() };
    let mut h = vec![S::zero(); n];
    for (i, &v) in free.iter().enumerate() {
        h[v] = x[i].clone();
    }
    Ok(h)
}

fn grow<S: Scalar>(
    g: &WiredGraph,
    path: &mut SimplePath,
    on_path: &mut Vec<bool>,
    prob: S,
    out: &mut Vec<(SimplePath, S)>,
) -> Result<()> {
    let u = path.end();
    let h = escape_probabilities::<S>(g, on_path)?;
    let mut weights = Vec::new();
    let mut total = S::zero();
    for &e in g.out_edges(u) {
        let v = g.head(e);
        let w = if g.is_cemetery(v) {
            g.q_scalar::<S>(e)
        } else if on_path[v] {
            S::zero()
        } else {
            g.q_scalar::<S>(e) * h[v].clone()
        };
        total = total + w.clone();
        weights.push((e, v, w));
    }
    if total.is_zero() {
        return Err(Error::ZeroProbability(format!("no escape from vertex {u}")));
    }
    for (e, v, w) in weights {
        if w.is_zero() {
            continue;
        }
        let p = prob.clone() * w / total.clone();
        path.edges.push(e);
        path.vertices.push(v);
        if g.is_cemetery(v) {
            out.push((path.clone(), p));
        } else {
            on_path[v] = true;
            grow(g, path, on_path, p, out)?;
            on_path[v] = false;
        }
        path.edges.pop();
        path.vertices.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiloopHit {
    pub a: usize,
    pub b: usize,
    pub closing: f64,
    pub diameter: f64,
}

/// Index pairs `a < b` with `|χ(a) − χ(b)| ≤ r` and `diam χ[a,b] ≥ R`,
/// keeping only pairs not nested inside another hit.
pub fn scan_quasiloops(points: &[Point], r: f64, big_r: f64) -> Result<Vec<QuasiloopHit>> {
    if !(r < big_r) {
        return invalid("need r < R");
    }
    let n = points.len();
    // latest[j]: largest i < j with |χ(i) − χ(j)| ≥ R
    let mut reach = vec![-1i64; n];
    let mut running = -1i64;
    for j in 0..n {
        let latest = (0..j).rev().find(|&i| points[i].dist(points[j]) >= big_r);
        if let Some(i) = latest {
            running = running.max(i as i64);
        }
        reach[j] = running;
    }
    let mut best_b: Vec<Option<usize>> = vec![None; n];
    for a in 0..n {
        for b in (a + 1..n).rev() {
            if reach[b] < a as i64 {
                break;
            }
            if points[a].dist(points[b]) <= r {
                best_b[a] = Some(b);
                break;
            }
        }
    }
    let mut out = Vec::new();
    let mut max_b: Option<usize> = None;
    for a in 0..n {
        if let Some(b) = best_b[a] {
            if max_b.is_none_or(|m| b > m) {
                let diameter = crate::geom::diameter(&points[a..=b]);
                out.push(QuasiloopHit { a, b, closing: points[a].dist(points[b]), diameter });
                max_b = Some(b);
            }
        }
    }
    Ok(out)
}
