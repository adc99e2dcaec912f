//! Random walks on wired graphs: plain and conditioned trajectories,
//! stopping schedules, and Monte Carlo estimators for crossing, Beurling and
//! harmonic-measure bounds.

use crate::domain::{DomainSpec, Shape};
use crate::error::{invalid, Error, Result};
use crate::geom::{segment_hit, Point};
use crate::lattice::{discretize, EmbeddedGraph, WiredGraph};
use crate::linalg;
use crate::rng;
use crate::scalar::Scalar;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    /// The stop predicate fired.
    HitSet,
    /// Absorbed at the cemetery through this boundary edge.
    Exited { edge: usize },
    StepCap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkPath {
    /// Visited vertices, `vertices[0]` the start; the cemetery may close it.
    pub vertices: Vec<usize>,
    /// Edge ids, `edges[i]` joins `vertices[i]` to `vertices[i + 1]`.
    pub edges: Vec<usize>,
    pub terminal: Terminal,
}

impl WalkPath {
    pub fn trivial(start: usize) -> Self {
        Self { vertices: vec![start], edges: Vec::new(), terminal: Terminal::HitSet }
    }

    pub fn from_edges(g: &WiredGraph, start: usize, edges: Vec<usize>, terminal: Terminal) -> Result<Self> {
        let mut vertices = Vec::with_capacity(edges.len() + 1);
        vertices.push(start);
        for &e in &edges {
            if g.tail(e) != *vertices.last().unwrap() {
                return invalid(format!("edge {e} does not continue the path"));
            }
            vertices.push(g.head(e));
        }
        Ok(Self { vertices, edges, terminal })
    }

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

    /// Concatenated edge polylines.
    pub fn geometry(&self, g: &WiredGraph) -> Vec<Point> {
        let mut out = vec![g.positions[self.start()]];
        for &e in &self.edges {
            out.extend_from_slice(&g.edges[e].polyline[1..]);
        }
        out
    }

    /// Positions of the visited vertices; the cemetery maps to the crossing point.
    pub fn vertex_positions(&self, g: &WiredGraph) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.vertices.len());
        out.push(g.positions[self.start()]);
        for &e in &self.edges {
            out.push(*g.edges[e].polyline.last().unwrap());
        }
        out
    }

    /// Sub-path between step indices `a ≤ b`.
    pub fn slice(&self, a: usize, b: usize) -> WalkPath {
        let terminal = if b == self.len() { self.terminal } else { Terminal::HitSet };
        WalkPath {
            vertices: self.vertices[a..=b].to_vec(),
            edges: self.edges[a..b].to_vec(),
            terminal,
        }
    }

    /// Probability of this exact sequence of steps under the jump chain.
    pub fn probability(&self, g: &WiredGraph) -> f64 {
        self.edges.iter().map(|&e| g.prob(e)).product()
    }
}

/// Default step cap for unconditioned sampling.
pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

/// Walk from `start` until `stop(vertex, visited)` fires after a step or the
/// cemetery is reached.
pub fn run_walk<R: Rng + ?Sized>(
    g: &WiredGraph,
    start: usize,
    mut stop: impl FnMut(usize, &[usize]) -> bool,
    rng: &mut R,
    step_cap: u64,
) -> Result<WalkPath> {
    if start >= g.n_interior() {
        return invalid("walk must start at an interior vertex");
    }
    if step_cap == 0 {
        return invalid("step cap must be positive");
    }
    let mut path = WalkPath { vertices: vec![start], edges: Vec::new(), terminal: Terminal::StepCap };
    let mut v = start;
    while (path.edges.len() as u64) < step_cap {
        let e = g.step(v, rng);
        v = g.head(e);
        path.edges.push(e);
        path.vertices.push(v);
        if g.is_cemetery(v) {
            path.terminal = Terminal::Exited { edge: e };
            return Ok(path);
        }
        if stop(v, &path.vertices) {
            path.terminal = Terminal::HitSet;
            return Ok(path);
        }
    }
    Ok(path)
}

/// Run a walk to absorption without recording it; `visit(edge)` returning
/// true stops early. Returns the last edge taken, or `None` at the cap.
pub fn walk_silently<R: Rng + ?Sized>(
    g: &WiredGraph,
    start: usize,
    rng: &mut R,
    step_cap: u64,
    mut visit: impl FnMut(usize) -> bool,
) -> Option<usize> {
    let mut v = start;
    for _ in 0..step_cap {
        let e = g.step(v, rng);
        v = g.head(e);
        if g.is_cemetery(v) || visit(e) {
            return Some(e);
        }
    }
    None
}

/// Hitting times `T_0 = 0 < T_1 < …` of alternating vertex sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingSchedule {
    /// `times[0] = 0`; the last entry is the absorption index when the path
    /// was absorbed before the next set was reached.
    pub times: Vec<usize>,
    pub i_max: usize,
}

impl StoppingSchedule {
    /// Trivial schedule whose only interval is the whole path.
    pub fn whole(path: &WalkPath) -> Self {
        if path.is_empty() {
            Self { times: vec![0], i_max: 0 }
        } else {
            Self { times: vec![0, path.len()], i_max: 1 }
        }
    }

    pub fn validate(&self, path: &WalkPath) -> Result<()> {
        if self.times.first() != Some(&0) {
            return invalid("schedule must start at 0");
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("schedule times must increase strictly");
        }
        if *self.times.last().unwrap() > path.len() {
            return invalid("schedule runs past the end of the path");
        }
        if self.i_max + 1 != self.times.len() {
            return invalid("i_max does not match the number of times");
        }
        Ok(())
    }
}

/// `T_{i+1}` = first index after `T_i` at which the path is in
/// `E_{i+1} ∪ ∂`, with `E_1 = a`, `E_2 = b`, `E_3 = a`, … (masks over interior vertices).
pub fn schedule(g: &WiredGraph, path: &WalkPath, a: &[bool], b: &[bool]) -> StoppingSchedule {
    let mut times = vec![0];
    let mut i = 0;
    let mut t = 0;
    loop {
        let set = if i % 2 == 0 { a } else { b };
        let next = (t + 1..path.vertices.len()).find(|&s| {
            let v = path.vertices[s];
            g.is_cemetery(v) || set[v]
        });
        match next {
            Some(s) => {
                times.push(s);
                t = s;
                i += 1;
                if g.is_cemetery(path.vertices[s]) {
                    break;
                }
            }
            None => break,
        }
    }
    let i_max = times.len() - 1;
    StoppingSchedule { times, i_max }
}

/// As [`schedule`], for a path that ends on absorption somewhere other
/// than the cemetery (a partial tree): the end of the path closes the
/// last interval.
pub fn schedule_absorbed(g: &WiredGraph, path: &WalkPath, a: &[bool], b: &[bool]) -> StoppingSchedule {
    let mut s = schedule(g, path, a, b);
    if *s.times.last().unwrap() < path.len() {
        s.times.push(path.len());
        s.i_max += 1;
    }
    s
}

/// What a stage of a conditioning is waiting for.
#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    /// Reaching any vertex of the mask.
    Set(Vec<bool>),
    /// Absorption through this boundary edge.
    Edge(usize),
    /// Absorption through any boundary edge.
    AnyExit,
    /// Reaching the mask or absorption through any boundary edge.
    SetOrExit(Vec<bool>),
}

/// One stage: stay inside `allowed` (all vertices when `None`) until `goal`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub allowed: Option<Vec<bool>>,
    pub goal: Goal,
}

/// A tube the walk must traverse, reaching `target` before leaving `allowed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    pub allowed: Vec<bool>,
    pub target: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    ExitThrough(usize),
    /// Hit `target` before `avoid` or the cemetery; the walk stops on `target`.
    HitBefore { target: Vec<bool>, avoid: Vec<bool> },
    /// Cross the tubes in order, then satisfy `then`.
    Rectangles { tubes: Vec<Tube>, then: Box<Condition> },
    /// Explicit stage list.
    Staged(Vec<Stage>),
}

impl Condition {
    pub fn stages(&self) -> Vec<Stage> {
        match self {
            Condition::ExitThrough(e) => vec![Stage { allowed: None, goal: Goal::Edge(*e) }],
            Condition::HitBefore { target, avoid } => vec![Stage {
                allowed: Some(avoid.iter().map(|&x| !x).collect()),
                goal: Goal::Set(target.clone()),
            }],
            Condition::Rectangles { tubes, then } => {
                let mut out: Vec<Stage> = tubes
                    .iter()
                    .map(|t| Stage { allowed: Some(t.allowed.clone()), goal: Goal::Set(t.target.clone()) })
                    .collect();
                out.extend(then.stages());
                out
            }
            Condition::Staged(stages) => stages.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Running(usize),
    Success,
    Failure,
}

/// Automaton tracking the conditioning stages along a path.
#[derive(Debug, Clone)]
pub struct StageMachine {
    stages: Vec<Stage>,
}

impl StageMachine {
    pub fn new(condition: &Condition) -> Self {
        Self { stages: condition.stages() }
    }

    fn enter(&self, mut k: usize, v: usize) -> Status {
        loop {
            let st = &self.stages[k];
            if let Goal::Set(mask) | Goal::SetOrExit(mask) = &st.goal {
                if mask[v] {
                    if k + 1 == self.stages.len() {
                        return Status::Success;
                    }
                    k += 1;
                    continue;
                }
            }
            return match &st.allowed {
                Some(m) if !m[v] => Status::Failure,
                _ => Status::Running(k),
            };
        }
    }

    fn absorb(&self, k: usize, e: usize) -> Status {
        if k + 1 != self.stages.len() {
            return Status::Failure;
        }
        match self.stages[k].goal {
            Goal::Edge(x) if x == e => Status::Success,
            Goal::AnyExit | Goal::SetOrExit(_) => Status::Success,
            _ => Status::Failure,
        }
    }

    /// Whether the path satisfies the condition, and the step index at which
    /// it was decided.
    pub fn check(&self, g: &WiredGraph, path: &WalkPath) -> (bool, usize) {
        let mut st = self.enter(0, path.start());
        for (i, &e) in path.edges.iter().enumerate() {
            let k = match st {
                Status::Running(k) => k,
                Status::Success => return (true, i),
                Status::Failure => return (false, i),
            };
            let u = g.head(e);
            st = if g.is_cemetery(u) { self.absorb(k, e) } else { self.enter(k, u) };
        }
        (st == Status::Success, path.len())
    }
}

/// Doob transform of the jump chain for a staged condition.
#[derive(Debug, Clone)]
pub struct HTransform<S> {
    machine: StageMachine,
    /// `h[k][v]`: probability of success from vertex `v` at stage `k`, divided
    /// by `exp(log_scale[k])`.
    pub h: Vec<Vec<S>>,
    /// Stage normalisations, nonzero only for floating-point scalars, so long
    /// stage chains do not underflow.
    pub log_scale: Vec<f64>,
}

/// Largest stage system solved densely.
const DENSE_LIMIT: usize = 600;
/// Largest interior for which the exact method is used by default.
pub const EXACT_METHOD_LIMIT: usize = 20_000;

impl<S: Scalar> HTransform<S> {
    pub fn new(g: &WiredGraph, condition: &Condition) -> Result<Self> {
        let machine = StageMachine::new(condition);
        let n = g.n_interior();
        let kk = machine.stages.len();
        let mut h: Vec<Vec<S>> = vec![Vec::new(); kk];
        let mut log_scale = vec![0.0; kk];
        for k in (0..kk).rev() {
            let stage = &machine.stages[k];
            let mut val = vec![S::zero(); n];
            let mut unknown = vec![usize::MAX; n];
            let mut order = Vec::new();
            for v in 0..n {
                if let Goal::Set(mask) | Goal::SetOrExit(mask) = &stage.goal {
                    if mask[v] {
                        val[v] = if k + 1 == kk { S::one() } else { h[k + 1][v].clone() };
                        continue;
                    }
                }
                if stage.allowed.as_ref().is_some_and(|m| !m[v]) {
                    continue;
                }
                unknown[v] = order.len();
                order.push(v);
            }
            let last = k + 1 == kk;
            let exit_value = |e: usize| -> bool {
                last && match stage.goal {
                    Goal::Edge(x) => x == e,
                    Goal::AnyExit | Goal::SetOrExit(_) => true,
                    Goal::Set(_) => false,
                }
            };
            let m = order.len();
            if m > 0 {
                let sol = if S::is_exact() || m <= DENSE_LIMIT {
                    let mut a = vec![vec![S::zero(); m]; m];
                    let mut b = vec![S::zero(); m];
                    for (i, &v) in order.iter().enumerate() {
                        a[i][i] = S::one();
                        for &e in g.out_edges(v) {
                            let u = g.head(e);
                            let q: S = g.q_scalar(e);
                            if g.is_cemetery(u) {
                                if exit_value(e) {
                                    b[i] = b[i].clone() + q;
                                }
                            } else if unknown[u] != usize::MAX {
                                let j = unknown[u];
                                a[i][j] = a[i][j].clone() - q;
                            } else {
                                b[i] = b[i].clone() + q * val[u].clone();
                            }
                        }
                    }
                    linalg::solve(a, b)?
                } else {
                    let mut rows = Vec::with_capacity(m);
                    let mut b = vec![0.0; m];
                    for (i, &v) in order.iter().enumerate() {
                        let mut row = Vec::new();
                        for (&e, &p) in g.out_edges(v).iter().zip(g.out_probs(v)) {
                            let u = g.head(e);
                            if g.is_cemetery(u) {
                                if exit_value(e) {
                                    b[i] += p;
                                }
                            } else if unknown[u] != usize::MAX {
                                row.push((unknown[u], p));
                            } else {
                                b[i] += p * val[u].to_f64();
                            }
                        }
                        rows.push(row);
                    }
                    linalg::solve_absorbing(&rows, &b, 1e-13, 200_000)?
                        .into_iter()
                        .map(S::from_f64)
                        .collect()
                };
                for (i, &v) in order.iter().enumerate() {
                    val[v] = sol[i].clone();
                }
            }
            if k + 1 < kk && !S::is_exact() {
                log_scale[k] = log_scale[k + 1];
                let top = val.iter().map(|x| x.to_f64()).fold(0.0, f64::max);
                if top > 0.0 {
                    let c = S::from_f64(top);
                    for x in val.iter_mut() {
                        *x = x.clone() / c.clone();
                    }
                    log_scale[k] += top.ln();
                }
            }
            h[k] = val;
        }
        Ok(Self { machine, h, log_scale })
    }

    fn edge_value(&self, g: &WiredGraph, k: usize, e: usize) -> S {
        let u = g.head(e);
        if g.is_cemetery(u) {
            match self.machine.absorb(k, e) {
                Status::Success => S::one(),
                _ => S::zero(),
            }
        } else {
            self.h[k][u].clone()
        }
    }

    /// Success probability from `start`; may underflow for long stage chains.
    pub fn success_probability(&self, start: usize) -> S {
        match self.machine.enter(0, start) {
            Status::Success => S::one(),
            Status::Failure => S::zero(),
            Status::Running(k) => self.h[k][start].clone() * S::from_f64(self.log_scale[k].exp()),
        }
    }

    /// Natural log of the success probability from `start`.
    pub fn log_success_probability(&self, start: usize) -> f64 {
        match self.machine.enter(0, start) {
            Status::Success => 0.0,
            Status::Failure => f64::NEG_INFINITY,
            Status::Running(k) => self.h[k][start].to_f64().ln() + self.log_scale[k],
        }
    }

    /// Probability of a whole path under the conditioned chain.
    pub fn path_probability(&self, g: &WiredGraph, path: &WalkPath) -> S {
        let mut st = self.machine.enter(0, path.start());
        let mut p = S::one();
        for &e in &path.edges {
            let Status::Running(k) = st else { return S::zero() };
            let v = g.tail(e);
            let hv = self.h[k][v].clone();
            if hv.is_zero() {
                return S::zero();
            }
            p = p * g.q_scalar::<S>(e) * self.edge_value(g, k, e) / hv;
            let u = g.head(e);
            st = if g.is_cemetery(u) { self.machine.absorb(k, e) } else { self.machine.enter(k, u) };
        }
        if st == Status::Success {
            p
        } else {
            S::zero()
        }
    }
}

impl HTransform<f64> {
    pub fn sample<R: Rng + ?Sized>(&self, g: &WiredGraph, start: usize, rng: &mut R, step_cap: u64) -> Result<WalkPath> {
        let mut st = self.machine.enter(0, start);
        if self.log_success_probability(start) == f64::NEG_INFINITY {
            return Err(Error::ZeroProbability("conditioning event from the start vertex".into()));
        }
        let mut path = WalkPath::trivial(start);
        let mut v = start;
        let mut weights = Vec::new();
        loop {
            let k = match st {
                Status::Running(k) => k,
                Status::Success => return Ok(path),
                Status::Failure => return Err(Error::Numeric("conditioned walk left its event".into())),
            };
            if path.len() as u64 >= step_cap {
                path.terminal = Terminal::StepCap;
                return Ok(path);
            }
            weights.clear();
            let mut total = 0.0;
            for (&e, &p) in g.out_edges(v).iter().zip(g.out_probs(v)) {
                let w = p * self.edge_value(g, k, e);
                total += w;
                weights.push(w);
            }
            if !(total > 0.0) {
                return Err(Error::Numeric(format!("harmonic weight vanished at vertex {v}")));
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = weights.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            while weights[pick] == 0.0 {
                pick -= 1;
            }
            let e = g.out_edges(v)[pick];
            let to = g.head(e);
            path.edges.push(e);
            path.vertices.push(to);
            if g.is_cemetery(to) {
                path.terminal = Terminal::Exited { edge: e };
                st = self.machine.absorb(k, e);
            } else {
                path.terminal = Terminal::HitSet;
                st = self.machine.enter(k, to);
                v = to;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactHTransform,
    Rejection { max_tries: u64 },
    /// Exact when the interior has at most 20 000 vertices, rejection otherwise.
    Auto,
}

pub const DEFAULT_MAX_TRIES: u64 = 1_000_000;

/// Walk from `start` conditioned on `condition`.
pub fn conditioned_walk<R: Rng + ?Sized>(
    g: &WiredGraph,
    start: usize,
    condition: &Condition,
    method: Method,
    rng: &mut R,
) -> Result<WalkPath> {
    let method = match method {
        Method::Auto if g.n_interior() <= EXACT_METHOD_LIMIT => Method::ExactHTransform,
        Method::Auto => Method::Rejection { max_tries: DEFAULT_MAX_TRIES },
        m => m,
    };
    match method {
        Method::ExactHTransform => {
            let ht = HTransform::<f64>::new(g, condition)?;
            ht.sample(g, start, rng, DEFAULT_STEP_CAP)
        }
        Method::Rejection { max_tries } => rejection_walk(g, start, condition, max_tries, rng),
        Method::Auto => unreachable!(),
    }
}

/// Resample unconditioned walks until the condition holds.
pub fn rejection_walk<R: Rng + ?Sized>(
    g: &WiredGraph,
    start: usize,
    condition: &Condition,
    max_tries: u64,
    rng: &mut R,
) -> Result<WalkPath> {
    let machine = StageMachine::new(condition);
    let first = machine.enter(0, start);
    match first {
        Status::Success => return Ok(WalkPath::trivial(start)),
        Status::Failure => return Err(Error::ZeroProbability("start vertex violates the condition".into())),
        Status::Running(_) => {}
    }
    'tries: for _ in 0..max_tries {
        let mut st = first;
        let mut path = WalkPath::trivial(start);
        let mut v = start;
        while (path.len() as u64) < DEFAULT_STEP_CAP {
            let Status::Running(k) = st else { unreachable!() };
            let e = g.step(v, rng);
            let u = g.head(e);
            path.edges.push(e);
            path.vertices.push(u);
            if g.is_cemetery(u) {
                path.terminal = Terminal::Exited { edge: e };
                st = machine.absorb(k, e);
            } else {
                st = machine.enter(k, u);
                v = u;
            }
            match st {
                Status::Success => return Ok(path),
                Status::Failure => continue 'tries,
                Status::Running(_) => {}
            }
        }
        return Err(Error::StepCap { cap: DEFAULT_STEP_CAP });
    }
    Err(Error::BudgetExhausted { attempts: max_tries, context: "rejection sampling of a conditioned walk".into() })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub parameters: serde_json::Value,
    pub fitted_exponent: Option<f64>,
    /// Set when `n_samples` is too small for the stderr to mean much.
    pub low_n: bool,
}

impl EstimateReport {
    pub fn from_counts(successes: u64, n: u64, parameters: serde_json::Value) -> Self {
        let p = successes as f64 / n as f64;
        let stderr = if n > 1 { (p * (1.0 - p) / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { estimate: p, stderr, n_samples: n, parameters, fitted_exponent: None, low_n: n < 30 }
    }
}

/// Number of independent chunks a batch estimator is split into; fixed so
/// results do not depend on the thread count.
pub const CHUNKS: u64 = 64;

/// Count successes of `trial` over `n` runs spread across fixed chunks.
pub fn parallel_count<F>(n: u64, seed: u64, trial: F) -> Result<u64>
where
    F: Fn(&mut rng::Stream) -> Result<bool> + Sync,
{
    (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let k = n / CHUNKS + u64::from(c < n % CHUNKS);
            let mut r = rng::stream(seed, c);
            let mut hits = 0;
            for _ in 0..k {
                if trial(&mut r)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectanglePlacement {
    /// Lower-left corner of the rectangle.
    pub z: Point,
    pub eps: f64,
    pub vertical: bool,
}

impl RectanglePlacement {
    /// Rectangle, starting ball and target ball (center, radius).
    pub fn geometry(&self) -> (Shape, (Point, f64), (Point, f64)) {
        let e = self.eps;
        let (w, h) = if self.vertical { (1.0, 3.0) } else { (3.0, 1.0) };
        let rect = Shape::rectangle(self.z, self.z + Point::new(w * e, h * e));
        let start = self.z + Point::new(0.5 * e, 0.5 * e);
        let target = if self.vertical {
            self.z + Point::new(0.5 * e, 2.5 * e)
        } else {
            self.z + Point::new(2.5 * e, 0.5 * e)
        };
        (rect, (start, 0.25 * e), (target, 0.25 * e))
    }
}

fn vertices_in_ball(g: &WiredGraph, c: Point, r: f64) -> Vec<usize> {
    (0..g.n_interior()).filter(|&v| g.positions[v].dist(c) < r).collect()
}

/// Frequency of hitting the target ball before leaving the rectangle, from
/// uniformly chosen starting-ball vertices.
pub fn estimate_crossing(lattice: &EmbeddedGraph, placement: RectanglePlacement, n: u64, seed: u64) -> Result<EstimateReport> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    let (rect, (sc, sr), (tc, tr)) = placement.geometry();
    let g = discretize(lattice, &DomainSpec::new(rect))?;
    let starts = vertices_in_ball(&g, sc, sr);
    if starts.is_empty() {
        return invalid("no vertex in the starting ball");
    }
    let target: Vec<bool> = g.positions.iter().map(|p| p.dist(tc) < tr).collect();
    let hits = parallel_count(n, seed, |r| {
        let s = starts[r.random_range(0..starts.len())];
        let mut hit = false;
        walk_silently(&g, s, r, DEFAULT_STEP_CAP, |e| {
            let u = g.head(e);
            hit = target[u];
            hit
        });
        Ok(hit)
    })?;
    let params = serde_json::json!({
        "z": [placement.z.x, placement.z.y],
        "eps": placement.eps,
        "vertical": placement.vertical,
        "mesh": lattice.mesh,
    });
    if lattice.mesh > placement.eps / 8.0 {
        eprintln!("warning: mesh {} is coarse relative to eps {}", lattice.mesh, placement.eps);
    }
    Ok(EstimateReport::from_counts(hits, n, params))
}

/// Escape probability from `B(v, R)` avoiding the obstacle polylines.
///
/// The obstacle must come within distance `r` of `v`.
pub fn estimate_beurling(
    lattice: &EmbeddedGraph,
    v: Point,
    r: f64,
    big_r: f64,
    obstacle: &[Vec<Point>],
    n: u64,
    seed: u64,
) -> Result<EstimateReport> {
    if !(r > 0.0 && big_r >= 2.0 * r) {
        return invalid("need 0 < r and R ≥ 2r");
    }
    let segments: Vec<(Point, Point)> = obstacle
        .iter()
        .flat_map(|l| l.windows(2).map(|w| (w[0], w[1])))
        .collect();
    let reaches = obstacle
        .iter()
        .any(|l| crate::geom::point_polyline_dist(v, l) <= r + 1e-12);
    if segments.is_empty() || !reaches {
        return invalid("obstacle does not reach the inner circle");
    }
    let g = discretize(lattice, &DomainSpec::new(Shape::disc(v, big_r)))?;
    let start = g.nearest_vertex(v);
    let mut blocked_at_start = false;
    for &(a, b) in &segments {
        if crate::geom::point_segment_dist(g.positions[start], a, b) < 1e-12 {
            blocked_at_start = true;
        }
    }
    // an edge is blocked when its polyline meets the obstacle
    let blocked: Vec<bool> = g
        .edges
        .iter()
        .map(|e| {
            e.polyline.windows(2).any(|w| segments.iter().any(|&(a, b)| segment_hit(w[0], w[1], a, b).is_some()))
        })
        .collect();
    let escapes = parallel_count(n, seed, |rr| {
        if blocked_at_start {
            return Ok(false);
        }
        let mut hit_obstacle = false;
        let last = walk_silently(&g, start, rr, DEFAULT_STEP_CAP, |e| {
            hit_obstacle = blocked[e];
            hit_obstacle
        });
        let Some(last) = last else {
            return Err(Error::StepCap { cap: DEFAULT_STEP_CAP });
        };
        Ok(!hit_obstacle && !blocked[last])
    })?;
    let params = serde_json::json!({
        "center": [v.x, v.y],
        "r": r,
        "R": big_r,
        "mesh": lattice.mesh,
    });
    Ok(EstimateReport::from_counts(escapes, n, params))
}

/// Least-squares slope of `log estimate` against `log(r/R)`.
pub fn fit_exponent(reports: &[EstimateReport]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.estimate > 0.0)
        .filter_map(|r| {
            let a = r.parameters.get("r")?.as_f64()?;
            let b = r.parameters.get("R")?.as_f64()?;
            Some(((a / b).ln(), r.estimate.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Frequency of exiting the domain through a boundary crossing in `B(w, r)`.
pub fn estimate_harmonic_measure(
    g: &WiredGraph,
    start: usize,
    w: Point,
    r: f64,
    big_r: f64,
    n: u64,
    seed: u64,
) -> Result<EstimateReport> {
    if !(r < big_r) {
        return invalid("need r < R");
    }
    if g.positions[start].dist(w) <= big_r {
        return invalid("start must be farther than R from the boundary point");
    }
    let hits = parallel_count(n, seed, |rr| {
        let last = walk_silently(g, start, rr, DEFAULT_STEP_CAP, |_| false)
            .ok_or(Error::StepCap { cap: DEFAULT_STEP_CAP })?;
        let b = g.edges[last].boundary.as_ref().expect("absorbed through a boundary edge");
        Ok(b.crossing.dist(w) < r)
    })?;
    let params = serde_json::json!({
        "start": [g.positions[start].x, g.positions[start].y],
        "w": [w.x, w.y],
        "r": r,
        "R": big_r,
        "mesh": g.mesh,
    });
    Ok(EstimateReport::from_counts(hits, n, params))
}

/// Exact exit law from `start` through each boundary edge.
pub fn exit_distribution<S: Scalar>(g: &WiredGraph, start: usize) -> Result<Vec<(usize, S)>> {
    g.boundary_edges
        .iter()
        .map(|&e| {
            let ht = HTransform::<S>::new(g, &Condition::ExitThrough(e))?;
            Ok((e, ht.success_probability(start)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::two_vertex_graph;
    use crate::Exact;

    #[test]
    fn schedule_alternates() {
        let g = crate::lattice::wired_grid(3).unwrap();
        // vertices 0..9 in a 3×3 block; A = {0}, B = {8}
        let mut a = vec![false; 9];
        let mut b = vec![false; 9];
        a[0] = true;
        b[8] = true;
        let seq = [4, 3, 0, 1, 2, 5, 8, 7];
        let mut edges = Vec::new();
        for w in seq.windows(2) {
            edges.push(g.edge_between(w[0], w[1]).unwrap());
        }
        let p = WalkPath::from_edges(&g, 4, edges, Terminal::HitSet).unwrap();
        let s = schedule(&g, &p, &a, &b);
        assert_eq!(s.times, vec![0, 2, 6]);
        assert_eq!(s.i_max, 2);
    }

    #[test]
    fn conditioned_step_on_two_vertex_graph() {
        let g = two_vertex_graph();
        let via2 = g.boundary_edges.iter().copied().find(|&e| g.tail(e) == 1).unwrap();
        let ht = HTransform::<Exact>::new(&g, &Condition::ExitThrough(via2)).unwrap();
        assert_eq!(ht.success_probability(0), Exact::from_ratio(1, 3));
        assert_eq!(ht.success_probability(1), Exact::from_ratio(2, 3));
        let e12 = g.edge_between(0, 1).unwrap();
        let p = ht.h[0][1].clone() * Exact::from_ratio(1, 2) / ht.h[0][0].clone();
        assert_eq!(p, Exact::from_ratio(1, 1));
        let _ = e12;
    }

    #[test]
    fn step_cap_reported() {
        let g = two_vertex_graph();
        let mut r = rng::stream(1, 0);
        let p = run_walk(&g, 0, |_, _| false, &mut r, 1).unwrap();
        assert!(p.len() == 1);
    }

    #[test]
    fn impossible_rejection_fails() {
        let g = two_vertex_graph();
        let mut avoid = vec![true, true];
        avoid[0] = false;
        let cond = Condition::HitBefore { target: vec![false, false], avoid };
        let mut r = rng::stream(1, 0);
        let err = rejection_walk(&g, 0, &cond, 50, &mut r).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { attempts: 50, .. }));
    }
}
