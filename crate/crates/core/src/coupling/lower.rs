use super::{
    branch_winding, distance_to, mask, resample, steps_inside, trees_agree, tubes_along, CouplingReport,
    CouplingSetup, RunRecord,
};
use crate::erasure::{forward_le, mixed_le, reversal_map, scan_quasiloops, SimplePath};
use crate::error::{Error, Result};
use crate::geom::{diameter, discrete_frechet, Point};
use crate::lattice::WiredGraph;
use crate::loopsoup::{attach_loops, enumerate_loops, enumerate_loops_filtered, sample_from_loops, LoopFilter, LoopSoup};
use crate::rng::stream;
use crate::ust::PartialTree;
use crate::walk::{
    run_walk, schedule_absorbed, Condition, Goal, HTransform, Stage, StoppingSchedule, Terminal, WalkPath,
    DEFAULT_STEP_CAP,
};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Which goodness condition a branch failed first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodFailure {
    /// It has an `(ε², ε)`-quasiloop.
    Quasiloop,
    /// More than `1/ε` crossings between `U₂` and the outside of `U₃`.
    TooManyCrossings,
    /// After coming within `ε²` of `U₂` it strays more than `ε` before entering.
    Approach,
}

fn interior_points(g: &WiredGraph, vertices: &[usize]) -> Vec<Point> {
    vertices.iter().filter(|&&v| !g.is_cemetery(v)).map(|&v| g.positions[v]).collect()
}

/// Alternating schedule with `T₁` the exit of `U₃` and `T₂` the entrance to `U₂`.
fn crossing_schedule(g: &WiredGraph, path: &WalkPath, setup: &CouplingSetup) -> StoppingSchedule {
    let out3: Vec<bool> = mask(g, &setup.cfg.u3).iter().map(|x| !x).collect();
    let in2 = mask(g, &setup.cfg.u2);
    schedule_absorbed(g, path, &out3, &in2)
}

/// First failing goodness condition of `y` (a branch in `D₂`), or `None`
/// when it is `ε`-good.
pub fn epsilon_good(setup: &CouplingSetup, y: &SimplePath) -> Result<Option<GoodFailure>> {
    let g = &setup.g2;
    let eps = setup.cfg.epsilon;
    let pts = interior_points(g, &y.vertices);
    if !scan_quasiloops(&pts, eps * eps, eps)?.is_empty() {
        return Ok(Some(GoodFailure::Quasiloop));
    }
    let walk = y.to_walk(g);
    let s = crossing_schedule(g, &walk, setup);
    let t_max = walk.len();
    let i_max = s.times.iter().filter(|&&t| t < t_max).count() - 1;
    if i_max as f64 > 1.0 / eps {
        return Ok(Some(GoodFailure::TooManyCrossings));
    }
    for i in (2..s.times.len()).step_by(2) {
        let (t_odd, t_even) = (s.times[i - 1], s.times[i]);
        if t_even >= t_max {
            break;
        }
        let pos = |t: usize| g.positions[walk.vertices[t]];
        let Some(t_near) = (t_odd..=t_even).find(|&t| distance_to(&setup.cfg.u2, pos(t)) <= eps * eps) else {
            continue;
        };
        if (t_near..=t_even).any(|t| pos(t).dist(pos(t_near)) > eps) {
            return Ok(Some(GoodFailure::Approach));
        }
    }
    Ok(None)
}

/// The `D₂` side of one branch: `Y₂`, the walk built from it and a capped
/// soup, and its image under the reversal bijection.
#[derive(Debug, Clone, PartialEq)]
pub struct X2Tilde {
    pub y2: SimplePath,
    pub x: WalkPath,
    pub x2_tilde: WalkPath,
    pub schedule: StoppingSchedule,
    /// Discrete Fréchet distance between `X̃₂` and `Y₂`.
    pub walk_distance: f64,
    pub loops: usize,
    /// Soup draws discarded because the reversed walk strayed more than `r`
    /// from `Y₂`.
    pub soup_rejections: u64,
}

/// Sample `Y₂` from `start2` against the partial tree, hang loops of
/// diameter at most `r` on it and apply the reversal bijection. Loops hung
/// at a common vertex can be re-rooted together by the bijection, so soups
/// are redrawn until `X̃₂` stays within `r` of `Y₂`.
pub fn build_x2_tilde<R: Rng + ?Sized>(
    setup: &CouplingSetup,
    tree2: &PartialTree,
    start2: usize,
    rng: &mut R,
) -> Result<X2Tilde> {
    let g = &setup.g2;
    let first = run_walk(g, start2, |v, _| tree2.contains(g, v), rng, DEFAULT_STEP_CAP)?;
    if first.terminal == Terminal::StepCap {
        return Err(Error::StepCap { cap: DEFAULT_STEP_CAP });
    }
    let y2 = forward_le(&first);
    let n = g.n_interior();
    let region: Vec<bool> = (0..n).map(|v| !tree2.contains(g, v)).collect();
    let mut touching = vec![false; n];
    for &v in &y2.vertices {
        if !g.is_cemetery(v) {
            touching[v] = true;
        }
    }
    let filter = LoopFilter { touching: Some(touching), diameter_cap: Some(setup.cfg.r) };
    let loops = enumerate_loops_filtered(g, &region, setup.cfg.loop_l_max, &filter)?;
    let y_points = interior_points(g, &y2.vertices);
    for tries in 0..setup.cfg.max_tries {
        let picks = sample_from_loops(&loops, rng);
        let soup = LoopSoup {
            loops: picks.into_iter().map(|(i, m)| (loops[i].clone(), m)).collect(),
            ..LoopSoup::empty(setup.cfg.loop_l_max)
        };
        let x = attach_loops(g, &y2, &soup, rng)?;
        let schedule = crossing_schedule(g, &x, setup);
        let x2_tilde = reversal_map(g, &x, &schedule)?;
        let schedule = crossing_schedule(g, &x2_tilde, setup);
        if mixed_le(&x2_tilde, &schedule)? != y2 {
            return Err(Error::Numeric("mixed erasure of the reversed walk differs from Y₂".into()));
        }
        let walk_distance = discrete_frechet(&interior_points(g, &x2_tilde.vertices), &y_points);
        if walk_distance <= setup.cfg.r + 1e-12 {
            let count = soup.count();
            return Ok(X2Tilde { y2, x, x2_tilde, schedule, walk_distance, loops: count, soup_rejections: tries });
        }
    }
    Err(Error::BudgetExhausted { attempts: setup.cfg.max_tries, context: "soup keeping X̃₂ within r of Y₂".into() })
}

/// The `D₁` walk built from an [`X2Tilde`].
#[derive(Debug, Clone, PartialEq)]
pub struct X1Outcome {
    pub walk: WalkPath,
    /// Drawn independently because `Y₂` was not good or a segment failed.
    pub independent: bool,
    /// A conditioned segment had probability zero or ran out of budget.
    pub aborted: bool,
    pub rejections: u64,
}

struct Builder<'a> {
    g: &'a WiredGraph,
    tree1: &'a PartialTree,
    edges: Vec<usize>,
    cur: usize,
}

impl Builder<'_> {
    fn done(&self) -> bool {
        self.tree1.contains(self.g, self.cur)
    }

    fn push(&mut self, e: usize) {
        self.edges.push(e);
        self.cur = self.g.head(e);
    }
}

/// Walk from `from` through tubes along `curve`, then freely until
/// `decide` returns a verdict; resampled until the verdict is positive.
#[allow(clippy::too_many_arguments)]
fn follow<R: Rng + ?Sized>(
    g: &WiredGraph,
    from: usize,
    curve: &[Point],
    w: f64,
    forbid: &[bool],
    decide: &dyn Fn(usize) -> Option<bool>,
    max_tries: u64,
    rng: &mut R,
) -> Result<Option<(Vec<usize>, u64)>> {
    let nodes = resample(curve, 2.0 * w);
    let h = if nodes.len() >= 2 {
        let stages: Vec<Stage> = tubes_along(g, &nodes, w, forbid)
            .into_iter()
            .map(|t| Stage { allowed: Some(t.allowed), goal: Goal::Set(t.target) })
            .collect();
        let h = HTransform::<f64>::new(g, &Condition::Staged(stages))?;
        if h.log_success_probability(from) == f64::NEG_INFINITY {
            return Ok(None);
        }
        Some(h)
    } else {
        None
    };
    for tries in 0..max_tries {
        let mut edges = match &h {
            Some(h) => {
                let p = h.sample(g, from, rng, DEFAULT_STEP_CAP)?;
                if p.terminal == Terminal::StepCap {
                    continue;
                }
                p.edges
            }
            None => Vec::new(),
        };
        let mut v = edges.last().map_or(from, |&e| g.head(e));
        let verdict = loop {
            if let Some(b) = decide(v) {
                break b;
            }
            if edges.len() as u64 >= DEFAULT_STEP_CAP {
                break false;
            }
            let e = g.step(v, rng);
            edges.push(e);
            v = g.head(e);
        };
        if verdict {
            return Ok(Some((edges, tries)));
        }
    }
    Ok(None)
}

/// Build `X̃₁` from `X̃₂`: segments inside `U₃` are copied; each crossing
/// from `∂U₃` back to `U₂` is redrawn in `D₁ ∖ tree1` through tubes along
/// its image under `φ`, conditioned to enter `U₂` at the same vertex; the
/// last crossing follows its image and ends on `tree1` or `∂D₁`. The walk
/// stops as soon as it meets `tree1`.
pub fn build_x1_tilde<R: Rng + ?Sized>(
    setup: &CouplingSetup,
    x2: &X2Tilde,
    tree1: &PartialTree,
    good: bool,
    rng: &mut R,
) -> Result<X1Outcome> {
    let (g1, g2) = (&setup.g1, &setup.g2);
    let path2 = &x2.x2_tilde;
    let start1 = setup.to1[path2.start()].ok_or_else(|| Error::InvalidInput("start is not in D₁".into()))?;
    let independent = |aborted: bool, rejections: u64, rng: &mut R| -> Result<X1Outcome> {
        let walk = run_walk(g1, start1, |v, _| tree1.contains(g1, v), rng, DEFAULT_STEP_CAP)?;
        Ok(X1Outcome { walk, independent: true, aborted, rejections })
    };
    if !good {
        return independent(false, 0, rng);
    }
    let in2v = mask(g1, &setup.cfg.u2);
    let in2 = &in2v;
    let forbid: Vec<bool> = (0..g1.n_interior()).map(|v| in2[v] || tree1.contains(g1, v)).collect();
    let w = setup.cfg.tube_width();
    let t = &x2.schedule.times;
    let mut b = Builder { g: g1, tree1, edges: Vec::new(), cur: start1 };
    let mut rejections = 0;
    for k in 0..t.len() - 1 {
        if b.done() {
            break;
        }
        let (ta, tb) = (t[k], t[k + 1]);
        if k % 2 == 0 {
            for &e2 in &path2.edges[ta..tb] {
                let e1 = setup.edge_in_d1(e2).ok_or_else(|| Error::Numeric("copied step leaves D₁".into()))?;
                b.push(e1);
                if b.done() {
                    break;
                }
            }
            continue;
        }
        let curve: Vec<Point> =
            interior_points(g2, &path2.vertices[ta..=tb]).into_iter().map(|p| setup.phi.apply(p)).collect();
        let end2 = path2.vertices[tb];
        let target = (!g2.is_cemetery(end2)).then(|| setup.to1[end2]).flatten().filter(|&v| in2[v]);
        let hit_target = target.is_some() && (k + 2 < t.len() || tb < path2.len());
        let decide: Box<dyn Fn(usize) -> Option<bool>> = match target {
            Some(target) if hit_target => Box::new(move |v: usize| {
                if v == target {
                    Some(true)
                } else if g1.is_cemetery(v) || in2[v] || tree1.contains(g1, v) {
                    Some(false)
                } else {
                    None
                }
            }),
            _ => Box::new(move |v: usize| {
                    if tree1.contains(g1, v) {
                        Some(true)
                    } else if in2[v] {
                        Some(false)
                    } else {
                        None
                    }
                }),
        };
        match follow(g1, b.cur, &curve, w, &forbid, decide.as_ref(), setup.cfg.max_tries, rng)? {
            Some((edges, tries)) => {
                rejections += tries;
                for e in edges {
                    b.push(e);
                }
            }
            None => return independent(true, rejections, rng),
        }
    }
    if !b.done() {
        let rest = run_walk(g1, b.cur, |v, _| tree1.contains(g1, v), rng, DEFAULT_STEP_CAP)?;
        b.edges.extend_from_slice(&rest.edges);
    }
    let terminal = match b.edges.last() {
        Some(&e) if g1.is_cemetery(g1.head(e)) => Terminal::Exited { edge: e },
        _ => Terminal::HitSet,
    };
    let walk = WalkPath::from_edges(g1, start1, b.edges, terminal)?;
    Ok(X1Outcome { walk, independent: false, aborted: false, rejections })
}

/// Partial trees grown branch by branch in both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerState {
    pub tree1: PartialTree,
    pub tree2: PartialTree,
}

impl LowerState {
    pub fn new(setup: &CouplingSetup) -> Self {
        Self { tree1: PartialTree::new(&setup.g1), tree2: PartialTree::new(&setup.g2) }
    }
}

/// Per-branch measurements of [`couple_branch`].
#[derive(Debug, Clone, PartialEq)]
struct BranchRecord {
    agree_u1: bool,
    good: Option<GoodFailure>,
    walk_distance: f64,
    follow_distance: f64,
    curve_distance: f64,
    winding_agree: Option<bool>,
    aborted: bool,
    rejections: u64,
    soup_rejections: u64,
}

fn couple_branch<R: Rng + ?Sized>(
    setup: &CouplingSetup,
    state: &mut LowerState,
    start1: usize,
    rng: &mut R,
) -> Result<Option<BranchRecord>> {
    let (g1, g2) = (&setup.g1, &setup.g2);
    let start2 = setup.to2[start1];
    let (in1, in2) = (state.tree1.contains(g1, start1), state.tree2.contains(g2, start2));
    if in1 && in2 {
        return Ok(None);
    }
    let x2 = if in2 { None } else { Some(build_x2_tilde(setup, &state.tree2, start2, rng)?) };
    let failing = match &x2 {
        Some(x2) => epsilon_good(setup, &x2.y2)?,
        None => None,
    };
    let x1 = match (&x2, in1) {
        (_, true) => None,
        (Some(x2), false) => Some(build_x1_tilde(setup, x2, &state.tree1, failing.is_none(), rng)?),
        (None, false) => {
            let walk = run_walk(g1, start1, |v, _| state.tree1.contains(g1, v), rng, DEFAULT_STEP_CAP)?;
            Some(X1Outcome { walk, independent: true, aborted: false, rejections: 0 })
        }
    };
    let y1 = match &x1 {
        Some(x1) => {
            let s = crossing_schedule(g1, &x1.walk, setup);
            Some(mixed_le(&x1.walk, &s)?)
        }
        None => None,
    };
    let phi_points = |pts: Vec<Point>| -> Vec<Point> { pts.into_iter().map(|p| setup.phi.apply(p)).collect() };
    let rec = match (&x2, &x1, &y1) {
        (Some(x2), Some(x1), Some(y1)) => {
            let agree_u1 = steps_inside(g1, y1, &setup.cfg.u1) == steps_inside(g2, &x2.y2, &setup.cfg.u1);
            let follow_distance = discrete_frechet(
                &interior_points(g1, &x1.walk.vertices),
                &phi_points(interior_points(g2, &x2.x2_tilde.vertices)),
            );
            let curve_distance =
                discrete_frechet(&interior_points(g1, &y1.vertices), &phi_points(interior_points(g2, &x2.y2.vertices)));
            let winding_agree = if g1.is_cemetery(y1.end()) && g2.is_cemetery(x2.y2.end()) {
                let w1 = branch_winding(g1, y1, &setup.cfg.d1)?;
                let w2 = branch_winding(g2, &x2.y2, &setup.cfg.d2)?;
                Some(((w1 - w2) / TAU).round() as i32 == setup.cfg.twist)
            } else {
                None
            };
            BranchRecord {
                agree_u1: agree_u1 && !x1.aborted,
                good: failing,
                walk_distance: x2.walk_distance,
                follow_distance,
                curve_distance,
                winding_agree,
                aborted: x1.aborted,
                rejections: x1.rejections,
                soup_rejections: x2.soup_rejections,
            }
        }
        _ => BranchRecord {
            agree_u1: false,
            good: failing,
            walk_distance: x2.as_ref().map_or(0.0, |x| x.walk_distance),
            follow_distance: f64::INFINITY,
            curve_distance: f64::INFINITY,
            winding_agree: None,
            aborted: false,
            rejections: 0,
            soup_rejections: x2.as_ref().map_or(0, |x| x.soup_rejections),
        },
    };
    if let Some(x2) = &x2 {
        state.tree2.add_branch(g2, &x2.y2)?;
    }
    if let Some(y1) = &y1 {
        state.tree1.add_branch(g1, y1)?;
    }
    Ok(Some(rec))
}

/// Mass of the loops of length at most `l_max` in `D₂` whose diameter
/// exceeds `cap`; its exponential is the importance weight of the capped soup.
pub fn capped_loop_mass(g: &WiredGraph, l_max: usize, cap: f64) -> Result<f64> {
    let region = vec![true; g.n_interior()];
    let loops = enumerate_loops(g, &region, l_max)?;
    Ok(loops
        .iter()
        .filter(|l| {
            let pts: Vec<Point> = l.vertices.iter().map(|&v| g.positions[v]).collect();
            diameter(&pts) > cap + 1e-12
        })
        .map(|l| l.mass)
        .sum())
}

/// Couple the branches from `starts` (`D₁` indices) one after another in the
/// slit domains, recording per run whether the two trees agree on `U₁`.
pub fn lower_coupling_experiment(
    setup: &CouplingSetup,
    starts: &[usize],
    n_runs: usize,
    seed: u64,
) -> Result<CouplingReport> {
    setup.cfg.validate_lower()?;
    if starts.is_empty() {
        return Err(Error::InvalidInput("need at least one start".into()));
    }
    let u_mask = mask(&setup.g1, &setup.cfg.u);
    let runs: Result<Vec<RunRecord>> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut state = LowerState::new(setup);
            let mut rec = RunRecord::new(i);
            let mut agree = true;
            let mut good = true;
            let (mut walk_d, mut follow_d, mut curve_d) = (0.0f64, 0.0f64, 0.0f64);
            for &s in starts {
                let Some(b) = couple_branch(setup, &mut state, s, &mut rng)? else { continue };
                agree &= b.agree_u1;
                if let Some(f) = b.good {
                    good = false;
                    rec.failing.get_or_insert(f);
                }
                walk_d = walk_d.max(b.walk_distance);
                follow_d = follow_d.max(b.follow_distance);
                curve_d = curve_d.max(b.curve_distance);
                if rec.winding_agree.is_none() {
                    rec.winding_agree = b.winding_agree;
                }
                rec.segment_failures += b.aborted as u64;
                rec.rejections += b.rejections;
                rec.soup_rejections += b.soup_rejections;
            }
            rec.agree_u1 = Some(agree);
            rec.agree_u = trees_agree(setup, &state.tree1, &state.tree2, &u_mask);
            rec.good = Some(good);
            rec.walk_distance = Some(walk_d);
            rec.follow_distance = follow_d.is_finite().then_some(follow_d);
            rec.curve_distance = curve_d.is_finite().then_some(curve_d);
            Ok(rec)
        })
        .collect();
    let params = serde_json::json!({
        "r": setup.cfg.r,
        "epsilon": setup.cfg.epsilon,
        "tube_half_width": setup.cfg.tube_width(),
        "loop_l_max": setup.cfg.loop_l_max,
        "mesh": setup.cfg.mesh,
        "twist": setup.cfg.twist,
        "starts": starts,
        "n_runs": n_runs,
        "seed": seed,
    });
    let mut report = CouplingReport::from_runs(runs?, params);
    report.log_importance_weight = Some(capped_loop_mass(&setup.g2, setup.cfg.loop_l_max, setup.cfg.r)?);
    Ok(report)
}
