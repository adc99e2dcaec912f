use super::{mask, resample, trees_agree, tubes_along, CouplingReport, CouplingSetup, RunRecord};
use crate::erasure::{forward_le, SimplePath};
use crate::error::{invalid, Error, Result};
use crate::geom::{densify, frechet_prefix_profile, Point};
use crate::rng::stream;
use crate::ust::PartialTree;
use crate::walk::{run_walk, Condition, Goal, HTransform, Stage, Terminal, WalkPath, DEFAULT_STEP_CAP};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How the boundary-following branch is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErMethod {
    /// Loop-erased walks from the start, kept when they satisfy the event.
    Rejection,
    /// Walks conditioned to run through tubes around `∂D₁` and then leave
    /// `D₂` without re-entering `D₁`; their erasures are kept when they
    /// satisfy the event.
    #[default]
    Guided,
}

/// Sampler of the branch from `x₀` that follows `∂D₁` within `r` and then
/// reaches `∂D₂` outside `D₁`.
#[derive(Debug, Clone)]
pub struct ErSampler {
    /// Start vertex in `D₂`.
    pub start: usize,
    pub r: f64,
    pub method: ErMethod,
    pub max_tries: u64,
    guided: Option<HTransform<f64>>,
    boundary: Vec<Point>,
    inside_d1: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErOutcome {
    pub branch: SimplePath,
    pub tries: u64,
    pub acceptance_rate: f64,
    /// Smallest Fréchet distance between an admissible prefix and `∂D₁`.
    pub frechet: f64,
}

impl ErSampler {
    pub fn new(setup: &CouplingSetup, r: f64, method: ErMethod) -> Result<Self> {
        let g = &setup.g2;
        let d1 = &setup.cfg.d1;
        let trace = d1.boundary_trace();
        let p0 = trace[0];
        let inside_d1 = mask(g, d1);
        let start = (0..g.n_interior())
            .filter(|&v| inside_d1[v])
            .min_by(|&a, &b| g.positions[a].dist(p0).total_cmp(&g.positions[b].dist(p0)))
            .ok_or_else(|| Error::InvalidInput("D₁ has no vertex".into()))?;
        if g.positions[start].dist(p0) >= r {
            return invalid("no vertex of D₁ within r of the start of ∂D₁; refine the mesh");
        }
        let guided = match method {
            ErMethod::Rejection => None,
            ErMethod::Guided => {
                let w = (r / 2.0).max(1.01 * g.mesh);
                let nodes = resample(&trace, 2.0 * w);
                let n = g.n_interior();
                let near0: Vec<bool> = (0..n).map(|v| g.positions[v].dist(p0) <= 2.0 * w).collect();
                let none = vec![false; n];
                let first_forbid: Vec<bool> = (0..n).map(|v| near0[v] && !inside_d1[v]).collect();
                let last_forbid: Vec<bool> = (0..n).map(|v| near0[v] && inside_d1[v]).collect();
                let k = nodes.len() - 1;
                let mut stages = Vec::with_capacity(k + 1);
                for (i, seg) in nodes.windows(2).enumerate() {
                    let forbid = if i == 0 {
                        &first_forbid
                    } else if i + 1 == k {
                        &last_forbid
                    } else {
                        &none
                    };
                    let mut tube = tubes_along(g, seg, w, forbid).pop().unwrap();
                    if i + 1 == k {
                        for v in 0..n {
                            tube.target[v] &= !inside_d1[v];
                        }
                    }
                    stages.push(Stage { allowed: Some(tube.allowed), goal: Goal::Set(tube.target) });
                }
                let outside: Vec<bool> = inside_d1.iter().map(|x| !x).collect();
                stages.push(Stage { allowed: Some(outside), goal: Goal::AnyExit });
                let h = HTransform::new(g, &Condition::Staged(stages))?;
                if h.log_success_probability(start) == f64::NEG_INFINITY {
                    return Err(Error::ZeroProbability("tubes around ∂D₁ cannot be followed at this mesh".into()));
                }
                Some(h)
            }
        };
        Ok(Self {
            start,
            r,
            method,
            max_tries: setup.cfg.max_tries,
            guided,
            boundary: densify(&trace, g.mesh / 4.0),
            inside_d1,
        })
    }

    /// Whether the branch satisfies the event, with the best Fréchet distance
    /// over admissible split times.
    pub fn check(&self, setup: &CouplingSetup, y: &SimplePath) -> (bool, f64) {
        let g = &setup.g2;
        if y.start() != self.start || !g.is_cemetery(y.end()) {
            return (false, f64::INFINITY);
        }
        let interior = &y.vertices[..y.vertices.len() - 1];
        let mut t_min = interior.len();
        while t_min > 0 && !self.inside_d1[interior[t_min - 1]] {
            t_min -= 1;
        }
        let mut pts: Vec<Point> = interior.iter().map(|&v| g.positions[v]).collect();
        pts.push(*g.edges[*y.edges.last().unwrap()].polyline.last().unwrap());
        let step = g.mesh / 4.0;
        let mut dense = Vec::new();
        let mut at = Vec::with_capacity(pts.len());
        for w in pts.windows(2) {
            at.push(dense.len());
            let seg = densify(w, step);
            dense.extend_from_slice(&seg[..seg.len() - 1]);
        }
        at.push(dense.len());
        dense.push(*pts.last().unwrap());
        let profile = frechet_prefix_profile(&dense, &self.boundary);
        let best = (t_min..pts.len()).map(|t| profile[at[t]]).fold(f64::INFINITY, f64::min);
        (best <= self.r, best)
    }

    pub fn sample<R: Rng + ?Sized>(&self, setup: &CouplingSetup, rng: &mut R) -> Result<ErOutcome> {
        let g = &setup.g2;
        for tries in 1..=self.max_tries {
            let walk = match &self.guided {
                Some(h) => h.sample(g, self.start, rng, DEFAULT_STEP_CAP)?,
                None => run_walk(g, self.start, |_, _| false, rng, DEFAULT_STEP_CAP)?,
            };
            if walk.terminal == Terminal::StepCap {
                continue;
            }
            let y = forward_le(&walk);
            let (ok, frechet) = self.check(setup, &y);
            if ok {
                return Ok(ErOutcome { branch: y, tries, acceptance_rate: 1.0 / tries as f64, frechet });
            }
        }
        Err(Error::BudgetExhausted { attempts: self.max_tries, context: "boundary-following branch".into() })
    }
}

/// Per-start counts from [`shared_wilson`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedReport {
    pub steps: u64,
    pub branches: usize,
}

/// Grow both partial trees from the same walks: each walk runs in `D₂`
/// until it has hit the `D₂` tree and, seen in `D₁`, hit the `D₁` tree or
/// left `D₁`. Starts are `D₁` indices.
pub fn shared_wilson<R: Rng + ?Sized>(
    setup: &CouplingSetup,
    tree1: &mut PartialTree,
    tree2: &mut PartialTree,
    starts: &[usize],
    rng: &mut R,
) -> Result<SharedReport> {
    let (g1, g2) = (&setup.g1, &setup.g2);
    let mut report = SharedReport::default();
    for &s1 in starts {
        let s2 = *setup.to2.get(s1).ok_or_else(|| Error::InvalidInput(format!("start {s1} is not in D₁")))?;
        let in1 = |v2: usize| -> Option<usize> { if g2.is_cemetery(v2) { None } else { setup.to1[v2] } };
        let done1 = |v2: usize| in1(v2).is_none_or(|v1| tree1.contains(g1, v1));
        let done2 = |v2: usize| tree2.contains(g2, v2);
        let mut tau1 = done1(s2).then_some(0usize);
        let mut tau2 = done2(s2).then_some(0usize);
        let mut walk = WalkPath::trivial(s2);
        let mut v = s2;
        while tau1.is_none() || tau2.is_none() {
            if walk.len() as u64 >= DEFAULT_STEP_CAP {
                return Err(Error::StepCap { cap: DEFAULT_STEP_CAP });
            }
            let e = g2.step(v, rng);
            v = g2.head(e);
            walk.edges.push(e);
            walk.vertices.push(v);
            let t = walk.len();
            if tau1.is_none() && done1(v) {
                tau1 = Some(t);
            }
            if tau2.is_none() && done2(v) {
                tau2 = Some(t);
            }
        }
        report.steps += walk.len() as u64;
        let (t1, t2) = (tau1.unwrap(), tau2.unwrap());
        let w2 = walk.slice(0, t2);
        tree2.add_branch(g2, &forward_le(&w2))?;
        let e1: Option<Vec<usize>> = walk.edges[..t1].iter().map(|&e| setup.edge_in_d1(e)).collect();
        let e1 = e1.ok_or_else(|| Error::Numeric("walk step has no counterpart in D₁".into()))?;
        let w1 = WalkPath::from_edges(g1, s1, e1, Terminal::HitSet)?;
        tree1.add_branch(g1, &forward_le(&w1))?;
        report.branches += 1;
    }
    Ok(report)
}

/// Boundary-following coupling: per run, draw the branch from `x₀`, grow
/// both trees from the vertices of `U` with shared walks and record
/// agreement on `U` and on `{x ∈ D₁ : d(x, ∂D₁) ≥ shrink}`.
pub fn upper_coupling_experiment(
    setup: &CouplingSetup,
    er: &ErSampler,
    shrink: f64,
    n_runs: usize,
    seed: u64,
) -> Result<CouplingReport> {
    setup.cfg.validate_upper()?;
    let g1 = &setup.g1;
    let u1 = mask(g1, &setup.cfg.u);
    let shrunk: Vec<bool> = g1.positions.iter().map(|&p| setup.cfg.d1.boundary_distance(p) >= shrink).collect();
    let starts: Vec<usize> = (0..g1.n_interior()).filter(|&v| u1[v]).collect();
    let runs: Result<Vec<RunRecord>> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let out = er.sample(setup, &mut rng)?;
            let mut t2 = PartialTree::new(&setup.g2);
            t2.add_branch(&setup.g2, &out.branch)?;
            let mut t1 = PartialTree::new(g1);
            shared_wilson(setup, &mut t1, &mut t2, &starts, &mut rng)?;
            let mut rec = RunRecord::new(i);
            rec.agree_u = trees_agree(setup, &t1, &t2, &u1);
            rec.agree_shrunk = Some(trees_agree(setup, &t1, &t2, &shrunk));
            rec.rejections = out.tries - 1;
            Ok(rec)
        })
        .collect();
    let params = serde_json::json!({
        "r": er.r,
        "method": er.method,
        "shrink": shrink,
        "mesh": setup.cfg.mesh,
        "n_runs": n_runs,
        "seed": seed,
    });
    Ok(CouplingReport::from_runs(runs?, params))
}
