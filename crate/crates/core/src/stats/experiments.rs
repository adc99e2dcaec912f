use super::{default_c_grid, rn_report, tv_distance, tv_noise, Empirical, RestrictionKey, RnReport, DEFAULT_SMOOTHING};
use crate::dimer::{build_superposition, tree_to_dimer, winding_from_start, ReferenceRay};
use crate::domain::{DomainSpec, Shape};
use crate::error::{invalid, Error, Result};
use crate::geom::Point;
use crate::lattice::{square_lattice_domain, WiredGraph};
use crate::rng::{child_seed, stream};
use crate::ust::{wilson, wilson_extend, PartialTree, StartOrder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    /// Merge pattern of the branches from the marked points inside `U` and
    /// the side through which each leaves `U`.
    #[default]
    Coarse,
    /// Parent edges of every vertex of `U`.
    Tree,
}

/// Which restriction of the tree is observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeySpec {
    pub u: Shape,
    /// Centre used for exit sides.
    pub center: Point,
    pub marked: Vec<Point>,
    #[serde(default)]
    pub mode: KeyMode,
}

impl KeySpec {
    /// Disc `U` with the centre and four points at 0.6 of the radius marked.
    pub fn disc(center: Point, radius: f64, mode: KeyMode) -> Self {
        let mut marked = vec![center];
        for k in 0..4 {
            let a = FRAC_PI_2 * k as f64;
            marked.push(center + Point::new(a.cos(), a.sin()) * (0.6 * radius));
        }
        Self { u: Shape::Disc { center, radius }, center, marked, mode }
    }
}

fn lattice_coord(p: Point, mesh: f64) -> (i64, i64) {
    ((p.x / mesh * 4.0).round() as i64, (p.y / mesh * 4.0).round() as i64)
}

fn edge_coords(g: &WiredGraph, e: usize) -> [i64; 4] {
    let a = lattice_coord(g.positions[g.tail(e)], g.mesh);
    let b = lattice_coord(*g.edges[e].polyline.last().unwrap(), g.mesh);
    [a.0, a.1, b.0, b.1]
}

/// Parent edges of the vertices of `U`, in lattice coordinates.
pub fn tree_restriction_key(g: &WiredGraph, parent: &[Option<usize>], u_mask: &[bool]) -> Result<RestrictionKey> {
    let mut edges = Vec::new();
    for v in 0..g.n_interior() {
        if u_mask[v] {
            let e = parent[v].ok_or_else(|| Error::InvalidInput(format!("vertex {v} of U has no parent")))?;
            edges.push(edge_coords(g, e));
        }
    }
    Ok(RestrictionKey::tree(edges))
}

/// Feature vector of the tree seen in `U`: for each marked vertex, the
/// first marked index whose branch it meets before leaving `U`, then for
/// each marked vertex the quadrant around `center` of its exit from `U`.
pub fn coarse_tree_key(
    g: &WiredGraph,
    parent: &[Option<usize>],
    marked: &[usize],
    u_mask: &[bool],
    center: Point,
) -> Result<RestrictionKey> {
    let mut paths: Vec<Vec<usize>> = Vec::with_capacity(marked.len());
    let mut quadrants = Vec::with_capacity(marked.len());
    for &m in marked {
        if !u_mask[m] {
            return invalid("marked point outside U");
        }
        let mut path = vec![m];
        let mut v = m;
        let exit = loop {
            let e = parent[v].ok_or_else(|| Error::InvalidInput(format!("vertex {v} has no parent")))?;
            let w = g.head(e);
            if g.is_cemetery(w) || !u_mask[w] {
                break *g.edges[e].polyline.last().unwrap();
            }
            path.push(w);
            v = w;
        };
        let a = (exit - center).arg().rem_euclid(TAU);
        quadrants.push(((a / FRAC_PI_2).floor() as i64).min(3));
        path.sort_unstable();
        paths.push(path);
    }
    let meets = |a: &[usize], b: &[usize]| {
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Equal => return true,
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        false
    };
    let mut label: Vec<i64> = (0..marked.len() as i64).collect();
    for i in 0..marked.len() {
        for j in 0..i {
            if meets(&paths[i], &paths[j]) {
                label[i] = label[j];
                break;
            }
        }
    }
    label.extend(quadrants);
    Ok(RestrictionKey::Coarse(label))
}

/// Empirical law of the restriction key over `n` independent trees of `g`,
/// grown by Wilson's algorithm from the observed vertices only.
pub fn sample_restrictions(g: &WiredGraph, spec: &KeySpec, n: usize, seed: u64) -> Result<Empirical<RestrictionKey>> {
    let u_mask: Vec<bool> = g.positions.iter().map(|&p| spec.u.contains(p)).collect();
    let marked: Vec<usize> = spec.marked.iter().map(|&p| g.nearest_vertex(p)).collect();
    let starts: Vec<usize> = match spec.mode {
        KeyMode::Coarse => marked.clone(),
        KeyMode::Tree => (0..g.n_interior()).filter(|&v| u_mask[v]).collect(),
    };
    if starts.is_empty() {
        return invalid("U contains no vertex");
    }
    let keys: Result<Vec<RestrictionKey>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut tree = PartialTree::new(g);
            match spec.mode {
                KeyMode::Coarse => {
                    wilson_extend(g, &mut tree, &starts, &mut rng, false)?;
                    coarse_tree_key(g, &tree.parent, &marked, &u_mask, spec.center)
                }
                KeyMode::Tree => {
                    wilson_extend(g, &mut tree, &starts, &mut rng, false)?;
                    tree_restriction_key(g, &tree.parent, &u_mask)
                }
            }
        })
        .collect();
    Ok(keys?.into_iter().collect())
}

/// Polygon `r(θ) = radius + t·(1 + cos(kθ))/2`, at Hausdorff distance `t`
/// from the disc.
pub fn perturbed_disc(center: Point, radius: f64, t: f64, lobes: u32) -> Shape {
    let m = 512;
    let vertices = (0..m)
        .map(|i| {
            let a = TAU * i as f64 / m as f64;
            let r = radius + t * (1.0 + (lobes as f64 * a).cos()) / 2.0;
            center + Point::new(a.cos(), a.sin()) * r
        })
        .collect();
    Shape::Polygon { vertices }
}

fn default_lobes() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityConfig {
    pub center: Point,
    pub radius: f64,
    pub u_radius: f64,
    /// Boundary perturbation sizes compared against the disc.
    #[serde(default)]
    pub perturbations: Vec<f64>,
    #[serde(default = "default_lobes")]
    pub lobes: u32,
    /// Disc radii compared against the largest of them.
    #[serde(default)]
    pub radii: Vec<f64>,
    pub mesh: f64,
    pub n_samples: usize,
    #[serde(default)]
    pub mode: KeyMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    /// `perturbation` or `radius`.
    pub family: String,
    pub parameter: f64,
    pub tv: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    pub parameters: serde_json::Value,
}

impl ContinuityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,parameter,tv,noise\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{:.12},{:.12}\n", r.family, r.parameter, r.tv, r.noise));
        }
        s
    }
}

/// Total variation between the restriction laws on the disc and on each
/// perturbed disc, and between discs of growing radius and the largest one.
pub fn continuity_experiment(cfg: &ContinuityConfig, seed: u64) -> Result<ContinuityReport> {
    if !(cfg.u_radius > 0.0 && cfg.u_radius < cfg.radius) || cfg.n_samples == 0 {
        return invalid("need 0 < u_radius < radius and a positive sample count");
    }
    if cfg.perturbations.iter().any(|t| !(*t >= 0.0)) || cfg.radii.iter().any(|r| !(*r > cfg.u_radius)) {
        return invalid("perturbations must be nonnegative and radii must exceed u_radius");
    }
    let spec = KeySpec::disc(cfg.center, cfg.u_radius, cfg.mode);
    let law = |shape: Shape, label: u64| -> Result<Empirical<RestrictionKey>> {
        let g = square_lattice_domain(&DomainSpec::new(shape), cfg.mesh)?;
        sample_restrictions(&g, &spec, cfg.n_samples, child_seed(seed, label))
    };
    let mut rows = Vec::new();
    if !cfg.perturbations.is_empty() {
        let base = law(Shape::Disc { center: cfg.center, radius: cfg.radius }, 0)?;
        for (i, &t) in cfg.perturbations.iter().enumerate() {
            let shape = if t == 0.0 {
                Shape::Disc { center: cfg.center, radius: cfg.radius }
            } else {
                perturbed_disc(cfg.center, cfg.radius, t, cfg.lobes)
            };
            let other = law(shape, 1 + i as u64)?;
            rows.push(ContinuityRow {
                family: "perturbation".into(),
                parameter: t,
                tv: tv_distance(&base, &other),
                noise: tv_noise(&base, &other),
            });
        }
    }
    if let Some(r_max) = cfg.radii.iter().copied().reduce(f64::max) {
        let base = law(Shape::Disc { center: cfg.center, radius: r_max }, 1000)?;
        for (i, &r) in cfg.radii.iter().enumerate() {
            let other = law(Shape::Disc { center: cfg.center, radius: r }, 1001 + i as u64)?;
            rows.push(ContinuityRow {
                family: "radius".into(),
                parameter: r,
                tv: tv_distance(&base, &other),
                noise: tv_noise(&base, &other),
            });
        }
    }
    Ok(ContinuityReport { rows, parameters: serde_json::json!({ "config": cfg, "seed": seed }) })
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

fn default_stratum_min() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightShiftConfig {
    /// Rectangle `[0, width] × [0, height]`.
    pub width: f64,
    pub height: f64,
    pub mesh: f64,
    pub u: Shape,
    pub shifts: Vec<i64>,
    pub n_samples: usize,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    #[serde(default)]
    pub c_grid: Option<Vec<f64>>,
    /// Smallest stratum kept in the stratified comparison.
    #[serde(default = "default_stratum_min")]
    pub stratum_min: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub shift: i64,
    pub report: RnReport,
    /// Strata (dimer keys on `U`) with at least `stratum_min` samples.
    pub strata: usize,
    /// Sample mass of those strata.
    pub strata_mass: f64,
    /// For each `C`, the share of that mass in strata whose conditional
    /// law of the height level captures at least 0.9 within `[1/C, C]`.
    pub stratified: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightShiftReport {
    pub faces: usize,
    pub n_samples: usize,
    pub rows: Vec<ShiftRow>,
    pub parameters: serde_json::Value,
}

impl HeightShiftReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("shift,c,nu1,nu2,stratified\n");
        for row in &self.rows {
            for (m, (_, st)) in row.report.captured.iter().zip(&row.stratified) {
                s.push_str(&format!("{},{},{:.12},{:.12},{:.12}\n", row.shift, m.c, m.nu1, m.nu2, st));
            }
        }
        s
    }
}

/// Law of the height field on the faces in `U` against the same law
/// shifted by each `ℓ`, overall and within strata of the dimers on `U`.
pub fn height_shift_experiment(cfg: &HeightShiftConfig, seed: u64) -> Result<HeightShiftReport> {
    if cfg.n_samples == 0 {
        return invalid("need a positive sample count");
    }
    let (a, b) = (Point::new(0.0, 0.0), Point::new(cfg.width, cfg.height));
    let g = square_lattice_domain(&DomainSpec::new(Shape::rectangle(a, b)), cfg.mesh)?;
    let sup = build_superposition(&g)?;
    let faces: Vec<usize> = (0..sup.faces.len()).filter(|&f| cfg.u.contains(sup.faces[f].centroid)).collect();
    if faces.is_empty() {
        return invalid("U contains no face");
    }
    let ray = ReferenceRay::default();
    let samples: Result<Vec<(RestrictionKey, RestrictionKey)>> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let (tree, _) = wilson(&g, &StartOrder::RowMajor, &mut rng, false)?;
            let mut h = Vec::with_capacity(faces.len());
            for &f in &faces {
                let curve = sup.face_curve(&g, &tree, f, ray);
                h.push(winding_from_start(&curve, Some(Point::new(1.0, 0.0)))? / TAU);
            }
            let m = tree_to_dimer(&g, &tree, &sup)?;
            let pairs = m
                .half_edges
                .iter()
                .map(|&e| &sup.half_edges[e])
                .filter(|e| cfg.u.contains(sup.nodes[e.white].pos))
                .map(|e| {
                    let (x, y) = (sup.nodes[e.black].coord, sup.nodes[e.white].coord);
                    [x.0, x.1, y.0, y.1]
                })
                .collect();
            Ok((RestrictionKey::height(&h), RestrictionKey::dimer(pairs)))
        })
        .collect();
    let samples = samples?;
    let grid = cfg.c_grid.clone().unwrap_or_else(default_c_grid);
    let heights: Empirical<RestrictionKey> = samples.iter().map(|(h, _)| h.clone()).collect();
    let mut strata: BTreeMap<&RestrictionKey, Empirical<RestrictionKey>> = BTreeMap::new();
    for (h, d) in &samples {
        let RestrictionKey::Height(v) = h else { unreachable!() };
        strata.entry(d).or_default().push(RestrictionKey::Height(vec![v[0]]));
    }
    let mut rows = Vec::new();
    for &shift in &cfg.shifts {
        let report = rn_report(&heights, &heights.map(|k| k.shifted(shift)), cfg.smoothing, &grid)?;
        let mut kept = 0usize;
        let mut kept_mass = 0u64;
        let mut good = vec![0u64; report.captured.len()];
        for law in strata.values().filter(|l| l.n as usize >= cfg.stratum_min) {
            kept += 1;
            kept_mass += law.n;
            let r = rn_report(law, &law.map(|k| k.shifted(shift)), cfg.smoothing, &grid)?;
            for (slot, m) in good.iter_mut().zip(&r.captured) {
                if m.nu1 >= 0.9 {
                    *slot += law.n;
                }
            }
        }
        let stratified = report
            .captured
            .iter()
            .zip(&good)
            .map(|(m, &g)| (m.c, if kept_mass == 0 { 0.0 } else { g as f64 / kept_mass as f64 }))
            .collect();
        rows.push(ShiftRow {
            shift,
            report,
            strata: kept,
            strata_mass: kept_mass as f64 / cfg.n_samples as f64,
            stratified,
        });
    }
    Ok(HeightShiftReport {
        faces: faces.len(),
        n_samples: cfg.n_samples,
        rows,
        parameters: serde_json::json!({ "config": cfg, "seed": seed }),
    })
}
