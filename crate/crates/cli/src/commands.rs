//! Config documents and runners for each subcommand.

use crate::svg::{diverging, palette, Figure, Tile};
use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wired_ust::coupling::{
    annulus_experiment, exact_annulus_ratios, lower_coupling_experiment, upper_coupling_experiment, AnnulusConfig,
    CouplingConfig, CouplingReport, CouplingSetup, ErMethod, ErSampler,
};
use wired_ust::dimer::{build_superposition, hexagon_graph, height_field, macmahon, tree_to_dimer, ReferenceRay};
use wired_ust::erasure::laplacian_walk_law;
use wired_ust::lattice::{build_square_lattice, enumerate_tree_weight, square_lattice_domain, two_vertex_graph, wired_grid, ENUMERATION_LIMIT};
use wired_ust::rng::stream;
use wired_ust::stats::{
    continuity_experiment, default_c_grid, height_shift_experiment, rn_report, sample_restrictions, ContinuityConfig,
    HeightShiftConfig, KeyMode, KeySpec, DEFAULT_SMOOTHING,
};
use wired_ust::ust::{wilson, SpanningTree, StartOrder};
use wired_ust::walk::{estimate_beurling, estimate_crossing, estimate_harmonic_measure, fit_exponent, RectanglePlacement};
use wired_ust::{matrix_tree_weight, DomainSpec, Exact, Point, Shape, WiredGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Files written by a run plus the text printed on stdout.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub stdout: String,
}

impl Outputs {
    fn file(&mut self, name: &str, body: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), body.into()));
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.file(name, s);
        Ok(())
    }
}

/// Strict decoding with the path of the offending field in the error.
pub fn decode<T: DeserializeOwned>(v: &Value) -> Result<T> {
    serde_path_to_error::deserialize(v.clone()).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("config field `{path}`: {}", e.into_inner())
    })
}

pub fn toml_to_json(text: &str) -> Result<Value> {
    let v: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
    Ok(serde_json::to_value(v)?)
}

fn no_svg(cmd: &str, format: Format) -> Result<()> {
    if format == Format::Svg {
        bail!("svg output is not available for {cmd}");
    }
    Ok(())
}

fn rect_graph(width: f64, height: f64, mesh: f64) -> Result<WiredGraph> {
    let (a, b) = (Point::new(0.0, 0.0), Point::new(width, height));
    Ok(square_lattice_domain(&DomainSpec::new(Shape::rectangle(a, b)), mesh)?)
}

fn tree_figure(g: &WiredGraph, branches: &[Vec<usize>]) -> Figure {
    let mut f = Figure::default();
    for (i, edges) in branches.iter().enumerate() {
        let color = palette(i);
        for &e in edges {
            f.line(&g.edges[e].polyline, &color, g.mesh * 0.12);
        }
    }
    f
}

fn tree_csv(g: &WiredGraph, tree: &SpanningTree) -> String {
    let mut s = String::from("vertex,x,y,edge,head,head_x,head_y\n");
    for (v, &e) in tree.parent.iter().enumerate() {
        let p = g.positions[v];
        let q = *g.edges[e].polyline.last().unwrap();
        let head = if g.is_cemetery(g.head(e)) { "cemetery".to_string() } else { g.head(e).to_string() };
        s.push_str(&format!("{v},{:.12},{:.12},{e},{head},{:.12},{:.12}\n", p.x, p.y, q.x, q.y));
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleUst {
    domain: DomainSpec,
    mesh: f64,
}

fn sample_ust(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    let c: SampleUst = decode(cfg)?;
    let g = square_lattice_domain(&c.domain, c.mesh)?;
    let (tree, log) = wilson(&g, &StartOrder::RowMajor, &mut stream(seed, 0), false)?;
    let branches: Vec<Vec<usize>> = log.iter().map(|b| b.branch.edges.clone()).filter(|b| !b.is_empty()).collect();
    let mut out = Outputs::default();
    let figure = tree_figure(&g, &branches);
    match format {
        Format::Csv => out.file("tree.csv", tree_csv(&g, &tree)),
        Format::Json => out.json("tree.json", &json!({ "kind": "tree", "parent": tree.parent, "figure": figure }))?,
        Format::Svg => out.file("tree.svg", figure.to_svg()),
    }
    out.stdout = format!("tree with {} vertices and {} branches\n", g.n_interior(), branches.len());
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Rect {
    width: f64,
    height: f64,
    mesh: f64,
    #[serde(default)]
    ray_depth: Option<f64>,
}

fn sample_dimer(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    let c: Rect = decode(cfg)?;
    let g = rect_graph(c.width, c.height, c.mesh)?;
    let sup = build_superposition(&g)?;
    let (tree, _) = wilson(&g, &StartOrder::RowMajor, &mut stream(seed, 0), false)?;
    let m = tree_to_dimer(&g, &tree, &sup)?;
    let mut figure = Figure::default();
    for &h in &m.half_edges {
        let e = &sup.half_edges[h];
        let (a, b) = (sup.nodes[e.black].pos, sup.nodes[e.white].pos);
        let color = if matches!(sup.nodes[e.black].kind, wired_ust::dimer::NodeKind::Dual) { "#3b6fb6" } else { "#c8553d" };
        figure.line(&[a, b], color, c.mesh * 0.35);
    }
    let mut out = Outputs::default();
    match format {
        Format::Csv => {
            let mut s = String::from("black,white,black_x,black_y,white_x,white_y\n");
            for &h in &m.half_edges {
                let e = &sup.half_edges[h];
                let (a, b) = (sup.nodes[e.black].pos, sup.nodes[e.white].pos);
                s.push_str(&format!("{},{},{:.12},{:.12},{:.12},{:.12}\n", e.black, e.white, a.x, a.y, b.x, b.y));
            }
            out.file("matching.csv", s);
        }
        Format::Json => out.json("matching.json", &json!({ "kind": "matching", "half_edges": m.half_edges, "figure": figure }))?,
        Format::Svg => out.file("matching.svg", figure.to_svg()),
    }
    out.stdout = format!("matching with {} dimers\n", m.half_edges.len());
    Ok(out)
}

fn height(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    let c: Rect = decode(cfg)?;
    let g = rect_graph(c.width, c.height, c.mesh)?;
    let sup = build_superposition(&g)?;
    let (tree, _) = wilson(&g, &StartOrder::RowMajor, &mut stream(seed, 0), false)?;
    let ray = ReferenceRay { depth: c.ray_depth.unwrap_or(ReferenceRay::default().depth) };
    let hf = height_field(&g, &tree, &sup, ray)?;
    let mean = hf.heights.iter().sum::<f64>() / hf.heights.len() as f64;
    let spread = hf.heights.iter().map(|h| (h - mean).abs()).fold(1e-9, f64::max);
    let mut figure = Figure::default();
    for (p, h) in hf.centroids.iter().zip(&hf.heights) {
        figure.tiles.push(Tile { center: [p.x, p.y], size: c.mesh, color: diverging((h - mean) / spread) });
    }
    let mut out = Outputs::default();
    match format {
        Format::Csv => out.file("height.csv", hf.to_csv()),
        Format::Json => out.json("height.json", &json!({ "kind": "height", "field": hf, "figure": figure }))?,
        Format::Svg => out.file("height.svg", figure.to_svg()),
    }
    out.stdout = format!("height field on {} faces, range {:.4}\n", hf.heights.len(), 2.0 * spread);
    Ok(out)
}

fn coupling_outputs(out: &mut Outputs, stem: &str, rep: &CouplingReport, format: Format) -> Result<()> {
    match format {
        Format::Csv => out.file(&format!("{stem}.csv"), rep.to_csv()),
        _ => out.json(&format!("{stem}.json"), rep)?,
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoupleUpper {
    coupling: CouplingConfig,
    r_values: Vec<f64>,
    #[serde(default)]
    method: ErMethod,
    /// Distance from `∂D₁` defining the shrunk region; `r` when absent.
    #[serde(default)]
    shrink: Option<f64>,
    n_runs: usize,
}

fn couple_upper(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    no_svg("couple-upper", format)?;
    let c: CoupleUpper = decode(cfg)?;
    if c.r_values.is_empty() || c.n_runs == 0 {
        bail!("need at least one r value and one run");
    }
    let mut out = Outputs::default();
    let mut summary = String::from("r,agree_u,stderr,agree_shrunk,rejections\n");
    for &r in &c.r_values {
        let mut cc = c.coupling.clone();
        cc.r = r;
        let setup = CouplingSetup::new(&cc)?;
        let er = ErSampler::new(&setup, r, c.method).with_context(|| format!("boundary branch sampler at r = {r}"))?;
        let rep = upper_coupling_experiment(&setup, &er, c.shrink.unwrap_or(r), c.n_runs, seed)?;
        summary.push_str(&format!(
            "{r},{:.6},{:.6},{:.6},{}\n",
            rep.agree_u.value,
            rep.agree_u.stderr,
            rep.agree_shrunk.map_or(f64::NAN, |f| f.value),
            rep.rejections
        ));
        coupling_outputs(&mut out, &format!("upper_r{r}"), &rep, format)?;
    }
    out.file("summary.csv", summary.clone());
    out.stdout = summary;
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoupleLower {
    coupling: CouplingConfig,
    /// Branch starts; the centre of `U` when empty.
    #[serde(default)]
    starts: Vec<Point>,
    n_runs: usize,
    /// Runs at `ε/4ⁿ` for each `n` below this.
    #[serde(default = "one")]
    eps_levels: usize,
}

fn one() -> usize {
    1
}

fn couple_lower(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    no_svg("couple-lower", format)?;
    let c: CoupleLower = decode(cfg)?;
    if c.eps_levels == 0 {
        bail!("config field `eps_levels`: need at least one level");
    }
    let pts = if c.starts.is_empty() {
        let (a, b) = c.coupling.u.bbox();
        vec![a.lerp(b, 0.5)]
    } else {
        c.starts.clone()
    };
    let f = |x: Option<wired_ust::coupling::Frequency>| x.map_or("n/a".to_string(), |f| format!("{:.4} ± {:.4}", f.value, f.stderr));
    let mut out = Outputs::default();
    for (n, level) in c.coupling.eps_ladder(c.eps_levels).iter().enumerate() {
        let setup = CouplingSetup::new(level)?;
        let starts: Vec<usize> = pts.iter().map(|&p| setup.g1.nearest_vertex(p)).collect();
        let rep = lower_coupling_experiment(&setup, &starts, c.n_runs, seed)?;
        let stem = if c.eps_levels == 1 { "lower".to_string() } else { format!("lower_eps{n}") };
        coupling_outputs(&mut out, &stem, &rep, format)?;
        out.stdout.push_str(&format!(
            "epsilon {}\nagree_u1 {}\ngood {}\nmax d(X2~, Y2) {:?} (r = {})\nsoup rejections {}\n",
            level.epsilon,
            f(rep.agree_u1),
            f(rep.good),
            rep.walk_distance_max,
            level.r,
            rep.soup_rejections
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Annulus {
    annulus: AnnulusConfig,
    n_runs: usize,
    /// Also compare the exact joint law with the product of marginals.
    #[serde(default)]
    exact: bool,
}

fn annulus(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    no_svg("annulus", format)?;
    let c: Annulus = decode(cfg)?;
    let rep = annulus_experiment(&c.annulus, c.n_runs, seed)?;
    let exact = if c.exact {
        let g = c.annulus.graph()?;
        let (v, u) = c.annulus.masks(&g);
        Some(exact_annulus_ratios(&g, &v, &u)?)
    } else {
        None
    };
    let mut out = Outputs::default();
    match format {
        Format::Csv => {
            let mut s = format!("avoid,stderr,n\n{:.6},{:.6},{}\n", rep.avoid.value, rep.avoid.stderr, rep.avoid.n);
            if let Some(e) = &exact {
                s.push_str(&format!("\nmin_ratio,max_ratio,c,product_mass_outside\n{},{},{},{}\n", e.min_ratio, e.max_ratio, e.c, e.product_mass_outside));
            }
            out.file("annulus.csv", s);
        }
        _ => out.json("annulus.json", &json!({ "sampled": rep, "exact": exact }))?,
    }
    out.stdout = format!("branches from V avoid U: {:.4} ± {:.4}\n", rep.avoid.value, rep.avoid.stderr);
    Ok(out)
}

fn default_target() -> f64 {
    0.9
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RnCmd {
    d1: Shape,
    d2: Shape,
    mesh: f64,
    u_center: Point,
    u_radius: f64,
    n1: usize,
    n2: usize,
    #[serde(default)]
    mode: KeyMode,
    #[serde(default = "default_smoothing")]
    smoothing: f64,
    #[serde(default)]
    c_grid: Option<Vec<f64>>,
    #[serde(default = "default_target")]
    target_mass: f64,
}

fn rn(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    no_svg("rn-report", format)?;
    let c: RnCmd = decode(cfg)?;
    for (name, n) in [("n1", c.n1), ("n2", c.n2)] {
        if n == 0 {
            bail!("config field `{name}`: sample size must be positive");
        }
    }
    let spec = KeySpec::disc(c.u_center, c.u_radius, c.mode);
    let g1 = square_lattice_domain(&DomainSpec::new(c.d1.clone()), c.mesh)?;
    let g2 = square_lattice_domain(&DomainSpec::new(c.d2.clone()), c.mesh)?;
    let a = sample_restrictions(&g1, &spec, c.n1, wired_ust::rng::child_seed(seed, 1))?;
    let b = sample_restrictions(&g2, &spec, c.n2, wired_ust::rng::child_seed(seed, 2))?;
    let grid = c.c_grid.clone().unwrap_or_else(default_c_grid);
    let rep = rn_report(&a, &b, c.smoothing, &grid)?;
    let mut out = Outputs::default();
    match format {
        Format::Csv => {
            out.file("captured.csv", rep.captured_csv());
            out.file("ratios.csv", rep.to_csv());
        }
        _ => out.json("rn_report.json", &rep)?,
    }
    out.stdout = format!(
        "support {} keys; smallest C with captured mass ≥ {}: {}\n{}",
        rep.support,
        c.target_mass,
        rep.min_c(c.target_mass).map_or("none in grid".to_string(), |x| x.to_string()),
        rep.captured_csv()
    );
    Ok(out)
}

fn continuity(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    no_svg("continuity", format)?;
    let c: ContinuityConfig = decode(cfg)?;
    let rep = continuity_experiment(&c, seed)?;
    let mut out = Outputs::default();
    match format {
        Format::Csv => out.file("continuity.csv", rep.to_csv()),
        _ => out.json("continuity.json", &rep)?,
    }
    out.stdout = rep.to_csv();
    Ok(out)
}

fn height_shift(cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    no_svg("height-shift", format)?;
    let c: HeightShiftConfig = decode(cfg)?;
    let rep = height_shift_experiment(&c, seed)?;
    let mut out = Outputs::default();
    match format {
        Format::Csv => out.file("height_shift.csv", rep.to_csv()),
        _ => out.json("height_shift.json", &rep)?,
    }
    out.stdout = rep.to_csv();
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Crossing {
    meshes: Vec<f64>,
    z: Point,
    eps: f64,
    #[serde(default)]
    vertical: bool,
    n: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Beurling {
    mesh: f64,
    center: Point,
    r: f64,
    radii: Vec<f64>,
    /// Polyline from within `r` of the centre to beyond the largest radius;
    /// a ray along the positive axis when absent.
    #[serde(default)]
    obstacle: Option<Vec<Point>>,
    n: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Harmonic {
    domain: Shape,
    mesh: f64,
    start: Point,
    /// Boundary point and radius of the ball selecting the arc.
    w: Point,
    r: f64,
    /// Lower bound on the distance from the start to `w`.
    big_r: f64,
    n: u64,
}

fn estimate(kind: &str, cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    no_svg("estimate", format)?;
    let mut out = Outputs::default();
    let (reports, mut text) = match kind {
        "crossing" => {
            let c: Crossing = decode(cfg)?;
            let mut reps = Vec::new();
            for &m in &c.meshes {
                let pad = Point::new(c.eps, c.eps);
                let lat = build_square_lattice(m, c.z - pad, c.z + Point::new(4.0 * c.eps, 4.0 * c.eps))?;
                reps.push(estimate_crossing(&lat, RectanglePlacement { z: c.z, eps: c.eps, vertical: c.vertical }, c.n, seed)?);
            }
            (reps, String::new())
        }
        "beurling" => {
            let c: Beurling = decode(cfg)?;
            let r_max = c.radii.iter().copied().fold(0.0, f64::max);
            let obstacle = c.obstacle.clone().unwrap_or_else(|| vec![c.center + Point::new(c.r, 0.0), c.center + Point::new(r_max + 1.0, 0.0)]);
            let pad = Point::new(r_max + 2.0 * c.mesh, r_max + 2.0 * c.mesh);
            let lat = build_square_lattice(c.mesh, c.center - pad, c.center + pad)?;
            let mut reps = Vec::new();
            for &big in &c.radii {
                reps.push(estimate_beurling(&lat, c.center, c.r, big, &[obstacle.clone()], c.n, seed)?);
            }
            let alpha = fit_exponent(&reps);
            (reps, format!("fitted exponent {}\n", alpha.map_or("n/a".into(), |a| format!("{a:.4}"))))
        }
        "harmonic" => {
            let c: Harmonic = decode(cfg)?;
            let g = square_lattice_domain(&DomainSpec::new(c.domain.clone()), c.mesh)?;
            let s = g.nearest_vertex(c.start);
            (vec![estimate_harmonic_measure(&g, s, c.w, c.r, c.big_r, c.n, seed)?], String::new())
        }
        other => bail!("unknown estimator {other}"),
    };
    let mut csv = String::from("estimate,stderr,n,parameters\n");
    for r in &reports {
        csv.push_str(&format!("{:.8},{:.8},{},\"{}\"\n", r.estimate, r.stderr, r.n_samples, r.parameters.to_string().replace('"', "'")));
    }
    match format {
        Format::Csv => out.file(&format!("{kind}.csv"), csv.clone()),
        _ => out.json(&format!("{kind}.json"), &reports)?,
    }
    text.insert_str(0, &csv);
    out.stdout = text;
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct OracleArgs {
    /// Wired k×k grid.
    #[arg(long)]
    #[serde(default)]
    pub grid: Option<usize>,
    /// The two-vertex graph.
    #[arg(long)]
    #[serde(default)]
    pub two_vertex: bool,
    /// Start vertex for the loop-erasure law.
    #[arg(long)]
    #[serde(default)]
    pub start: Option<usize>,
    /// Temperleyan rectangle sides, in lattice steps.
    #[arg(long)]
    #[serde(default)]
    pub width: Option<usize>,
    #[arg(long)]
    #[serde(default)]
    pub height: Option<usize>,
    /// Hexagon or box sides.
    #[arg(long)]
    #[serde(default)]
    pub a: Option<u32>,
    #[arg(long)]
    #[serde(default)]
    pub b: Option<u32>,
    #[arg(long)]
    #[serde(default)]
    pub c: Option<u32>,
}

impl OracleArgs {
    fn graph(&self) -> Result<WiredGraph> {
        match (self.grid, self.two_vertex) {
            (Some(k), false) => Ok(wired_grid(k)?),
            (None, true) => Ok(two_vertex_graph()),
            _ => bail!("pick exactly one of --grid and --two-vertex"),
        }
    }

    fn abc(&self) -> Result<(u32, u32, u32)> {
        match (self.a, self.b, self.c) {
            (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
            _ => bail!("--a, --b and --c are required"),
        }
    }
}

fn oracle(kind: &str, cfg: &Value) -> Result<Outputs> {
    let o: OracleArgs = decode(cfg)?;
    let mut out = Outputs::default();
    let text = match kind {
        "matrix-tree" => {
            let g = o.graph()?;
            let w: Exact = matrix_tree_weight(&g)?;
            let mut s = format!("{w}\n");
            if g.n_interior() <= ENUMERATION_LIMIT {
                let e: Exact = enumerate_tree_weight(&g)?;
                s.push_str(&format!("enumeration {e} {}\n", if e == w { "agrees" } else { "DISAGREES" }));
            }
            s
        }
        "lerw-law" => {
            let g = o.graph()?;
            let law = laplacian_walk_law::<Exact>(&g, o.start.unwrap_or(0))?;
            law.iter()
                .map(|(p, q)| {
                    let vs: Vec<String> = p.vertices.iter().map(|&v| if g.is_cemetery(v) { "c".into() } else { v.to_string() }).collect();
                    format!("{q} {}\n", vs.join(","))
                })
                .collect()
        }
        "matchings" => match (o.width, o.height) {
            (Some(w), Some(h)) => {
                let g = rect_graph(w as f64, h as f64, 1.0)?;
                let m = build_superposition(&g)?.reduced_bipartite().count_matchings()?;
                let t: Exact = matrix_tree_weight(&g)?;
                format!("{m}\nspanning trees {t}\n")
            }
            _ => {
                let (a, b, c) = o.abc()?;
                format!("{}\n", hexagon_graph(a as usize, b as usize, c as usize)?.count_matchings()?)
            }
        },
        "macmahon" => {
            let (a, b, c) = o.abc()?;
            format!("{}\n", macmahon(a, b, c)?)
        }
        other => bail!("unknown oracle {other}"),
    };
    out.file(&format!("{kind}.txt"), text.clone());
    out.stdout = text;
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderArgs {
    pub input: String,
    /// SHA-256 of the input document, checked on replay.
    pub digest: String,
}

fn render(cfg: &Value) -> Result<Outputs> {
    let a: RenderArgs = decode(cfg)?;
    let text = std::fs::read(&a.input).with_context(|| format!("reading {}", a.input))?;
    if crate::manifest::sha256_hex(&text) != a.digest {
        bail!("{} changed since it was rendered", a.input);
    }
    let doc: Value = serde_json::from_slice(&text).context("render input is not JSON")?;
    let fig = doc.get("figure").ok_or_else(|| anyhow!("render input has no figure"))?;
    let fig: Figure = decode(fig)?;
    let mut out = Outputs::default();
    out.file("figure.svg", fig.to_svg());
    out.stdout = format!("{} strokes, {} tiles\n", fig.strokes.len(), fig.tiles.len());
    Ok(out)
}

/// Run a command given its path (`["estimate", "crossing"]`) and config.
pub fn run(command: &[String], cfg: &Value, seed: u64, format: Format) -> Result<Outputs> {
    let path: Vec<&str> = command.iter().map(String::as_str).collect();
    match path.as_slice() {
        ["sample-ust"] => sample_ust(cfg, seed, format),
        ["sample-dimer"] => sample_dimer(cfg, seed, format),
        ["height"] => height(cfg, seed, format),
        ["couple-upper"] => couple_upper(cfg, seed, format),
        ["couple-lower"] => couple_lower(cfg, seed, format),
        ["annulus"] => annulus(cfg, seed, format),
        ["rn-report"] => rn(cfg, seed, format),
        ["continuity"] => continuity(cfg, seed, format),
        ["height-shift"] => height_shift(cfg, seed, format),
        ["estimate", kind] => estimate(kind, cfg, seed, format),
        ["oracle", kind] => oracle(kind, cfg),
        ["render"] => render(cfg),
        _ => bail!("unknown command {}", command.join(" ")),
    }
}
