use wired_ust::coupling::*;
use wired_ust::erasure::{forward_le, mixed_le, SimplePath};
use wired_ust::geom::discrete_frechet;
use wired_ust::rng::stream;
use wired_ust::ust::PartialTree;
use wired_ust::walk::{Terminal, WalkPath};
use wired_ust::{Point, WiredGraph};

/// Lattice path through axis-aligned waypoints given in mesh units, ending
/// with a step to the cemetery.
fn lattice_path(g: &WiredGraph, waypoints: &[(i32, i32)]) -> SimplePath {
    let m = g.mesh;
    let at = |x: i32, y: i32| g.nearest_vertex(Point::new(x as f64 * m, y as f64 * m));
    let mut cur = waypoints[0];
    let start = at(cur.0, cur.1);
    let mut v = start;
    let mut edges = Vec::new();
    for &(x, y) in &waypoints[1..] {
        while cur != (x, y) {
            cur.0 += (x - cur.0).signum();
            cur.1 += (y - cur.1).signum();
            let p = Point::new(cur.0 as f64 * m, cur.1 as f64 * m);
            let w = at(cur.0, cur.1);
            if g.positions[w].dist(p) > 1e-9 {
                let e = *g.out_edges(v).iter().find(|&&e| g.is_cemetery(g.head(e))).unwrap();
                edges.push(e);
                return forward_le(&WalkPath::from_edges(g, start, edges, Terminal::HitSet).unwrap());
            }
            edges.push(g.edge_between(v, w).unwrap());
            v = w;
        }
    }
    panic!("waypoints end inside the domain");
}

#[test]
fn shared_walks_agree_when_domains_coincide() {
    let mut cfg = CouplingConfig::concentric(1.0 / 8.0);
    cfg.d2 = cfg.d1.clone();
    let setup = CouplingSetup::new(&cfg).unwrap();
    let n = setup.g1.n_interior();
    let starts: Vec<usize> = (0..n).collect();
    let all = vec![true; n];
    for i in 0..20 {
        let mut rng = stream(3, i);
        let mut t1 = PartialTree::new(&setup.g1);
        let mut t2 = PartialTree::new(&setup.g2);
        shared_wilson(&setup, &mut t1, &mut t2, &starts, &mut rng).unwrap();
        assert!(trees_agree(&setup, &t1, &t2, &all));
    }
}

#[test]
fn boundary_branch_passes_its_own_check() {
    let mut cfg = CouplingConfig::concentric(1.0 / 16.0);
    cfg.r = 0.2;
    let setup = CouplingSetup::new(&cfg).unwrap();
    let er = ErSampler::new(&setup, cfg.r, ErMethod::Guided).unwrap();
    let mut rng = stream(5, 0);
    for _ in 0..10 {
        let out = er.sample(&setup, &mut rng).unwrap();
        let (ok, d) = er.check(&setup, &out.branch);
        assert!(ok && d <= cfg.r);
        assert_eq!(d, out.frechet);
        assert!(out.branch.is_simple());
    }
}

#[test]
fn reversed_walk_stays_close_and_erases_back() {
    let cfg = CouplingConfig::concentric(1.0 / 16.0);
    let setup = CouplingSetup::new(&cfg).unwrap();
    let g = &setup.g2;
    let tree = PartialTree::new(g);
    let start = g.nearest_vertex(Point::new(0.0, 0.0));
    for i in 0..30 {
        let mut rng = stream(9, i);
        let x2 = build_x2_tilde(&setup, &tree, start, &mut rng).unwrap();
        assert_eq!(mixed_le(&x2.x2_tilde, &x2.schedule).unwrap(), x2.y2);
        let pts = |vs: &[usize]| -> Vec<Point> {
            vs.iter().filter(|&&v| !g.is_cemetery(v)).map(|&v| g.positions[v]).collect()
        };
        let d = discrete_frechet(&pts(&x2.x2_tilde.vertices), &pts(&x2.y2.vertices));
        assert!(d <= cfg.r + 1e-12, "distance {d}");
        assert_eq!(d, x2.walk_distance);
        let mut a = x2.x.edges.clone();
        let mut b = x2.x2_tilde.edges.clone();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }
}

#[test]
fn straight_branch_is_good() {
    let setup = CouplingSetup::new(&CouplingConfig::concentric(1.0 / 32.0)).unwrap();
    let y = lattice_path(&setup.g2, &[(0, 0), (60, 0)]);
    assert_eq!(epsilon_good(&setup, &y).unwrap(), None);
}

#[test]
fn hairpin_is_a_quasiloop() {
    let setup = CouplingSetup::new(&CouplingConfig::concentric(1.0 / 32.0)).unwrap();
    let y = lattice_path(&setup.g2, &[(0, 0), (30, 0), (30, 1), (22, 1), (22, 2), (60, 2)]);
    assert!(y.is_simple());
    assert_eq!(epsilon_good(&setup, &y).unwrap(), Some(GoodFailure::Quasiloop));
}

#[test]
fn repeated_crossings_are_rejected() {
    let mut cfg = CouplingConfig::concentric(1.0 / 32.0);
    cfg.epsilon = 0.5;
    let setup = CouplingSetup::new(&cfg).unwrap();
    let w = [(0, 0), (24, 0), (24, 24), (0, 24), (0, 13), (-13, 13), (-60, 13)];
    let y = lattice_path(&setup.g2, &w);
    assert!(y.is_simple());
    assert_eq!(epsilon_good(&setup, &y).unwrap(), Some(GoodFailure::TooManyCrossings));
}

#[test]
fn lower_runs_keep_the_walk_bound() {
    let setup = CouplingSetup::new(&CouplingConfig::concentric(1.0 / 16.0)).unwrap();
    let c = setup.g1.nearest_vertex(Point::new(0.0, 0.0));
    let rep = lower_coupling_experiment(&setup, &[c], 40, 1).unwrap();
    assert!(rep.walk_distance_max.unwrap() <= setup.cfg.r + 1e-12);
    assert_eq!(rep.runs.len(), 40);
    let again = lower_coupling_experiment(&setup, &[c], 40, 1).unwrap();
    assert_eq!(rep.to_csv(), again.to_csv());
}

#[test]
fn twisted_map_round_trips() {
    let mut cfg = CouplingConfig::concentric(1.0 / 8.0);
    cfg.twist = 1;
    let map = DomainMap::new(&cfg);
    for p in [Point::new(0.1, 0.2), Point::new(0.9, -0.3), Point::new(-0.5, 0.55)] {
        let q = map.invert(map.apply(p));
        assert!(q.dist(p) < 1e-9);
    }
    let inside = Point::new(0.2, 0.1);
    assert!(map.apply(inside).dist(inside) < 1e-9);
}

#[test]
fn eps_ladder_divides_by_four() {
    let cfg = CouplingConfig::concentric(1.0 / 16.0);
    let eps: Vec<f64> = cfg.eps_ladder(3).iter().map(|c| c.epsilon).collect();
    assert_eq!(eps, vec![0.25, 0.0625, 0.015625]);
    assert!(cfg.eps_ladder(3).iter().all(|c| c.r == cfg.r && c.mesh == cfg.mesh));
}
