use wired_ust::erasure::{backward_le, forward_le, laplacian_walk_law, mixed_le, reversal_map, reversal_map_inverse};
use wired_ust::lattice::{two_vertex_graph, wired_grid};
use wired_ust::rng::stream;
use wired_ust::walk::{run_walk, schedule, DEFAULT_STEP_CAP};
use wired_ust::Exact;
use num_traits::{One, Zero};

#[test]
fn reversal_identity_and_inverse_on_grid() {
    let g = wired_grid(3).unwrap();
    let n = g.n_interior();
    let a: Vec<bool> = (0..n).map(|v| v == 4).collect();
    let b: Vec<bool> = (0..n).map(|v| v == 0 || v == 8).collect();
    let mut rng = stream(11, 0);
    for _ in 0..3000 {
        let x = run_walk(&g, 4, |_, _| false, &mut rng, DEFAULT_STEP_CAP).unwrap();
        let s = schedule(&g, &x, &a, &b);
        let y = reversal_map(&g, &x, &s).unwrap();
        let mut ex: Vec<usize> = x.edges.clone();
        let mut ey: Vec<usize> = y.edges.clone();
        ex.sort();
        ey.sort();
        assert_eq!(ex, ey, "steps are permuted, not changed");
        assert_eq!(schedule(&g, &y, &a, &b), s);
        assert_eq!(mixed_le(&y, &s).unwrap(), forward_le(&x));
        assert_eq!(reversal_map_inverse(&g, &y, &s).unwrap(), x);
    }
}

#[test]
fn erasures_are_simple() {
    let g = wired_grid(3).unwrap();
    let mut rng = stream(5, 1);
    for _ in 0..500 {
        let x = run_walk(&g, 0, |_, _| false, &mut rng, DEFAULT_STEP_CAP).unwrap();
        for p in [forward_le(&x), backward_le(&x)] {
            assert!(p.is_simple());
            assert_eq!(p.start(), x.start());
            assert_eq!(p.end(), x.end());
        }
    }
}

#[test]
fn two_vertex_law_is_two_thirds_one_third() {
    let g = two_vertex_graph();
    let law = laplacian_walk_law::<Exact>(&g, 0).unwrap();
    assert_eq!(law.len(), 2);
    let mut total = Exact::zero();
    for (p, w) in &law {
        if p.len() == 1 {
            assert_eq!(*w, Exact::new(2.into(), 3.into()));
        } else {
            assert_eq!(*w, Exact::new(1.into(), 3.into()));
        }
        total += w.clone();
    }
    assert!(total.is_one());
}

#[test]
fn law_sums_to_one_on_grid() {
    let g = wired_grid(3).unwrap();
    let law = laplacian_walk_law::<Exact>(&g, 4).unwrap();
    let total = law.iter().fold(Exact::zero(), |a, (_, w)| a + w.clone());
    assert!(total.is_one());
}
