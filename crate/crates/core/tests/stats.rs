use proptest::prelude::*;
use std::collections::BTreeMap;
use wired_ust::lattice::wired_grid;
use wired_ust::rng::stream;
use wired_ust::stats::*;
use wired_ust::ust::{exact_tree_distribution, wilson, StartOrder};
use wired_ust::{Point, Shape};

fn emp(xs: &[u8]) -> Empirical<u8> {
    xs.iter().copied().collect()
}

proptest! {
    #[test]
    fn tv_is_a_metric(a in prop::collection::vec(0u8..6, 1..40), b in prop::collection::vec(0u8..6, 1..40), c in prop::collection::vec(0u8..6, 1..40)) {
        let (a, b, c) = (emp(&a), emp(&b), emp(&c));
        let ab = tv_distance(&a, &b);
        prop_assert!((ab - tv_distance(&b, &a)).abs() < 1e-15);
        prop_assert!(ab <= tv_distance(&a, &c) + tv_distance(&c, &b) + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert_eq!(tv_distance(&a, &a), 0.0);
    }

    #[test]
    fn captured_mass_is_monotone(a in prop::collection::vec(0u8..8, 1..60), b in prop::collection::vec(0u8..8, 1..60), s in 0.0f64..2.0) {
        let r = rn_report(&emp(&a), &emp(&b), s, &default_c_grid()).unwrap();
        for w in r.captured.windows(2) {
            prop_assert!(w[0].nu1 <= w[1].nu1 + 1e-12 && w[0].nu2 <= w[1].nu2 + 1e-12);
        }
        for m in &r.captured {
            prop_assert!((0.0..=1.0).contains(&m.nu1) && (0.0..=1.0).contains(&m.nu2));
        }
    }
}

#[test]
fn exact_tree_law_against_itself() {
    let g = wired_grid(2).unwrap();
    let (trees, _) = exact_tree_distribution::<f64>(&g).unwrap();
    let all = vec![true; g.n_interior()];
    let law: BTreeMap<RestrictionKey, f64> = trees
        .iter()
        .map(|(t, p)| {
            let parent: Vec<Option<usize>> = t.parent.iter().map(|&e| Some(e)).collect();
            (tree_restriction_key(&g, &parent, &all).unwrap(), *p)
        })
        .collect();
    assert_eq!(law.len(), trees.len());
    let r = rn_report_exact(&law, &law, &[1.0 + 1e-9]).unwrap();
    assert_eq!(r.captured[0].nu1, 1.0);
    assert_eq!(r.captured[0].nu2, 1.0);
}

#[test]
fn same_law_samples_are_captured_at_two() {
    let g = wired_grid(2).unwrap();
    let draw = |seed: u64| -> Empirical<Vec<usize>> {
        (0..20_000)
            .map(|i| {
                let mut rng = stream(seed, i);
                wilson(&g, &StartOrder::RowMajor, &mut rng, false).unwrap().0.key()
            })
            .collect()
    };
    let (a, b) = (draw(1), draw(2));
    let show = |e: &Empirical<Vec<usize>>| e.map(|k| format!("{k:?}"));
    let r = rn_report(&show(&a), &show(&b), DEFAULT_SMOOTHING, &[2.0]).unwrap();
    let m = r.captured[0].nu1;
    let sigma = (m * (1.0 - m) / 20_000.0).sqrt().max(1.0 / 20_000.0);
    assert!(1.0 - m <= 3.0 * sigma, "captured {m}");
}

#[test]
fn nested_events_give_monotone_pairs() {
    let (p, q) = (emp(&[0, 1, 2, 3, 3, 4, 5]), emp(&[0, 0, 2, 2, 4, 5, 5]));
    let below: Vec<Box<dyn Fn(&u8) -> bool>> = (0..7u8).map(|t| Box::new(move |k: &u8| *k < t) as Box<dyn Fn(&u8) -> bool>).collect();
    let names: Vec<String> = (0..7).map(|t| format!("below{t}")).collect();
    let events: Vec<KeyEvent<u8>> = names.iter().zip(&below).map(|(n, f)| (n.as_str(), f.as_ref())).collect();
    let r = event_bound_check(&p, &q, &events);
    for w in r.pairs.windows(2) {
        assert!(w[0].p1 <= w[1].p1 && w[0].p2 <= w[1].p2);
        assert!(w[0].upper <= w[1].upper && w[0].lower <= w[1].lower);
    }
    for e in &r.pairs {
        assert!(e.lower <= e.p2 && e.p2 <= e.upper);
    }
}

#[test]
fn unperturbed_domain_is_within_noise() {
    let cfg = ContinuityConfig {
        center: Point::new(0.0, 0.0),
        radius: 1.0,
        u_radius: 0.3,
        perturbations: vec![0.0],
        lobes: 3,
        radii: vec![],
        mesh: 1.0 / 8.0,
        n_samples: 4000,
        mode: KeyMode::Coarse,
    };
    let r = continuity_experiment(&cfg, 4).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.rows[0].tv < 2.0 * r.rows[0].noise, "{:?}", r.rows[0]);
    assert_eq!(continuity_experiment(&cfg, 4).unwrap(), r);
}

#[test]
fn zero_shift_ratios_are_one() {
    let cfg = HeightShiftConfig {
        width: 1.0,
        height: 1.0,
        mesh: 1.0 / 4.0,
        u: Shape::Disc { center: Point::new(0.5, 0.5), radius: 0.2 },
        shifts: vec![0, 1],
        n_samples: 500,
        smoothing: DEFAULT_SMOOTHING,
        c_grid: None,
        stratum_min: 30,
    };
    let r = height_shift_experiment(&cfg, 2).unwrap();
    assert!(r.rows[0].report.ratios.iter().all(|x| x.ratio == 1.0));
    assert!(r.rows[0].stratified.iter().all(|&(_, m)| m == 1.0 || r.rows[0].strata == 0));
    assert!(r.rows[1].report.captured.iter().all(|m| m.nu1 <= 1.0));
    assert_eq!(height_shift_experiment(&cfg, 2).unwrap(), r);
}
