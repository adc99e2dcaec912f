//! Empirical laws of restrictions, total variation, likelihood-ratio
//! reports and event-probability envelopes.

mod experiments;

pub use experiments::{
    coarse_tree_key, continuity_experiment, height_shift_experiment, perturbed_disc, sample_restrictions,
    tree_restriction_key, ContinuityConfig, ContinuityReport, ContinuityRow, HeightShiftConfig, HeightShiftReport,
    KeyMode, KeySpec, ShiftRow,
};

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;
use std::fmt;

/// Canonical encoding of a configuration restricted to a region.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionKey {
    /// Sorted oriented edges `[tail x, tail y, head x, head y]` in quarter-mesh units.
    Tree(Vec<[i64; 4]>),
    /// Sorted matched pairs `[black, white]` of doubled lattice coordinates.
    Dimer(Vec<[i64; 4]>),
    /// Face heights in millionths.
    Height(Vec<i64>),
    /// Fixed feature vector of a coarsened restriction.
    Coarse(Vec<i64>),
}

pub const HEIGHT_RESOLUTION: f64 = 1e6;

impl RestrictionKey {
    pub fn tree(mut edges: Vec<[i64; 4]>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        RestrictionKey::Tree(edges)
    }

    pub fn dimer(mut pairs: Vec<[i64; 4]>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        RestrictionKey::Dimer(pairs)
    }

    pub fn height(heights: &[f64]) -> Self {
        RestrictionKey::Height(heights.iter().map(|h| (h * HEIGHT_RESOLUTION).round() as i64).collect())
    }

    /// Height key raised by `shift` at every face; other keys are unchanged.
    pub fn shifted(&self, shift: i64) -> Self {
        match self {
            RestrictionKey::Height(h) => {
                RestrictionKey::Height(h.iter().map(|x| x + shift * HEIGHT_RESOLUTION as i64).collect())
            }
            other => other.clone(),
        }
    }
}

impl fmt::Display for RestrictionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let quads = |f: &mut fmt::Formatter<'_>, tag: &str, v: &[[i64; 4]]| {
            write!(f, "{tag}")?;
            for (i, e) in v.iter().enumerate() {
                write!(f, "{}{}:{}:{}:{}", if i == 0 { ":" } else { ";" }, e[0], e[1], e[2], e[3])?;
            }
            Ok(())
        };
        let flat = |f: &mut fmt::Formatter<'_>, tag: &str, v: &[i64]| {
            write!(f, "{tag}")?;
            for (i, x) in v.iter().enumerate() {
                write!(f, "{}{x}", if i == 0 { ":" } else { ";" })?;
            }
            Ok(())
        };
        match self {
            RestrictionKey::Tree(v) => quads(f, "tree", v),
            RestrictionKey::Dimer(v) => quads(f, "dimer", v),
            RestrictionKey::Height(v) => flat(f, "height", v),
            RestrictionKey::Coarse(v) => flat(f, "coarse", v),
        }
    }
}

/// Counts of keys; merging is associative and commutative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Empirical<K: Ord> {
    pub counts: BTreeMap<K, u64>,
    pub n: u64,
}

impl<K: Ord> Default for Empirical<K> {
    fn default() -> Self {
        Self { counts: BTreeMap::new(), n: 0 }
    }
}

impl<K: Ord + Clone> Empirical<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: K) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.n += 1;
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.n += other.n;
        self
    }

    pub fn prob(&self, key: &K) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.counts.get(key).copied().unwrap_or(0) as f64 / self.n as f64
    }

    pub fn map<L: Ord + Clone>(&self, f: impl Fn(&K) -> L) -> Empirical<L> {
        let mut out = Empirical::new();
        for (k, &c) in &self.counts {
            *out.counts.entry(f(k)).or_insert(0) += c;
        }
        out.n = self.n;
        out
    }

    pub fn to_law(&self) -> BTreeMap<K, f64> {
        self.counts.iter().map(|(k, &c)| (k.clone(), c as f64 / self.n as f64)).collect()
    }
}

impl<K: Ord + Clone> FromIterator<K> for Empirical<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut e = Empirical::new();
        for k in iter {
            e.push(k);
        }
        e
    }
}

/// `½ Σ |P − Q|` over the union of supports.
pub fn tv_distance<K: Ord + Clone>(p: &Empirical<K>, q: &Empirical<K>) -> f64 {
    law_tv(&p.to_law(), &q.to_law())
}

pub fn law_tv<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut s = 0.0;
    for (k, a) in p {
        s += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            s += b.abs();
        }
    }
    s / 2.0
}

/// Scale of the sampling noise of [`tv_distance`]: half the summed
/// binomial standard errors of the two laws.
pub fn tv_noise<K: Ord + Clone>(p: &Empirical<K>, q: &Empirical<K>) -> f64 {
    let var = |e: &Empirical<K>, k: &K| {
        let x = e.prob(k);
        x * (1.0 - x) / e.n.max(1) as f64
    };
    let keys: std::collections::BTreeSet<&K> = p.counts.keys().chain(q.counts.keys()).collect();
    keys.into_iter().map(|k| (var(p, k) + var(q, k)).sqrt()).sum::<f64>() / 2.0
}

pub fn default_c_grid() -> Vec<f64> {
    vec![1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0, 1000.0]
}

pub const DEFAULT_SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRatio {
    pub key: String,
    pub count1: f64,
    pub count2: f64,
    /// Smoothed ratio; `+∞` when the key is unseen under the second law
    /// without smoothing.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapturedMass {
    pub c: f64,
    pub nu1: f64,
    pub nu2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnReport {
    pub smoothing: f64,
    pub n1: f64,
    pub n2: f64,
    pub support: usize,
    pub ratios: Vec<KeyRatio>,
    /// Mass of each empirical law on keys with ratio in `[1/C, C]`.
    pub captured: Vec<CapturedMass>,
    /// Quantiles of the log ratio under the first law.
    pub log_ratio_quantiles: Vec<(f64, f64)>,
}

impl RnReport {
    /// Smallest `C` of the grid capturing at least `mass` of the first law.
    pub fn min_c(&self, mass: f64) -> Option<f64> {
        self.captured.iter().find(|c| c.nu1 >= mass).map(|c| c.c)
    }

    pub fn captured_at(&self, c: f64) -> Option<CapturedMass> {
        self.captured.iter().find(|m| m.c == c).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,count1,count2,ratio\n");
        for r in &self.ratios {
            s.push_str(&format!("{},{},{},{:e}\n", r.key, r.count1, r.count2, r.ratio));
        }
        s
    }

    pub fn captured_csv(&self) -> String {
        let mut s = String::from("c,nu1,nu2\n");
        for m in &self.captured {
            s.push_str(&format!("{},{:.12},{:.12}\n", m.c, m.nu1, m.nu2));
        }
        s
    }
}

/// Ratio report between two samples: per key
/// `(c₁ + s)/(n₁ + sK) ÷ (c₂ + s)/(n₂ + sK)` over the union support of size `K`.
pub fn rn_report<K: Ord + Clone + fmt::Display>(
    p: &Empirical<K>,
    q: &Empirical<K>,
    smoothing: f64,
    c_grid: &[f64],
) -> Result<RnReport> {
    if p.n == 0 || q.n == 0 {
        return invalid("both samples must be nonempty");
    }
    let w = |e: &Empirical<K>| e.counts.iter().map(|(k, &c)| (k.clone(), c as f64)).collect::<BTreeMap<K, f64>>();
    weighted_report(&w(p), p.n as f64, &w(q), q.n as f64, smoothing, c_grid)
}

/// Ratio report between two exact laws, without smoothing.
pub fn rn_report_exact<K: Ord + Clone + fmt::Display>(
    p: &BTreeMap<K, f64>,
    q: &BTreeMap<K, f64>,
    c_grid: &[f64],
) -> Result<RnReport> {
    let (n1, n2) = (p.values().sum::<f64>(), q.values().sum::<f64>());
    if !(n1 > 0.0 && n2 > 0.0) {
        return invalid("both laws must have positive mass");
    }
    weighted_report(p, n1, q, n2, 0.0, c_grid)
}

fn weighted_report<K: Ord + Clone + fmt::Display>(
    p: &BTreeMap<K, f64>,
    n1: f64,
    q: &BTreeMap<K, f64>,
    n2: f64,
    s: f64,
    c_grid: &[f64],
) -> Result<RnReport> {
    if !(s >= 0.0) {
        return invalid("smoothing must be nonnegative");
    }
    if c_grid.iter().any(|c| !(*c >= 1.0)) {
        return invalid("every C must be at least 1");
    }
    let mut keys: Vec<&K> = p.keys().chain(q.keys()).collect();
    keys.sort();
    keys.dedup();
    let k = keys.len() as f64;
    let mut ratios = Vec::with_capacity(keys.len());
    for key in keys {
        let c1 = p.get(key).copied().unwrap_or(0.0);
        let c2 = q.get(key).copied().unwrap_or(0.0);
        let a = (c1 + s) / (n1 + s * k);
        let b = (c2 + s) / (n2 + s * k);
        let ratio = if b > 0.0 { a / b } else { f64::INFINITY };
        ratios.push(KeyRatio { key: key.to_string(), count1: c1, count2: c2, ratio });
    }
    let tol = 1e-12;
    let mut grid = c_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let captured = grid
        .iter()
        .map(|&c| {
            let inside = |r: f64| r.is_finite() && r >= (1.0 - tol) / c && r <= c * (1.0 + tol);
            let (mut m1, mut m2) = (0.0, 0.0);
            for r in &ratios {
                if inside(r.ratio) {
                    m1 += r.count1 / n1;
                    m2 += r.count2 / n2;
                }
            }
            CapturedMass { c, nu1: m1.min(1.0), nu2: m2.min(1.0) }
        })
        .collect();
    let mut logs: Vec<(f64, f64)> =
        ratios.iter().filter(|r| r.count1 > 0.0).map(|r| (r.ratio.ln(), r.count1 / n1)).collect();
    logs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let log_ratio_quantiles = [0.05, 0.25, 0.5, 0.75, 0.95]
        .iter()
        .map(|&t| {
            let mut acc = 0.0;
            let v = logs.iter().find(|(_, w)| {
                acc += w;
                acc >= t - 1e-12
            });
            (t, v.or(logs.last()).map_or(f64::NAN, |x| x.0))
        })
        .collect();
    Ok(RnReport { smoothing: s, n1, n2, support: ratios.len(), ratios, captured, log_ratio_quantiles })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPair {
    pub name: String,
    pub p1: f64,
    pub p2: f64,
    /// Nondecreasing upper envelope `f(p1) = max{p2 : p1' ≤ p1}`.
    pub upper: f64,
    /// Nondecreasing lower envelope `g(p1) = min{p2 : p1' ≥ p1}`.
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBoundReport {
    /// Sorted by `p1`.
    pub pairs: Vec<EventPair>,
}

impl EventBoundReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("event,p1,p2,lower,upper\n");
        for e in &self.pairs {
            s.push_str(&format!("{},{:.12},{:.12},{:.12},{:.12}\n", e.name, e.p1, e.p2, e.lower, e.upper));
        }
        s
    }
}

pub type KeyEvent<'a, K> = (&'a str, &'a dyn Fn(&K) -> bool);

/// Probabilities of each event under both laws, with monotone envelopes.
pub fn event_bound_check<K: Ord + Clone>(p: &Empirical<K>, q: &Empirical<K>, events: &[KeyEvent<K>]) -> EventBoundReport {
    let mass = |e: &Empirical<K>, f: &dyn Fn(&K) -> bool| {
        if e.n == 0 {
            return 0.0;
        }
        e.counts.iter().filter(|(k, _)| f(k)).map(|(_, &c)| c).sum::<u64>() as f64 / e.n as f64
    };
    let mut pairs: Vec<EventPair> = events
        .iter()
        .map(|(name, f)| {
            let (p1, p2) = (mass(p, f), mass(q, f));
            EventPair { name: name.to_string(), p1, p2, upper: p2, lower: p2 }
        })
        .collect();
    pairs.sort_by(|a, b| a.p1.total_cmp(&b.p1).then(a.p2.total_cmp(&b.p2)));
    let mut hi = f64::NEG_INFINITY;
    for i in 0..pairs.len() {
        hi = hi.max(pairs[i].p2);
        let j = pairs[i..].iter().take_while(|e| e.p1 == pairs[i].p1).count();
        pairs[i].upper = pairs[i..i + j].iter().map(|e| e.p2).fold(hi, f64::max);
    }
    let mut lo = f64::INFINITY;
    for i in (0..pairs.len()).rev() {
        lo = lo.min(pairs[i].p2);
        let j = pairs[..=i].iter().rev().take_while(|e| e.p1 == pairs[i].p1).count();
        pairs[i].lower = pairs[i + 1 - j..=i].iter().map(|e| e.p2).fold(lo, f64::min);
    }
    EventBoundReport { pairs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of counts against cell probabilities.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return invalid("need matching observed and expected cells, at least two");
    }
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return Ok(ChiSquare { statistic: f64::INFINITY, dof: observed.len() - 1, p_value: 0.0 });
            }
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| crate::Error::Numeric(e.to_string()))?;
    Ok(ChiSquare { statistic: stat, dof, p_value: 1.0 - dist.cdf(stat) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emp(xs: &[&'static str]) -> Empirical<&'static str> {
        xs.iter().copied().collect()
    }

    #[test]
    fn tv_small_cases() {
        assert_eq!(tv_distance(&emp(&["a", "b"]), &emp(&["a"])), 0.5);
        assert_eq!(tv_distance(&emp(&["a", "b"]), &emp(&["b", "a"])), 0.0);
        assert_eq!(tv_distance(&emp(&["a"]), &emp(&["b"])), 1.0);
    }

    #[test]
    fn captured_mass_from_closed_form_ratios() {
        let p: BTreeMap<&str, f64> = [("A", 0.5), ("B", 0.5)].into();
        let q: BTreeMap<&str, f64> = [("A", 0.75), ("B", 0.25)].into();
        let r = rn_report_exact(&p, &q, &[1.5, 2.0]).unwrap();
        assert_eq!(r.captured_at(2.0).unwrap().nu1, 1.0);
        assert_eq!(r.captured_at(1.5).unwrap().nu1, 0.5);
        assert_eq!(r.ratios.iter().map(|x| x.ratio).collect::<Vec<_>>(), vec![2.0 / 3.0, 2.0]);
    }

    #[test]
    fn unseen_key_gets_infinite_ratio() {
        let r = rn_report(&emp(&["a", "b"]), &emp(&["a"]), 0.0, &[2.0, 1000.0]).unwrap();
        assert_eq!(r.ratios[1].ratio, f64::INFINITY);
        assert_eq!(r.captured_at(1000.0).unwrap().nu1, 0.5);
        assert!(rn_report(&emp(&["a"]), &Empirical::new(), 0.5, &[2.0]).is_err());
    }

    #[test]
    fn event_pairs_at_extremes() {
        let (p, q) = (emp(&["a", "b", "b"]), emp(&["a", "a", "b"]));
        let all = |_: &&str| true;
        let none = |_: &&str| false;
        let r = event_bound_check(&p, &q, &[("all", &all), ("none", &none)]);
        assert_eq!((r.pairs[0].p1, r.pairs[0].p2), (0.0, 0.0));
        assert_eq!((r.pairs[1].p1, r.pairs[1].p2), (1.0, 1.0));
    }

    #[test]
    fn chi_square_perfect_fit() {
        let c = chi_square(&[25, 25, 50], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        assert_eq!(chi_square(&[1, 1], &[1.0, 0.0]).unwrap().p_value, 0.0);
    }
}
