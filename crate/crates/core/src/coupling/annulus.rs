use super::{mask, Frequency};
use crate::domain::{DomainSpec, Shape};
use crate::error::{invalid, Result};
use crate::lattice::{square_lattice_domain, WiredGraph};
use crate::rng::stream;
use crate::ust::{exact_tree_distribution, wilson_extend, PartialTree};
use crate::Exact;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Domain with removed regions `U'ᵢ` and inner targets `Uᵢ ⊂ U'ᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusConfig {
    pub domain: Shape,
    pub mesh: f64,
    pub removed: Vec<Shape>,
    pub targets: Vec<Shape>,
}

impl AnnulusConfig {
    pub fn graph(&self) -> Result<WiredGraph> {
        if self.removed.len() != self.targets.len() {
            return invalid("each removed region needs one target");
        }
        square_lattice_domain(&DomainSpec::new(self.domain.clone()), self.mesh)
    }

    /// Masks of `V = D ∖ ∪U'ᵢ` and of `∪Uᵢ`.
    pub fn masks(&self, g: &WiredGraph) -> (Vec<bool>, Vec<bool>) {
        let removed: Vec<Vec<bool>> = self.removed.iter().map(|s| mask(g, s)).collect();
        let targets: Vec<Vec<bool>> = self.targets.iter().map(|s| mask(g, s)).collect();
        let n = g.n_interior();
        let v = (0..n).map(|x| !removed.iter().any(|m| m[x])).collect();
        let u = (0..n).map(|x| targets.iter().any(|m| m[x])).collect();
        (v, u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusReport {
    /// Runs in which the branches from `V` avoid every `Uᵢ`.
    pub avoid: Frequency,
    pub v_size: usize,
    pub u_size: usize,
    pub parameters: serde_json::Value,
}

/// Grow the branches from every vertex of `V` and record how often they
/// avoid `∪Uᵢ`.
pub fn annulus_experiment(cfg: &AnnulusConfig, n_runs: usize, seed: u64) -> Result<AnnulusReport> {
    let g = cfg.graph()?;
    let (v_mask, u_mask) = cfg.masks(&g);
    let starts: Vec<usize> = (0..g.n_interior()).filter(|&x| v_mask[x]).collect();
    let hits: Result<Vec<bool>> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut tree = PartialTree::new(&g);
            wilson_extend(&g, &mut tree, &starts, &mut rng, false)?;
            Ok((0..g.n_interior()).all(|x| !u_mask[x] || tree.parent[x].is_none()))
        })
        .collect();
    let hits = hits?;
    Ok(AnnulusReport {
        avoid: Frequency::new(hits.iter().filter(|&&h| h).count() as u64, n_runs as u64),
        v_size: starts.len(),
        u_size: u_mask.iter().filter(|&&x| x).count(),
        parameters: serde_json::json!({ "config": cfg, "n_runs": n_runs, "seed": seed }),
    })
}

/// Exact comparison of the joint law of the tree restricted to `V` and to
/// `U` against the product of the two marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactAnnulusReport {
    pub joint_support: usize,
    pub product_support: usize,
    /// Extremes of joint/product over the joint support.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub c: f64,
    /// Product mass on pairs the joint law never produces.
    pub product_mass_outside: f64,
}

/// Restrictions are the parent edges of the vertices in each mask.
pub fn exact_annulus_ratios(g: &WiredGraph, v_mask: &[bool], u_mask: &[bool]) -> Result<ExactAnnulusReport> {
    let (trees, _) = exact_tree_distribution::<Exact>(g)?;
    let restrict = |parent: &[usize], m: &[bool]| -> Vec<usize> {
        parent.iter().enumerate().filter(|(v, _)| m[*v]).map(|(_, &e)| e).collect()
    };
    let mut joint: BTreeMap<(Vec<usize>, Vec<usize>), Exact> = BTreeMap::new();
    let mut mv: BTreeMap<Vec<usize>, Exact> = BTreeMap::new();
    let mut mu: BTreeMap<Vec<usize>, Exact> = BTreeMap::new();
    for (t, p) in trees {
        let (a, b) = (restrict(&t.parent, v_mask), restrict(&t.parent, u_mask));
        *mv.entry(a.clone()).or_insert_with(Exact::zero) += p.clone();
        *mu.entry(b.clone()).or_insert_with(Exact::zero) += p.clone();
        *joint.entry((a, b)).or_insert_with(Exact::zero) += p;
    }
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut inside = Exact::zero();
    for ((a, b), p) in &joint {
        let prod = &mv[a] * &mu[b];
        let ratio = (p / &prod).to_f64().unwrap_or(f64::NAN);
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        inside += prod;
    }
    let outside = Exact::from_integer(1.into()) - inside;
    Ok(ExactAnnulusReport {
        joint_support: joint.len(),
        product_support: mv.len() * mu.len(),
        min_ratio,
        max_ratio,
        c: max_ratio.max(1.0 / min_ratio),
        product_mass_outside: outside.to_f64().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::wired_grid;

    #[test]
    fn empty_target_gives_product() {
        let g = wired_grid(2).unwrap();
        let r = exact_annulus_ratios(&g, &[true; 4], &[false; 4]).unwrap();
        assert_eq!((r.min_ratio, r.max_ratio, r.product_mass_outside), (1.0, 1.0, 0.0));
    }

    #[test]
    fn centre_of_three_by_three() {
        let g = wired_grid(3).unwrap();
        let u: Vec<bool> = (0..9).map(|v| v == 4).collect();
        let v: Vec<bool> = u.iter().map(|x| !x).collect();
        let r = exact_annulus_ratios(&g, &v, &u).unwrap();
        assert!(r.c.is_finite() && r.c >= 1.0);
        assert!(r.product_mass_outside > 0.0 && r.product_mass_outside < 1.0);
    }
}
