use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Location;

/// Mixture weights for picking extra links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkWeights {
    /// Favour short links.
    pub distance: f64,
    /// Favour links between high-degree vertices.
    pub preferential: f64,
    /// Uniform over candidates.
    pub uniform: f64,
}

impl LinkWeights {
    fn validate(&self) -> Result<()> {
        let w = [self.distance, self.preferential, self.uniform];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Param("link weights must be >= 0 with a positive sum".into()));
        }
        Ok(())
    }
}

/// Adds `budget` extra links to `edges`, one at a time.
///
/// Each candidate (any non-adjacent pair) gets the score
/// `w1 * p_dist + w2 * p_pref + w3 / M`, where `p_dist` is proportional to
/// `1/distance`, `p_pref` to `deg(u) * deg(v)`, and `M` is the number of
/// candidates. Each term is normalised over the candidates so the weights
/// mix probability distributions. Stops early once the graph is complete.
pub fn add_links<R: Rng + ?Sized>(
    locs: &[Location],
    edges: &[(usize, usize)],
    weights: LinkWeights,
    budget: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    weights.validate()?;
    let n = locs.len();
    let mut out = edges.to_vec();
    let mut present: BTreeSet<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut degree = vec![0usize; n];
    for &(a, b) in &present {
        degree[a] += 1;
        degree[b] += 1;
    }
    for _ in 0..budget {
        let cands: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|p| !present.contains(p))
            .collect();
        if cands.is_empty() {
            log::warn!("graph is complete; {} extra links not added", budget - (out.len() - edges.len()));
            break;
        }
        let inv: Vec<f64> = cands
            .iter()
            .map(|&(a, b)| 1.0 / locs[a].distance(&locs[b]).max(1e-9))
            .collect();
        let pref: Vec<f64> = cands.iter().map(|&(a, b)| (degree[a] * degree[b]) as f64).collect();
        let (sum_inv, sum_pref) = (inv.iter().sum::<f64>(), pref.iter().sum::<f64>());
        let m = cands.len() as f64;
        let score: Vec<f64> = (0..cands.len())
            .map(|i| {
                let pd = inv[i] / sum_inv;
                let pp = if sum_pref > 0.0 { pref[i] / sum_pref } else { 1.0 / m };
                weights.distance * pd + weights.preferential * pp + weights.uniform / m
            })
            .collect();
        let pick = WeightedIndex::new(&score)
            .map_err(|e| Error::Param(format!("link sampling: {e}")))?
            .sample(rng);
        let (a, b) = cands[pick];
        present.insert((a, b));
        degree[a] += 1;
        degree[b] += 1;
        out.push((a, b));
    }
    Ok(out)
}
