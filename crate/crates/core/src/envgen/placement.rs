use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

/// Picks `count` distinct vertices, each draw with probability proportional
/// to degree among the vertices not yet picked (uniform if all remaining
/// degrees are zero). Returned in ascending order.
pub fn place_servers<R: Rng + ?Sized>(degrees: &[usize], count: usize, rng: &mut R) -> Vec<usize> {
    assert!(count <= degrees.len(), "more servers than access points");
    let mut remaining: Vec<usize> = (0..degrees.len()).collect();
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count {
        let w: Vec<f64> = remaining.iter().map(|&v| degrees[v] as f64).collect();
        let i = match WeightedIndex::new(&w) {
            Ok(d) => d.sample(rng),
            Err(_) => rng.random_range(0..remaining.len()),
        };
        picked.push(remaining.remove(i));
    }
    picked.sort_unstable();
    picked
}
