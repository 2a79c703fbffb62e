use crate::model::Location;

/// Index of the location nearest the centroid (smallest index on ties).
fn central(locs: &[Location]) -> usize {
    let n = locs.len() as f64;
    let c = Location::new(
        locs.iter().map(|p| p.x).sum::<f64>() / n,
        locs.iter().map(|p| p.y).sum::<f64>() / n,
    );
    (0..locs.len())
        .min_by(|&a, &b| locs[a].distance(&c).total_cmp(&locs[b].distance(&c)).then(a.cmp(&b)))
        .unwrap_or(0)
}

/// Tunable-weight spanning tree.
///
/// Grows a tree from the vertex nearest the centroid. At each step the pair
/// (u attached, v not attached) minimising
///
/// `weight * |uv| + (1 - weight) * |u hub|`
///
/// is joined, where `hub` is the attached vertex of highest current degree
/// (smallest index on ties). `weight = 1` is Prim's algorithm; `weight = 0`
/// attaches everything to the hub. Ties go to the smallest `(v, u)`.
/// Edges are returned as `(min, max)` in insertion order.
pub fn build_twst(locs: &[Location], weight: f64) -> Vec<(usize, usize)> {
    assert!((0.0..=1.0).contains(&weight), "twst weight must be in [0, 1]");
    let n = locs.len();
    if n < 2 {
        return Vec::new();
    }
    let root = central(locs);
    let mut attached = vec![false; n];
    let mut members = vec![root];
    let mut degree = vec![0usize; n];
    attached[root] = true;
    let mut edges = Vec::with_capacity(n - 1);
    while edges.len() + 1 < n {
        let hub = *members
            .iter()
            .max_by(|&&a, &&b| degree[a].cmp(&degree[b]).then(b.cmp(&a)))
            .expect("tree is non-empty");
        let mut best: Option<(f64, usize, usize)> = None;
        for v in (0..n).filter(|&v| !attached[v]) {
            for &u in &members {
                let cost = weight * locs[u].distance(&locs[v]) + (1.0 - weight) * locs[u].distance(&locs[hub]);
                let better = match best {
                    None => true,
                    Some((c, bv, bu)) => cost < c || (cost == c && (v, u) < (bv, bu)),
                };
                if better {
                    best = Some((cost, v, u));
                }
            }
        }
        let (_, v, u) = best.expect("an unattached vertex remains");
        attached[v] = true;
        members.push(v);
        degree[u] += 1;
        degree[v] += 1;
        edges.push((u.min(v), u.max(v)));
    }
    edges
}
