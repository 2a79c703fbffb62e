use crate::model::Location;

/// Access point sites on a flat-top hexagonal lattice with circumradius
/// `coverage`, anchored at the origin.
///
/// Columns are `1.5 * coverage` apart and odd columns are shifted up by half
/// a row pitch (`sqrt(3)/2 * coverage`). Every lattice center inside the
/// closed square `[0, side]^2` is kept; the output is ordered row-major
/// (by y, then x).
pub fn place_aps(side: f64, coverage: f64) -> Vec<Location> {
    assert!(side > 0.0 && coverage > 0.0, "side and coverage must be > 0");
    let dx = 1.5 * coverage;
    let dy = 3f64.sqrt() * coverage;
    let eps = 1e-9 * side.max(coverage);
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let x = f64::from(i) * dx;
        if x > side + eps {
            break;
        }
        let y0 = if i % 2 == 1 { dy / 2.0 } else { 0.0 };
        let mut j = 0u32;
        loop {
            let y = y0 + f64::from(j) * dy;
            if y > side + eps {
                break;
            }
            out.push(Location::new(x, y));
            j += 1;
        }
        i += 1;
    }
    out.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    out
}
