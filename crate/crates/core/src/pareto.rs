//! Cost/accuracy Pareto frontier.

/// A point dominates another when it costs no more, scores no less, and is
/// strictly better on at least one of the two.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 >= b.1 && (a.0 < b.0 || a.1 > b.1)
}

/// Indices of the non-dominated points, ordered by ascending cost (ties by
/// descending accuracy, then index). Exact duplicates are all kept.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .total_cmp(&points[j].0)
            .then(points[j].1.total_cmp(&points[i].1))
            .then(i.cmp(&j))
    });
    let mut kept: Vec<usize> = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for i in order {
        let p = points[i];
        let keep = match best {
            None => true,
            Some(b) => p.1 > b.1 || p == b,
        };
        if keep {
            kept.push(i);
            best = Some(p);
        }
    }
    kept
}

/// The non-dominated subset of `(cost, accuracy)` points, sorted by ascending cost.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    pareto_indices(points).into_iter().map(|i| points[i]).collect()
}
