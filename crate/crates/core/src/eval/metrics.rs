/// Sorts candidates by descending score, ties by ascending item id.
pub fn rank_candidates(scored: &[(usize, f64)]) -> Vec<usize> {
    let mut order = scored.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(item, _)| item).collect()
}

fn hits_in_top(ranked: &[usize], positives: &[usize], n: usize) -> usize {
    ranked
        .iter()
        .take(n)
        .filter(|i| positives.contains(i))
        .count()
}

/// |top-N ∩ positives| / |positives|; 0 for an empty positive set.
pub fn hit_ratio_at_n(ranked: &[usize], positives: &[usize], n: usize) -> f64 {
    if positives.is_empty() {
        return 0.0;
    }
    hits_in_top(ranked, positives, n) as f64 / positives.len() as f64
}

/// Binary-gain DCG@N normalized by the ideal DCG of `min(|positives|, N)`
/// hits; 0 for an empty positive set or N = 0.
pub fn ndcg_at_n(ranked: &[usize], positives: &[usize], n: usize) -> f64 {
    let ideal_hits = positives.len().min(n);
    if ideal_hits == 0 {
        return 0.0;
    }
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(n)
        .enumerate()
        .filter(|(_, i)| positives.contains(i))
        .map(|(r, _)| discount(r + 1))
        .sum();
    let idcg: f64 = (1..=ideal_hits).map(discount).sum();
    dcg / idcg
}
