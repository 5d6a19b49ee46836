//! Binary-relevance ranking metrics. Both return `None` for empty targets so
//! the caller can skip the user instead of counting a zero.

/// `targets` must be sorted ascending.
fn contains(targets: &[u32], item: u32) -> bool {
    targets.binary_search(&item).is_ok()
}

/// nDCG@k with gains in {0, 1} and discount `1 / log₂(pos + 1)` for 1-based positions.
pub fn ndcg_at_k(ranked: &[u32], targets: &[u32], k: usize) -> Option<f64> {
    if targets.is_empty() {
        return None;
    }
    debug_assert!(targets.windows(2).all(|w| w[0] < w[1]));
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &item)| contains(targets, item))
        .map(|(pos, _)| discount(pos))
        .fold(0.0, |a, b| a + b);
    let idcg: f64 = (0..targets.len().min(k)).map(discount).sum();
    Some(if idcg > 0.0 { dcg / idcg } else { 0.0 })
}

/// `|top-k ∩ targets| / min(|targets|, k)`.
pub fn recall_at_k(ranked: &[u32], targets: &[u32], k: usize) -> Option<f64> {
    if targets.is_empty() {
        return None;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|&&item| contains(targets, item))
        .count();
    let denom = targets.len().min(k);
    Some(if denom > 0 { hits as f64 / denom as f64 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[5, 1, 2], &[5], 10), Some(1.0));
        let second = ndcg_at_k(&[1, 5, 2], &[5], 10).unwrap();
        assert!((second - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((second - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[1, 2, 3, 5], &[5], 3), Some(0.0));
        assert_eq!(ndcg_at_k(&[1, 2], &[], 3), None);
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall_at_k(&[3, 1, 2], &[1, 3], 3), Some(1.0));
        assert_eq!(recall_at_k(&[4, 5], &[1, 3], 2), Some(0.0));
        assert_eq!(recall_at_k(&[1, 4, 5], &[1, 3], 3), Some(0.5));
        assert_eq!(recall_at_k(&[1], &[], 3), None);
    }
}
