//! Closed-form EASE, row-pruned EASE and item popularity.

use crate::evalkit::{validation_ndcg, Scorer, Validation};
use crate::interactions::InteractionMatrix;
use crate::linalg::CsrMatrix;
use crate::sparsifier::top_k_abs;
use crate::{Error, Result};

/// Item-to-item weights `B` with an exactly zero diagonal.
///
/// Held in double precision; conversion to single precision happens when the
/// weights are pruned or written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct EaseWeights {
    n: usize,
    weights: Vec<f64>,
    pub lambda: f64,
}

impl EaseWeights {
    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// All nonzero weights in single precision.
    pub fn to_csr(&self) -> CsrMatrix {
        prune_rows(self, self.n.max(1)).expect("k >= 1")
    }
}

/// Cholesky factor `L` (lower, row-major) of a symmetric positive-definite matrix.
fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a[j * n + j];
        for p in 0..j {
            diag -= l[j * n + p] * l[j * n + p];
        }
        if diag.is_nan() || diag <= 0.0 || !diag.is_finite() {
            return Err(Error::Singular { pivot: j });
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

/// `A⁻¹` from the Cholesky factor, one column at a time.
fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    let mut y = vec![0.0; n];
    for c in 0..n {
        // L y = e_c
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for p in 0..i {
                s -= l[i * n + p] * y[p];
            }
            y[i] = s / l[i * n + i];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..n {
                s -= l[p * n + i] * inv[p * n + c];
            }
            inv[i * n + c] = s / l[i * n + i];
        }
    }
    inv
}

/// `P = (XᵀX + λI)⁻¹`, `B = I − P · diag(1 ⊘ diag(P))`.
pub fn ease_fit(x: &InteractionMatrix, lambda: f64) -> Result<EaseWeights> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    let n = x.n_items();
    let mut gram = vec![0.0f64; n * n];
    for row in x.iter_rows() {
        for &i in row {
            for &j in row {
                gram[i as usize * n + j as usize] += 1.0;
            }
        }
    }
    for i in 0..n {
        gram[i * n + i] += lambda;
    }
    let p = cholesky_inverse(&cholesky(&gram, n)?, n);
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                weights[i * n + j] = -p[i * n + j] / p[j * n + j];
            }
        }
    }
    Ok(EaseWeights { n, weights, lambda })
}

/// Keeps the `k` largest-magnitude weights of each row (same tie rule as the
/// embedding mask), drops exact zeros, no renormalization.
pub fn prune_rows(b: &EaseWeights, k: usize) -> Result<CsrMatrix> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let rows = (0..b.n)
        .map(|i| {
            let row = b.row(i);
            top_k_abs(row, k)
                .into_iter()
                .map(|j| (j, row[j as usize] as f32))
                .filter(|&(_, v)| v != 0.0)
                .unzip()
        })
        .collect();
    CsrMatrix::from_sparse_rows(b.n, rows)
}

fn check_items(items: &[u32], n: usize) -> Result<()> {
    match items.iter().find(|&&i| i as usize >= n) {
        Some(&bad) => Err(Error::IndexOutOfRange {
            index: bad as usize,
            bound: n,
        }),
        None => Ok(()),
    }
}

/// `r̂ = xᵀB`: the sum of the rows of `B` indexed by `items`.
pub fn ease_predict(items: &[u32], b: &EaseWeights) -> Result<Vec<f32>> {
    check_items(items, b.n)?;
    let mut acc = vec![0.0f64; b.n];
    for &i in items {
        acc.iter_mut().zip(b.row(i as usize)).for_each(|(a, &w)| *a += w);
    }
    Ok(acc.into_iter().map(|v| v as f32).collect())
}

/// Same scoring rule on a pruned (sparse) weight matrix.
pub fn ease_predict_sparse(items: &[u32], b: &CsrMatrix) -> Result<Vec<f32>> {
    check_items(items, b.rows())?;
    let mut acc = vec![0.0f64; b.cols()];
    for &i in items {
        let (idx, val) = b.row(i as usize);
        for (&j, &v) in idx.iter().zip(val) {
            acc[j as usize] += f64::from(v);
        }
    }
    Ok(acc.into_iter().map(|v| v as f32).collect())
}

impl Scorer for EaseWeights {
    fn n_items(&self) -> usize {
        self.n
    }

    fn score(&self, items: &[u32]) -> Result<Vec<f32>> {
        ease_predict(items, self)
    }
}

/// Row-pruned EASE weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedEase {
    pub weights: CsrMatrix,
    pub k: usize,
}

impl PrunedEase {
    pub fn new(b: &EaseWeights, k: usize) -> Result<Self> {
        Ok(Self {
            weights: prune_rows(b, k)?,
            k,
        })
    }
}

impl Scorer for PrunedEase {
    fn n_items(&self) -> usize {
        self.weights.rows()
    }

    fn score(&self, items: &[u32]) -> Result<Vec<f32>> {
        ease_predict_sparse(items, &self.weights)
    }
}

/// Interaction count of every item.
pub fn popularity_scores(x_train: &InteractionMatrix) -> Vec<f32> {
    x_train.item_counts().into_iter().map(|c| c as f32).collect()
}

/// Recommends by global popularity regardless of the user.
#[derive(Debug, Clone, PartialEq)]
pub struct Popularity {
    pub scores: Vec<f32>,
}

impl Popularity {
    pub fn fit(x_train: &InteractionMatrix) -> Self {
        Self {
            scores: popularity_scores(x_train),
        }
    }
}

impl Scorer for Popularity {
    fn n_items(&self) -> usize {
        self.scores.len()
    }

    fn score(&self, items: &[u32]) -> Result<Vec<f32>> {
        check_items(items, self.scores.len())?;
        Ok(self.scores.clone())
    }
}

/// Ridge strengths tried when none is given.
pub const LAMBDA_GRID: [f64; 5] = [1.0, 10.0, 100.0, 500.0, 1000.0];

/// Fits EASE for every λ in `grid` and keeps the best by validation nDCG.
/// Ties go to the earlier grid entry.
pub fn select_lambda(
    x_train: &InteractionMatrix,
    validation: &Validation<'_>,
    grid: &[f64],
) -> Result<(EaseWeights, f64)> {
    let mut best: Option<(EaseWeights, f64)> = None;
    for &lambda in grid {
        let fit = ease_fit(x_train, lambda)?;
        let score = validation_ndcg(&fit, validation)?;
        log::debug!("EASE lambda {lambda}: validation nDCG {score:.4}");
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((fit, score));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty lambda grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> InteractionMatrix {
        InteractionMatrix::try_from_rows(3, &[vec![1], vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap()
    }

    #[test]
    fn diagonal_is_exactly_zero() {
        let b = ease_fit(&toy(), 0.7).unwrap();
        for i in 0..3 {
            assert_eq!(b.get(i, i), 0.0);
        }
    }

    #[test]
    fn huge_lambda_shrinks_weights() {
        let b = ease_fit(&toy(), 1e9).unwrap();
        assert!(b.as_slice().iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(ease_fit(&toy(), 0.0).is_err());
        assert!(ease_fit(&toy(), f64::NAN).is_err());
    }

    #[test]
    fn cholesky_inverse_of_known_matrix() {
        // [[4, 2], [2, 3]]⁻¹ = 1/8 · [[3, −2], [−2, 4]]
        let inv = cholesky_inverse(&cholesky(&[4.0, 2.0, 2.0, 3.0], 2).unwrap(), 2);
        let want = [0.375, -0.25, -0.25, 0.5];
        for (a, b) in inv.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(matches!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2), Err(Error::Singular { pivot: 1 })));
    }

    #[test]
    fn pruning_keeps_largest_magnitudes() {
        let b = EaseWeights {
            n: 3,
            weights: vec![0.0, 0.5, -0.9, 0.2, 0.0, 0.2, 0.1, 0.0, 0.0],
            lambda: 1.0,
        };
        let p = prune_rows(&b, 1).unwrap();
        assert_eq!(p.row(0), (&[2u32][..], &[-0.9f32][..]));
        // tie at 0.2 goes to the lower column
        assert_eq!(p.row(1).0, &[0]);
        let full = prune_rows(&b, 3).unwrap();
        // exact zeros are dropped
        assert_eq!(full.nnz(), 5);
        assert!((0..3).all(|i| p.row_nnz(i) <= 1));
    }

    #[test]
    fn pruned_with_k_equal_n_matches_dense_predictions() {
        let b = ease_fit(&toy(), 2.0).unwrap();
        let pruned = PrunedEase::new(&b, 3).unwrap();
        for items in [&[0u32][..], &[1, 2], &[0, 1, 2]] {
            assert_eq!(ease_predict(items, &b).unwrap(), pruned.score(items).unwrap());
        }
    }

    #[test]
    fn prediction_edge_cases() {
        let b = ease_fit(&toy(), 2.0).unwrap();
        assert_eq!(ease_predict(&[], &b).unwrap(), vec![0.0; 3]);
        assert!(ease_predict(&[3], &b).is_err());
        let zero = EaseWeights {
            n: 2,
            weights: vec![0.0; 4],
            lambda: 1.0,
        };
        assert_eq!(ease_predict(&[0, 1], &zero).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn popularity_counts() {
        let p = popularity_scores(&toy());
        assert_eq!(p, vec![2.0, 3.0, 2.0]);
        let uniform = InteractionMatrix::try_from_rows(2, &[vec![0, 1], vec![0, 1]]).unwrap();
        assert_eq!(popularity_scores(&uniform), vec![2.0, 2.0]);
    }
}
