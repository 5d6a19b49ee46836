//! Serving from sparse embeddings.
//!
//! The engine holds `Āₛ` twice: row-oriented for the embedding pass
//! (`z = Σ_{i∈x} āᵢ`, touching `|x|·k` entries) and column-oriented for the
//! de-embedding pass (`r̂ = Āₛz`, scattering only the latent columns where
//! `z` is nonzero). Column lists double as an inverted index from latent
//! dimension to items.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::evalkit::Scorer;
use crate::linalg::{CscMatrix, CsrMatrix, Triplet};
use crate::{Error, Result};

/// Allowed deviation of a nonzero row norm from 1 when building an engine.
pub const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SparseInferenceEngine {
    embed: CsrMatrix,
    deembed: CscMatrix,
    k: usize,
}

impl SparseInferenceEngine {
    pub fn build(a_bar_s: CsrMatrix) -> Result<Self> {
        for i in 0..a_bar_s.rows() {
            if a_bar_s.row_nnz(i) == 0 {
                continue;
            }
            let norm = a_bar_s.row_norm(i);
            if norm == 0.0 {
                continue;
            }
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Unnormalized { row: i, norm });
            }
        }
        let deembed = a_bar_s.to_csc();
        let mut by_column: Vec<Triplet> = deembed.triplets();
        by_column.sort_by_key(|&(i, j, _)| (i, j));
        if by_column != a_bar_s.triplets() {
            return Err(Error::InvalidStructure(
                "row and column layouts disagree".into(),
            ));
        }
        if a_bar_s.nnz() == 0 {
            log::warn!("every embedding row is empty; all scores will be zero");
        }
        let k = a_bar_s.max_row_nnz();
        Ok(Self {
            embed: a_bar_s,
            deembed,
            k,
        })
    }

    pub fn n_items(&self) -> usize {
        self.embed.rows()
    }

    pub fn d(&self) -> usize {
        self.embed.cols()
    }

    /// Largest number of nonzeros in any item row.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn embed_layout(&self) -> &CsrMatrix {
        &self.embed
    }

    pub fn deembed_layout(&self) -> &CscMatrix {
        &self.deembed
    }

    fn dedup(&self, items: &[u32]) -> Result<Vec<u32>> {
        let n = self.n_items();
        if let Some(&bad) = items.iter().find(|&&i| i as usize >= n) {
            return Err(Error::IndexOutOfRange {
                index: bad as usize,
                bound: n,
            });
        }
        let mut items = items.to_vec();
        items.sort_unstable();
        items.dedup();
        Ok(items)
    }

    fn embed_counted(&self, items: &[u32]) -> (Vec<f64>, usize) {
        let mut z = vec![0.0f64; self.d()];
        let mut macs = 0;
        for &i in items {
            let (idx, val) = self.embed.row(i as usize);
            for (&j, &v) in idx.iter().zip(val) {
                z[j as usize] += f64::from(v);
            }
            macs += idx.len();
        }
        (z, macs)
    }

    /// User latent vector `xᵀĀₛ`.
    pub fn embed(&self, items: &[u32]) -> Result<Vec<f32>> {
        let items = self.dedup(items)?;
        Ok(self.embed_counted(&items).0.into_iter().map(|v| v as f32).collect())
    }

    /// Scores plus the number of multiply-accumulates performed.
    pub fn infer_scores_counted(&self, items: &[u32]) -> Result<(Vec<f32>, usize)> {
        let items = self.dedup(items)?;
        let (z, mut macs) = self.embed_counted(&items);
        let mut scores = vec![0.0f64; self.n_items()];
        for (j, &zj) in z.iter().enumerate() {
            if zj == 0.0 {
                continue;
            }
            let (rows, val) = self.deembed.col(j);
            for (&i, &v) in rows.iter().zip(val) {
                scores[i as usize] += f64::from(v) * zj;
            }
            macs += rows.len();
        }
        for &i in &items {
            scores[i as usize] -= 1.0;
        }
        Ok((scores.into_iter().map(|s| s as f32).collect(), macs))
    }

    /// `r̂ᵀ = xᵀĀₛĀₛᵀ − xᵀ` for the interacted item set `items`.
    pub fn infer_scores(&self, items: &[u32]) -> Result<Vec<f32>> {
        self.infer_scores_counted(items).map(|(s, _)| s)
    }

    /// Single-layout query path: `Āₛ · q` for an arbitrary latent vector, as a
    /// vector database would score item rows.
    pub fn score_query(&self, query: &[f32]) -> Result<Vec<f32>> {
        self.embed.spmv(query)
    }
}

impl Scorer for SparseInferenceEngine {
    fn n_items(&self) -> usize {
        SparseInferenceEngine::n_items(self)
    }

    fn score(&self, items: &[u32]) -> Result<Vec<f32>> {
        self.infer_scores(items)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub items: Vec<u32>,
    pub scores: Vec<f32>,
    pub requested: usize,
}

/// Highest scores outside `exclusions`; ties go to the lower item index.
pub fn top_n(scores: &[f32], exclusions: &[u32], n: usize) -> RetrievalResult {
    let mut excluded = vec![false; scores.len()];
    for &i in exclusions {
        if let Some(e) = excluded.get_mut(i as usize) {
            *e = true;
        }
    }
    let mut candidates: Vec<u32> = (0..scores.len() as u32)
        .filter(|&i| !excluded[i as usize])
        .collect();
    let order = |a: &u32, b: &u32| -> Ordering {
        scores[*b as usize]
            .total_cmp(&scores[*a as usize])
            .then(a.cmp(b))
    };
    let take = n.min(candidates.len());
    if take > 0 && take < candidates.len() {
        candidates.select_nth_unstable_by(take - 1, order);
        candidates.truncate(take);
    }
    candidates.sort_unstable_by(order);
    candidates.truncate(take);
    RetrievalResult {
        scores: candidates.iter().map(|&i| scores[i as usize]).collect(),
        items: candidates,
        requested: n,
    }
}

/// What an item embedding costs to store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingDescriptor {
    /// One 4-byte value per latent factor.
    Dense { d: usize },
    /// A 4-byte value plus a 4-byte index per nonzero.
    Sparse { k: usize },
}

pub const VALUE_BYTES: usize = 4;
pub const INDEX_BYTES: usize = 4;

/// Bytes per item.
pub fn embedding_bytes(model: EmbeddingDescriptor) -> usize {
    match model {
        EmbeddingDescriptor::Dense { d } => VALUE_BYTES * d,
        EmbeddingDescriptor::Sparse { k } => (VALUE_BYTES + INDEX_BYTES) * k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_engine() {
        let t: Vec<Triplet> = (0..3).map(|i| (i, i, 1.0)).collect();
        let e = SparseInferenceEngine::build(CsrMatrix::from_triplets(3, 3, &t).unwrap()).unwrap();
        assert_eq!(e.deembed_layout().triplets(), t);
        assert_eq!(e.embed_layout().triplets(), t);
        // identity embeddings: each item only scores itself, then −1
        assert_eq!(e.infer_scores(&[1]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(e.infer_scores(&[]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rejects_unnormalized_rows() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 0.5)]).unwrap();
        assert!(matches!(
            SparseInferenceEngine::build(m),
            Err(Error::Unnormalized { row: 1, .. })
        ));
    }

    #[test]
    fn empty_engine_builds_with_zero_scores() {
        let m = CsrMatrix::from_triplets(4, 3, &[]).unwrap();
        let e = SparseInferenceEngine::build(m).unwrap();
        assert_eq!(e.infer_scores(&[0, 2]).unwrap(), vec![-1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn disjoint_supports_do_not_interact() {
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let m = CsrMatrix::from_triplets(
            3,
            4,
            &[(0, 0, s), (0, 1, s), (1, 2, 1.0), (2, 1, 0.6), (2, 3, 0.8)],
        )
        .unwrap();
        let e = SparseInferenceEngine::build(m).unwrap();
        let r = e.infer_scores(&[0]).unwrap();
        assert_eq!(r[1], 0.0);
        assert!((r[2] - s * 0.6).abs() < 1e-6);
        assert!(r[0].abs() < 1e-6);
    }

    #[test]
    fn out_of_range_item() {
        let m = CsrMatrix::from_triplets(2, 1, &[(0, 0, 1.0)]).unwrap();
        let e = SparseInferenceEngine::build(m).unwrap();
        assert!(matches!(e.infer_scores(&[2]), Err(Error::IndexOutOfRange { index: 2, bound: 2 })));
    }

    #[test]
    fn top_n_examples() {
        assert_eq!(top_n(&[0.1, 0.9, 0.5], &[], 2).items, vec![1, 2]);
        assert!(top_n(&[0.1, 0.9, 0.5], &[0, 1, 2], 2).items.is_empty());
        assert_eq!(top_n(&[0.5, 0.5], &[], 1).items, vec![0]);
        let r = top_n(&[0.3, 0.2, 0.9, 0.9], &[2], 10);
        assert_eq!(r.items, vec![3, 0, 1]);
        assert_eq!(r.scores, vec![0.9, 0.3, 0.2]);
        assert_eq!(r.requested, 10);
    }

    #[test]
    fn byte_accounting() {
        assert_eq!(embedding_bytes(EmbeddingDescriptor::Dense { d: 256 }), 1024);
        assert_eq!(embedding_bytes(EmbeddingDescriptor::Sparse { k: 128 }), 1024);
        assert_eq!(embedding_bytes(EmbeddingDescriptor::Dense { d: 10_000 }), 40_000);
    }
}
