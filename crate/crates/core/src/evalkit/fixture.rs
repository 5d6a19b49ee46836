//! Planted-cluster interaction generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::interactions::{
    split_strong_generalization, DatasetSplit, InteractionMatrix, Interactions, ItemVocab,
    SplitConfig,
};
use crate::segments::ItemMetadata;
use crate::{Error, Result};

/// Users pick a home cluster uniformly; each item is interacted with
/// probability `p_in` inside the home cluster and `p_out` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFixture {
    pub n_users: usize,
    pub n_items: usize,
    pub n_clusters: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SyntheticFixture {
    fn default() -> Self {
        Self {
            n_users: 2000,
            n_items: 500,
            n_clusters: 10,
            p_in: 0.2,
            p_out: 0.01,
            seed: 0,
            val_frac: 0.1,
            test_frac: 0.1,
        }
    }
}

impl SyntheticFixture {
    /// Expected interactions of one user.
    pub fn expected_per_user(&self) -> f64 {
        let size = self.n_items as f64 / self.n_clusters as f64;
        self.p_in * size + self.p_out * (self.n_items as f64 - size)
    }

    /// Cluster of item `i`: contiguous, near-even blocks.
    pub fn item_cluster(&self, i: usize) -> usize {
        i * self.n_clusters / self.n_items
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub config: SyntheticFixture,
    pub data: Interactions,
    pub split: DatasetSplit,
    /// Planted cluster of every item.
    pub item_clusters: Vec<usize>,
    /// Home cluster of every source user.
    pub user_clusters: Vec<usize>,
}

/// Redraws allowed for a user that came out empty before giving up.
const MAX_REDRAWS: usize = 64;

pub fn make_fixture(config: SyntheticFixture) -> Result<Fixture> {
    let SyntheticFixture {
        n_users,
        n_items,
        n_clusters,
        p_in,
        p_out,
        seed,
        val_frac,
        test_frac,
    } = config;
    if n_clusters == 0 || n_items < n_clusters {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n_clusters ({n_clusters}) <= n_items ({n_items})"
        )));
    }
    let prob = |p: f64| (0.0..=1.0).contains(&p);
    if !prob(p_in) || !prob(p_out) || p_in <= p_out {
        return Err(Error::InvalidArgument(format!(
            "probabilities must satisfy 0 <= p_out ({p_out}) < p_in ({p_in}) <= 1"
        )));
    }
    let item_clusters: Vec<usize> = (0..n_items).map(|i| config.item_cluster(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_users);
    let mut user_clusters = Vec::with_capacity(n_users);
    for u in 0..n_users {
        let home = rng.random_range(0..n_clusters);
        let mut row = Vec::new();
        for _ in 0..MAX_REDRAWS {
            row = (0..n_items as u32)
                .filter(|&i| {
                    let p = if item_clusters[i as usize] == home { p_in } else { p_out };
                    rng.random::<f64>() < p
                })
                .collect();
            if !row.is_empty() {
                break;
            }
        }
        if row.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "user {u} has no interactions after {MAX_REDRAWS} draws; raise p_in or p_out"
            )));
        }
        user_clusters.push(home);
        rows.push(row);
    }
    let data = Interactions {
        matrix: InteractionMatrix::try_from_rows(n_items, &rows)?,
        user_ids: (0..n_users).map(|u| u.to_string()).collect(),
        items: ItemVocab::identity(n_items),
    };
    let split = split_strong_generalization(
        &data,
        SplitConfig {
            val_frac,
            test_frac,
            seed,
        },
    )?;
    Ok(Fixture {
        config,
        data,
        split,
        item_clusters,
        user_clusters,
    })
}

impl Fixture {
    /// Item metadata whose tags reflect the planted clusters: every item gets
    /// its cluster's genre tag and two of the cluster's three theme tags.
    pub fn metadata(&self) -> ItemMetadata {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(7);
        let records: Vec<(String, String, String)> = self
            .item_clusters
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let skip = rng.random_range(0..3);
                let mut tags = vec![format!("genre{c}")];
                tags.extend((0..3).filter(|&t| t != skip).map(|t| format!("theme{c}{}", ["a", "b", "c"][t])));
                (i.to_string(), format!("Item {i}"), tags.join("|"))
            })
            .collect();
        ItemMetadata::from_records(&self.data.items, &records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticFixture {
        SyntheticFixture {
            n_users: 300,
            n_items: 100,
            n_clusters: 5,
            seed,
            ..SyntheticFixture::default()
        }
    }

    #[test]
    fn no_cross_cluster_items_when_p_out_is_zero() {
        let cfg = SyntheticFixture {
            p_out: 0.0,
            p_in: 0.3,
            ..small(1)
        };
        let f = make_fixture(cfg).unwrap();
        for (u, row) in f.data.matrix.iter_rows().enumerate() {
            assert!(row.iter().all(|&i| f.item_clusters[i as usize] == f.user_clusters[u]));
        }
    }

    #[test]
    fn mean_interactions_match_expectation() {
        let cfg = SyntheticFixture::default();
        assert!((cfg.expected_per_user() - 14.5).abs() < 1e-12);
        let f = make_fixture(cfg).unwrap();
        let mean = f.data.matrix.nnz() as f64 / f.data.matrix.n_users() as f64;
        // σ per user ≈ 3.3, so the mean over 2000 users is within ~0.3 w.h.p.
        assert!((mean - cfg.expected_per_user()).abs() < 0.4, "{mean}");
    }

    #[test]
    fn deterministic() {
        let a = make_fixture(small(3)).unwrap();
        let b = make_fixture(small(3)).unwrap();
        assert_eq!(a.data.matrix, b.data.matrix);
        assert_eq!(a.split.test_users, b.split.test_users);
        assert_ne!(a.data.matrix, make_fixture(small(4)).unwrap().data.matrix);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(make_fixture(SyntheticFixture { p_in: 0.01, p_out: 0.01, ..small(0) }).is_err());
        assert!(make_fixture(SyntheticFixture { n_clusters: 0, ..small(0) }).is_err());
        let empty = SyntheticFixture {
            p_in: 1e-9,
            p_out: 0.0,
            ..small(0)
        };
        assert!(make_fixture(empty).is_err());
    }
}
