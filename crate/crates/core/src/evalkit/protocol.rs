use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mix_seed, ndcg_at_k, recall_at_k};
use crate::infer::top_n;
use crate::interactions::{fold_in_split, InteractionMatrix, MIN_EVAL_INTERACTIONS};
use crate::{Error, Result};

/// Anything that maps an interacted item set to one score per item.
pub trait Scorer: Sync {
    fn n_items(&self) -> usize;
    fn score(&self, items: &[u32]) -> Result<Vec<f32>>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn n_items(&self) -> usize {
        (**self).n_items()
    }

    fn score(&self, items: &[u32]) -> Result<Vec<f32>> {
        (**self).score(items)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldInConfig {
    pub holdout_frac: f64,
    pub seed: u64,
}

impl Default for FoldInConfig {
    fn default() -> Self {
        Self {
            holdout_frac: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation over users divided by √users.
    pub std_err: f64,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                std_err: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    /// Row in the evaluated matrix.
    pub user: usize,
    /// One entry per cutoff.
    pub ndcg: Vec<f64>,
    pub recall: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub cutoffs: Vec<usize>,
    pub ndcg: Vec<MetricSummary>,
    pub recall: Vec<MetricSummary>,
    pub users_evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub embedding_bytes: Option<usize>,
    #[serde(skip)]
    pub per_user: Vec<UserMetrics>,
    /// Wall-clock seconds; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

/// Equality ignores wall-clock time.
impl PartialEq for MetricReport {
    fn eq(&self, other: &Self) -> bool {
        self.cutoffs == other.cutoffs
            && self.ndcg == other.ndcg
            && self.recall == other.recall
            && self.users_evaluated == other.users_evaluated
            && self.embedding_bytes == other.embedding_bytes
            && self.per_user == other.per_user
    }
}

impl MetricReport {
    fn position(&self, k: usize) -> Option<usize> {
        self.cutoffs.iter().position(|&c| c == k)
    }

    pub fn ndcg_at(&self, k: usize) -> Option<MetricSummary> {
        self.position(k).map(|p| self.ndcg[p])
    }

    pub fn recall_at(&self, k: usize) -> Option<MetricSummary> {
        self.position(k).map(|p| self.recall[p])
    }
}

/// Fold-in evaluation: each user with at least two interactions is split into
/// inputs and targets, scored from the inputs, and ranked with the inputs
/// excluded. Users are processed in parallel and aggregated in row order.
pub fn evaluate_model(
    scorer: &dyn Scorer,
    test: &InteractionMatrix,
    protocol: FoldInConfig,
    cutoffs: &[usize],
) -> Result<MetricReport> {
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(Error::InvalidArgument("cutoffs must be non-empty and >= 1".into()));
    }
    if scorer.n_items() != test.n_items() {
        return Err(Error::shape(
            format!("{} items", test.n_items()),
            format!("scorer over {} items", scorer.n_items()),
        ));
    }
    let started = Instant::now();
    let depth = *cutoffs.iter().max().expect("non-empty");
    let users: Vec<usize> = (0..test.n_users())
        .filter(|&u| test.row(u).len() >= MIN_EVAL_INTERACTIONS)
        .collect();
    let results: Vec<Result<Option<UserMetrics>>> = users
        .par_iter()
        .map(|&u| -> Result<Option<UserMetrics>> {
            let pair = fold_in_split(test.row(u), protocol.holdout_frac, mix_seed(protocol.seed, u as u64))?;
            if pair.target_items.is_empty() {
                return Ok(None);
            }
            let scores = scorer.score(&pair.input_items).map_err(|e| Error::Scoring {
                user: u,
                source: Box::new(e),
            })?;
            if scores.len() != test.n_items() {
                return Err(Error::Scoring {
                    user: u,
                    source: Box::new(Error::shape(test.n_items(), scores.len())),
                });
            }
            let ranked = top_n(&scores, &pair.input_items, depth).items;
            let mut ndcg = Vec::with_capacity(cutoffs.len());
            let mut recall = Vec::with_capacity(cutoffs.len());
            for &k in cutoffs {
                ndcg.push(ndcg_at_k(&ranked, &pair.target_items, k).expect("targets non-empty"));
                recall.push(recall_at_k(&ranked, &pair.target_items, k).expect("targets non-empty"));
            }
            Ok(Some(UserMetrics { user: u, ndcg, recall }))
        })
        .collect();
    let mut per_user = Vec::with_capacity(results.len());
    for r in results {
        if let Some(m) = r? {
            per_user.push(m);
        }
    }
    let summarize = |pick: &dyn Fn(&UserMetrics) -> f64| {
        MetricSummary::from_values(&per_user.iter().map(pick).collect::<Vec<_>>())
    };
    let ndcg = (0..cutoffs.len()).map(|c| summarize(&|m| m.ndcg[c])).collect();
    let recall = (0..cutoffs.len()).map(|c| summarize(&|m| m.recall[c])).collect();
    Ok(MetricReport {
        cutoffs: cutoffs.to_vec(),
        ndcg,
        recall,
        users_evaluated: per_user.len(),
        embedding_bytes: None,
        per_user,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Held-out users used for per-epoch monitoring.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub users: &'a InteractionMatrix,
    pub protocol: FoldInConfig,
    pub cutoff: usize,
}

pub fn validation_ndcg(scorer: &dyn Scorer, validation: &Validation<'_>) -> Result<f64> {
    let report = evaluate_model(scorer, validation.users, validation.protocol, &[validation.cutoff])?;
    Ok(report.ndcg[0].mean)
}
