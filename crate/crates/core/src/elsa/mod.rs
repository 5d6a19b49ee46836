//! Dense ELSA: a shallow linear autoencoder with unit-norm item embeddings.
//!
//! Scores for a user with interaction vector `x` are `xᵀĀĀᵀ − xᵀ`, where `Ā`
//! is the row-normalized item embedding matrix.

mod objective;
mod train;

pub use objective::{loss_and_gradient, nmse_loss, LossAndGradient};
pub use train::{train_dense, ElsaTrainer, EpochRecord, TrainingHistory};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::evalkit::Scorer;
use crate::linalg::{AdamConfig, DenseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElsaConfig {
    /// Latent dimension.
    pub d: usize,
    pub epochs: usize,
    /// Users per optimizer step.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for ElsaConfig {
    fn default() -> Self {
        Self {
            d: 128,
            epochs: 20,
            batch_size: 128,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl ElsaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("d must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be > 0", a.lr)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::InvalidArgument("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Item embeddings plus the snapshot they were initialized from.
#[derive(Debug, Clone, PartialEq)]
pub struct ElsaModel {
    /// `n × d`; rows are kept at unit ℓ2 norm by the trainer.
    pub embeddings: DenseMatrix,
    pub config: ElsaConfig,
    pub init_snapshot: Option<DenseMatrix>,
}

impl ElsaModel {
    pub fn n_items(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn d(&self) -> usize {
        self.embeddings.cols()
    }

    /// Row-normalized view `Ā`.
    pub fn normalized(&self) -> DenseMatrix {
        self.embeddings.row_l2_normalized().0
    }

    /// Scores for a set of interacted item indices.
    pub fn score_items(&self, items: &[u32]) -> Result<Vec<f32>> {
        score_items(&self.embeddings, items)
    }
}

impl Scorer for ElsaModel {
    fn n_items(&self) -> usize {
        ElsaModel::n_items(self)
    }

    fn score(&self, items: &[u32]) -> Result<Vec<f32>> {
        self.score_items(items)
    }
}

/// Seeded Gaussian entries with σ = 1/√d, then row-normalized.
pub fn init_model(n: usize, config: ElsaConfig) -> Result<ElsaModel> {
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("model needs at least one item".into()));
    }
    let d = config.d;
    let normal = Normal::new(0.0f64, 1.0 / (d as f64).sqrt()).expect("finite positive sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut embeddings = DenseMatrix::from_fn(n, d, |_, _| normal.sample(&mut rng) as f32);
    let report = embeddings.row_l2_normalize();
    debug_assert!(report.zero_rows.is_empty());
    Ok(ElsaModel {
        init_snapshot: Some(embeddings.clone()),
        embeddings,
        config,
    })
}

/// `r̂ᵀ = (xᵀĀ)Āᵀ − xᵀ` as two matrix–vector products.
pub fn predict_scores(x: &[f32], a_bar: &DenseMatrix) -> Result<Vec<f32>> {
    if x.len() != a_bar.rows() {
        return Err(Error::shape(a_bar.rows(), x.len()));
    }
    let z = a_bar.vecmat(x)?;
    let mut r = a_bar.matvec(&z)?;
    for (r, &xi) in r.iter_mut().zip(x) {
        *r -= xi;
    }
    Ok(r)
}

/// [`predict_scores`] for an item-index set; `a_bar` is assumed normalized.
pub fn score_items(a_bar: &DenseMatrix, items: &[u32]) -> Result<Vec<f32>> {
    let n = a_bar.rows();
    let mut x = vec![0.0f32; n];
    for &i in items {
        let slot = x.get_mut(i as usize).ok_or(Error::IndexOutOfRange {
            index: i as usize,
            bound: n,
        })?;
        *slot = 1.0;
    }
    predict_scores(&x, a_bar)
}
