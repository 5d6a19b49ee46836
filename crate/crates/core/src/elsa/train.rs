use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init_model, loss_and_gradient, ElsaConfig, ElsaModel};
use crate::evalkit::{validation_ndcg, Validation};
use crate::interactions::InteractionMatrix;
use crate::linalg::{AdamState, DenseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's users.
    pub loss: f64,
    /// Nonzeros allowed per row during this epoch.
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_ndcg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}

/// Mini-batch Adam over the embedding matrix with row projection after
/// every step. An optional frozen mask restricts which entries are live.
pub struct ElsaTrainer<'a> {
    data: &'a InteractionMatrix,
    model: ElsaModel,
    optimizer: AdamState,
    mask: Option<Vec<bool>>,
    users: Vec<usize>,
    order_rng: ChaCha8Rng,
    epoch: usize,
    step: usize,
    last_gradient: Option<DenseMatrix>,
}

impl<'a> ElsaTrainer<'a> {
    pub fn new(data: &'a InteractionMatrix, config: ElsaConfig) -> Result<Self> {
        let model = init_model(data.n_items(), config)?;
        let optimizer = AdamState::new(data.n_items(), config.d, config.adam);
        // batch order draws from its own stream so it never depends on init
        let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
        order_rng.set_stream(1);
        let users = (0..data.n_users())
            .filter(|&u| !data.row(u).is_empty())
            .collect();
        Ok(Self {
            data,
            model,
            optimizer,
            mask: None,
            users,
            order_rng,
            epoch: 0,
            step: 0,
            last_gradient: None,
        })
    }

    pub fn model(&self) -> &ElsaModel {
        &self.model
    }

    pub fn into_model(self) -> ElsaModel {
        self.model
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Mutable access for pruning events.
    pub fn parts_mut(&mut self) -> (&mut ElsaModel, &mut AdamState, &mut Option<Vec<bool>>) {
        (&mut self.model, &mut self.optimizer, &mut self.mask)
    }

    /// Masked gradient of the most recent step.
    pub fn last_gradient(&self) -> Option<&DenseMatrix> {
        self.last_gradient.as_ref()
    }

    /// One optimizer step on the given users (rows of the training matrix).
    pub fn step(&mut self, users: &[usize]) -> Result<f64> {
        let (n, d) = self.model.embeddings.shape();
        let rows: Vec<&[u32]> = users.iter().map(|&u| self.data.row(u)).collect();
        let weights = self.model.embeddings.to_f64();
        let out = loss_and_gradient(&weights, n, d, self.mask.as_deref(), &rows);
        if !out.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: self.epoch,
                step: self.step,
            });
        }
        let grad = DenseMatrix::new(n, d, out.gradient.iter().map(|&g| g as f32).collect())
            .map_err(|_| Error::NonFiniteLoss {
                epoch: self.epoch,
                step: self.step,
            })?;
        self.optimizer
            .step_masked(&mut self.model.embeddings, &grad, self.mask.as_deref())?;
        self.model.embeddings.row_l2_normalize();
        self.last_gradient = Some(grad);
        self.step += 1;
        Ok(out.loss)
    }

    /// One pass over all training users in a freshly shuffled order.
    pub fn train_epoch(&mut self) -> Result<f64> {
        let mut order = self.users.clone();
        order.shuffle(&mut self.order_rng);
        let batch_size = self.model.config.batch_size;
        let mut total = 0.0;
        for batch in order.chunks(batch_size) {
            total += self.step(batch)? * batch.len() as f64;
        }
        self.epoch += 1;
        Ok(if order.is_empty() {
            0.0
        } else {
            total / order.len() as f64
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }
}

/// Trains dense ELSA for `config.epochs` epochs.
pub fn train_dense(
    x_train: &InteractionMatrix,
    config: ElsaConfig,
    validation: Option<&Validation<'_>>,
) -> Result<(ElsaModel, TrainingHistory)> {
    config.validate()?;
    let mut trainer = ElsaTrainer::new(x_train, config)?;
    let mut history = TrainingHistory::default();
    for epoch in 0..config.epochs {
        let loss = trainer.train_epoch()?;
        let validation_ndcg = validation
            .map(|v| validation_ndcg(trainer.model(), v))
            .transpose()?;
        log::debug!("dense epoch {epoch}: loss {loss:.6}");
        history.epochs.push(EpochRecord {
            epoch,
            loss,
            k: config.d,
            validation_ndcg,
        });
    }
    Ok((trainer.into_model(), history))
}
