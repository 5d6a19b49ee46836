//! Row-wise absolute top-k sparsification and gradual pruning.
//!
//! Training alternates ordinary ELSA epochs with *pruning events* at epoch
//! boundaries. An event recomputes the top-k mask from the current |A|, zeroes
//! the pruned entries and renormalizes rows. Between events the mask is
//! frozen and pruned entries receive no updates.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::elsa::{ElsaConfig, ElsaModel, ElsaTrainer, EpochRecord, TrainingHistory};
use crate::evalkit::{validation_ndcg, Validation};
use crate::interactions::InteractionMatrix;
use crate::linalg::{AdamState, CsrMatrix, DenseMatrix};
use crate::{Error, Result};

/// Indices of the `k` largest `|row[j]|`, ties to the lower index, sorted ascending.
pub fn top_k_abs<T: Copy + Into<f64>>(row: &[T], k: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..row.len() as u32).collect();
    if k < row.len() {
        let by_magnitude = |a: &u32, b: &u32| -> Ordering {
            let (va, vb): (f64, f64) = (row[*a as usize].into(), row[*b as usize].into());
            vb.abs().total_cmp(&va.abs()).then(a.cmp(b))
        };
        if k == 0 {
            return Vec::new();
        }
        idx.select_nth_unstable_by(k - 1, by_magnitude);
        idx.truncate(k);
        idx.sort_unstable();
    }
    idx
}

/// Per-row kept column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopKMask {
    cols: usize,
    kept: Vec<Vec<u32>>,
}

impl TopKMask {
    pub fn rows(&self) -> usize {
        self.kept.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kept(&self, row: usize) -> &[u32] {
        &self.kept[row]
    }

    pub fn is_kept(&self, row: usize, col: usize) -> bool {
        self.kept[row].binary_search(&(col as u32)).is_ok()
    }

    /// Row-major `rows × cols` indicator.
    pub fn to_bits(&self) -> Vec<bool> {
        let mut bits = vec![false; self.rows() * self.cols];
        for (i, kept) in self.kept.iter().enumerate() {
            for &j in kept {
                bits[i * self.cols + j as usize] = true;
            }
        }
        bits
    }

    /// `mask ⊙ a`.
    pub fn apply(&self, a: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows(), a.cols());
        for (i, kept) in self.kept.iter().enumerate() {
            for &j in kept {
                out.set(i, j as usize, a.get(i, j as usize));
            }
        }
        out
    }
}

pub fn topk_mask(a: &DenseMatrix, k: usize) -> Result<TopKMask> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    Ok(TopKMask {
        cols: a.cols(),
        kept: a.iter_rows().map(|row| top_k_abs(row, k)).collect(),
    })
}

/// `Āₛ`: top-k entries of each row of `a`, renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Sparsified {
    pub embeddings: CsrMatrix,
    /// Rows that ended up all-zero.
    pub dead_rows: Vec<usize>,
}

pub fn sparsify_renormalize(a: &DenseMatrix, k: usize) -> Result<Sparsified> {
    let mask = topk_mask(a, k)?;
    let rows = mask
        .kept
        .iter()
        .enumerate()
        .map(|(i, kept)| {
            let (idx, val): (Vec<u32>, Vec<f32>) = kept
                .iter()
                .map(|&j| (j, a.get(i, j as usize)))
                .filter(|&(_, v)| v != 0.0)
                .unzip();
            (idx, val)
        })
        .collect();
    let mut embeddings = CsrMatrix::from_sparse_rows(a.cols(), rows)?;
    let report = embeddings.row_l2_normalize();
    Ok(Sparsified {
        embeddings,
        dead_rows: report.zero_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Linear,
    Exponential,
    Stepwise,
}

/// Nonzeros allowed per row at each pruning event `t ∈ [0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruningSchedule {
    pub kind: ScheduleKind,
    /// Initial width, `k₀`.
    pub d: usize,
    /// Final nonzeros per row, `k_T`.
    pub k: usize,
    /// Index of the last pruning event.
    #[serde(rename = "T")]
    pub events: usize,
    /// Event at which a stepwise schedule drops from `d` to `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_epoch: Option<usize>,
}

/// Stepwise schedules drop after this many epochs unless told otherwise.
pub const DEFAULT_STEP_EPOCH: usize = 10;

impl PruningSchedule {
    pub fn new(kind: ScheduleKind, d: usize, k: usize, events: usize) -> Result<Self> {
        let s = Self {
            kind,
            d,
            k,
            events,
            step_epoch: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.d {
            return Err(Error::InvalidArgument(format!(
                "schedule needs 1 <= k ({}) <= d ({})",
                self.k, self.d
            )));
        }
        if matches!(self.kind, ScheduleKind::Linear | ScheduleKind::Exponential) && self.events == 0 {
            return Err(Error::InvalidArgument(
                "gradual schedules need T >= 1".into(),
            ));
        }
        if self.kind == ScheduleKind::Stepwise && self.step() > self.events {
            return Err(Error::InvalidArgument(format!(
                "step event {} lies beyond T = {}",
                self.step(),
                self.events
            )));
        }
        Ok(())
    }

    fn step(&self) -> usize {
        self.step_epoch.unwrap_or(DEFAULT_STEP_EPOCH.min(self.events))
    }

    pub fn value(&self, t: usize) -> Result<usize> {
        if t > self.events {
            return Err(Error::InvalidArgument(format!(
                "event {t} is beyond T = {}",
                self.events
            )));
        }
        let (d, k) = (self.d as f64, self.k as f64);
        let frac = if self.events == 0 {
            1.0
        } else {
            t as f64 / self.events as f64
        };
        let raw = match self.kind {
            ScheduleKind::Constant => k,
            ScheduleKind::Linear => (d - (d - k) * frac).round(),
            ScheduleKind::Exponential => (d * (k / d).powf(frac)).round(),
            ScheduleKind::Stepwise => {
                if t < self.step() {
                    d
                } else {
                    k
                }
            }
        };
        Ok((raw as usize).clamp(self.k, self.d))
    }

    /// `k_0, …, k_T`.
    pub fn values(&self) -> Vec<usize> {
        (0..=self.events)
            .map(|t| self.value(t).expect("t within range"))
            .collect()
    }
}

pub fn schedule_value(s: &PruningSchedule, t: usize) -> Result<usize> {
    s.value(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartPolicy {
    /// Surviving entries rewind to their initial values; optimizer state is reset.
    #[default]
    RestartFromInit,
    /// Surviving entries and their moments carry over.
    Continue,
}

/// Recomputes the mask at `k_t` from the current weights and applies it.
/// Returns the new mask. Pruned entries are zeroed and their moments cleared.
pub fn apply_pruning_event(
    model: &mut ElsaModel,
    optimizer: &mut AdamState,
    k_t: usize,
    policy: RestartPolicy,
) -> Result<TopKMask> {
    let mask = topk_mask(&model.embeddings, k_t)?;
    let source = match policy {
        RestartPolicy::RestartFromInit => model
            .init_snapshot
            .as_ref()
            .ok_or(Error::MissingInitSnapshot)?,
        RestartPolicy::Continue => &model.embeddings,
    };
    let mut next = mask.apply(source);
    next.row_l2_normalize();
    model.embeddings = next;
    match policy {
        RestartPolicy::RestartFromInit => optimizer.reset(),
        RestartPolicy::Continue => optimizer.clear_masked(&mask.to_bits()),
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DeadLatentReport {
    /// Items with no nonzeros.
    pub dead_rows: usize,
    /// Latent dimensions unused by every item.
    pub dead_columns: usize,
}

/// Dead-latent counts plus the dead column indices.
pub fn dead_latent_report(a_bar_s: &CsrMatrix) -> (DeadLatentReport, Vec<usize>) {
    let mut used = vec![false; a_bar_s.cols()];
    let mut dead_rows = 0;
    for i in 0..a_bar_s.rows() {
        let (idx, val) = a_bar_s.row(i);
        let mut alive = false;
        for (&j, &v) in idx.iter().zip(val) {
            if v != 0.0 {
                used[j as usize] = true;
                alive = true;
            }
        }
        if !alive {
            dead_rows += 1;
        }
    }
    let dead: Vec<usize> = used
        .iter()
        .enumerate()
        .filter_map(|(j, &u)| (!u).then_some(j))
        .collect();
    (
        DeadLatentReport {
            dead_rows,
            dead_columns: dead.len(),
        },
        dead,
    )
}

#[derive(Debug, Clone)]
pub struct CompressedModel {
    /// `Āₛ`: at most `k` unit-norm nonzeros per row.
    pub embeddings: CsrMatrix,
    pub config: ElsaConfig,
    pub schedule: PruningSchedule,
    pub policy: RestartPolicy,
    pub dead_latents: DeadLatentReport,
    pub history: TrainingHistory,
}

/// Trains ELSA under a pruning schedule. Event `t` (for `t ≤ T`) is applied at
/// the start of epoch `t` whenever `k_t` drops below the current level (or at
/// `t = 0`); epochs after `T` train at the final `k`.
pub fn train_compressed(
    x_train: &InteractionMatrix,
    config: ElsaConfig,
    schedule: PruningSchedule,
    policy: RestartPolicy,
    validation: Option<&Validation<'_>>,
) -> Result<CompressedModel> {
    config.validate()?;
    schedule.validate()?;
    if schedule.d != config.d {
        return Err(Error::InvalidArgument(format!(
            "schedule width {} differs from model width {}",
            schedule.d, config.d
        )));
    }
    if schedule.kind != ScheduleKind::Constant && config.epochs <= schedule.events {
        return Err(Error::InvalidArgument(format!(
            "{} epochs cannot reach pruning event T = {}",
            config.epochs, schedule.events
        )));
    }
    let mut trainer = ElsaTrainer::new(x_train, config)?;
    let mut history = TrainingHistory::default();
    let mut level = config.d;
    for epoch in 0..config.epochs {
        if epoch <= schedule.events || epoch == 0 {
            let k_t = if schedule.kind == ScheduleKind::Constant {
                schedule.k
            } else {
                schedule.value(epoch)?
            };
            if epoch == 0 || k_t < level {
                let (model, optimizer, mask) = trainer.parts_mut();
                let new_mask = apply_pruning_event(model, optimizer, k_t, policy)?;
                *mask = Some(new_mask.to_bits());
                level = k_t;
                log::debug!("epoch {epoch}: pruned to k = {k_t}");
            }
        }
        let loss = trainer.train_epoch()?;
        let validation_ndcg = validation
            .map(|v| -> Result<f64> {
                let engine = crate::infer::SparseInferenceEngine::build(
                    sparsify_renormalize(&trainer.model().embeddings, level)?.embeddings,
                )?;
                validation_ndcg(&engine, v)
            })
            .transpose()?;
        history.epochs.push(EpochRecord {
            epoch,
            loss,
            k: level,
            validation_ndcg,
        });
    }
    let final_k = schedule.k;
    let sparsified = sparsify_renormalize(&trainer.model().embeddings, final_k)?;
    let (dead_latents, _) = dead_latent_report(&sparsified.embeddings);
    Ok(CompressedModel {
        embeddings: sparsified.embeddings,
        config,
        schedule,
        policy,
        dead_latents,
        history,
    })
}
