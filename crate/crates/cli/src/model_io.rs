//! Model files: a `.spem` weight matrix plus a `.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use compressed_elsa::baselines::{ease_predict_sparse, Popularity, PrunedEase};
use compressed_elsa::elsa::{ElsaConfig, ElsaModel};
use compressed_elsa::evalkit::Scorer;
use compressed_elsa::infer::{embedding_bytes, EmbeddingDescriptor, SparseInferenceEngine};
use compressed_elsa::interactions::ItemVocab;
use compressed_elsa::linalg::{spem, CsrMatrix, DenseMatrix};
use compressed_elsa::sparsifier::{DeadLatentReport, PruningSchedule, RestartPolicy};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dense,
    Compressed,
    Ease,
    PrunedEase,
    Popularity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: ModelKind,
    pub items: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ElsaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PruningSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart: Option<RestartPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub losses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_latents: Option<DeadLatentReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_bytes: Option<usize>,
    pub seed: u64,
}

impl Sidecar {
    pub fn new(kind: ModelKind, items: &ItemVocab, seed: u64) -> Self {
        Self {
            kind,
            items: items.ids().to_vec(),
            config: None,
            schedule: None,
            restart: None,
            lambda: None,
            k: None,
            losses: Vec::new(),
            dead_latents: None,
            embedding_bytes: None,
            seed,
        }
    }

    pub fn vocab(&self) -> ItemVocab {
        ItemVocab::new(self.items.clone())
    }
}

pub fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("json")
}

/// Writes `<dir>/model.spem` and `<dir>/model.json`; returns the file names.
pub fn save(dir: &Path, weights: &CsrMatrix, sidecar: &Sidecar) -> Result<Vec<String>> {
    let spem_path = dir.join("model.spem");
    spem::save_csr(&spem_path, weights)?;
    let json = serde_json::to_string_pretty(sidecar)? + "\n";
    fs::write(sidecar_path(&spem_path), json).context("writing model sidecar")?;
    Ok(vec!["model.spem".into(), "model.json".into()])
}

/// A loaded model ready to score.
pub enum LoadedModel {
    Dense(ElsaModel),
    Sparse(SparseInferenceEngine),
    Ease(CsrMatrix),
    PrunedEase(PrunedEase),
    Popularity(Popularity),
}

impl Scorer for LoadedModel {
    fn n_items(&self) -> usize {
        match self {
            LoadedModel::Dense(m) => m.n_items(),
            LoadedModel::Sparse(e) => e.n_items(),
            LoadedModel::Ease(b) => b.rows(),
            LoadedModel::PrunedEase(p) => p.n_items(),
            LoadedModel::Popularity(p) => p.n_items(),
        }
    }

    fn score(&self, items: &[u32]) -> compressed_elsa::Result<Vec<f32>> {
        match self {
            LoadedModel::Dense(m) => m.score(items),
            LoadedModel::Sparse(e) => e.score(items),
            LoadedModel::Ease(b) => ease_predict_sparse(items, b),
            LoadedModel::PrunedEase(p) => p.score(items),
            LoadedModel::Popularity(p) => p.score(items),
        }
    }
}

pub fn load(path: &Path) -> Result<(LoadedModel, Sidecar)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).with_context(|| format!("reading sidecar {}", side.display()))?;
    let sidecar: Sidecar = serde_json::from_str(&text).with_context(|| format!("parsing {}", side.display()))?;
    let weights = spem::load(path)?.into_csr();
    let n = sidecar.items.len();
    let expected_rows = if sidecar.kind == ModelKind::Popularity { 1 } else { n };
    if weights.rows() != expected_rows {
        bail!(
            "{} has {} rows but the sidecar lists {} items",
            path.display(),
            weights.rows(),
            n
        );
    }
    let model = match sidecar.kind {
        ModelKind::Dense => {
            let config = sidecar.config.context("dense sidecar lacks a config")?;
            LoadedModel::Dense(ElsaModel {
                embeddings: weights.to_dense(),
                config,
                init_snapshot: None,
            })
        }
        ModelKind::Compressed => LoadedModel::Sparse(SparseInferenceEngine::build(weights)?),
        ModelKind::Ease => LoadedModel::Ease(weights),
        ModelKind::PrunedEase => LoadedModel::PrunedEase(PrunedEase {
            k: sidecar.k.unwrap_or(weights.max_row_nnz()),
            weights,
        }),
        ModelKind::Popularity => LoadedModel::Popularity(Popularity {
            scores: weights.to_dense().row(0).to_vec(),
        }),
    };
    Ok((model, sidecar))
}

pub fn dense_weights(m: &DenseMatrix) -> CsrMatrix {
    CsrMatrix::from_dense(m)
}

pub fn popularity_weights(p: &Popularity) -> Result<CsrMatrix> {
    Ok(CsrMatrix::from_dense(&DenseMatrix::new(1, p.scores.len(), p.scores.clone())?))
}

pub fn bytes_for(kind: ModelKind, d: usize, k: Option<usize>, n: usize) -> Option<usize> {
    match kind {
        ModelKind::Dense => Some(embedding_bytes(EmbeddingDescriptor::Dense { d })),
        ModelKind::Compressed | ModelKind::PrunedEase => k.map(|k| embedding_bytes(EmbeddingDescriptor::Sparse { k })),
        ModelKind::Ease => Some(embedding_bytes(EmbeddingDescriptor::Dense { d: n })),
        ModelKind::Popularity => None,
    }
}
