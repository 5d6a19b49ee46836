//! Grid experiments over models, budgets, schedules and seeds.
//!
//! A JSON spec names the data, the protocol and a list of runs; every run
//! expands into a grid of cells, each evaluated under every seed. Outputs are
//! a results table keyed by method and bytes per item, plot series, and the
//! echoed spec plus a manifest. Nothing time-dependent is written, so reruns
//! reproduce every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{evaluate_model, make_fixture, FoldInConfig, MetricReport, MetricSummary, SyntheticFixture, Validation};
use crate::baselines::{ease_fit, select_lambda, PrunedEase, Popularity, LAMBDA_GRID};
use crate::elsa::{train_dense, ElsaConfig};
use crate::infer::{embedding_bytes, EmbeddingDescriptor, SparseInferenceEngine};
use crate::interactions::{load_interactions, split_strong_generalization, DatasetSplit, LoadOptions, SplitConfig};
use crate::sparsifier::{train_compressed, PruningSchedule, RestartPolicy, ScheduleKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Fixture(SyntheticFixture),
    /// A directory written by [`DatasetSplit::save_dir`].
    SplitDir(PathBuf),
    /// A raw interaction log, split with the spec's `split` settings.
    Interactions {
        path: PathBuf,
        #[serde(default)]
        min_feedback: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dense,
    Compressed,
    Ease,
    PrunedEase,
    Popularity,
}

impl ModelKind {
    pub fn method_name(self) -> &'static str {
        match self {
            ModelKind::Dense => "ELSA",
            ModelKind::Compressed => "Compressed ELSA",
            ModelKind::Ease => "EASE",
            ModelKind::PrunedEase => "Pruned EASE",
            ModelKind::Popularity => "Popularity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub model: ModelKind,
    /// Embedding widths (dense and compressed).
    #[serde(default)]
    pub d: Vec<usize>,
    /// Nonzeros per row (compressed and pruned EASE).
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub schedule: Vec<ScheduleKind>,
    #[serde(default)]
    pub restart: Vec<RestartPolicy>,
    /// Pruning horizon `T`; defaults to half the training epochs.
    #[serde(default)]
    pub events: Option<usize>,
    /// Ridge strengths; empty means select from the default grid on validation users.
    #[serde(default)]
    pub lambda: Vec<f64>,
    /// Overrides of the shared training settings.
    #[serde(default)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub fold_in: FoldInConfig,
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<usize>,
    /// Cutoff used for curves and the headline column.
    #[serde(default = "default_primary")]
    pub primary_cutoff: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub training: ElsaConfig,
    pub runs: Vec<RunSpec>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_cutoffs() -> Vec<usize> {
    vec![20, 50, 100]
}

fn default_primary() -> usize {
    100
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn invalid(field: &str, message: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("spec field `{field}`: {message}"))
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_json(&text)?;
        // Relative data paths resolve against the spec's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut spec.data {
            DataSource::SplitDir(p) | DataSource::Interactions { path: p, .. } if p.is_relative() => {
                *p = base.join(&*p);
            }
            _ => {}
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(invalid("cutoffs", "must be a non-empty list of positive integers"));
        }
        if !self.cutoffs.contains(&self.primary_cutoff) {
            return Err(invalid("primary_cutoff", format!("{} is not among the cutoffs", self.primary_cutoff)));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must not be empty"));
        }
        if self.runs.is_empty() {
            return Err(invalid("runs", "must not be empty"));
        }
        if !(self.fold_in.holdout_frac > 0.0 && self.fold_in.holdout_frac < 1.0) {
            return Err(invalid("fold_in.holdout_frac", "must lie in (0, 1)"));
        }
        self.training.validate().map_err(|e| invalid("training", e))?;
        for (r, run) in self.runs.iter().enumerate() {
            let field = |name: &str| format!("runs[{r}].{name}");
            let needs_d = matches!(run.model, ModelKind::Dense | ModelKind::Compressed);
            let needs_k = matches!(run.model, ModelKind::Compressed | ModelKind::PrunedEase);
            if needs_d && run.d.is_empty() {
                return Err(invalid(&field("d"), "required for this model"));
            }
            if !needs_d && !run.d.is_empty() {
                return Err(invalid(&field("d"), "not used by this model"));
            }
            if needs_k && run.k.is_empty() {
                return Err(invalid(&field("k"), "required for this model"));
            }
            if !needs_k && !run.k.is_empty() {
                return Err(invalid(&field("k"), "not used by this model"));
            }
            if run.d.contains(&0) || run.k.contains(&0) {
                return Err(invalid(&field("d/k"), "must be positive"));
            }
            if run.model != ModelKind::Compressed
                && (!run.schedule.is_empty() || !run.restart.is_empty() || run.events.is_some())
            {
                return Err(invalid(&field("schedule"), "only compressed runs take a schedule"));
            }
            if !matches!(run.model, ModelKind::Ease | ModelKind::PrunedEase) && !run.lambda.is_empty() {
                return Err(invalid(&field("lambda"), "only EASE runs take lambda"));
            }
            if run.lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                return Err(invalid(&field("lambda"), "values must be positive"));
            }
            if run.model == ModelKind::Compressed {
                for &d in &run.d {
                    if let Some(&k) = run.k.iter().find(|&&k| k > d) {
                        return Err(invalid(&field("k"), format!("k = {k} exceeds d = {d}")));
                    }
                }
                let epochs = run.epochs.unwrap_or(self.training.epochs);
                let events = run.events.unwrap_or(epochs / 2);
                let gradual = self.schedules(run).iter().any(|&s| s != ScheduleKind::Constant);
                if gradual && (events == 0 || epochs <= events) {
                    return Err(invalid(
                        &field("events"),
                        format!("need 1 <= events < epochs, got events = {events}, epochs = {epochs}"),
                    ));
                }
            }
            if run.epochs == Some(0) {
                return Err(invalid(&field("epochs"), "must be positive"));
            }
        }
        Ok(())
    }

    fn schedules(&self, run: &RunSpec) -> Vec<ScheduleKind> {
        if run.schedule.is_empty() {
            vec![ScheduleKind::Exponential]
        } else {
            run.schedule.clone()
        }
    }

    fn restarts(&self, run: &RunSpec) -> Vec<RestartPolicy> {
        if run.restart.is_empty() {
            vec![RestartPolicy::default()]
        } else {
            run.restart.clone()
        }
    }

    /// Every cell of the grid, in spec order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for run in &self.runs {
            let epochs = run.epochs.unwrap_or(self.training.epochs);
            match run.model {
                ModelKind::Dense => cells.extend(run.d.iter().map(|&d| Cell::new(run.model, epochs).with_d(d))),
                ModelKind::Compressed => {
                    let events = run.events.unwrap_or(epochs / 2);
                    for &d in &run.d {
                        for &k in &run.k {
                            for &schedule in &self.schedules(run) {
                                for &restart in &self.restarts(run) {
                                    let mut c = Cell::new(run.model, epochs).with_d(d);
                                    c.k = Some(k);
                                    c.schedule = Some(schedule);
                                    c.restart = Some(restart);
                                    c.events = Some(events);
                                    cells.push(c);
                                }
                            }
                        }
                    }
                }
                ModelKind::Ease => {
                    let lambdas: Vec<Option<f64>> = if run.lambda.is_empty() {
                        vec![None]
                    } else {
                        run.lambda.iter().map(|&l| Some(l)).collect()
                    };
                    for lambda in lambdas {
                        let mut c = Cell::new(run.model, 0);
                        c.lambda = lambda;
                        cells.push(c);
                    }
                }
                ModelKind::PrunedEase => {
                    let lambdas: Vec<Option<f64>> = if run.lambda.is_empty() {
                        vec![None]
                    } else {
                        run.lambda.iter().map(|&l| Some(l)).collect()
                    };
                    for lambda in lambdas {
                        for &k in &run.k {
                            let mut c = Cell::new(run.model, 0);
                            c.k = Some(k);
                            c.lambda = lambda;
                            cells.push(c);
                        }
                    }
                }
                ModelKind::Popularity => cells.push(Cell::new(run.model, 0)),
            }
        }
        cells
    }
}

/// One configuration of the grid, evaluated under every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: ModelKind,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub schedule: Option<ScheduleKind>,
    pub restart: Option<RestartPolicy>,
    pub events: Option<usize>,
    /// Requested ridge strength; `None` selects on validation users.
    pub lambda: Option<f64>,
    pub epochs: usize,
}

impl Cell {
    fn new(model: ModelKind, epochs: usize) -> Self {
        Self {
            model,
            d: None,
            k: None,
            schedule: None,
            restart: None,
            events: None,
            lambda: None,
            epochs,
        }
    }

    fn with_d(mut self, d: usize) -> Self {
        self.d = Some(d);
        self
    }

    pub fn label(&self) -> String {
        let mut s = match self.model {
            ModelKind::Dense => "dense",
            ModelKind::Compressed => "compressed",
            ModelKind::Ease => "ease",
            ModelKind::PrunedEase => "pruned_ease",
            ModelKind::Popularity => "popularity",
        }
        .to_string();
        if let Some(d) = self.d {
            write!(s, "_d{d}").unwrap();
        }
        if let Some(k) = self.k {
            write!(s, "_k{k}").unwrap();
        }
        if let Some(kind) = self.schedule {
            write!(s, "_{}", schedule_name(kind)).unwrap();
        }
        if let Some(r) = self.restart {
            write!(s, "_{}", restart_name(r)).unwrap();
        }
        if let Some(l) = self.lambda {
            write!(s, "_l{l}").unwrap();
        }
        s
    }

    pub fn bytes_per_item(&self, n_items: usize) -> Option<usize> {
        let descriptor = match (self.model, self.d, self.k) {
            (ModelKind::Dense, Some(d), _) => EmbeddingDescriptor::Dense { d },
            (ModelKind::Compressed | ModelKind::PrunedEase, _, Some(k)) => EmbeddingDescriptor::Sparse { k },
            (ModelKind::Ease, ..) => EmbeddingDescriptor::Dense { d: n_items },
            _ => return None,
        };
        Some(embedding_bytes(descriptor))
    }
}

pub fn schedule_name(kind: ScheduleKind) -> &'static str {
    match kind {
        ScheduleKind::Constant => "constant",
        ScheduleKind::Linear => "linear",
        ScheduleKind::Exponential => "exponential",
        ScheduleKind::Stepwise => "stepwise",
    }
}

pub fn restart_name(policy: RestartPolicy) -> &'static str {
    match policy {
        RestartPolicy::RestartFromInit => "restart_from_init",
        RestartPolicy::Continue => "continue",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub report: MetricReport,
    /// Training loss per epoch (empty for closed-form models).
    pub losses: Vec<f64>,
    /// Pruning level per epoch.
    pub levels: Vec<usize>,
    pub lambda: Option<f64>,
    pub dead_columns: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub method: String,
    pub cell: Cell,
    pub bytes_per_item: Option<usize>,
    /// Mean over seeds of the per-seed means, per cutoff.
    pub ndcg: Vec<f64>,
    pub recall: Vec<f64>,
    /// Standard deviation of the per-seed means over √seeds (0 for one seed).
    pub ndcg_seed_err: Vec<f64>,
    pub seeds: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub name: String,
    pub cutoffs: Vec<usize>,
    pub primary_cutoff: usize,
    pub n_items: usize,
    pub test_users: usize,
    pub cells: Vec<CellResult>,
}

impl ExperimentResults {
    pub fn cell(&self, label: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.label == label)
    }

    fn primary(&self) -> usize {
        self.cutoffs
            .iter()
            .position(|&c| c == self.primary_cutoff)
            .expect("validated")
    }

    /// Mean nDCG at the primary cutoff for a cell.
    pub fn primary_ndcg(&self, label: &str) -> Option<f64> {
        let p = self.primary();
        self.cell(label).map(|c| c.ndcg[p])
    }
}

pub fn load_data(spec: &ExperimentSpec) -> Result<DatasetSplit> {
    match &spec.data {
        DataSource::Fixture(cfg) => Ok(make_fixture(*cfg)?.split),
        DataSource::SplitDir(dir) => DatasetSplit::load_dir(dir),
        DataSource::Interactions { path, min_feedback } => {
            let data = load_interactions(
                path,
                &LoadOptions {
                    min_feedback: *min_feedback,
                    ..LoadOptions::default()
                },
            )?;
            split_strong_generalization(&data, spec.split)
        }
    }
}

fn run_seed(spec: &ExperimentSpec, split: &DatasetSplit, cell: &Cell, seed: u64) -> Result<SeedResult> {
    let protocol = FoldInConfig {
        seed,
        ..spec.fold_in
    };
    let validation = Validation {
        users: &split.validation,
        protocol,
        cutoff: spec.primary_cutoff,
    };
    let config = ElsaConfig {
        d: cell.d.unwrap_or(spec.training.d),
        epochs: cell.epochs.max(1),
        seed,
        ..spec.training
    };
    let evaluate = |scorer: &dyn super::Scorer| evaluate_model(scorer, &split.test, protocol, &spec.cutoffs);
    let mut out = SeedResult {
        seed,
        report: MetricReport::default(),
        losses: Vec::new(),
        levels: Vec::new(),
        lambda: None,
        dead_columns: None,
    };
    let ease = |lambda: Option<f64>| match lambda {
        Some(l) => ease_fit(&split.train, l),
        None => {
            if split.validation.n_users() == 0 {
                return Err(Error::InvalidArgument("lambda selection needs validation users".into()));
            }
            select_lambda(&split.train, &validation, &LAMBDA_GRID).map(|(b, _)| b)
        }
    };
    out.report = match cell.model {
        ModelKind::Dense => {
            let (model, history) = train_dense(&split.train, config, None)?;
            out.losses = history.losses();
            out.levels = history.epochs.iter().map(|e| e.k).collect();
            evaluate(&model)?
        }
        ModelKind::Compressed => {
            let k = cell.k.expect("compressed cell has k");
            let kind = cell.schedule.expect("compressed cell has a schedule");
            let events = if kind == ScheduleKind::Constant { 0 } else { cell.events.expect("set") };
            let schedule = PruningSchedule::new(kind, config.d, k, events)?;
            let model = train_compressed(&split.train, config, schedule, cell.restart.expect("set"), None)?;
            out.losses = model.history.losses();
            out.levels = model.history.epochs.iter().map(|e| e.k).collect();
            out.dead_columns = Some(model.dead_latents.dead_columns);
            evaluate(&SparseInferenceEngine::build(model.embeddings)?)?
        }
        ModelKind::Ease => {
            let b = ease(cell.lambda)?;
            out.lambda = Some(b.lambda);
            evaluate(&b)?
        }
        ModelKind::PrunedEase => {
            let b = ease(cell.lambda)?;
            out.lambda = Some(b.lambda);
            evaluate(&PrunedEase::new(&b, cell.k.expect("pruned cell has k"))?)?
        }
        ModelKind::Popularity => evaluate(&Popularity::fit(&split.train))?,
    };
    out.report.embedding_bytes = cell.bytes_per_item(split.n_items());
    Ok(out)
}

/// Runs every cell under every seed.
pub fn run_grid(spec: &ExperimentSpec, split: &DatasetSplit) -> Result<ExperimentResults> {
    spec.validate()?;
    let mut cells = Vec::new();
    for cell in spec.cells() {
        let label = cell.label();
        log::info!("running {label} over {} seeds", spec.seeds.len());
        let seeds = spec
            .seeds
            .iter()
            .map(|&s| run_seed(spec, split, &cell, s))
            .collect::<Result<Vec<_>>>()?;
        let per_cutoff = |pick: &dyn Fn(&MetricReport) -> &[MetricSummary]| -> Vec<Vec<f64>> {
            (0..spec.cutoffs.len())
                .map(|c| seeds.iter().map(|s| pick(&s.report)[c].mean).collect())
                .collect()
        };
        let ndcg_runs = per_cutoff(&|r| &r.ndcg);
        let recall_runs = per_cutoff(&|r| &r.recall);
        let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        cells.push(CellResult {
            method: cell.model.method_name().to_string(),
            bytes_per_item: cell.bytes_per_item(split.n_items()),
            ndcg: ndcg_runs.iter().map(mean).collect(),
            recall: recall_runs.iter().map(mean).collect(),
            ndcg_seed_err: ndcg_runs.iter().map(|v| MetricSummary::from_values(v).std_err).collect(),
            label,
            cell,
            seeds,
        });
    }
    Ok(ExperimentResults {
        name: spec.name.clone(),
        cutoffs: spec.cutoffs.clone(),
        primary_cutoff: spec.primary_cutoff,
        n_items: split.n_items(),
        test_users: split.test.n_users(),
        cells,
    })
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn results_csv(results: &ExperimentResults) -> String {
    let mut s = String::from("label,method,d,k,schedule,restart,lambda,bytes_per_item,seeds");
    for c in &results.cutoffs {
        write!(s, ",ndcg@{c},ndcg@{c}_seed_err,recall@{c}").unwrap();
    }
    s.push('\n');
    for cell in &results.cells {
        let lambdas: Vec<String> = cell.seeds.iter().filter_map(|r| r.lambda.map(|l| l.to_string())).collect();
        let mut lambdas_unique = lambdas.clone();
        lambdas_unique.dedup();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            cell.label,
            cell.method,
            opt(cell.cell.d),
            opt(cell.cell.k),
            opt(cell.cell.schedule.map(schedule_name)),
            opt(cell.cell.restart.map(restart_name)),
            lambdas_unique.join("|"),
            opt(cell.bytes_per_item),
            cell.seeds.len()
        )
        .unwrap();
        for c in 0..results.cutoffs.len() {
            write!(s, ",{:.6},{:.6},{:.6}", cell.ndcg[c], cell.ndcg_seed_err[c], cell.recall[c]).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Plot series: nDCG against final `k` per schedule and restart policy, nDCG
/// against `d` for dense runs, and per-epoch training losses.
pub fn curves(results: &ExperimentResults) -> Vec<(String, String)> {
    let p = results.primary();
    let cutoff = results.primary_cutoff;
    let mut by_k = format!("schedule,restart,d,k,bytes_per_item,ndcg@{cutoff},seed_err\n");
    let mut by_d = format!("method,d,bytes_per_item,ndcg@{cutoff},seed_err\n");
    let mut by_bytes = format!("method,label,bytes_per_item,ndcg@{cutoff}\n");
    let mut losses = String::from("label,seed,epoch,k,loss\n");
    for cell in &results.cells {
        let c = &cell.cell;
        match c.model {
            ModelKind::Compressed => writeln!(
                by_k,
                "{},{},{},{},{},{:.6},{:.6}",
                opt(c.schedule.map(schedule_name)),
                opt(c.restart.map(restart_name)),
                opt(c.d),
                opt(c.k),
                opt(cell.bytes_per_item),
                cell.ndcg[p],
                cell.ndcg_seed_err[p]
            )
            .unwrap(),
            ModelKind::Dense => writeln!(
                by_d,
                "{},{},{},{:.6},{:.6}",
                cell.method,
                opt(c.d),
                opt(cell.bytes_per_item),
                cell.ndcg[p],
                cell.ndcg_seed_err[p]
            )
            .unwrap(),
            _ => {}
        }
        if let Some(bytes) = cell.bytes_per_item {
            writeln!(by_bytes, "{},{},{},{:.6}", cell.method, cell.label, bytes, cell.ndcg[p]).unwrap();
        }
        for run in &cell.seeds {
            for (e, (loss, k)) in run.losses.iter().zip(&run.levels).enumerate() {
                writeln!(losses, "{},{},{},{},{:.9}", cell.label, run.seed, e, k, loss).unwrap();
            }
        }
    }
    vec![
        ("ndcg_vs_k.csv".into(), by_k),
        ("ndcg_vs_d.csv".into(), by_d),
        ("ndcg_vs_bytes.csv".into(), by_bytes),
        ("training_loss.csv".into(), losses),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
}

/// Writes `config.json`, `results.csv`, `results.json`, `curves/*.csv` and
/// `manifest.json` into `out_dir`.
pub fn write_outputs(spec: &ExperimentSpec, results: &ExperimentResults, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let curves_dir = out_dir.join("curves");
    fs::create_dir_all(&curves_dir).map_err(|e| Error::io(&curves_dir, e))?;
    let mut files: Vec<(String, String)> = vec![
        ("config.json".into(), serde_json::to_string_pretty(spec)? + "\n"),
        ("results.csv".into(), results_csv(results)),
        ("results.json".into(), serde_json::to_string_pretty(results)? + "\n"),
    ];
    files.extend(curves(results).into_iter().map(|(name, body)| (format!("curves/{name}"), body)));
    let mut manifest = Vec::new();
    for (name, body) in &files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        manifest.push(ManifestEntry {
            path: name.clone(),
            bytes: body.len(),
        });
    }
    let path = out_dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Loads the data, runs the grid and writes every output file.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: impl AsRef<Path>) -> Result<ExperimentResults> {
    spec.validate()?;
    let split = load_data(spec)?;
    let results = run_grid(spec, &split)?;
    write_outputs(spec, &results, out_dir.as_ref())?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec::from_json(
            r#"{
                "name": "tiny",
                "data": {"fixture": {"n_users": 300, "n_items": 60, "n_clusters": 3, "p_in": 0.3, "p_out": 0.02}},
                "cutoffs": [5, 10],
                "primary_cutoff": 10,
                "seeds": [0, 1],
                "training": {"epochs": 4, "batch_size": 64},
                "runs": [
                    {"model": "dense", "d": [8]},
                    {"model": "compressed", "d": [8], "k": [2, 4], "schedule": ["exponential"], "events": 2},
                    {"model": "popularity"}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn grid_expansion() {
        let spec = tiny_spec();
        let labels: Vec<String> = spec.cells().iter().map(Cell::label).collect();
        assert_eq!(
            labels,
            vec![
                "dense_d8",
                "compressed_d8_k2_exponential_restart_from_init",
                "compressed_d8_k4_exponential_restart_from_init",
                "popularity"
            ]
        );
    }

    #[test]
    fn invalid_fields_are_named() {
        let bad = r#"{"data": {"fixture": {}}, "runs": [{"model": "compressed", "d": [8]}]}"#;
        let err = ExperimentSpec::from_json(bad).unwrap_err().to_string();
        assert!(err.contains("runs[0].k"), "{err}");
        let bad = r#"{"data": {"fixture": {}}, "cutoffs": [10], "runs": [{"model": "popularity"}]}"#;
        let err = ExperimentSpec::from_json(bad).unwrap_err().to_string();
        assert!(err.contains("primary_cutoff"), "{err}");
        assert!(ExperimentSpec::from_json(r#"{"data": {"fixture": {}}, "runs": [], "bogus": 1}"#).is_err());
    }

    #[test]
    fn two_models_two_budgets_give_four_cells() {
        let spec = ExperimentSpec::from_json(
            r#"{"data": {"fixture": {}}, "training": {"epochs": 4},
                "runs": [{"model": "dense", "d": [4, 8]}, {"model": "pruned_ease", "k": [4, 8], "lambda": [10]}]}"#,
        )
        .unwrap();
        assert_eq!(spec.cells().len(), 4);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let spec = tiny_spec();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_experiment(&spec, a.path()).unwrap();
        run_experiment(&spec, b.path()).unwrap();
        for f in ["config.json", "results.csv", "results.json", "manifest.json", "curves/ndcg_vs_k.csv", "curves/training_loss.csv"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        assert_eq!(ra.cells.len(), 4);
        let csv = fs::read_to_string(a.path().join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(ra.cell("dense_d8").unwrap().bytes_per_item, Some(32));
    }
}
