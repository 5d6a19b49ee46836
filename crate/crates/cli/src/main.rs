//! `celsa`: split, train, compress, evaluate, segment and recommend.

mod model_io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use compressed_elsa::baselines::{ease_fit, select_lambda, Popularity, PrunedEase, LAMBDA_GRID};
use compressed_elsa::elsa::{train_dense, ElsaConfig};
use compressed_elsa::evalkit::experiment::{run_experiment, ExperimentSpec};
use compressed_elsa::evalkit::{evaluate_model, FoldInConfig, Scorer, Validation};
use compressed_elsa::infer::top_n;
use compressed_elsa::interactions::{load_interactions, split_strong_generalization, DatasetSplit, LoadOptions, SplitConfig};
use compressed_elsa::linalg::{AdamConfig, CsrMatrix};
use compressed_elsa::segments::{group_items, merge_segments, ItemMetadata, MetadataDescriptor, SegmentRecord, DEFAULT_TAU};
use compressed_elsa::sparsifier::{train_compressed, PruningSchedule, RestartPolicy, ScheduleKind};
use model_io::{LoadedModel, ModelKind, Sidecar};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "celsa", version, about = "Dense and compressed ELSA embeddings for implicit feedback")]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Split an interaction log into train/validation/test users.
    Split(SplitArgs),
    /// Train dense ELSA.
    Train(TrainArgs),
    /// Train Compressed ELSA under a pruning schedule.
    Compress(CompressArgs),
    /// Fit EASE, pruned EASE or popularity.
    Baseline(BaselineArgs),
    /// Evaluate a model on the test users of a split.
    Eval(EvalArgs),
    /// Derive item segments from a compressed model.
    Segment(SegmentArgs),
    /// Recommend items (and segments) for a list of interacted items.
    Recommend(RecommendArgs),
    /// Run a JSON experiment spec.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    /// Interaction log: `user,item[,rating]`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    test_frac: f64,
    /// Drop interactions rated below this value.
    #[arg(long, default_value_t = 0.0)]
    min_feedback: f64,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Keep items whose interactions all fall below `--min-feedback`.
    #[arg(long)]
    keep_all_items: bool,
}

#[derive(Debug, Args, Serialize)]
struct TrainingArgs {
    /// Split directory written by `split`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "d", default_value_t = 128)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f32,
    /// Report validation nDCG after every epoch.
    #[arg(long)]
    monitor: bool,
    #[arg(long, default_value_t = 100)]
    monitor_cutoff: usize,
}

impl TrainingArgs {
    fn config(&self, seed: u64) -> ElsaConfig {
        ElsaConfig {
            d: self.d,
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    training: TrainingArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ScheduleArg {
    Constant,
    Linear,
    Exponential,
    Stepwise,
}

impl From<ScheduleArg> for ScheduleKind {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Constant => ScheduleKind::Constant,
            ScheduleArg::Linear => ScheduleKind::Linear,
            ScheduleArg::Exponential => ScheduleKind::Exponential,
            ScheduleArg::Stepwise => ScheduleKind::Stepwise,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum RestartArg {
    Init,
    Continue,
}

impl From<RestartArg> for RestartPolicy {
    fn from(r: RestartArg) -> Self {
        match r {
            RestartArg::Init => RestartPolicy::RestartFromInit,
            RestartArg::Continue => RestartPolicy::Continue,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct CompressArgs {
    #[command(flatten)]
    #[serde(flatten)]
    training: TrainingArgs,
    /// Nonzeros per embedding row after the last pruning event.
    #[arg(long = "k")]
    k: usize,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Exponential)]
    schedule: ScheduleArg,
    #[arg(long, value_enum, default_value_t = RestartArg::Init)]
    restart: RestartArg,
    /// Last pruning event `T` (default: half the epochs).
    #[arg(long)]
    events: Option<usize>,
    /// Event at which a stepwise schedule drops to `k`.
    #[arg(long)]
    step_epoch: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BaselineKind {
    Ease,
    PrunedEase,
    Popularity,
}

#[derive(Debug, Args, Serialize)]
struct BaselineArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = BaselineKind::Ease)]
    kind: BaselineKind,
    /// Ridge strength; selected on validation users when omitted.
    #[arg(long)]
    lambda: Option<f64>,
    /// Weights kept per row for pruned EASE.
    #[arg(long = "k")]
    k: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model file (`.spem` with a `.json` sidecar).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "20,50,100")]
    cutoffs: Vec<usize>,
    /// Share of each test user's interactions held out as targets.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    /// Also write `report.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SegmentArgs {
    #[arg(long)]
    model: PathBuf,
    /// `item_id,title,tags` file with a header row.
    #[arg(long)]
    metadata: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct RecommendArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated raw ids of interacted items.
    #[arg(long, value_delimiter = ',', required = true)]
    items: Vec<String>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Drop the interacted items from the ranking (`--exclude-seen false` keeps them).
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    exclude_seen: bool,
    /// `segments.json` from `segment`; adds a segment ranking.
    #[arg(long)]
    segments: Option<PathBuf>,
    /// Print titles from this metadata file.
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    bytes: u64,
}

/// Writes `config.json` and `manifest.json` next to the listed outputs.
fn finish_outputs(dir: &Path, cli: &Cli, mut files: Vec<String>) -> Result<()> {
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cli)? + "\n")?;
    files.insert(0, "config.json".into());
    let manifest = files
        .iter()
        .map(|f| {
            let bytes = fs::metadata(dir.join(f)).with_context(|| format!("missing output {f}"))?.len();
            Ok(ManifestEntry { path: f.clone(), bytes })
        })
        .collect::<Result<Vec<_>>>()?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_split(dir: &Path) -> Result<DatasetSplit> {
    DatasetSplit::load_dir(dir).with_context(|| format!("loading split from {}", dir.display()))
}

fn run_split(cli: &Cli, args: &SplitArgs) -> Result<()> {
    let options = LoadOptions {
        min_feedback: args.min_feedback,
        delimiter: args.delimiter,
        keep_all_items: args.keep_all_items,
        ..LoadOptions::default()
    };
    let data = load_interactions(&args.data, &options)?;
    let split = split_strong_generalization(
        &data,
        SplitConfig {
            val_frac: args.val_frac,
            test_frac: args.test_frac,
            seed: cli.seed,
        },
    )?;
    split.save_dir(&args.out)?;
    let m = split.manifest();
    log::info!(
        "{} items; {} train, {} validation, {} test users",
        m.n_items,
        m.train_users,
        m.validation_users,
        m.test_users
    );
    let files = ["train.csv", "validation.csv", "test.csv", "items.csv", "users.csv", "split.json"];
    finish_outputs(&args.out, cli, files.iter().map(|s| s.to_string()).collect())
}

fn validation<'a>(split: &'a DatasetSplit, enabled: bool, cutoff: usize, seed: u64) -> Option<Validation<'a>> {
    (enabled && split.validation.n_users() > 0).then_some(Validation {
        users: &split.validation,
        protocol: FoldInConfig {
            seed,
            ..FoldInConfig::default()
        },
        cutoff,
    })
}

fn run_train(cli: &Cli, args: &TrainingArgs) -> Result<()> {
    let split = load_split(&args.data)?;
    let config = args.config(cli.seed);
    let v = validation(&split, args.monitor, args.monitor_cutoff, cli.seed);
    let (model, history) = train_dense(&split.train, config, v.as_ref())?;
    for e in &history.epochs {
        match e.validation_ndcg {
            Some(n) => log::info!("epoch {}: loss {:.6}, validation nDCG {:.4}", e.epoch, e.loss, n),
            None => log::info!("epoch {}: loss {:.6}", e.epoch, e.loss),
        }
    }
    create_dir(&args.out)?;
    let mut sidecar = Sidecar::new(ModelKind::Dense, &split.item_vocab, cli.seed);
    sidecar.config = Some(config);
    sidecar.losses = history.losses();
    sidecar.embedding_bytes = model_io::bytes_for(ModelKind::Dense, config.d, None, split.n_items());
    let files = model_io::save(&args.out, &model_io::dense_weights(&model.embeddings), &sidecar)?;
    finish_outputs(&args.out, cli, files)
}

fn run_compress(cli: &Cli, args: &CompressArgs) -> Result<()> {
    let t = &args.training;
    let split = load_split(&t.data)?;
    let config = t.config(cli.seed);
    let kind = ScheduleKind::from(args.schedule);
    let events = match kind {
        ScheduleKind::Constant => 0,
        _ => args.events.unwrap_or(config.epochs / 2),
    };
    let mut schedule = PruningSchedule::new(kind, config.d, args.k, events)?;
    if args.step_epoch.is_some() {
        schedule.step_epoch = args.step_epoch;
        schedule.validate()?;
    }
    let v = validation(&split, t.monitor, t.monitor_cutoff, cli.seed);
    let model = train_compressed(&split.train, config, schedule, args.restart.into(), v.as_ref())?;
    for e in &model.history.epochs {
        match e.validation_ndcg {
            Some(n) => log::info!("epoch {} (k = {}): loss {:.6}, validation nDCG {:.4}", e.epoch, e.k, e.loss, n),
            None => log::info!("epoch {} (k = {}): loss {:.6}", e.epoch, e.k, e.loss),
        }
    }
    log::info!(
        "{} dead rows, {} dead latent dimensions",
        model.dead_latents.dead_rows,
        model.dead_latents.dead_columns
    );
    create_dir(&t.out)?;
    let mut sidecar = Sidecar::new(ModelKind::Compressed, &split.item_vocab, cli.seed);
    sidecar.config = Some(config);
    sidecar.schedule = Some(schedule);
    sidecar.restart = Some(args.restart.into());
    sidecar.k = Some(args.k);
    sidecar.losses = model.history.losses();
    sidecar.dead_latents = Some(model.dead_latents);
    sidecar.embedding_bytes = model_io::bytes_for(ModelKind::Compressed, config.d, Some(args.k), split.n_items());
    let files = model_io::save(&t.out, &model.embeddings, &sidecar)?;
    finish_outputs(&t.out, cli, files)
}

fn run_baseline(cli: &Cli, args: &BaselineArgs) -> Result<()> {
    let split = load_split(&args.data)?;
    let n = split.n_items();
    let fit_ease = || -> Result<_> {
        Ok(match args.lambda {
            Some(l) => ease_fit(&split.train, l)?,
            None => {
                let v = validation(&split, true, 100, cli.seed)
                    .context("lambda selection needs validation users; pass --lambda")?;
                let (b, score) = select_lambda(&split.train, &v, &LAMBDA_GRID)?;
                log::info!("selected lambda {} (validation nDCG@100 {score:.4})", b.lambda);
                b
            }
        })
    };
    let (weights, mut sidecar) = match args.kind {
        BaselineKind::Popularity => {
            let p = Popularity::fit(&split.train);
            (model_io::popularity_weights(&p)?, Sidecar::new(ModelKind::Popularity, &split.item_vocab, cli.seed))
        }
        BaselineKind::Ease => {
            if args.k.is_some() {
                bail!("--k applies to pruned-ease only");
            }
            let b = fit_ease()?;
            let mut s = Sidecar::new(ModelKind::Ease, &split.item_vocab, cli.seed);
            s.lambda = Some(b.lambda);
            s.embedding_bytes = model_io::bytes_for(ModelKind::Ease, 0, None, n);
            (b.to_csr(), s)
        }
        BaselineKind::PrunedEase => {
            let k = args.k.context("pruned-ease needs --k")?;
            let b = fit_ease()?;
            let mut s = Sidecar::new(ModelKind::PrunedEase, &split.item_vocab, cli.seed);
            s.lambda = Some(b.lambda);
            s.k = Some(k);
            s.embedding_bytes = model_io::bytes_for(ModelKind::PrunedEase, 0, Some(k), n);
            (PrunedEase::new(&b, k)?.weights, s)
        }
    };
    create_dir(&args.out)?;
    sidecar.seed = cli.seed;
    let files = model_io::save(&args.out, &weights, &sidecar)?;
    finish_outputs(&args.out, cli, files)
}

fn run_eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let split = load_split(&args.data)?;
    let (model, sidecar) = model_io::load(&args.model)?;
    if sidecar.items != split.item_vocab.ids() {
        bail!("model item vocabulary differs from the split's");
    }
    let protocol = FoldInConfig {
        holdout_frac: args.holdout,
        seed: cli.seed,
    };
    let mut report = evaluate_model(&model, &split.test, protocol, &args.cutoffs)?;
    report.embedding_bytes = sidecar.embedding_bytes;
    for (i, c) in report.cutoffs.iter().enumerate() {
        log::info!(
            "nDCG@{c} {:.4} ± {:.4}, recall@{c} {:.4} over {} users",
            report.ndcg[i].mean,
            report.ndcg[i].std_err,
            report.recall[i].mean,
            report.users_evaluated
        );
    }
    let json = serde_json::to_string_pretty(&report)? + "\n";
    print!("{json}");
    if let Some(out) = &args.out {
        create_dir(out)?;
        fs::write(out.join("report.json"), &json)?;
        finish_outputs(out, cli, vec!["report.json".into()])?;
    }
    Ok(())
}

fn run_segment(cli: &Cli, args: &SegmentArgs) -> Result<()> {
    let (model, sidecar) = model_io::load(&args.model)?;
    let LoadedModel::Sparse(engine) = model else {
        bail!("segment needs a compressed model, got {:?}", sidecar.kind);
    };
    let vocab = sidecar.vocab();
    let metadata = ItemMetadata::load(&args.metadata, &vocab)?;
    let grouping = group_items(engine.embed_layout());
    let initial = grouping.groups.len();
    let set = merge_segments(grouping, &MetadataDescriptor::new(&metadata), args.tau, engine.d())?;
    log::info!(
        "{initial} initial groups merged into {} segments; {} unsegmented items, {} sign conflicts",
        set.len(),
        set.dead_items.len(),
        set.conflicts.len()
    );
    create_dir(&args.out)?;
    let records = set.records(&vocab);
    fs::write(args.out.join("segments.json"), serde_json::to_string_pretty(&records)? + "\n")?;
    finish_outputs(&args.out, cli, vec!["segments.json".into()])
}

/// Rebuilds `B̄ₛ` from segment records.
fn segment_matrix(records: &[SegmentRecord], d: usize) -> Result<CsrMatrix> {
    let rows = records
        .iter()
        .map(|r| {
            let scale = 1.0 / (r.latent_dims.len() as f64).sqrt();
            let mut dims: Vec<(u32, f32)> = r
                .latent_dims
                .iter()
                .map(|f| (f.dim as u32, (f64::from(f.sign) * scale) as f32))
                .collect();
            dims.sort_by_key(|&(j, _)| j);
            dims.into_iter().unzip()
        })
        .collect();
    Ok(CsrMatrix::from_sparse_rows(d, rows)?)
}

#[derive(Serialize)]
struct Ranked {
    id: String,
    score: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    title: Option<String>,
}

#[derive(Serialize)]
struct RankedSegment {
    segment_id: usize,
    descriptor: String,
    score: f32,
}

#[derive(Serialize)]
struct Recommendation {
    items: Vec<Ranked>,
    #[serde(skip_serializing_if = "Option::is_none")]
    segments: Option<Vec<RankedSegment>>,
}

fn run_recommend(args: &RecommendArgs) -> Result<()> {
    let (model, sidecar) = model_io::load(&args.model)?;
    let vocab = sidecar.vocab();
    let mut items = Vec::with_capacity(args.items.len());
    for raw in &args.items {
        match vocab.index_of(raw) {
            Some(i) => items.push(i),
            None => bail!("unknown item id {raw:?}"),
        }
    }
    items.sort_unstable();
    items.dedup();
    let metadata = args.metadata.as_ref().map(|p| ItemMetadata::load(p, &vocab)).transpose()?;
    let scores = model.score(&items)?;
    let exclusions: &[u32] = if args.exclude_seen { &items } else { &[] };
    let ranked = top_n(&scores, exclusions, args.n);
    let out_items = ranked
        .items
        .iter()
        .zip(&ranked.scores)
        .map(|(&i, &score)| Ranked {
            id: vocab.raw_id(i).to_string(),
            score,
            title: metadata.as_ref().map(|m| m.title(i as usize).to_string()),
        })
        .collect();
    let segments = match &args.segments {
        None => None,
        Some(path) => {
            let LoadedModel::Sparse(engine) = &model else {
                bail!("segment ranking needs a compressed model");
            };
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let records: Vec<SegmentRecord> = serde_json::from_str(&text)?;
            let b = segment_matrix(&records, engine.d())?;
            let seg_scores = compressed_elsa::segments::segment_scores(&items, engine, &b)?;
            let top = top_n(&seg_scores, &[], args.n);
            Some(
                top.items
                    .iter()
                    .zip(&top.scores)
                    .map(|(&c, &score)| RankedSegment {
                        segment_id: records[c as usize].segment_id,
                        descriptor: records[c as usize].descriptor.clone(),
                        score,
                    })
                    .collect(),
            )
        }
    };
    let rec = Recommendation {
        items: out_items,
        segments,
    };
    println!("{}", serde_json::to_string_pretty(&rec)?);
    Ok(())
}

fn run_experiment_cmd(args: &ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec::load(&args.spec)?;
    let results = run_experiment(&spec, &args.out)?;
    for cell in &results.cells {
        let p = results.cutoffs.iter().position(|&c| c == results.primary_cutoff).unwrap_or(0);
        log::info!(
            "{:<50} nDCG@{} {:.4}",
            cell.label,
            results.primary_cutoff,
            cell.ndcg[p]
        );
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Split(a) => run_split(cli, a),
        Command::Train(a) => run_train(cli, &a.training),
        Command::Compress(a) => run_compress(cli, a),
        Command::Baseline(a) => run_baseline(cli, a),
        Command::Eval(a) => run_eval(cli, a),
        Command::Segment(a) => run_segment(cli, a),
        Command::Recommend(a) => run_recommend(a),
        Command::Experiment(a) => run_experiment_cmd(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
