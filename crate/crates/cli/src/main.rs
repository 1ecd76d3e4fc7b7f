//! `rxfuse`: resolve → embed → synth → train → evaluate → report.
//!
//! Exit codes: 0 success, 2 usage or schema error, 3 network policy or
//! network failure, 4 numeric failure (divergence). Other I/O failures
//! exit 1.

mod config;
mod manifest;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rxfuse::cohort::{
    ingest_timeseries, read_labels, read_prescriptions, read_resolved, standin_embedding_table, stratified_split,
    synth_generate, write_resolved, Cohort, CohortError, CohortSplit, ResolvedRow, SplitRatios, SynthConfig,
};
use rxfuse::embedding::{EmbedError, EmbeddingProvider, EmbeddingTable, ProviderKind};
use rxfuse::exec::Exec;
use rxfuse::nn::{Mode, NnError};
use rxfuse::resolver::{
    CompoundClient, DrugQuery, FixtureClient, FixtureSet, NdcClient, Resolution, ResolutionCache, ResolveError,
    Resolver,
};
use rxfuse::train::{run_repetitions, Dataset, TrainError, TrainedModel};
use serde::Serialize;

use config::TrainConfig;
use manifest::RunManifest;
use report::{RunSummary, SUMMARY_FILE};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Network(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Network(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Network(m) | CliError::Numeric(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<CohortError> for CliError {
    fn from(e: CohortError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ResolveError> for CliError {
    fn from(e: ResolveError) -> Self {
        match e {
            ResolveError::Network(_) => CliError::Network(e.to_string()),
            ResolveError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergence { .. } | TrainError::Nn(NnError::NonFiniteGradient(_) | NnError::NonFiniteValue(_)) => {
                CliError::Numeric(e.to_string())
            }
            TrainError::Io(_) | TrainError::Container(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "rxfuse", version, about = "Drug representations fused with ICU time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Ecfp,
    Table,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Subset {
    Train,
    Val,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve prescriptions to PubChem compounds.
    Resolve {
        #[arg(long)]
        prescriptions: PathBuf,
        /// JSON-lines resolution cache; created when missing.
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cache and fixtures only (the default).
        #[arg(long, conflicts_with = "live")]
        offline: bool,
        /// Query PubChem and openFDA over HTTPS.
        #[arg(long)]
        live: bool,
        /// Recorded service responses to replay.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Save live responses as a fixture file.
        #[arg(long, requires = "live")]
        record_fixtures: Option<PathBuf>,
        /// Requests per second per service in live mode.
        #[arg(long, default_value_t = 5.0)]
        rate: f64,
    },
    /// Write drug vectors for every resolved SMILES as TSV.
    Embed {
        #[arg(long)]
        resolved: PathBuf,
        #[arg(long, value_enum, default_value = "ecfp")]
        provider: ProviderArg,
        #[arg(long, required_if_eq("provider", "table"))]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        radius: u32,
        #[arg(long, default_value_t = 1024)]
        nbits: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic cohort.
    Synth {
        #[arg(long, default_value_t = 5000)]
        patients: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        signal: f64,
        #[arg(long, default_value_t = 0.5)]
        drug_share: f64,
        /// Width of the stand-in embedding table.
        #[arg(long, default_value_t = 64)]
        table_width: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model (repeatedly) and score it on the test split.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured repetition count.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Score a saved model on a cohort.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        timeseries: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        resolved: PathBuf,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        subset: Subset,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate summaries of several training runs.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Resolve { prescriptions, cache, out, offline: _, live, fixtures, record_fixtures, rate } => {
            cmd_resolve(&prescriptions, &cache, &out, live, fixtures.as_deref(), record_fixtures.as_deref(), rate)
        }
        Command::Embed { resolved, provider, table, radius, nbits, out } => {
            let kind = match provider {
                ProviderArg::Ecfp => ProviderKind::Ecfp { radius, nbits },
                ProviderArg::Table => ProviderKind::Table { path: table.expect("clap enforces --table") },
            };
            cmd_embed(&resolved, &kind, &out)
        }
        Command::Synth { patients, features, seed, signal, drug_share, table_width, out } => {
            let cfg = SynthConfig { n_patients: patients, features, seed, signal_strength: signal, drug_share, ..Default::default() };
            cmd_synth(&cfg, table_width, &out)
        }
        Command::Train { config, out, repetitions } => cmd_train(&config, &out, repetitions),
        Command::Evaluate { model, timeseries, labels, resolved, split, subset, out } => {
            cmd_evaluate(&model, [&timeseries, &labels, &resolved], split.as_deref(), subset, &out)
        }
        Command::Report { runs, out } => cmd_report(&runs, out.as_deref()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, json + "\n").map_err(io_err(path))
}

#[cfg(feature = "live")]
fn live_clients(rate: f64) -> Result<(rxfuse::resolver::PubchemClient, rxfuse::resolver::FdaClient), CliError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(CliError::Usage(format!("--rate must be positive, got {rate}")));
    }
    Ok((rxfuse::resolver::PubchemClient::new(rate), rxfuse::resolver::FdaClient::new(rate)))
}

fn cmd_resolve(
    prescriptions: &Path,
    cache_path: &Path,
    out: &Path,
    live: bool,
    fixtures: Option<&Path>,
    record: Option<&Path>,
    rate: f64,
) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("resolve", out);
    manifest.inputs = vec![prescriptions.to_path_buf(), cache_path.to_path_buf()];
    let rows = read_prescriptions(prescriptions)?;
    let cache = ResolutionCache::open(cache_path)?;
    create_dir(out)?;

    let fixture_client = fixtures.map(FixtureSet::load).transpose()?.map(FixtureClient::new);
    if let Some(f) = fixtures {
        manifest.inputs.push(f.to_path_buf());
    }
    #[cfg(feature = "live")]
    let live_pair = if live { Some(live_clients(rate)?) } else { None };
    #[cfg(not(feature = "live"))]
    {
        let _ = rate;
        if live {
            return Err(CliError::Network("--live requires a build with the `live` feature".into()));
        }
    }
    #[cfg(feature = "live")]
    let recorder = live_pair
        .as_ref()
        .map(|(p, f)| rxfuse::resolver::Recorder::new(Some(p as &dyn CompoundClient), Some(f as &dyn NdcClient)));
    #[cfg(not(feature = "live"))]
    let recorder: Option<rxfuse::resolver::Recorder<'_>> = None;

    let (compounds, ndc): (Option<&dyn CompoundClient>, Option<&dyn NdcClient>) = match (&recorder, &fixture_client) {
        (Some(r), _) => (Some(r), Some(r)),
        (None, Some(f)) => (Some(f), Some(f)),
        (None, None) => (None, None),
    };
    let mut resolver = Resolver::with_clients(cache, compounds, ndc);
    let queries: Vec<DrugQuery> = rows.iter().map(|p| DrugQuery::new(&p.drug_name, &p.generic_name, &p.ndc)).collect();
    let outcomes = resolver.resolve_all(&queries)?;

    let mut resolved = Vec::new();
    let unresolved_path = out.join("unresolved.csv");
    let csv_io = |e: csv::Error| CliError::Io(format!("{}: {e}", unresolved_path.display()));
    let mut unresolved = csv::Writer::from_path(&unresolved_path).map_err(csv_io)?;
    unresolved
        .write_record(["patient_id", "order_index", "drug_name", "generic_name", "ndc", "reason"])
        .map_err(csv_io)?;
    for (p, o) in rows.iter().zip(&outcomes) {
        match o {
            Resolution::Resolved(r) => resolved.push(ResolvedRow {
                patient_id: p.patient_id.clone(),
                order_index: p.order_index,
                smiles: r.smiles.clone(),
                cid: Some(r.cid),
                resolution_path: r.path.to_string(),
            }),
            Resolution::Unresolved { reason, .. } => unresolved
                .write_record([&p.patient_id, &p.order_index.to_string(), &p.drug_name, &p.generic_name, &p.ndc, reason])
                .map_err(csv_io)?,
        }
    }
    unresolved.flush().map_err(io_err(&unresolved_path))?;
    write_resolved(&out.join("resolved_drugs.csv"), &resolved)?;
    if let (Some(path), Some(rec)) = (record, recorder) {
        rec.into_fixtures().save(path)?;
    }
    eprintln!("resolved {}/{} prescriptions", resolved.len(), rows.len());
    manifest.finish().map_err(io_err(out))
}

fn cmd_embed(resolved: &Path, kind: &ProviderKind, out: &Path) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("embed", out);
    manifest.inputs.push(resolved.to_path_buf());
    if let ProviderKind::Table { path } = kind {
        manifest.inputs.push(path.clone());
    }
    let rows = read_resolved(resolved)?;
    let provider = EmbeddingProvider::from_kind(kind).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut table = EmbeddingTable::new(provider.width());
    for r in &rows {
        if table.get(&r.smiles).is_some() {
            continue;
        }
        let v = provider.embed_resolved(&r.smiles, r.cid).map_err(|e| match e {
            EmbedError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        })?;
        table.insert(r.smiles.clone(), v.values).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    create_dir(out)?;
    let path = out.join("embeddings.tsv");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    table.write(std::io::BufWriter::new(file)).map_err(io_err(&path))?;
    eprintln!("wrote {} vectors of width {}", table.len(), table.width());
    manifest.finish().map_err(io_err(out))
}

fn cmd_synth(cfg: &SynthConfig, table_width: usize, out: &Path) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("synth", out);
    manifest.seed = Some(cfg.seed);
    if table_width == 0 {
        return Err(CliError::Usage("--table-width must be positive".into()));
    }
    let s = synth_generate(cfg)?;
    s.write(out)?;
    write_json(&out.join("synth_config.json"), cfg)?;
    let table = standin_embedding_table(&cfg.vocab, table_width, cfg.seed)?;
    let path = out.join("embedding_table.tsv");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    table.write(std::io::BufWriter::new(file)).map_err(io_err(&path))?;
    let n = s.labels.len() as f64;
    for t in rxfuse::cohort::Task::ALL {
        let rate = s.labels.values().filter(|l| l.get(t)).count() as f64 / n;
        eprintln!("{t}: positive rate {rate:.3} (target {:.3})", cfg.base_rates[t.index()]);
    }
    manifest.finish().map_err(io_err(out))
}

fn load_cohort(ts: &Path, labels: &Path, resolved: &Path) -> Result<Cohort, CliError> {
    let (names, series) = ingest_timeseries(ts)?;
    let labels = read_labels(labels)?;
    let resolved = read_resolved(resolved)?;
    Ok(Cohort::assemble(names, series, &labels, &resolved)?)
}

fn drug_provider(mode: Mode, kind: &ProviderKind) -> Result<Option<EmbeddingProvider>, CliError> {
    if !mode.uses_drugs() {
        return Ok(None);
    }
    EmbeddingProvider::from_kind(kind).map(Some).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    task: rxfuse::cohort::Task,
    mode: Mode,
    model: &'a str,
    subset: &'a str,
    runs: &'a [rxfuse::train::RunResult],
}

fn cmd_train(config_path: &Path, out: &Path, repetitions: Option<usize>) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("train", out);
    let mut cfg = TrainConfig::load(config_path)?;
    if let Some(n) = repetitions {
        if n == 0 {
            return Err(CliError::Usage("--repetitions must be at least 1".into()));
        }
        cfg.repetitions = n;
    }
    manifest.config = Some(config_path.to_path_buf());
    manifest.inputs = vec![cfg.data.timeseries.clone(), cfg.data.labels.clone(), cfg.data.resolved.clone()];
    manifest.seed = Some(cfg.model.seed);

    let cohort = load_cohort(&cfg.data.timeseries, &cfg.data.labels, &cfg.data.resolved)?;
    let stats = cohort.stats();
    eprintln!("cohort: {} patients, {} excluded without resolved drugs", stats.final_size, stats.excluded_no_drugs);
    let split = match &cfg.data.split {
        Some(p) => {
            manifest.inputs.push(p.clone());
            CohortSplit::read(p)?
        }
        None => stratified_split(&cohort, SplitRatios::default(), cfg.data.split_seed.unwrap_or(cfg.model.seed)),
    };
    let (tr, va, te) = split.indices(&cohort)?;
    let provider = drug_provider(cfg.model.mode, &cfg.model.provider)?;
    let standardizer = Dataset::fit_standardizer(&cohort, &tr, cfg.model.standardize);
    let data = Dataset::build(&cohort, standardizer, provider.as_ref(), cfg.model.n_drugs)?;

    create_dir(out)?;
    split.write(&out.join("split.json"))?;
    let label = report::model_label(&cfg.model);
    let mut save_err = None;
    let reps = run_repetitions(&cfg.model, &data, (&tr, &va, &te), cfg.repetitions, cfg.exec, &mut |run, model| {
        eprintln!(
            "seed {}: test AUROC {:.4} AUPRC {:.4} F1 {:.4} (best epoch {}, stopped {})",
            run.seed, run.test.auroc, run.test.auprc, run.test.f1, run.best_epoch, run.stopped_epoch
        );
        let dir = out.join("runs").join(format!("seed_{}", run.seed));
        let r = create_dir(&dir).and_then(|_| model.save(&dir).map_err(CliError::from)).and_then(|_| {
            write_json(
                &dir.join("metrics.json"),
                &RunMetrics { task: cfg.model.task, mode: cfg.model.mode, model: &label, subset: "test", runs: std::slice::from_ref(run) },
            )
        });
        if let Err(e) = r {
            save_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = save_err {
        return Err(e);
    }
    write_json(
        &out.join("metrics.json"),
        &RunMetrics { task: cfg.model.task, mode: cfg.model.mode, model: &label, subset: "test", runs: &reps.runs },
    )?;
    let summary = RunSummary {
        task: cfg.model.task,
        mode: cfg.model.mode,
        model: label,
        repetitions: reps.runs.len(),
        summary: reps.summary,
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    print!("{}", report::render_text(std::slice::from_ref(&summary)));
    manifest.finish().map_err(io_err(out))
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    task: rxfuse::cohort::Task,
    mode: Mode,
    subset: &'a str,
    /// Scores on training patients overstate generalization.
    evaluated_on_train: bool,
    metrics: rxfuse::metrics::MetricsReport,
}

fn cmd_evaluate(model_dir: &Path, data: [&PathBuf; 3], split: Option<&Path>, subset: Subset, out: &Path) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("evaluate", out);
    manifest.inputs = std::iter::once(model_dir.to_path_buf()).chain(data.iter().map(|p| p.to_path_buf())).collect();
    let model = TrainedModel::load(model_dir)?;
    let cohort = load_cohort(data[0], data[1], data[2])?;
    if cohort.feature_names != model.feature_names {
        return Err(CliError::Usage("cohort features differ from the model's training features".into()));
    }
    let idx = match (split, subset) {
        (_, Subset::All) => (0..cohort.records.len()).collect(),
        (None, _) => return Err(CliError::Usage("--subset other than `all` needs --split".into())),
        (Some(p), s) => {
            manifest.inputs.push(p.to_path_buf());
            let (tr, va, te) = CohortSplit::read(p)?.indices(&cohort)?;
            match s {
                Subset::Train => tr,
                Subset::Val => va,
                _ => te,
            }
        }
    };
    let provider = drug_provider(model.config.mode, &model.config.provider)?;
    let ds = Dataset::build(&cohort, model.standardizer.clone(), provider.as_ref(), model.config.n_drugs)?;
    let metrics = model.evaluate(&ds, &idx, Exec::Parallel)?;
    let name = match subset {
        Subset::Train => "train",
        Subset::Val => "val",
        Subset::Test => "test",
        Subset::All => "all",
    };
    if subset == Subset::Train {
        eprintln!("warning: evaluating on the training split");
    }
    create_dir(out)?;
    let output = EvalOutput { task: model.config.task, mode: model.config.mode, subset: name, evaluated_on_train: subset == Subset::Train, metrics };
    write_json(&out.join("metrics.json"), &output)?;
    println!("{}", serde_json::to_string_pretty(&output).expect("serializable"));
    manifest.finish().map_err(io_err(out))
}

fn cmd_report(runs: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let rows = report::load_summaries(runs)?;
    let text = report::render_text(&rows);
    print!("{text}");
    if let Some(out) = out {
        let mut manifest = RunManifest::start("report", out);
        manifest.inputs = runs.to_vec();
        create_dir(out)?;
        report::write_csv(&rows, &out.join("report.csv"))?;
        std::fs::write(out.join("report.txt"), &text).map_err(io_err(out))?;
        manifest.finish().map_err(io_err(out))?;
    }
    Ok(())
}
