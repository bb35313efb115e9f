//! Subcommand implementations. Results go to files; diagnostics go to
//! stderr. Usage problems (bad flag values, invalid model/embedding
//! pairings) are distinguished from runtime failures for the exit code.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use icufuse_core::data::{
    load_cohort_dir, save_cohort, stratified_split, synth_cohort, Prevalences, SignalSpec,
    SplitSpec, TaskKind,
};
use icufuse_core::embed::{
    load_subword_table, load_table, save_doc_table, save_subword_table, save_table,
    train_fasttext, train_pvdm, train_sgns, DocVectorTable, EmbeddingTable, SubwordTable,
    WordEmbedder,
};
use icufuse_core::entity::load_entities;
use icufuse_core::models::{ModelConfig, ModelKind};
use icufuse_core::protocol::{
    documents_from_entities, pairing_valid, run_protocol, EmbeddingKind, PreparedSplit,
};
use icufuse_core::report::{render_table, write_report, ExperimentReport, ReportRow};
use icufuse_core::rng::Rng;
use icufuse_core::train::TrainSpec;

use crate::args::{EmbedArgs, ReportArgs, RunArgs, SynthArgs};
use crate::{CliError, CliResult};

pub const REPORT_KV: &str = "report.kv";
pub const REPORT_TABLE: &str = "report.txt";

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let mut prevalences = Prevalences::default();
    for spec in &args.prevalences {
        let (task, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--prevalence expects TASK=RATE, got {spec:?}")))?;
        let task = TaskKind::parse(task).map_err(CliError::usage_from)?;
        let rate: f64 = value
            .parse()
            .map_err(|_| CliError::Usage(format!("bad prevalence rate {value:?}")))?;
        prevalences.set(task, rate);
    }
    let signal = SignalSpec {
        task: TaskKind::parse(&args.signal_task).map_err(CliError::usage_from)?,
        ts_strength: args.ts_strength,
        ts_signal_features: args.ts_features,
        entity_strength: args.entity_strength,
        marker_base_rate: args.marker_base_rate,
    };
    let mut rng = Rng::new(args.seed);
    let cohort = synth_cohort(args.n, args.features, &prevalences, &signal, &mut rng)?;
    save_cohort(&cohort, &args.out)?;
    eprintln!(
        "wrote cohort of {} patients ({} features) to {}",
        cohort.len(),
        cohort.feature_count(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_embed(args: &EmbedArgs) -> CliResult<()> {
    let reader = BufReader::new(File::open(&args.corpus)?);
    let pairs = load_entities(reader.lines())?;
    if pairs.is_empty() {
        return Err(CliError::Runtime(format!(
            "no entity records in {}",
            args.corpus.display()
        )));
    }
    let docs = documents_from_entities(&pairs);
    let sequences: Vec<Vec<String>> = docs.iter().map(|(_, toks)| toks.clone()).collect();
    let mut rng = Rng::new(args.seed);
    let out = File::create(&args.out)?;
    let mut writer = BufWriter::new(out);

    match args.method.as_str() {
        "sgns" => {
            let table = train_sgns(
                &sequences,
                args.dim,
                args.window,
                args.negatives,
                args.epochs,
                args.lr,
                &mut rng,
            )?;
            save_table(&table, &mut writer)?;
            eprintln!("trained {} word vectors (dim {})", table.len(), table.dim());
        }
        "fasttext" => {
            let table = train_fasttext(
                &sequences,
                args.dim,
                args.window,
                args.negatives,
                args.epochs,
                args.lr,
                args.buckets,
                &mut rng,
            )?;
            save_subword_table(&table, &mut writer)?;
            eprintln!(
                "trained subword table: {} words, {} buckets (dim {})",
                table.vocab_len(),
                table.buckets(),
                table.dim()
            );
        }
        "pvdm" => {
            let table = train_pvdm(
                &docs,
                args.dim,
                args.window,
                args.negatives,
                args.epochs,
                args.lr,
                &mut rng,
            )?;
            save_doc_table(&table, &mut writer)?;
            eprintln!("trained {} document vectors (dim {})", table.len(), table.dim());
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown embedding method {other:?} (expected sgns, fasttext, or pvdm)"
            )))
        }
    }
    writer.flush().map_err(icufuse_core::Error::from)?;
    Ok(())
}

/// Resolved `run` tunables after merging defaults, config file, and flags.
struct RunSettings {
    seeds: usize,
    epochs: usize,
    patience: Option<usize>,
    batch_size: usize,
    lr: f64,
    l2: f64,
    dropout: f64,
    hidden_dim: usize,
    fc_baseline: usize,
    fc_proposed: usize,
    kernel: usize,
    kmax: usize,
    filters: [usize; 3],
    threshold: f64,
    split_seed: u64,
}

fn load_config_map(path: &Path) -> CliResult<HashMap<String, String>> {
    let reader = BufReader::new(File::open(path)?);
    let mut map = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(icufuse_core::Error::from)?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "config line {} is not key=value: {trimmed:?}",
                idx + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    config: &HashMap<String, String>,
    key: &str,
    default: T,
) -> CliResult<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match config.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| CliError::Usage(format!("config key {key}: bad value {raw:?}"))),
        None => Ok(default),
    }
}

fn parse_filters(raw: &str) -> CliResult<[usize; 3]> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--filters expects three comma-separated counts, got {raw:?}"
        )));
    }
    let mut filters = [0usize; 3];
    for (i, p) in parts.iter().enumerate() {
        filters[i] = p
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad filter count {p:?}")))?;
    }
    Ok(filters)
}

impl RunSettings {
    fn resolve(args: &RunArgs) -> CliResult<RunSettings> {
        let config = match &args.config {
            Some(path) => load_config_map(path)?,
            None => HashMap::new(),
        };
        let filters_raw = resolve(
            args.filters.clone(),
            &config,
            "filters",
            "32,64,96".to_string(),
        )?;
        let patience_raw = resolve(args.patience, &config, "patience", 5)?;
        Ok(RunSettings {
            seeds: resolve(args.seeds, &config, "seeds", 10)?,
            epochs: resolve(args.epochs, &config, "epochs", 50)?,
            patience: (patience_raw > 0).then_some(patience_raw),
            batch_size: resolve(args.batch_size, &config, "batch_size", 64)?,
            lr: resolve(args.lr, &config, "lr", 0.001)?,
            l2: resolve(args.l2, &config, "l2", 0.01)?,
            dropout: resolve(args.dropout, &config, "dropout", 0.2)?,
            hidden_dim: resolve(args.hidden_dim, &config, "hidden_dim", 256)?,
            fc_baseline: resolve(args.fc_baseline, &config, "fc_baseline", 256)?,
            fc_proposed: resolve(args.fc_proposed, &config, "fc_proposed", 512)?,
            kernel: resolve(args.kernel, &config, "kernel", 3)?,
            kmax: resolve(args.kmax, &config, "kmax", 128)?,
            filters: parse_filters(&filters_raw)?,
            threshold: resolve(args.threshold, &config, "threshold", 0.5)?,
            split_seed: resolve(args.split_seed, &config, "split_seed", 0)?,
        })
    }
}

/// The run plan after pre-flight validation: one report row per cell.
struct PlanCell {
    model: ModelKind,
    embedding: Option<EmbeddingKind>,
}

fn build_plan(models: &[String], embeddings: &[String]) -> CliResult<Vec<PlanCell>> {
    if models.is_empty() {
        return Err(CliError::Usage("--models must name at least one model".into()));
    }
    let models: Vec<ModelKind> = models
        .iter()
        .map(|m| ModelKind::parse(m).map_err(CliError::usage_from))
        .collect::<CliResult<_>>()?;
    let embeddings: Vec<EmbeddingKind> = embeddings
        .iter()
        .filter(|e| !e.is_empty())
        .map(|e| EmbeddingKind::parse(e).map_err(CliError::usage_from))
        .collect::<CliResult<_>>()?;

    let mut cells = Vec::new();
    for model in models {
        if model == ModelKind::GruBaseline {
            cells.push(PlanCell {
                model,
                embedding: None,
            });
            continue;
        }
        if embeddings.is_empty() {
            return Err(CliError::Usage(format!(
                "model {} needs --embeddings",
                model.as_str()
            )));
        }
        for &embedding in &embeddings {
            if !pairing_valid(model, Some(embedding)) {
                return Err(CliError::Usage(format!(
                    "model {} cannot be paired with embedding {}",
                    model.as_str(),
                    embedding.as_str()
                )));
            }
            cells.push(PlanCell {
                model,
                embedding: Some(embedding),
            });
        }
    }
    Ok(cells)
}

struct VectorSources {
    word2vec: Option<EmbeddingTable>,
    fasttext: Option<SubwordTable>,
    doc2vec: Option<DocVectorTable>,
}

fn load_vectors(args: &RunArgs, cells: &[PlanCell]) -> CliResult<VectorSources> {
    let needs = |kind: EmbeddingKind| cells.iter().any(|c| c.embedding == Some(kind));
    let need_w2v = needs(EmbeddingKind::Word2vec) || needs(EmbeddingKind::Concat);
    let need_ft = needs(EmbeddingKind::Fasttext) || needs(EmbeddingKind::Concat);
    let need_doc = needs(EmbeddingKind::Doc2vec);

    let mut sources = VectorSources {
        word2vec: None,
        fasttext: None,
        doc2vec: None,
    };
    if need_w2v {
        let path = args.word2vec_vectors.as_ref().ok_or_else(|| {
            CliError::Usage("--word2vec-vectors is required by the requested plan".into())
        })?;
        sources.word2vec = Some(load_table(BufReader::new(File::open(path)?))?);
    }
    if need_ft {
        let path = args.fasttext_vectors.as_ref().ok_or_else(|| {
            CliError::Usage("--fasttext-vectors is required by the requested plan".into())
        })?;
        sources.fasttext = Some(load_subword_table(BufReader::new(File::open(path)?))?);
    }
    if need_doc {
        let path = args.doc2vec_vectors.as_ref().ok_or_else(|| {
            CliError::Usage("--doc2vec-vectors is required by the requested plan".into())
        })?;
        sources.doc2vec = Some(icufuse_core::embed::load_doc_table(BufReader::new(
            File::open(path)?,
        ))?);
    }
    Ok(sources)
}

pub fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let task = TaskKind::parse(&args.task).map_err(CliError::usage_from)?;
    let settings = RunSettings::resolve(args)?;
    let cells = build_plan(&args.models, &args.embeddings)?;
    let sources = load_vectors(args, &cells)?;

    let (cohort, join_stats) = load_cohort_dir(&args.cohort_dir)?;
    if join_stats.dropped_missing_labels > 0 || join_stats.dropped_missing_timeseries > 0 {
        eprintln!(
            "join: dropped {} patients without labels, {} without time series",
            join_stats.dropped_missing_labels, join_stats.dropped_missing_timeseries
        );
    }
    let split_spec = SplitSpec::new(task, settings.split_seed);
    let (train_c, val_c, test_c) = stratified_split(&cohort, &split_spec)?;
    eprintln!(
        "cohort {} -> split {}/{}/{} (task {}, prevalence {:.3})",
        cohort.len(),
        train_c.len(),
        val_c.len(),
        test_c.len(),
        task.as_str(),
        cohort.prevalence(task)
    );

    let train_spec = TrainSpec {
        max_epochs: settings.epochs,
        patience: settings.patience,
        batch_size: settings.batch_size,
        seeds: (0..settings.seeds as u64).collect(),
        l2_scale: settings.l2,
        lr: settings.lr,
    };
    let base_cfg = ModelConfig {
        input_dim: cohort.feature_count(),
        seq_len: icufuse_core::data::HOURS,
        hidden_dim: settings.hidden_dim,
        fc_dim_baseline: settings.fc_baseline,
        fc_dim_proposed: settings.fc_proposed,
        conv_filters: settings.filters,
        kernel_size: settings.kernel,
        dropout: settings.dropout,
        l2_scale: settings.l2,
        embed_dim: 1,
        k_max: settings.kmax,
    };

    // One prepared example set per distinct embedding source in the plan.
    let mut prepared: HashMap<&'static str, (PreparedSplit, usize)> = HashMap::new();
    let split = (&train_c, &val_c, &test_c);
    for cell in &cells {
        let key = cell.embedding.map(|e| e.as_str()).unwrap_or("-");
        if prepared.contains_key(key) {
            continue;
        }
        let (word, docs): (Option<WordEmbedder>, Option<&DocVectorTable>) = match cell.embedding {
            None => (None, None),
            Some(EmbeddingKind::Word2vec) => (
                Some(WordEmbedder::Word2vec(sources.word2vec.as_ref().unwrap())),
                None,
            ),
            Some(EmbeddingKind::Fasttext) => (
                Some(WordEmbedder::Fasttext(sources.fasttext.as_ref().unwrap())),
                None,
            ),
            Some(EmbeddingKind::Concat) => (
                Some(WordEmbedder::concat(
                    sources.word2vec.as_ref().unwrap(),
                    sources.fasttext.as_ref().unwrap(),
                )?),
                None,
            ),
            Some(EmbeddingKind::Doc2vec) => (None, sources.doc2vec.as_ref()),
        };
        let embed_dim = match (&word, docs) {
            (Some(w), _) => w.dim(),
            (None, Some(d)) => d.dim(),
            (None, None) => 1,
        };
        let split_examples =
            PreparedSplit::prepare(split, task, word.as_ref(), docs, settings.kmax)?;
        prepared.insert(key, (split_examples, embed_dim));
    }

    let mut rows = Vec::with_capacity(cells.len());
    for cell in &cells {
        let key = cell.embedding.map(|e| e.as_str()).unwrap_or("-");
        let (split_examples, embed_dim) = &prepared[key];
        let cfg = ModelConfig {
            embed_dim: *embed_dim,
            ..base_cfg.clone()
        };
        eprintln!(
            "running {} / {} ({} seeds)...",
            cell.model.as_str(),
            key,
            train_spec.seeds.len()
        );
        let metrics = run_protocol(
            cell.model,
            &cfg,
            &train_spec,
            split_examples,
            settings.threshold,
        )?;
        rows.push(ReportRow {
            model: cell.model,
            embedding: cell.embedding,
            metrics,
        });
    }

    let report = ExperimentReport {
        task,
        seeds: train_spec.seeds.clone(),
        f1_threshold: settings.threshold,
        rows,
    };
    std::fs::create_dir_all(&args.out).map_err(icufuse_core::Error::from)?;
    let kv_path = args.out.join(REPORT_KV);
    write_report(&report, BufWriter::new(File::create(&kv_path)?))?;
    let table_path = args.out.join(REPORT_TABLE);
    std::fs::write(&table_path, render_table(&report)).map_err(icufuse_core::Error::from)?;
    eprintln!("wrote {} and {}", kv_path.display(), table_path.display());
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let report = icufuse_core::report::parse_report(BufReader::new(File::open(&args.input)?))?;
    let table = render_table(&report);
    match &args.out {
        Some(path) => std::fs::write(path, table).map_err(icufuse_core::Error::from)?,
        None => print!("{table}"),
    }
    Ok(())
}

/// Paths a run would write, for callers that shell out.
pub fn report_paths(out_dir: &Path) -> (PathBuf, PathBuf) {
    (out_dir.join(REPORT_KV), out_dir.join(REPORT_TABLE))
}
