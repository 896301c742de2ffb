use std::fs;
use std::path::{Path, PathBuf};

use dep_core::analysis::{growth_curve, CheckpointPolicy, HeapsFit};
use dep_core::format::{self, DatasetFormat};
use dep_core::metrics::{param_breakdown, ParamTerm, ReportInputs};
use dep_core::{
    apply_remap, build_remap, build_report, coverage_ratio, find_unused_tokens, prune_embeddings, restore_embeddings,
    scan_partitioned, EmbeddingMatrix, Error, FrequencyTable, ModelConfig, ParamCount, RemapOrdering, RemapTable,
    TokenId, TokenizedDataset,
};
use log::info;
use serde::Serialize;

use crate::error::{exit, CliError, CliResult};
use crate::{AnalyzeArgs, CountParamsArgs, OutputArgs, PruneArgs, ReportArgs, RestoreArgs};

const TOP_TOKENS: usize = 10;

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::read(path, e))
}

fn read_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::read(path, e))
}

fn in_file<T>(path: &Path, r: Result<T, Error>) -> CliResult<T> {
    r.map_err(|e| CliError::from(e).in_file(path))
}

fn read_embeddings(path: &Path) -> CliResult<EmbeddingMatrix> {
    in_file(path, format::decode_embeddings(&read_bytes(path)?))
}

fn read_dataset(path: &Path, vocab_size: Option<usize>) -> CliResult<(TokenizedDataset, DatasetFormat)> {
    let bytes = read_bytes(path)?;
    if DatasetFormat::detect(&bytes) == DatasetFormat::Text && vocab_size.is_none() {
        return Err(CliError::missing(format!(
            "{}: text datasets need --vocab-size, --embeddings or --model-config",
            path.display()
        )));
    }
    in_file(path, format::decode_dataset(&bytes, vocab_size))
}

fn read_remap(path: &Path) -> CliResult<RemapTable> {
    in_file(path, format::decode_remap(&read_string(path)?))
}

/// A JSON file path, or one of the built-in preset names.
fn resolve_model_config(source: &str) -> CliResult<ModelConfig> {
    let path = Path::new(source);
    let cfg = if path.exists() {
        let mut cfg: ModelConfig =
            serde_json::from_str(&read_string(path)?).map_err(|e| CliError::from(Error::from(e)).in_file(path))?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        cfg
    } else if let Some(cfg) = ModelConfig::preset(source) {
        cfg
    } else {
        return Err(CliError::missing(format!(
            "model config {source:?} is neither a file nor a preset ({})",
            ModelConfig::PRESETS.join(", ")
        )));
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Checks every output path before anything is written.
fn prepare_outputs(output: &OutputArgs, names: &[&str]) -> CliResult<Vec<PathBuf>> {
    prepare_in(&output.out, output.force, names)
}

fn prepare_in(dir: &Path, force: bool, names: &[&str]) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::new(
                "OUTPUT_EXISTS",
                exit::UNWRITABLE_OUTPUT,
                format!("{} exists; pass --force to overwrite", p.display()),
            ));
        }
    }
    Ok(paths)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::write(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct AnalyzeStats {
    vocab_size: usize,
    sequences: usize,
    total_tokens: u64,
    used_tokens: usize,
    coverage: f64,
    max_count: u64,
    /// `[id, count]`, most frequent first, ties by id.
    top_tokens: Vec<[u64; 2]>,
    unused_count: usize,
    unused_tokens: Vec<TokenId>,
    heaps: Option<HeapsFit>,
    curve_points: usize,
}

fn summarize(freqs: &FrequencyTable, sequences: usize, heaps: Option<HeapsFit>, curve_points: usize) -> AnalyzeStats {
    let mut top: Vec<[u64; 2]> = freqs.used().map(|t| [t.0 as u64, freqs.count(t)]).collect();
    top.sort_by(|a, b| b[1].cmp(&a[1]).then(a[0].cmp(&b[0])));
    top.truncate(TOP_TOKENS);
    let unused = find_unused_tokens(freqs);
    AnalyzeStats {
        vocab_size: freqs.vocab_size(),
        sequences,
        total_tokens: freqs.total_tokens(),
        used_tokens: freqs.used_count(),
        coverage: coverage_ratio(freqs),
        max_count: freqs.counts().iter().copied().max().unwrap_or(0),
        top_tokens: top,
        unused_count: unused.len(),
        unused_tokens: unused,
        heaps,
        curve_points,
    }
}

pub fn analyze(args: AnalyzeArgs) -> CliResult<()> {
    let policy: CheckpointPolicy = args.checkpoints.parse()?;
    let vocab_hint = match (args.dataset.vocab_size, &args.embeddings, &args.model_config) {
        (Some(v), _, _) => Some(v),
        (None, Some(e), _) => Some(read_embeddings(e)?.rows()),
        (None, None, Some(c)) => Some(resolve_model_config(c)?.vocab_size),
        _ => None,
    };
    let (dataset, _) = read_dataset(&args.dataset.dataset, vocab_hint)?;
    let paths = prepare_outputs(&args.output, &["stats.json", "growth.csv"])?;

    let freqs = scan_partitioned(&dataset, args.dataset.partitions as usize);
    let curve = growth_curve(&dataset, &policy);
    // too few points for a fit is normal for tiny corpora
    let heaps = curve.fit().ok();
    info!(
        "{} of {} ids used over {} tokens",
        freqs.used_count(),
        freqs.vocab_size(),
        freqs.total_tokens()
    );
    let stats = summarize(&freqs, dataset.len(), heaps, curve.points.len());
    write(&paths[0], to_json(&stats))?;
    write(&paths[1], curve.to_csv())?;
    Ok(())
}

pub fn prune(args: PruneArgs) -> CliResult<()> {
    let ordering: RemapOrdering = args.ordering.parse()?;
    let matrix = read_embeddings(&args.embeddings)?;
    let vocab = args.dataset.vocab_size.unwrap_or(matrix.rows());
    if vocab != matrix.rows() {
        return Err(Error::ShapeMismatch(format!(
            "--vocab-size {vocab} but the matrix has {} rows",
            matrix.rows()
        ))
        .into());
    }
    let (dataset, fmt) = read_dataset(&args.dataset.dataset, Some(vocab))?;
    let dataset_name = format!("dataset.{}", fmt.extension());
    let paths = prepare_outputs(&args.output, &["embeddings.depe", "remap.json", &dataset_name])?;

    let freqs = scan_partitioned(&dataset, args.dataset.partitions as usize);
    let keep: Vec<TokenId> = args.keep.iter().copied().map(TokenId).collect();
    let remap = build_remap(&freqs, ordering, &keep)?;
    let pruned = prune_embeddings(&matrix, &remap)?;
    let remapped = apply_remap(&dataset, &remap)?;
    info!("kept {} of {} rows", remap.len(), matrix.rows());

    write(&paths[0], format::encode_embeddings(&pruned))?;
    write(&paths[1], format::encode_remap(&remap))?;
    write(&paths[2], format::encode_dataset(&remapped, fmt))?;
    Ok(())
}

pub fn restore(args: RestoreArgs) -> CliResult<()> {
    let original = read_embeddings(&args.embeddings)?;
    let learned = read_embeddings(&args.learned)?;
    let remap = read_remap(&args.remap)?;
    if let Some(max) = remap.inverse_ids().iter().max() {
        if max.index() >= original.rows() {
            return Err(Error::RemapInconsistent(format!(
                "remap references id {max} but the original matrix has {} rows",
                original.rows()
            ))
            .into());
        }
    }
    let paths = prepare_outputs(&args.output, &["embeddings.depe"])?;
    let restored = restore_embeddings(&original, &learned, &remap)?;
    write(&paths[0], format::encode_embeddings(&restored))?;
    Ok(())
}

/// Timestamp for reports: explicit flag, then SOURCE_DATE_EPOCH, then a fixed
/// placeholder.
fn report_timestamp(flag: Option<String>) -> CliResult<String> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => {
            let secs: i64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("SOURCE_DATE_EPOCH {v:?} is not an integer")))?;
            let dt = chrono::DateTime::from_timestamp(secs, 0)
                .ok_or_else(|| CliError::usage(format!("SOURCE_DATE_EPOCH {secs} is out of range")))?;
            Ok(dt.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
        }
        Err(_) => Ok("unspecified".to_string()),
    }
}

pub fn report(args: ReportArgs) -> CliResult<()> {
    let remap_path = args.remap.ok_or_else(|| CliError::missing("--remap is required"))?;
    let config_arg = args
        .model_config
        .ok_or_else(|| CliError::missing("--model-config is required"))?;
    let remap = read_remap(&remap_path)?;
    let config = resolve_model_config(&config_arg)?;
    let freqs = match &args.dataset {
        Some(p) => {
            let (d, _) = read_dataset(p, Some(remap.original_vocab_size()))?;
            Some(scan_partitioned(&d, args.partitions as usize))
        }
        None => None,
    };
    let before = args.embeddings.as_deref().map(read_embeddings).transpose()?;
    let after = args.pruned.as_deref().map(read_embeddings).transpose()?;
    let timestamp = report_timestamp(args.timestamp)?;
    let paths = prepare_outputs(&args.output, &["report.json"])?;

    let inputs = ReportInputs {
        freqs: freqs.as_ref(),
        matrix_before: before.as_ref(),
        matrix_after: after.as_ref(),
    };
    let report = build_report(&remap, &config, inputs, &timestamp)?;
    write(&paths[0], to_json(&report))?;
    Ok(())
}

#[derive(Serialize)]
struct ParamsOutput {
    config: ModelConfig,
    #[serde(flatten)]
    count: ParamCount,
    poep_pct: f64,
    breakdown: Vec<ParamTerm>,
}

pub fn count_params(args: CountParamsArgs) -> CliResult<()> {
    let config = resolve_model_config(&args.model_config)?;
    let count = dep_core::count_params(&config);
    let out = ParamsOutput {
        poep_pct: dep_core::metrics::percent_1dp(count.poep),
        breakdown: param_breakdown(&config),
        config,
        count,
    };
    let json = to_json(&out);
    match args.out {
        Some(dir) => {
            let paths = prepare_in(&dir, args.force, &["params.json"])?;
            write(&paths[0], json)
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}
