//! `semcomm` command line: argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use semcomm_core::channel::{ChannelConfig, Placement};
use semcomm_core::nn::default_spec;
use semcomm_core::sampling::SubsetSpec;
use semcomm_core::train::Mode;
use serde_json::json;

use crate::checkpoint::{file_sha256, ModelCheckpoint, Provenance};
use crate::config::{ConfigError, ConfigFile, ResolvedConfig};
use crate::dataset::{
    fetch_dataset, load_dataset, load_split, verify_dataset, DatasetCache, HttpSource, SplitKind, ARCHIVE_MD5,
};
use crate::experiments::{
    eval_seed, evaluate_parallel, persist_results, records_csv, run_sweep, subset_seed, train_on_subset, SweepKind,
};
use crate::fsutil::write_atomic;
use crate::manifest::{assumptions, unix_now, write_manifest, Artifact, Environment, NamedTrace, RunManifest};
use crate::plot::emit_plot_data;

#[derive(Debug, Parser)]
#[command(name = "semcomm", version, about = "Denoising-autoencoder semantic communication experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download, verify and extract the CIFAR-10 binary archive.
    DataFetch(Flags),
    /// Check the cached dataset against its recorded digests.
    DataVerify(Flags),
    /// Train one model and write a checkpoint.
    Train(Flags),
    /// Evaluate a checkpoint on the test split at one NASAR.
    Eval {
        checkpoint: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a NASAR or sample-count sweep of both models.
    Sweep(Flags),
    /// Redraw the figure for a saved sweep result.
    Plot {
        results: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::DataFetch(_) => "data-fetch",
            Command::DataVerify(_) => "data-verify",
            Command::Train(_) => "train",
            Command::Eval { .. } => "eval",
            Command::Sweep(_) => "sweep",
            Command::Plot { .. } => "plot",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::DataFetch(f) | Command::DataVerify(f) | Command::Train(f) | Command::Sweep(f) => f,
            Command::Eval { flags, .. } | Command::Plot { flags, .. } => flags,
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "ssl" => Ok(Mode::Ssl),
        "sl" => Ok(Mode::Sl),
        _ => Err(format!("expected ssl or sl, got {s}")),
    }
}

fn parse_placement(s: &str) -> Result<Placement, String> {
    match s {
        "input" => Ok(Placement::Input),
        "latent" => Ok(Placement::Latent),
        _ => Err(format!("expected input or latent, got {s}")),
    }
}

fn parse_kind(s: &str) -> Result<SweepKind, String> {
    match s {
        "nasar" => Ok(SweepKind::Nasar),
        "samples" => Ok(SweepKind::Samples),
        _ => Err(format!("expected nasar or samples, got {s}")),
    }
}

/// Overrides for config-file keys, one flag per key.
#[derive(Debug, Args)]
struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default ./runs/<unix-time>-<subcommand>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// ssl or sl.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Training noise sigma in normalized pixel units.
    #[arg(long)]
    noise_factor: Option<f64>,
    /// Training set size.
    #[arg(long)]
    samples: Option<usize>,
    /// Evaluation noise-to-signal amplitude ratio.
    #[arg(long)]
    nasar: Option<f64>,
    /// input or latent.
    #[arg(long, value_parser = parse_placement)]
    placement: Option<Placement>,
    /// nasar or samples.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<SweepKind>,
    /// Comma-separated sweep grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    sl_aux_weight: Option<f64>,
    #[arg(long)]
    stratified: Option<bool>,
    #[arg(long)]
    retrain_per_point: Option<bool>,
}

impl Flags {
    fn overrides(&self) -> ConfigFile {
        ConfigFile {
            seed: self.seed,
            mode: self.mode,
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            noise_factor: self.noise_factor,
            samples: self.samples,
            nasar: self.nasar,
            placement: self.placement,
            kind: self.kind,
            grid: self.grid.clone(),
            jobs: self.jobs,
            sl_aux_weight: self.sl_aux_weight,
            stratified: self.stratified,
            retrain_per_point: self.retrain_per_point,
        }
    }

    fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        file.overlay(self.overrides()).resolve()
    }
}

enum Failure {
    Usage(String),
    Pipeline(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Pipeline(e)
    }
}

struct Run<'a> {
    command: &'static str,
    argv: Vec<String>,
    config: ResolvedConfig,
    out: PathBuf,
    started: Instant,
    started_unix: u64,
    flags: &'a Flags,
}

impl Run<'_> {
    fn out_dir(&self) -> anyhow::Result<&Path> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }

    fn manifest(
        &self,
        dataset_md5: Option<String>,
        loss_traces: Vec<NamedTrace>,
        artifacts: Vec<Artifact>,
    ) -> anyhow::Result<PathBuf> {
        let path = self.out_dir()?.join("manifest.json");
        let manifest = RunManifest {
            command: self.command.to_string(),
            argv: self.argv.clone(),
            config: self.config.clone(),
            dataset_md5,
            loss_traces,
            artifacts,
            environment: Environment::capture(),
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            assumptions: assumptions(),
        };
        write_manifest(&path, &manifest)?;
        Ok(path)
    }
}

fn artifact(path: &Path) -> anyhow::Result<Artifact> {
    Ok(Artifact { path: path.display().to_string(), sha256: file_sha256(path)? })
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

/// Parse `args` (including the program name) and run. Returns the process
/// exit code: 0 on success, 1 on pipeline errors, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli, &args) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: &Cli, args: &[OsString]) -> Result<serde_json::Value, Failure> {
    let flags = cli.command.flags();
    let config = flags.resolve().map_err(|e| Failure::Usage(e.to_string()))?;
    let command = cli.command.name();
    let started_unix = unix_now();
    let out = flags.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(format!("{started_unix}-{command}")));
    let run = Run {
        command,
        argv: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        config,
        out,
        started: Instant::now(),
        started_unix,
        flags,
    };
    let cache = DatasetCache::from_env();
    let summary = match &cli.command {
        Command::DataFetch(_) => {
            let m = fetch_dataset(&cache, &HttpSource::cifar10(), ARCHIVE_MD5).map_err(anyhow::Error::from)?;
            json!({
                "command": command, "status": "ok", "data_dir": cache.root(),
                "archive_md5": m.archive_md5, "train_records": m.train_records, "test_records": m.test_records,
            })
        }
        Command::DataVerify(_) => {
            let m = verify_dataset(&cache, ARCHIVE_MD5).map_err(anyhow::Error::from)?;
            json!({
                "command": command, "status": "ok", "data_dir": cache.root(),
                "archive_md5": m.archive_md5, "shards": m.shards.len(),
            })
        }
        Command::Train(_) => train_cmd(&run, &cache)?,
        Command::Eval { checkpoint, .. } => eval_cmd(&run, &cache, checkpoint)?,
        Command::Sweep(_) => sweep_cmd(&run, &cache)?,
        Command::Plot { results, .. } => plot_cmd(&run, results)?,
    };
    Ok(summary)
}

fn train_cmd(run: &Run<'_>, cache: &DatasetCache) -> anyhow::Result<serde_json::Value> {
    let manifest = verify_dataset(cache, ARCHIVE_MD5)?;
    let train_split = load_split(cache, SplitKind::Train)?;
    let config = run.config.training;
    let subset = SubsetSpec {
        sample_count: config.sample_count,
        seed: subset_seed(config.seed, config.sample_count),
        stratified: run.config.sweep.stratified,
    };
    let outcome = train_on_subset(&config, &train_split, &subset, &log)?;
    let checkpoint = ModelCheckpoint {
        params: outcome.params,
        provenance: Provenance {
            training: config,
            subset: Some(subset),
            dataset_md5: Some(manifest.archive_md5.clone()),
            trace: outcome.trace.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    let path = run.out_dir()?.join("model.ckpt");
    let digest = checkpoint.save(&path)?;
    let label = format!("{}/{}", config.mode.as_str(), config.sample_count);
    let manifest_path = run.manifest(
        Some(manifest.archive_md5),
        vec![NamedTrace { label, trace: outcome.trace.clone() }],
        vec![Artifact { path: path.display().to_string(), sha256: digest.clone() }],
    )?;
    Ok(json!({
        "command": "train", "status": "ok", "checkpoint": path, "sha256": digest,
        "epochs": outcome.trace.len(), "final_loss": outcome.trace.last().map(|e| e.total),
        "manifest": manifest_path,
    }))
}

fn eval_cmd(run: &Run<'_>, cache: &DatasetCache, checkpoint: &Path) -> anyhow::Result<serde_json::Value> {
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    ckpt.ensure_spec(&default_spec())?;
    let manifest = verify_dataset(cache, ARCHIVE_MD5)?;
    let test = load_split(cache, SplitKind::Test)?;
    let base = run.config.channel;
    let channel = ChannelConfig { seed: eval_seed(base.seed, base.nasar), ..base };
    let tag = ckpt.provenance.training.mode;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(run.config.jobs).build()?;
    let record = pool.install(|| {
        evaluate_parallel(&ckpt.params, &test, &channel, tag, ckpt.provenance.training.sample_count)
    })?;
    let dir = run.out_dir()?;
    let json_path = dir.join("metrics.json");
    let csv_path = dir.join("metrics.csv");
    crate::fsutil::write_json_atomic(&json_path, &record)?;
    write_atomic(&csv_path, &records_csv([&record])?)?;
    let manifest_path = run.manifest(
        Some(manifest.archive_md5),
        vec![],
        vec![artifact(checkpoint)?, artifact(&json_path)?, artifact(&csv_path)?],
    )?;
    Ok(json!({
        "command": "eval", "status": "ok", "model_tag": tag.as_str(), "nasar": record.nasar,
        "mean_psnr_db": record.mean_psnr, "mean_mse": record.mean_mse, "n_images": record.n_images,
        "metrics": json_path, "manifest": manifest_path,
    }))
}

fn sweep_cmd(run: &Run<'_>, cache: &DatasetCache) -> anyhow::Result<serde_json::Value> {
    let data = load_dataset(cache, ARCHIVE_MD5)?;
    let spec = &run.config.sweep;
    let result = run_sweep(spec, &data.train, &data.test, run.config.jobs, &log)?;
    let dir = run.out_dir()?;
    let saved = persist_results(&result, dir)?;
    let plot = emit_plot_data(&result, dir)?;
    let traces = result
        .models
        .iter()
        .map(|m| NamedTrace { label: format!("{}/{}", m.model_tag.as_str(), m.sample_count), trace: m.trace.clone() })
        .collect();
    let artifacts = [&saved.json, &saved.csv, &plot.figure, &plot.data, &plot.gaps]
        .into_iter()
        .map(|p| artifact(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let manifest_path = run.manifest(Some(data.manifest.archive_md5), traces, artifacts)?;
    let points: Vec<_> = result
        .points
        .iter()
        .map(|p| json!({"value": p.value, "ssl_psnr_db": p.ssl.mean_psnr, "sl_psnr_db": p.sl.mean_psnr, "gap_percent": p.gap_percent}))
        .collect();
    Ok(json!({
        "command": "sweep", "status": "ok", "kind": spec.kind.as_str(), "points": points,
        "results": saved.json, "csv": saved.csv, "figure": plot.figure, "manifest": manifest_path,
    }))
}

fn plot_cmd(run: &Run<'_>, results: &Path) -> anyhow::Result<serde_json::Value> {
    let result = crate::experiments::load_results(results)?;
    let dir = match &run.flags.out {
        Some(out) => out.clone(),
        None => results.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    let files = emit_plot_data(&result, &dir)?;
    Ok(json!({
        "command": "plot", "status": "ok", "figure": files.figure, "data": files.data, "gaps": files.gaps,
    }))
}
