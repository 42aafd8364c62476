//! The two comparison sweeps (PSNR against NASAR, and against training set
//! size) plus persistence of their results.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use semcomm_core::channel::{signal_rms, ChannelConfig};
use semcomm_core::cifar::Split;
use semcomm_core::metrics::{evaluate_range, relative_gap, summarize, MetricsRecord, EVAL_CHUNK};
use semcomm_core::nn::{default_spec, Codec};
use semcomm_core::sampling::{subset_sample, SubsetSpec};
use semcomm_core::seed::{derive_seed, Tag};
use semcomm_core::train::{train, EpochLoss, LossTrace, Mode, TrainObserver, TrainOutcome, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::fsutil::{write_atomic, write_json_atomic};

pub const DEFAULT_NASAR_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_SAMPLES_GRID: [f64; 6] = [1000.0, 2000.0, 5000.0, 10000.0, 20000.0, 50000.0];
/// Channel level at which the samples sweep is evaluated.
pub const SAMPLES_SWEEP_NASAR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    #[default]
    Nasar,
    Samples,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Nasar => "nasar",
            SweepKind::Samples => "samples",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::Nasar => DEFAULT_NASAR_GRID.to_vec(),
            SweepKind::Samples => DEFAULT_SAMPLES_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub base_seed: u64,
    /// Template for every trained model; `mode`, `seed` and `sample_count`
    /// are filled in per model.
    pub training: TrainingConfig,
    /// Template for evaluation; `nasar` and `seed` are filled in per point.
    pub channel: ChannelConfig,
    /// Stratify training subsets by class (samples sweep).
    pub stratified: bool,
    /// Retrain at every NASAR point with matching training noise instead
    /// of training once.
    pub retrain_per_point: bool,
}

impl SweepSpec {
    pub fn validate(&self, train_len: usize) -> anyhow::Result<()> {
        anyhow::ensure!(!self.grid.is_empty(), "sweep grid is empty");
        anyhow::ensure!(self.grid.windows(2).all(|w| w[0] < w[1]), "sweep grid must be strictly increasing");
        match self.kind {
            SweepKind::Nasar => {
                anyhow::ensure!(
                    self.grid.iter().all(|v| v.is_finite() && *v >= 0.0),
                    "NASAR grid values must be finite and >= 0"
                );
                anyhow::ensure!(
                    self.training.sample_count <= train_len,
                    "sample count {} exceeds the {train_len} training images",
                    self.training.sample_count
                );
            }
            SweepKind::Samples => {
                for &v in &self.grid {
                    anyhow::ensure!(
                        v >= 1.0 && v.fract() == 0.0 && v <= train_len as f64,
                        "sample-count grid value {v} must be an integer in 1..={train_len}"
                    );
                }
            }
        }
        let mut t = self.training;
        t.sample_count = 1;
        t.validate()?;
        self.channel.validate()?;
        Ok(())
    }

    fn eval_nasar(&self, value: f64) -> f64 {
        match self.kind {
            SweepKind::Nasar => value,
            SweepKind::Samples => SAMPLES_SWEEP_NASAR,
        }
    }
}

/// Seed for models trained on `sample_count` images. Identical for both
/// regimes, so the pair starts from the same codec weights and sees the
/// same batches, and independent of the sweep kind.
pub fn training_seed(base: u64, sample_count: usize, retrain_nasar: Option<f64>) -> u64 {
    match retrain_nasar {
        None => derive_seed(base, &[Tag::Str("train"), Tag::U64(sample_count as u64)]),
        Some(v) => derive_seed(base, &[Tag::Str("train"), Tag::U64(sample_count as u64), Tag::Str("nasar"), Tag::F64(v)]),
    }
}

pub fn subset_seed(base: u64, sample_count: usize) -> u64 {
    derive_seed(base, &[Tag::Str("subset"), Tag::U64(sample_count as u64)])
}

/// Evaluation channel seed for a NASAR level.
pub fn eval_seed(base: u64, nasar: f64) -> u64 {
    derive_seed(base, &[Tag::Str("eval"), Tag::F64(nasar)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model_tag: Mode,
    pub sample_count: usize,
    pub training_seed: u64,
    pub noise_factor: f64,
    pub params_sha256: String,
    pub trace: LossTrace,
}

/// Seeds and models behind one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointManifest {
    pub value: f64,
    pub sample_count: usize,
    pub subset_seed: u64,
    pub training_seed: u64,
    pub eval_seed: u64,
    pub eval_nasar: f64,
    pub ssl_model: usize,
    pub sl_model: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub ssl: MetricsRecord,
    pub sl: MetricsRecord,
    pub gap_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
    pub manifests: Vec<PointManifest>,
    pub models: Vec<TrainedModel>,
}

/// One model to train: a regime on a (possibly subset) training set.
#[derive(Debug, Clone, Copy)]
struct TrainJob {
    mode: Mode,
    sample_count: usize,
    seed: u64,
    noise_factor: f64,
}

struct ProgressObserver<'a> {
    label: String,
    log: &'a (dyn Fn(&str) + Sync),
}

impl TrainObserver for ProgressObserver<'_> {
    fn epoch_done(&mut self, epoch: usize, loss: &EpochLoss) {
        (self.log)(&format!("{} epoch {} loss {:.6}", self.label, epoch + 1, loss.total));
    }
}

/// Train one regime on a (stratified) subset of `train_split`.
pub fn train_on_subset(
    config: &TrainingConfig,
    train_split: &Split,
    subset: &SubsetSpec,
    log: &(dyn Fn(&str) + Sync),
) -> anyhow::Result<TrainOutcome<f32>> {
    let data = subset_sample(train_split, subset)?;
    let mut observer = ProgressObserver { label: format!("{}/{}", config.mode.as_str(), config.sample_count), log };
    Ok(train::<f32>(config, &default_spec(), &data, &mut observer)?)
}

/// Mean PSNR over `test`, sharded over the current rayon pool. The result
/// does not depend on the number of workers.
pub fn evaluate_parallel<C: Codec<f32> + Sync + ?Sized>(
    codec: &C,
    test: &Split,
    channel: &ChannelConfig,
    model_tag: Mode,
    sample_count: usize,
) -> anyhow::Result<MetricsRecord> {
    let starts: Vec<usize> = (0..test.len()).step_by(EVAL_CHUNK).collect();
    let parts = starts
        .par_iter()
        .map(|&s| evaluate_range(codec, test, channel, s..(s + EVAL_CHUNK).min(test.len()), EVAL_CHUNK))
        .collect::<Result<Vec<_>, _>>()?;
    let mut scores: Vec<_> = parts.into_iter().flatten().collect();
    Ok(summarize(&mut scores, channel, model_tag, sample_count)?)
}

/// RMS of the normalized training images; converts a NASAR level into a
/// training noise sigma when retraining per point.
fn training_rms(split: &Split) -> anyhow::Result<f64> {
    let idx: Vec<usize> = (0..split.len()).collect();
    let mut sum_sq = 0.0;
    for chunk in idx.chunks(1000) {
        let batch = split.batch::<f64>(chunk)?;
        sum_sq += signal_rms(&batch.data)?.powi(2) * batch.data.len() as f64;
    }
    Ok((sum_sq / (split.len() * semcomm_core::cifar::IMAGE_LEN) as f64).sqrt())
}

/// Run a sweep with up to `jobs` worker threads.
///
/// Every seed derives from the base seed and the grid value, so results do
/// not depend on `jobs` or on execution order.
pub fn run_sweep(
    spec: &SweepSpec,
    train_split: &Split,
    test: &Split,
    jobs: usize,
    log: &(dyn Fn(&str) + Sync),
) -> anyhow::Result<SweepResult> {
    spec.validate(train_split.len())?;
    let base = spec.base_seed;
    // (grid value, sample count, job key) per point
    let mut point_jobs = Vec::new();
    let mut train_jobs: Vec<TrainJob> = Vec::new();
    let rms = if spec.kind == SweepKind::Nasar && spec.retrain_per_point { Some(training_rms(train_split)?) } else { None };
    for &value in &spec.grid {
        let (count, retrain) = match spec.kind {
            SweepKind::Nasar => (spec.training.sample_count, rms.map(|r| (value, value * r))),
            SweepKind::Samples => (value as usize, None),
        };
        let seed = training_seed(base, count, retrain.map(|r| r.0));
        let noise_factor = retrain.map_or(spec.training.noise_factor, |r| r.1);
        let mut ids = [0usize; 2];
        for (slot, mode) in [Mode::Ssl, Mode::Sl].into_iter().enumerate() {
            let job = TrainJob { mode, sample_count: count, seed, noise_factor };
            ids[slot] = match train_jobs.iter().position(|j| {
                j.mode == job.mode && j.sample_count == count && j.seed == seed && j.noise_factor == noise_factor
            }) {
                Some(i) => i,
                None => {
                    train_jobs.push(job);
                    train_jobs.len() - 1
                }
            };
        }
        point_jobs.push((value, count, seed, ids));
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    pool.install(|| {
        let trained = train_jobs
            .par_iter()
            .map(|job| {
                let config = TrainingConfig {
                    mode: job.mode,
                    seed: job.seed,
                    sample_count: job.sample_count,
                    noise_factor: job.noise_factor,
                    ..spec.training
                };
                let subset = SubsetSpec {
                    sample_count: job.sample_count,
                    seed: subset_seed(base, job.sample_count),
                    stratified: spec.stratified,
                };
                train_on_subset(&config, train_split, &subset, log)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;

        let mut points = Vec::new();
        let mut manifests = Vec::new();
        for &(value, count, seed, [ssl_id, sl_id]) in &point_jobs {
            let nasar = spec.eval_nasar(value);
            let channel = ChannelConfig { nasar, seed: eval_seed(base, nasar), ..spec.channel };
            let ssl = evaluate_parallel(&trained[ssl_id].params, test, &channel, Mode::Ssl, count)?;
            let sl = evaluate_parallel(&trained[sl_id].params, test, &channel, Mode::Sl, count)?;
            let gap_percent = relative_gap(&sl, &ssl)?;
            log(&format!(
                "{}={value}: ssl {:.3} dB, sl {:.3} dB, gap {:.2}%",
                spec.kind.as_str(),
                ssl.mean_psnr,
                sl.mean_psnr,
                gap_percent
            ));
            points.push(SweepPoint { value, ssl, sl, gap_percent });
            manifests.push(PointManifest {
                value,
                sample_count: count,
                subset_seed: subset_seed(base, count),
                training_seed: seed,
                eval_seed: channel.seed,
                eval_nasar: nasar,
                ssl_model: ssl_id,
                sl_model: sl_id,
            });
        }
        let models = train_jobs
            .iter()
            .zip(&trained)
            .map(|(job, out)| TrainedModel {
                model_tag: job.mode,
                sample_count: job.sample_count,
                training_seed: job.seed,
                noise_factor: job.noise_factor,
                params_sha256: out.params.digest(),
                trace: out.trace.clone(),
            })
            .collect();
        Ok(SweepResult { spec: spec.clone(), points, manifests, models })
    })
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    model_tag: &'a str,
    nasar: f64,
    sample_count: usize,
    mean_psnr_db: f64,
    mean_mse: f64,
    n_images: usize,
    seed: u64,
}

impl<'a> From<&'a MetricsRecord> for CsvRow<'a> {
    fn from(r: &'a MetricsRecord) -> Self {
        CsvRow {
            model_tag: r.model_tag.as_str(),
            nasar: r.nasar,
            sample_count: r.sample_count,
            mean_psnr_db: r.mean_psnr,
            mean_mse: r.mean_mse,
            n_images: r.n_images,
            seed: r.seed,
        }
    }
}

/// Flat CSV of metric records, one row each.
pub fn records_csv<'a>(records: impl IntoIterator<Item = &'a MetricsRecord>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    Ok(w.into_inner()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistedResults {
    pub json: PathBuf,
    pub csv: PathBuf,
}

/// Write `results.json` (complete) and `results.csv` (one row per model
/// per grid point) into `dir`, each atomically.
pub fn persist_results(result: &SweepResult, dir: &Path) -> anyhow::Result<PersistedResults> {
    let json = dir.join("results.json");
    let csv = dir.join("results.csv");
    write_json_atomic(&json, result)?;
    let records = result.points.iter().flat_map(|p| [&p.ssl, &p.sl]);
    write_atomic(&csv, &records_csv(records)?)?;
    Ok(PersistedResults { json, csv })
}

pub fn load_results(path: &Path) -> anyhow::Result<SweepResult> {
    let bytes = std::fs::read(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(serde_json::from_slice(&bytes)?)
}
