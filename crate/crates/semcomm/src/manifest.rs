//! Run manifests: enough provenance to repeat any artifact-producing run.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use semcomm_core::train::LossTrace;
use serde::{Deserialize, Serialize};

use crate::config::ResolvedConfig;
use crate::fsutil::write_json_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub cpu_features: Vec<String>,
    pub available_parallelism: usize,
    pub tool_version: String,
}

impl Environment {
    pub fn capture() -> Self {
        let mut cpu_features = Vec::new();
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") {
                cpu_features.push("avx2".to_string());
            }
            if std::arch::is_x86_feature_detected!("fma") {
                cpu_features.push("fma".to_string());
            }
        }
        Environment {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpu_features,
            available_parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTrace {
    pub label: String,
    pub trace: LossTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: ResolvedConfig,
    pub dataset_md5: Option<String>,
    pub loss_traces: Vec<NamedTrace>,
    pub artifacts: Vec<Artifact>,
    pub environment: Environment,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub assumptions: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Modelling choices that the results depend on but that are not fixed by
/// the method description.
pub fn assumptions() -> Vec<String> {
    [
        "autoencoder layout is a chosen default: conv 3-32-64-128 (k3 s2 p1, ReLU) to a 128x4x4 code, mirrored transposed convs, tanh output",
        "training noise_factor is a Gaussian sigma in normalized [-1, 1] units; evaluation NASAR scales sigma by the RMS of each transmitted image",
        "supervised baseline = same autoencoder plus a linear classifier on the clean latent code, loss mse + sl_aux_weight * cross-entropy",
        "PSNR is computed per image in [0, 1] space with peak 1 and a 100 dB cap, then averaged arithmetically",
        "evaluation uses all 10,000 test images, each with its own derived noise seed",
        "the NASAR sweep trains once and re-noises at each grid value unless retrain_per_point is set",
        "the samples sweep trains on class-stratified subsets and evaluates at NASAR 0.5",
        "the final partial batch of each epoch is kept",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    write_json_atomic(path, manifest)
}
