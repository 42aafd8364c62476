//! CIFAR-10 binary archive: download, integrity checks, extraction and
//! loading into parsed splits.
//!
//! The cache directory holds the archive, the extracted
//! `cifar-10-batches-bin/` shards and a `manifest.json` written after the
//! archive digest has been checked. A cache that verifies is never
//! re-downloaded.

use std::fs::{self, File};
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use md5::{Digest, Md5};
use semcomm_core::cifar::{Split, NORM_MEAN, NORM_STD, NUM_CLASSES, RECORD_LEN};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::fsutil::{write_atomic, write_json_atomic};

pub const DATASET_URL: &str = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz";
/// MD5 of the published binary archive.
pub const ARCHIVE_MD5: &str = "c32a1d4ab5d03f1284b67883e8d87530";
pub const ARCHIVE_NAME: &str = "cifar-10-binary.tar.gz";
pub const BATCH_DIR: &str = "cifar-10-batches-bin";
pub const TRAIN_FILES: [&str; 5] =
    ["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"];
pub const TEST_FILE: &str = "test_batch.bin";
pub const MANIFEST_NAME: &str = "manifest.json";
pub const DATA_DIR_ENV: &str = "SEMCOMM_DATA_DIR";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("download from {url} failed: {message}")]
    Download { url: String, message: String },
    #[error("checksum mismatch for {what}: expected {expected}, got {actual}")]
    Checksum { what: String, expected: String, actual: String },
    #[error("{path}: expected {expected} bytes, found {actual}")]
    Size { path: PathBuf, expected: u64, actual: u64 },
    #[error("dataset cache at {root} is not ready: {reason} (run `semcomm data-fetch`)")]
    NotReady { root: PathBuf, reason: String },
    #[error("archive has no member {0}")]
    MissingMember(String),
    #[error("dataset manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Parse(#[from] semcomm_core::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

/// Shard geometry. Only [`DatasetLayout::CIFAR10`] is used outside tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetLayout {
    pub records_per_shard: usize,
}

impl DatasetLayout {
    pub const CIFAR10: DatasetLayout = DatasetLayout { records_per_shard: 10_000 };

    pub fn shard_bytes(&self) -> u64 {
        (self.records_per_shard * RECORD_LEN) as u64
    }

    pub fn train_records(&self) -> usize {
        TRAIN_FILES.len() * self.records_per_shard
    }

    pub fn test_records(&self) -> usize {
        self.records_per_shard
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct DatasetCache {
    root: PathBuf,
    layout: DatasetLayout,
}

impl DatasetCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self::with_layout(root, DatasetLayout::CIFAR10)
    }

    pub fn with_layout(root: impl Into<PathBuf>, layout: DatasetLayout) -> Self {
        DatasetCache { root: root.into(), layout }
    }

    /// `$SEMCOMM_DATA_DIR`, or `./data` when unset.
    pub fn from_env() -> Self {
        let root = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"));
        Self::new(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn layout(&self) -> DatasetLayout {
        self.layout
    }

    pub fn archive_path(&self) -> PathBuf {
        self.root.join(ARCHIVE_NAME)
    }

    pub fn batch_dir(&self) -> PathBuf {
        self.root.join(BATCH_DIR)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_NAME)
    }

    pub fn shard_path(&self, name: &str) -> PathBuf {
        self.batch_dir().join(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: String,
    pub archive_md5: String,
    pub record_len: usize,
    pub records_per_shard: usize,
    pub train_records: usize,
    pub test_records: usize,
    pub shards: Vec<ShardEntry>,
    pub normalization: Normalization,
}

/// Where the archive bytes come from. Tests substitute an in-memory source.
pub trait ArchiveSource {
    fn describe(&self) -> String;
    fn fetch(&self, sink: &mut dyn Write) -> Result<u64, DataError>;
}

pub struct HttpSource {
    pub url: String,
}

impl HttpSource {
    pub fn cifar10() -> Self {
        HttpSource { url: DATASET_URL.to_string() }
    }
}

impl ArchiveSource for HttpSource {
    fn describe(&self) -> String {
        self.url.clone()
    }

    fn fetch(&self, sink: &mut dyn Write) -> Result<u64, DataError> {
        let fail = |message: String| DataError::Download { url: self.url.clone(), message };
        let response = ureq::get(&self.url).call().map_err(|e| fail(e.to_string()))?;
        let mut body = response.into_body().into_reader();
        io::copy(&mut body, sink).map_err(|e| fail(e.to_string()))
    }
}

struct HashingWriter<'a, W> {
    inner: W,
    md5: &'a mut Md5,
}

impl<W: Write> Write for HashingWriter<'_, W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.md5.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub fn file_md5(path: &Path) -> Result<String, DataError> {
    let mut file = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut md5 = Md5::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        md5.update(&buf[..n]);
    }
    Ok(hex::encode(md5.finalize()))
}

/// Make sure a verified copy of the dataset is in `cache`, downloading from
/// `source` only when the cache does not already verify.
pub fn fetch_dataset(
    cache: &DatasetCache,
    source: &dyn ArchiveSource,
    expected_md5: &str,
) -> Result<DatasetManifest, DataError> {
    if let Ok(manifest) = verify_dataset(cache, expected_md5) {
        return Ok(manifest);
    }
    let root = cache.root();
    fs::create_dir_all(root).map_err(io_err(root))?;
    let archive = cache.archive_path();
    let have_archive = archive.is_file() && file_md5(&archive)? == expected_md5;
    if !have_archive {
        let mut tmp = tempfile::NamedTempFile::new_in(root).map_err(io_err(root))?;
        let mut md5 = Md5::new();
        source.fetch(&mut HashingWriter { inner: tmp.as_file_mut(), md5: &mut md5 })?;
        let actual = hex::encode(md5.finalize());
        if actual != expected_md5 {
            return Err(DataError::Checksum {
                what: format!("archive from {}", source.describe()),
                expected: expected_md5.to_string(),
                actual,
            });
        }
        tmp.persist(&archive).map_err(|e| DataError::Io { path: archive.clone(), source: e.error })?;
    }
    extract(cache)?;
    let manifest = build_manifest(cache, &source.describe(), expected_md5)?;
    write_json_atomic(&cache.manifest_path(), &manifest).map_err(io_err(&cache.manifest_path()))?;
    verify_dataset(cache, expected_md5)
}

fn expected_members() -> impl Iterator<Item = &'static str> {
    TRAIN_FILES.iter().copied().chain([TEST_FILE])
}

/// Unpack the six shards from the cached archive, ignoring other members.
pub fn extract(cache: &DatasetCache) -> Result<(), DataError> {
    let archive_path = cache.archive_path();
    let file = File::open(&archive_path).map_err(io_err(&archive_path))?;
    let mut archive = tar::Archive::new(GzDecoder::new(BufReader::new(file)));
    let dir = cache.batch_dir();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut found = Vec::new();
    for entry in archive.entries().map_err(io_err(&archive_path))? {
        let mut entry = entry.map_err(io_err(&archive_path))?;
        let path = entry.path().map_err(io_err(&archive_path))?.into_owned();
        let mut parts = path.components().map(|c| c.as_os_str().to_string_lossy().into_owned());
        let (Some(parent), Some(name), None) = (parts.next(), parts.next(), parts.next()) else {
            continue;
        };
        if parent != BATCH_DIR || !expected_members().any(|m| m == name) {
            continue;
        }
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes).map_err(io_err(&archive_path))?;
        let dest = cache.shard_path(&name);
        write_atomic(&dest, &bytes).map_err(io_err(&dest))?;
        found.push(name);
    }
    for member in expected_members() {
        if !found.iter().any(|f| f == member) {
            return Err(DataError::MissingMember(format!("{BATCH_DIR}/{member}")));
        }
    }
    Ok(())
}

fn read_shard(cache: &DatasetCache, name: &str) -> Result<Vec<u8>, DataError> {
    let path = cache.shard_path(name);
    if !path.is_file() {
        return Err(DataError::NotReady { root: cache.root().to_path_buf(), reason: format!("missing {}", path.display()) });
    }
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let expected = cache.layout().shard_bytes();
    if bytes.len() as u64 != expected {
        return Err(DataError::Size { path, expected, actual: bytes.len() as u64 });
    }
    Ok(bytes)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Describe the extracted shards as they are on disk.
pub fn build_manifest(cache: &DatasetCache, source: &str, archive_md5: &str) -> Result<DatasetManifest, DataError> {
    let mut shards = Vec::new();
    for name in expected_members() {
        let bytes = read_shard(cache, name)?;
        shards.push(ShardEntry { name: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
    }
    let layout = cache.layout();
    Ok(DatasetManifest {
        source: source.to_string(),
        archive_md5: archive_md5.to_string(),
        record_len: RECORD_LEN,
        records_per_shard: layout.records_per_shard,
        train_records: layout.train_records(),
        test_records: layout.test_records(),
        shards,
        normalization: Normalization { mean: NORM_MEAN, std: NORM_STD },
    })
}

/// Check every shard against the manifest and the pinned archive digest.
pub fn verify_dataset(cache: &DatasetCache, expected_md5: &str) -> Result<DatasetManifest, DataError> {
    let path = cache.manifest_path();
    if !path.is_file() {
        return Err(DataError::NotReady { root: cache.root().to_path_buf(), reason: "no manifest.json".into() });
    }
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(&path).map_err(io_err(&path))?)?;
    if manifest.archive_md5 != expected_md5 {
        return Err(DataError::Checksum {
            what: "archive recorded in manifest".into(),
            expected: expected_md5.to_string(),
            actual: manifest.archive_md5.clone(),
        });
    }
    if manifest.records_per_shard != cache.layout().records_per_shard {
        return Err(DataError::NotReady {
            root: cache.root().to_path_buf(),
            reason: format!("manifest lists {} records per shard", manifest.records_per_shard),
        });
    }
    for name in expected_members() {
        let bytes = read_shard(cache, name)?;
        let entry = manifest.shards.iter().find(|s| s.name == name).ok_or_else(|| DataError::NotReady {
            root: cache.root().to_path_buf(),
            reason: format!("manifest has no entry for {name}"),
        })?;
        let actual = sha256_hex(&bytes);
        if actual != entry.sha256 {
            return Err(DataError::Checksum { what: name.to_string(), expected: entry.sha256.clone(), actual });
        }
        if let Some(label) = bytes.iter().step_by(RECORD_LEN).find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(semcomm_core::Error::LabelOutOfRange { label: *label as usize }.into());
        }
    }
    Ok(manifest)
}

/// Parse one split from the extracted shards. Does not verify digests.
pub fn load_split(cache: &DatasetCache, kind: SplitKind) -> Result<Split, DataError> {
    let names: Vec<&str> = match kind {
        SplitKind::Train => TRAIN_FILES.to_vec(),
        SplitKind::Test => vec![TEST_FILE],
    };
    let shards = names.iter().map(|n| read_shard(cache, n)).collect::<Result<Vec<_>, _>>()?;
    Ok(Split::parse_shards(shards.iter().map(Vec::as_slice))?)
}

/// Verified train and test splits.
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub train: Split,
    pub test: Split,
}

pub fn load_dataset(cache: &DatasetCache, expected_md5: &str) -> Result<Dataset, DataError> {
    let manifest = verify_dataset(cache, expected_md5)?;
    let train = load_split(cache, SplitKind::Train)?;
    let test = load_split(cache, SplitKind::Test)?;
    Ok(Dataset { manifest, train, test })
}
