#![allow(dead_code)]

use std::cell::Cell;
use std::io::Write;
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;
use md5::{Digest, Md5};
use semcomm::dataset::{
    build_manifest, ArchiveSource, DataError, DatasetCache, DatasetLayout, ARCHIVE_MD5, BATCH_DIR, MANIFEST_NAME,
    TEST_FILE, TRAIN_FILES,
};
use semcomm::write_json_atomic;
use semcomm_core::synthetic;

/// Synthetic shard contents for every expected member, in archive order.
pub fn shards(layout: DatasetLayout) -> Vec<(&'static str, Vec<u8>)> {
    TRAIN_FILES
        .iter()
        .copied()
        .chain([TEST_FILE])
        .enumerate()
        .map(|(i, name)| (name, synthetic::to_records(&synthetic::cifar_like(layout.records_per_shard, 100 + i as u64))))
        .collect()
}

/// gzip tar laid out like the published archive, plus an unrelated member.
pub fn archive(layout: DatasetLayout) -> Vec<u8> {
    let mut builder = tar::Builder::new(GzEncoder::new(Vec::new(), Compression::fast()));
    let mut add = |path: &str, data: &[u8]| {
        let mut header = tar::Header::new_gnu();
        header.set_size(data.len() as u64);
        header.set_mode(0o644);
        header.set_cksum();
        builder.append_data(&mut header, path, data).unwrap();
    };
    add(&format!("{BATCH_DIR}/readme.html"), b"<html></html>");
    for (name, data) in shards(layout) {
        add(&format!("{BATCH_DIR}/{name}"), &data);
    }
    builder.into_inner().unwrap().finish().unwrap()
}

pub fn md5_hex(bytes: &[u8]) -> String {
    hex::encode(Md5::digest(bytes))
}

/// In-memory archive source that counts how often it is asked for bytes.
pub struct FakeSource {
    pub bytes: Vec<u8>,
    pub calls: Cell<usize>,
}

impl FakeSource {
    pub fn new(bytes: Vec<u8>) -> Self {
        FakeSource { bytes, calls: Cell::new(0) }
    }
}

impl ArchiveSource for FakeSource {
    fn describe(&self) -> String {
        "memory://fake".into()
    }

    fn fetch(&self, sink: &mut dyn Write) -> Result<u64, DataError> {
        self.calls.set(self.calls.get() + 1);
        sink.write_all(&self.bytes).unwrap();
        Ok(self.bytes.len() as u64)
    }
}

/// Full-size cache of synthetic shards whose manifest records the pinned
/// archive digest, so the CLI accepts it.
pub fn full_size_cache(root: &Path) -> DatasetCache {
    let cache = DatasetCache::new(root);
    std::fs::create_dir_all(cache.batch_dir()).unwrap();
    for (name, data) in shards(DatasetLayout::CIFAR10) {
        std::fs::write(cache.shard_path(name), data).unwrap();
    }
    let manifest = build_manifest(&cache, "synthetic", ARCHIVE_MD5).unwrap();
    write_json_atomic(&root.join(MANIFEST_NAME), &manifest).unwrap();
    cache
}
