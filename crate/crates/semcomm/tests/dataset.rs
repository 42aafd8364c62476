mod common;

use common::{archive, md5_hex, FakeSource};
use semcomm::dataset::{
    fetch_dataset, load_dataset, load_split, verify_dataset, DataError, DatasetCache, DatasetLayout, SplitKind,
    TEST_FILE,
};

const SMALL: DatasetLayout = DatasetLayout { records_per_shard: 40 };

fn small_cache(dir: &std::path::Path) -> DatasetCache {
    DatasetCache::with_layout(dir, SMALL)
}

#[test]
fn fetch_extracts_verifies_and_records_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cache = small_cache(dir.path());
    let bytes = archive(SMALL);
    let digest = md5_hex(&bytes);
    let source = FakeSource::new(bytes);

    let manifest = fetch_dataset(&cache, &source, &digest).unwrap();
    assert_eq!(source.calls.get(), 1);
    assert_eq!(manifest.archive_md5, digest);
    assert_eq!((manifest.train_records, manifest.test_records), (200, 40));
    assert_eq!(manifest.shards.len(), 6);
    assert_eq!(manifest.normalization.mean, [0.5; 3]);
    assert!(cache.manifest_path().is_file());
    assert!(!cache.batch_dir().join("readme.html").exists());

    let data = load_dataset(&cache, &digest).unwrap();
    assert_eq!((data.train.len(), data.test.len()), (200, 40));
    assert!(data.train.labels().iter().all(|&l| l < 10));

    // a verified cache is reused without touching the source
    fetch_dataset(&cache, &source, &digest).unwrap();
    assert_eq!(source.calls.get(), 1);
}

#[test]
fn wrong_digest_is_rejected_before_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let cache = small_cache(dir.path());
    let source = FakeSource::new(archive(SMALL));
    let err = fetch_dataset(&cache, &source, "00000000000000000000000000000000").unwrap_err();
    assert!(matches!(err, DataError::Checksum { .. }), "{err}");
    assert!(!cache.archive_path().exists());
    assert!(!cache.manifest_path().exists());
}

#[test]
fn corrupted_or_truncated_shards_fail_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cache = small_cache(dir.path());
    let bytes = archive(SMALL);
    let digest = md5_hex(&bytes);
    fetch_dataset(&cache, &FakeSource::new(bytes), &digest).unwrap();

    let shard = cache.shard_path(TEST_FILE);
    let original = std::fs::read(&shard).unwrap();
    let mut flipped = original.clone();
    flipped[100] ^= 0xff;
    std::fs::write(&shard, &flipped).unwrap();
    let err = verify_dataset(&cache, &digest).unwrap_err();
    assert!(matches!(err, DataError::Checksum { .. }));
    assert!(err.to_string().contains("checksum"), "{err}");

    std::fs::write(&shard, &original[..original.len() - 1]).unwrap();
    assert!(matches!(verify_dataset(&cache, &digest), Err(DataError::Size { .. })));

    // a refetch repairs the cache from the archive already on disk
    let source = FakeSource::new(Vec::new());
    fetch_dataset(&cache, &source, &digest).unwrap();
    assert_eq!(source.calls.get(), 0);
    assert_eq!(std::fs::read(&shard).unwrap(), original);
}

#[test]
fn manifest_must_name_the_pinned_archive() {
    let dir = tempfile::tempdir().unwrap();
    let cache = small_cache(dir.path());
    let bytes = archive(SMALL);
    let digest = md5_hex(&bytes);
    fetch_dataset(&cache, &FakeSource::new(bytes), &digest).unwrap();
    assert!(matches!(verify_dataset(&cache, &"f".repeat(32)), Err(DataError::Checksum { .. })));
    // the full-size layout does not accept small shards
    let strict = DatasetCache::new(dir.path());
    assert!(verify_dataset(&strict, &digest).is_err());
}

#[test]
fn missing_cache_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cache = small_cache(&dir.path().join("absent"));
    let err = verify_dataset(&cache, "x").unwrap_err();
    assert!(matches!(err, DataError::NotReady { .. }));
    assert!(load_split(&cache, SplitKind::Test).is_err());
}

#[test]
fn archive_without_shards_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cache = small_cache(dir.path());
    let mut builder = tar::Builder::new(flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast()));
    let mut header = tar::Header::new_gnu();
    header.set_size(3);
    header.set_cksum();
    builder.append_data(&mut header, "other/file.bin", &b"abc"[..]).unwrap();
    let bytes = builder.into_inner().unwrap().finish().unwrap();
    let digest = md5_hex(&bytes);
    let err = fetch_dataset(&cache, &FakeSource::new(bytes), &digest).unwrap_err();
    assert!(matches!(err, DataError::MissingMember(_)), "{err}");
}
