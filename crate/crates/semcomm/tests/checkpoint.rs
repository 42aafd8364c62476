use proptest::prelude::*;
use semcomm::checkpoint::{CheckpointError, ModelCheckpoint, Provenance, FORMAT_VERSION, MAGIC};
use semcomm_core::nn::{default_spec, Activation, Parameters};
use semcomm_core::train::{EpochLoss, LossTrace, TrainingConfig};

fn sample(with_head: bool) -> ModelCheckpoint {
    let params = Parameters::<f32>::init(&default_spec(), 3, with_head).unwrap();
    let trace = LossTrace { epochs: vec![EpochLoss { reconstruction: 0.2, classification: None, total: 0.2 }] };
    ModelCheckpoint {
        params,
        provenance: Provenance {
            training: TrainingConfig { epochs: 1, sample_count: 512, seed: 7, ..Default::default() },
            subset: None,
            dataset_md5: Some("abc".into()),
            trace,
            tool_version: "test".into(),
        },
    }
}

#[test]
fn round_trip_preserves_everything() {
    for with_head in [false, true] {
        let ckpt = sample(with_head);
        let bytes = ckpt.to_bytes().unwrap();
        assert_eq!(&bytes[..8], &MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), FORMAT_VERSION);
        let back = ModelCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}

#[test]
fn save_and_load_via_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let ckpt = sample(false);
    let digest = ckpt.save(&path).unwrap();
    assert_eq!(digest, semcomm::checkpoint::file_sha256(&path).unwrap());
    assert_eq!(ModelCheckpoint::load(&path).unwrap(), ckpt);
    assert!(matches!(ModelCheckpoint::load(&dir.path().join("none")), Err(CheckpointError::Io { .. })));
}

#[test]
fn truncation_and_corruption_are_detected() {
    let bytes = sample(false).to_bytes().unwrap();
    for cut in [0, 5, 19, 40, bytes.len() / 2, bytes.len() - 1] {
        let err = ModelCheckpoint::from_bytes(&bytes[..cut]).unwrap_err();
        assert!(matches!(err, CheckpointError::Truncated { .. } | CheckpointError::Header(_)), "cut {cut}: {err}");
    }
    let mut flipped = bytes.clone();
    let last_data = bytes.len() - 40;
    flipped[last_data] ^= 1;
    assert!(matches!(ModelCheckpoint::from_bytes(&flipped), Err(CheckpointError::Corrupt)));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(ModelCheckpoint::from_bytes(&magic), Err(CheckpointError::BadMagic)));

    let mut version = bytes.clone();
    version[8..12].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(ModelCheckpoint::from_bytes(&version), Err(CheckpointError::UnsupportedVersion { found: 2 })));
}

#[test]
fn spec_mismatch_is_reported() {
    let ckpt = sample(false);
    ckpt.ensure_spec(&default_spec()).unwrap();
    let mut other = default_spec();
    other.encoder_layers[0].activation = Activation::Tanh;
    assert!(matches!(ckpt.ensure_spec(&other), Err(CheckpointError::SpecMismatch { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn damaged_bytes_never_load_silently(pos in 0usize..1_000_000, bit in 0u8..8, cut in 0usize..1_000_000) {
        let bytes = sample(false).to_bytes().unwrap();
        let mut damaged = bytes.clone();
        let pos = pos % bytes.len();
        damaged[pos] ^= 1 << bit;
        prop_assert!(ModelCheckpoint::from_bytes(&damaged).is_err());
        prop_assert!(ModelCheckpoint::from_bytes(&bytes[..cut % bytes.len()]).is_err());
    }
}
