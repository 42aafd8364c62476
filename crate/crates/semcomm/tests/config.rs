use semcomm::config::{ConfigError, ConfigFile};
use semcomm::experiments::{SweepKind, DEFAULT_NASAR_GRID, DEFAULT_SAMPLES_GRID};
use semcomm_core::channel::Placement;
use semcomm_core::train::Mode;

#[test]
fn empty_file_gives_defaults() {
    let r = ConfigFile::parse("").unwrap().resolve().unwrap();
    let t = r.training;
    assert_eq!((t.learning_rate, t.epochs, t.batch_size, t.noise_factor), (0.001, 20, 128, 0.5));
    assert_eq!((t.mode, t.sample_count, t.sl_aux_weight), (Mode::Ssl, 50_000, 0.1));
    assert_eq!(r.channel.placement, Placement::Input);
    assert_eq!(r.sweep.kind, SweepKind::Nasar);
    assert_eq!(r.sweep.grid, DEFAULT_NASAR_GRID);
    assert!(r.sweep.stratified && !r.sweep.retrain_per_point);
    assert_eq!(r.jobs, 1);
}

#[test]
fn flags_override_file_values() {
    let file = ConfigFile::parse("epochs = 5\nlr = 0.01\nseed = 3").unwrap();
    let over = ConfigFile { epochs: Some(1), ..Default::default() };
    let r = file.overlay(over).resolve().unwrap();
    assert_eq!(r.training.epochs, 1);
    assert_eq!(r.training.learning_rate, 0.01);
    assert_eq!(r.training.seed, 3);
    assert_eq!(r.training.batch_size, 128);
}

#[test]
fn unknown_key_is_named() {
    let err = ConfigFile::parse("epochz = 3").unwrap_err();
    assert!(matches!(err, ConfigError::Parse(_)));
    assert!(err.to_string().contains("epochz"), "{err}");
}

#[test]
fn type_mismatch_and_invalid_values_are_rejected() {
    assert!(ConfigFile::parse("epochs = \"many\"").is_err());
    assert!(ConfigFile::parse("mode = \"unsupervised\"").is_err());
    assert!(matches!(ConfigFile::parse("lr = -1.0").unwrap().resolve(), Err(ConfigError::Invalid(_))));
    assert!(matches!(ConfigFile::parse("epochs = 0").unwrap().resolve(), Err(ConfigError::Invalid(_))));
    assert!(matches!(ConfigFile::parse("nasar = -0.1").unwrap().resolve(), Err(ConfigError::Invalid(_))));
    assert!(matches!(ConfigFile::parse("jobs = 0").unwrap().resolve(), Err(ConfigError::Invalid(_))));
}

#[test]
fn full_file_parses() {
    let text = r#"
        seed = 7
        mode = "sl"
        samples = 1000
        nasar = 0.3
        placement = "latent"
        kind = "samples"
        grid = [1000, 2000]
        jobs = 2
        sl_aux_weight = 0.0
        stratified = false
        retrain_per_point = true
    "#;
    let r = ConfigFile::parse(text).unwrap().resolve().unwrap();
    assert_eq!(r.training.mode, Mode::Sl);
    assert_eq!(r.channel.placement, Placement::Latent);
    assert_eq!(r.channel.nasar, 0.3);
    assert_eq!(r.sweep.kind, SweepKind::Samples);
    assert_eq!(r.sweep.grid, [1000.0, 2000.0]);
    assert_eq!(r.jobs, 2);
    assert!(!r.sweep.stratified && r.sweep.retrain_per_point);
    let samples = ConfigFile::parse("kind = \"samples\"").unwrap().resolve().unwrap();
    assert_eq!(samples.sweep.grid, DEFAULT_SAMPLES_GRID);
}
