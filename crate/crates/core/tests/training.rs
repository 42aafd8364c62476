use semcomm_core::channel::{ChannelConfig, Placement};
use semcomm_core::metrics::mean_psnr_over;
use semcomm_core::nn::{default_spec, Parameters};
use semcomm_core::train::{denoising_loss, init_seed, train, Mode, TrainingConfig};
use semcomm_core::synthetic;

fn config(mode: Mode, n: usize, epochs: usize) -> TrainingConfig {
    TrainingConfig { mode, epochs, batch_size: 32, sample_count: n, seed: 21, ..Default::default() }
}

#[test]
fn unweighted_supervision_reduces_to_self_supervision() {
    let split = synthetic::cifar_like(96, 5);
    let spec = default_spec();
    let ssl = train::<f32>(&config(Mode::Ssl, 96, 2), &spec, &split, &mut ()).unwrap();
    let sl_cfg = TrainingConfig { sl_aux_weight: 0.0, ..config(Mode::Sl, 96, 2) };
    let sl = train::<f32>(&sl_cfg, &spec, &split, &mut ()).unwrap();
    assert!(sl.params.has_head());
    assert_eq!(ssl.params.codec_tensors(), sl.params.codec_tensors());
    for (a, b) in ssl.trace.epochs.iter().zip(&sl.trace.epochs) {
        assert_eq!(a.reconstruction.to_bits(), b.reconstruction.to_bits());
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let split = synthetic::cifar_like(64, 6);
    let spec = default_spec();
    let cfg = config(Mode::Sl, 64, 1);
    let a = train::<f32>(&cfg, &spec, &split, &mut ()).unwrap();
    let b = train::<f32>(&cfg, &spec, &split, &mut ()).unwrap();
    assert_eq!(a.params.digest(), b.params.digest());
    assert_eq!(a.trace, b.trace);
    let c = train::<f32>(&TrainingConfig { seed: 22, ..cfg }, &spec, &split, &mut ()).unwrap();
    assert_ne!(a.params.digest(), c.params.digest());
}

#[test]
fn denoising_training_reduces_loss_and_raises_psnr() {
    let split = synthetic::cifar_like(256, 7);
    let test = synthetic::cifar_like(40, 8);
    let spec = default_spec();
    let cfg = config(Mode::Ssl, 256, 4);
    let untrained = Parameters::<f32>::init(&spec, init_seed(cfg.seed), false).unwrap();
    let out = train::<f32>(&cfg, &spec, &split, &mut ()).unwrap();

    let before = denoising_loss(&untrained, &split, 0.5, 64, 1).unwrap();
    let after = denoising_loss(&out.params, &split, 0.5, 64, 1).unwrap();
    assert!(after < 0.8 * before, "loss {before} -> {after}");
    let trace = &out.trace.epochs;
    assert!(trace.last().unwrap().total < trace[0].total);

    let ch = ChannelConfig { nasar: 0.1, placement: Placement::Input, seed: 3 };
    let p0 = mean_psnr_over(&untrained, &test, &ch, Mode::Ssl, 256).unwrap();
    let p1 = mean_psnr_over(&out.params, &test, &ch, Mode::Ssl, 256).unwrap();
    assert!(p1.mean_psnr > p0.mean_psnr + 1.0, "{} -> {}", p0.mean_psnr, p1.mean_psnr);
}

#[test]
fn latent_placement_trains() {
    let split = synthetic::cifar_like(64, 9);
    let cfg = TrainingConfig { placement: Placement::Latent, ..config(Mode::Sl, 64, 2) };
    let out = train::<f32>(&cfg, &default_spec(), &split, &mut ()).unwrap();
    assert_eq!(out.trace.len(), 2);
    assert!(out.trace.epochs.iter().all(|e| e.total.is_finite() && e.classification.is_some()));
}
