use semcomm_core::channel::{add_awgn, corrupt, ChannelConfig, Placement};

const DRAWS: usize = 1_000_000;

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn awgn_has_requested_moments() {
    for (sigma, seed) in [(0.3, 1u64), (1.0, 2), (0.05, 3)] {
        let noise = add_awgn(&vec![0.0f64; DRAWS], sigma, seed).unwrap();
        let (mean, std) = moments(&noise);
        assert!(mean.abs() < 0.002, "mean {mean}");
        assert!((std / sigma - 1.0).abs() < 0.005, "std {std} for sigma {sigma}");
    }
}

#[test]
fn channel_noise_tracks_signal_rms() {
    // alternating +-0.58 has RMS 0.58
    let signal: Vec<f64> = (0..DRAWS).map(|i| if i % 2 == 0 { 0.58 } else { -0.58 }).collect();
    let cfg = ChannelConfig { nasar: 0.3, placement: Placement::Input, seed: 11 };
    let (out, draw) = corrupt(&signal, &cfg).unwrap();
    assert!((draw.sigma - 0.174).abs() < 1e-9);
    let diff: Vec<f64> = out.iter().zip(&signal).map(|(o, s)| o - s).collect();
    let (mean, std) = moments(&diff);
    assert!(mean.abs() < 0.002);
    assert!((std / 0.174 - 1.0).abs() < 0.005);
    // no clamping: some outputs exceed the signal range
    assert!(out.iter().any(|v| v.abs() > 1.0));
}
