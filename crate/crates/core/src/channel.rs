//! Additive white Gaussian noise channel parameterized by NASAR, the ratio
//! of noise amplitude to signal amplitude.
//!
//! Signal amplitude is the RMS of whatever array is transmitted (an image
//! batch or a latent code). Corrupted values are never clamped.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::seed::{rng_from, Rng, Tag};

/// Where the channel noise is injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Placement {
    /// On the image before encoding.
    #[default]
    Input,
    /// On the latent code between encoder and decoder.
    Latent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelConfig {
    pub nasar: f64,
    pub placement: Placement,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { nasar: 0.5, placement: Placement::Input, seed: 0 }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nasar >= 0.0 && self.nasar.is_finite()) {
            return Err(Error::NegativeInput { name: "nasar", value: self.nasar });
        }
        Ok(())
    }
}

/// The realized noise level of one channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseDraw {
    pub sigma: f64,
    pub seed_used: u64,
}

/// Root mean square over every value of the array.
pub fn signal_rms<T: Real>(values: &[T]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("signal"));
    }
    let sum_sq: f64 = values.iter().map(|v| v.to_f64() * v.to_f64()).sum();
    Ok(libm::sqrt(sum_sq / values.len() as f64))
}

pub fn noise_sigma(nasar: f64, signal_amplitude: f64) -> Result<f64> {
    if nasar.is_nan() || nasar < 0.0 {
        return Err(Error::NegativeInput { name: "nasar", value: nasar });
    }
    if signal_amplitude.is_nan() || signal_amplitude < 0.0 {
        return Err(Error::NegativeInput { name: "signal amplitude", value: signal_amplitude });
    }
    Ok(nasar * signal_amplitude)
}

/// The generator an [`add_awgn`] call with this seed draws from.
pub fn noise_rng(seed: u64) -> Rng {
    rng_from(seed, &[Tag::Str("awgn")])
}

/// Add i.i.d. `N(0, sigma^2)` noise drawn from `rng`, in place.
///
/// `sigma == 0` leaves the values (including signed zeros) untouched and
/// consumes no randomness.
pub fn add_awgn_with<T: Real>(values: &mut [T], sigma: f64, rng: &mut Rng) {
    if sigma == 0.0 {
        return;
    }
    for v in values.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = T::from_f64(v.to_f64() + sigma * z);
    }
}

pub fn add_awgn<T: Real>(values: &[T], sigma: f64, seed: u64) -> Result<Vec<T>> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::NegativeInput { name: "sigma", value: sigma });
    }
    let mut out = values.to_vec();
    add_awgn_with(&mut out, sigma, &mut noise_rng(seed));
    Ok(out)
}

/// Corrupt an array (image batch or latent code, per `config.placement`)
/// with noise of standard deviation `nasar * rms(values)`.
pub fn corrupt<T: Real>(values: &[T], config: &ChannelConfig) -> Result<(Vec<T>, NoiseDraw)> {
    config.validate()?;
    let sigma = noise_sigma(config.nasar, signal_rms(values)?)?;
    let out = add_awgn(values, sigma, config.seed)?;
    Ok((out, NoiseDraw { sigma, seed_used: config.seed }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rms_examples() {
        assert_eq!(signal_rms(&[0.0f64; 12]).unwrap(), 0.0);
        assert_eq!(signal_rms(&[1.0f32; 12]).unwrap(), 1.0);
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        assert_eq!(signal_rms(&alt).unwrap(), 1.0);
        assert!(signal_rms::<f32>(&[]).is_err());
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(noise_sigma(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(noise_sigma(0.5, 1.0).unwrap(), 0.5);
        assert!((noise_sigma(0.3, 0.58).unwrap() - 0.174).abs() < 1e-15);
        assert!(noise_sigma(-0.1, 1.0).is_err());
        assert!(noise_sigma(0.1, -1.0).is_err());
        assert!(noise_sigma(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn zero_sigma_is_bitwise_identity() {
        let x = vec![-0.0f32, 0.25, -1.0, 3.5];
        let y = add_awgn(&x, 0.0, 42).unwrap();
        assert_eq!(
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            y.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let cfg = ChannelConfig { nasar: 0.0, placement: Placement::Latent, seed: 3 };
        let (z, draw) = corrupt(&x, &cfg).unwrap();
        assert_eq!(draw.sigma, 0.0);
        assert_eq!(
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            z.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn seeded_and_unclamped() {
        let x = vec![0.9f64; 1000];
        let a = add_awgn(&x, 0.5, 1).unwrap();
        assert_eq!(a, add_awgn(&x, 0.5, 1).unwrap());
        assert_ne!(a, add_awgn(&x, 0.5, 2).unwrap());
        assert!(a.iter().any(|&v| v > 1.0));
        assert!(add_awgn(&x, -0.5, 1).is_err());
    }

    #[test]
    fn corrupt_uses_rms_scaled_sigma() {
        let x: Vec<f64> = (0..256).map(|i| ((i % 7) as f64 - 3.0) / 4.0).collect();
        let cfg = ChannelConfig { nasar: 0.5, placement: Placement::Input, seed: 8 };
        let (y, draw) = corrupt(&x, &cfg).unwrap();
        let rms = signal_rms(&x).unwrap();
        assert_eq!(draw.sigma, 0.5 * rms);
        assert_eq!(y, add_awgn(&x, 0.5 * rms, 8).unwrap());
    }

    #[test]
    fn sigma_linear_in_nasar() {
        let x: Vec<f32> = (0..300).map(|i| (i as f32 * 0.37).sin()).collect();
        let rms = signal_rms(&x).unwrap();
        for nasar in [0.05, 0.1, 0.3, 0.5] {
            let s1 = noise_sigma(nasar, rms).unwrap();
            let s2 = noise_sigma(2.0 * nasar, rms).unwrap();
            assert_eq!(s2, 2.0 * s1);
        }
    }
}
