//! Reconstruction fidelity: PSNR in `[0, 1]` pixel space and the relative
//! PSNR gap between the supervised baseline and the self-supervised model.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::channel::{corrupt, ChannelConfig, Placement};
use crate::cifar::{denormalize_value, Split, IMAGE_LEN};
use crate::error::{Error, Result};
use crate::loss::mse;
use crate::nn::Codec;
use crate::real::Real;
use crate::seed::{derive_seed, Tag};
use crate::train::Mode;

/// PSNR reported for (near-)perfect reconstructions.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Images per forward pass during evaluation. Results do not depend on it.
pub const EVAL_CHUNK: usize = 250;

/// `10 log10(1 / mse)` for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * libm::log10(1.0 / mse)).min(PSNR_CAP_DB)
}

/// PSNR between two images with values in `[0, 1]`.
pub fn psnr<T: Real>(clean: &[T], reconstruction: &[T]) -> Result<f64> {
    Ok(psnr_from_mse(mse(reconstruction, clean)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsRecord {
    pub model_tag: Mode,
    pub nasar: f64,
    pub placement: Placement,
    /// Arithmetic mean of per-image PSNR, dB.
    pub mean_psnr: f64,
    pub mean_mse: f64,
    pub n_images: usize,
    /// Training set size of the evaluated model.
    pub sample_count: usize,
    /// Channel seed used for evaluation noise.
    pub seed: u64,
}

/// Per-image evaluation result, keyed by position in the test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageScore {
    pub index: usize,
    pub psnr: f64,
    pub mse: f64,
}

/// Channel seed of test image `index`. Noise depends only on the image's
/// position, never on chunking or worker assignment.
pub fn image_seed(channel_seed: u64, index: usize) -> u64 {
    derive_seed(channel_seed, &[Tag::Str("eval-image"), Tag::U64(index as u64)])
}

/// Send every image in `range` through the channel and the codec, one
/// channel use per image (signal amplitude is that image's own RMS).
pub fn evaluate_range<T: Real, C: Codec<T> + ?Sized>(
    codec: &C,
    split: &Split,
    channel: &ChannelConfig,
    range: Range<usize>,
    chunk: usize,
) -> Result<Vec<ImageScore>> {
    channel.validate()?;
    if range.end > split.len() {
        return Err(Error::SampleCountTooLarge { requested: range.end, available: split.len() });
    }
    let indices: Vec<usize> = range.collect();
    let mut scores = Vec::with_capacity(indices.len());
    for idx in indices.chunks(chunk.max(1)) {
        let batch = split.batch::<T>(idx)?;
        let per_image_channel = |i: usize| ChannelConfig { seed: image_seed(channel.seed, i), ..*channel };
        let recon = match channel.placement {
            Placement::Input => {
                let mut noisy = Vec::with_capacity(batch.data.len());
                for (j, &i) in idx.iter().enumerate() {
                    noisy.extend(corrupt(batch.image(j), &per_image_channel(i))?.0);
                }
                codec.reconstruct_planar(&noisy)?
            }
            Placement::Latent => {
                let z = codec.encode_planar(&batch.data)?;
                let per = codec.latent_len();
                let mut noisy = Vec::with_capacity(z.len());
                for (j, &i) in idx.iter().enumerate() {
                    noisy.extend(corrupt(&z[j * per..(j + 1) * per], &per_image_channel(i))?.0);
                }
                codec.decode_planar(&noisy)?
            }
        };
        if recon.len() != batch.data.len() {
            return Err(Error::ShapeMismatch {
                what: "reconstruction",
                expected: format!("{}", batch.data.len()),
                actual: format!("{}", recon.len()),
            });
        }
        for (j, &i) in idx.iter().enumerate() {
            let clean: Vec<f64> = split.image(i).iter().map(|&b| b as f64 / 255.0).collect();
            let rec: Vec<f64> = recon[j * IMAGE_LEN..(j + 1) * IMAGE_LEN]
                .iter()
                .map(|&v| denormalize_value(v).to_f64())
                .collect();
            let m = mse(&rec, &clean)?;
            scores.push(ImageScore { index: i, psnr: psnr_from_mse(m), mse: m });
        }
    }
    Ok(scores)
}

/// Merge per-image scores into `(mean_psnr, mean_mse)`, summing in image
/// index order so the result is independent of how scores were produced.
pub fn reduce_scores(scores: &mut [ImageScore]) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::Empty("evaluation scores"));
    }
    scores.sort_by_key(|s| s.index);
    let n = scores.len() as f64;
    let (p, m) = scores.iter().fold((0.0, 0.0), |(p, m), s| (p + s.psnr, m + s.mse));
    Ok((p / n, m / n))
}

/// Mean per-image PSNR over every image of `split`.
pub fn mean_psnr_over<T: Real, C: Codec<T> + ?Sized>(
    codec: &C,
    split: &Split,
    channel: &ChannelConfig,
    model_tag: Mode,
    sample_count: usize,
) -> Result<MetricsRecord> {
    let mut scores = evaluate_range(codec, split, channel, 0..split.len(), EVAL_CHUNK)?;
    summarize(&mut scores, channel, model_tag, sample_count)
}

/// Build a record from per-image scores gathered in any order.
pub fn summarize(
    scores: &mut [ImageScore],
    channel: &ChannelConfig,
    model_tag: Mode,
    sample_count: usize,
) -> Result<MetricsRecord> {
    let (mean_psnr, mean_mse) = reduce_scores(scores)?;
    Ok(MetricsRecord {
        model_tag,
        nasar: channel.nasar,
        placement: channel.placement,
        mean_psnr,
        mean_mse,
        n_images: scores.len(),
        sample_count,
        seed: channel.seed,
    })
}

/// `100 * (sl - ssl) / sl`, in percent; negative when SSL scores higher.
pub fn relative_gap(sl: &MetricsRecord, ssl: &MetricsRecord) -> Result<f64> {
    if sl.nasar != ssl.nasar {
        return Err(Error::MismatchedEvaluation(format!("nasar {} vs {}", sl.nasar, ssl.nasar)));
    }
    if sl.n_images != ssl.n_images {
        return Err(Error::MismatchedEvaluation(format!("n_images {} vs {}", sl.n_images, ssl.n_images)));
    }
    if sl.placement != ssl.placement {
        return Err(Error::MismatchedEvaluation("noise placement differs".into()));
    }
    if sl.mean_psnr == 0.0 {
        return Err(Error::MismatchedEvaluation("reference PSNR is zero".into()));
    }
    Ok(100.0 * (sl.mean_psnr - ssl.mean_psnr) / sl.mean_psnr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use alloc::vec;

    struct Identity;

    impl<T: Real> Codec<T> for Identity {
        fn latent_len(&self) -> usize {
            IMAGE_LEN
        }
        fn encode_planar(&self, images: &[T]) -> Result<Vec<T>> {
            Ok(images.to_vec())
        }
        fn decode_planar(&self, codes: &[T]) -> Result<Vec<T>> {
            Ok(codes.to_vec())
        }
    }

    fn record(tag: Mode, psnr: f64) -> MetricsRecord {
        MetricsRecord {
            model_tag: tag,
            nasar: 0.1,
            placement: Placement::Input,
            mean_psnr: psnr,
            mean_mse: 0.01,
            n_images: 10,
            sample_count: 100,
            seed: 1,
        }
    }

    #[test]
    fn psnr_examples() {
        let a = vec![0.25f64; 12];
        assert_eq!(psnr(&a, &a).unwrap(), 100.0);
        assert_eq!(psnr(&[1.0f64; 4], &[0.0; 4]).unwrap(), 0.0);
        let v = psnr(&[0.5f64; 8], &[0.0; 8]).unwrap();
        assert!((v - 10.0 * (1.0f64 / 0.25).log10()).abs() < 1e-12);
        assert!((v - 6.0206).abs() < 1e-4);
        assert!(psnr(&[0.5f64; 8], &[0.0; 7]).is_err());
    }

    #[test]
    fn gap_examples() {
        let sl = record(Mode::Sl, 20.0);
        assert_eq!(relative_gap(&sl, &record(Mode::Ssl, 20.0)).unwrap(), 0.0);
        assert!((relative_gap(&sl, &record(Mode::Ssl, 19.0)).unwrap() - 5.0).abs() < 1e-12);
        assert!(relative_gap(&sl, &record(Mode::Ssl, 21.0)).unwrap() < 0.0);
        let other = MetricsRecord { nasar: 0.5, ..record(Mode::Ssl, 19.0) };
        assert!(relative_gap(&sl, &other).is_err());
        let fewer = MetricsRecord { n_images: 9, ..record(Mode::Ssl, 19.0) };
        assert!(relative_gap(&sl, &fewer).is_err());
    }

    #[test]
    fn identity_codec_noiseless_is_capped() {
        let split = synthetic::cifar_like(12, 1);
        for placement in [Placement::Input, Placement::Latent] {
            let ch = ChannelConfig { nasar: 0.0, placement, seed: 4 };
            let r = mean_psnr_over::<f64, _>(&Identity, &split, &ch, Mode::Ssl, 12).unwrap();
            assert_eq!(r.mean_psnr, PSNR_CAP_DB);
            assert_eq!(r.n_images, 12);
        }
    }

    #[test]
    fn chunking_and_sharding_do_not_change_results() {
        let split = synthetic::cifar_like(23, 2);
        let ch = ChannelConfig { nasar: 0.3, placement: Placement::Input, seed: 9 };
        let mut whole = evaluate_range::<f32, _>(&Identity, &split, &ch, 0..23, 64).unwrap();
        let mut a = evaluate_range::<f32, _>(&Identity, &split, &ch, 10..23, 3).unwrap();
        let b = evaluate_range::<f32, _>(&Identity, &split, &ch, 0..10, 7).unwrap();
        a.extend(b);
        let r1 = reduce_scores(&mut whole).unwrap();
        let r2 = reduce_scores(&mut a).unwrap();
        assert_eq!(r1.0.to_bits(), r2.0.to_bits());
        assert_eq!(r1.1.to_bits(), r2.1.to_bits());
        // noisy identity is no longer perfect
        assert!(r1.0 < PSNR_CAP_DB);
    }

    #[test]
    fn more_noise_lowers_psnr() {
        let split = synthetic::cifar_like(20, 3);
        let mut last = f64::INFINITY;
        for nasar in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let ch = ChannelConfig { nasar, placement: Placement::Input, seed: 2 };
            let r = mean_psnr_over::<f64, _>(&Identity, &split, &ch, Mode::Ssl, 20).unwrap();
            assert!(r.mean_psnr < last);
            last = r.mean_psnr;
        }
    }
}
