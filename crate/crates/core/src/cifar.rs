//! CIFAR-10 binary records, in-memory splits and normalized batches.
//!
//! A record is one label byte followed by 3072 pixel bytes: the red plane,
//! then green, then blue, each 32x32 in row-major order.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

pub const CHANNELS: usize = 3;
pub const HEIGHT: usize = 32;
pub const WIDTH: usize = 32;
pub const IMAGE_LEN: usize = CHANNELS * HEIGHT * WIDTH;
pub const RECORD_LEN: usize = 1 + IMAGE_LEN;
pub const NUM_CLASSES: usize = 10;
pub const RECORDS_PER_SHARD: usize = 10_000;
pub const TRAIN_RECORDS: usize = 50_000;
pub const TEST_RECORDS: usize = 10_000;

/// Per-channel normalization constants `(x - mean) / std` applied after
/// scaling bytes to `[0, 1]`.
pub const NORM_MEAN: [f64; 3] = [0.5, 0.5, 0.5];
pub const NORM_STD: [f64; 3] = [0.5, 0.5, 0.5];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub label: u8,
    /// Planar R, G, B; each plane row-major.
    pub pixels: Vec<u8>,
}

pub fn parse_record(bytes: &[u8]) -> Result<RawRecord> {
    if bytes.len() != RECORD_LEN {
        return Err(Error::RecordLength { expected: RECORD_LEN, actual: bytes.len() });
    }
    let label = bytes[0];
    if label as usize >= NUM_CLASSES {
        return Err(Error::LabelOutOfRange { label: label as usize });
    }
    Ok(RawRecord { label, pixels: bytes[1..].to_vec() })
}

#[inline]
pub fn normalize_byte(v: u8, channel: usize) -> f64 {
    (v as f64 / 255.0 - NORM_MEAN[channel]) / NORM_STD[channel]
}

#[inline]
pub fn denormalize_value<T: Real>(v: T) -> T {
    let half = T::from_f64(0.5);
    let x = v * half + half;
    if x < T::ZERO {
        T::ZERO
    } else if x > T::ONE {
        T::ONE
    } else {
        x
    }
}

/// Normalize one record's pixels into `[-1, 1]`, channel-planar layout.
pub fn normalize<T: Real>(record: &RawRecord) -> Vec<T> {
    normalize_pixels(&record.pixels)
}

pub fn normalize_pixels<T: Real>(pixels: &[u8]) -> Vec<T> {
    let mut out = Vec::with_capacity(pixels.len());
    normalize_into(pixels, &mut out);
    out
}

fn normalize_into<T: Real>(pixels: &[u8], out: &mut Vec<T>) {
    let plane = HEIGHT * WIDTH;
    for (i, &p) in pixels.iter().enumerate() {
        out.push(T::from_f64(normalize_byte(p, (i / plane) % CHANNELS)));
    }
}

/// Map normalized values back to `[0, 1]`, clamping.
pub fn denormalize<T: Real>(batch: &ImageBatch<T>) -> Vec<T> {
    batch.data.iter().map(|&v| denormalize_value(v)).collect()
}

/// A batch of normalized images, `len x 3 x 32 x 32`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBatch<T> {
    pub data: Vec<T>,
    pub labels: Option<Vec<u8>>,
}

impl<T: Real> ImageBatch<T> {
    pub fn new(data: Vec<T>, labels: Option<Vec<u8>>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("image batch"));
        }
        if !data.len().is_multiple_of(IMAGE_LEN) {
            return Err(Error::ShapeMismatch {
                what: "image batch",
                expected: alloc::format!("multiple of {IMAGE_LEN}"),
                actual: alloc::format!("{}", data.len()),
            });
        }
        let n = data.len() / IMAGE_LEN;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::ShapeMismatch {
                    what: "batch labels",
                    expected: alloc::format!("{n}"),
                    actual: alloc::format!("{}", l.len()),
                });
            }
        }
        Ok(ImageBatch { data, labels })
    }

    pub fn len(&self) -> usize {
        self.data.len() / IMAGE_LEN
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn image(&self, i: usize) -> &[T] {
        &self.data[i * IMAGE_LEN..(i + 1) * IMAGE_LEN]
    }
}

/// A parsed, immutable split: labels plus raw pixel bytes in record order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    labels: Vec<u8>,
    pixels: Vec<u8>,
}

impl Split {
    pub fn from_parts(labels: Vec<u8>, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != labels.len() * IMAGE_LEN {
            return Err(Error::ShapeMismatch {
                what: "split pixels",
                expected: alloc::format!("{}", labels.len() * IMAGE_LEN),
                actual: alloc::format!("{}", pixels.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange { label: bad as usize });
        }
        Ok(Split { labels, pixels })
    }

    /// Parse concatenated shards, each a whole number of records.
    pub fn parse_shards<'a, I>(shards: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [u8]>,
    {
        let mut split = Split::default();
        for shard in shards {
            if shard.len() % RECORD_LEN != 0 {
                return Err(Error::ShardLength { len: shard.len() });
            }
            split.labels.reserve(shard.len() / RECORD_LEN);
            split.pixels.reserve(shard.len() / RECORD_LEN * IMAGE_LEN);
            for chunk in shard.chunks_exact(RECORD_LEN) {
                let label = chunk[0];
                if label as usize >= NUM_CLASSES {
                    return Err(Error::LabelOutOfRange { label: label as usize });
                }
                split.labels.push(label);
                split.pixels.extend_from_slice(&chunk[1..]);
            }
        }
        Ok(split)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.pixels[i * IMAGE_LEN..(i + 1) * IMAGE_LEN]
    }

    pub fn record(&self, i: usize) -> RawRecord {
        RawRecord { label: self.labels[i], pixels: self.image(i).to_vec() }
    }

    /// Per-class image counts.
    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// New split holding the given records, in the given order.
    pub fn select(&self, indices: &[usize]) -> Split {
        let mut labels = Vec::with_capacity(indices.len());
        let mut pixels = Vec::with_capacity(indices.len() * IMAGE_LEN);
        for &i in indices {
            labels.push(self.labels[i]);
            pixels.extend_from_slice(self.image(i));
        }
        Split { labels, pixels }
    }

    /// Normalized batch of the given records, labels attached.
    pub fn batch<T: Real>(&self, indices: &[usize]) -> Result<ImageBatch<T>> {
        let mut data = Vec::with_capacity(indices.len() * IMAGE_LEN);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            normalize_into(self.image(i), &mut data);
            labels.push(self.labels[i]);
        }
        ImageBatch::new(data, Some(labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_record() {
        let r = parse_record(&[0u8; RECORD_LEN]).unwrap();
        assert_eq!(r.label, 0);
        assert_eq!(r.pixels.len(), IMAGE_LEN);
        assert!(r.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn label_and_plane_layout() {
        let mut bytes = vec![0u8; RECORD_LEN];
        bytes[0] = 6;
        // green plane, row 2, column 5
        bytes[1 + 1024 + 2 * 32 + 5] = 200;
        let r = parse_record(&bytes).unwrap();
        assert_eq!(r.label, 6);
        assert_eq!(r.pixels[1024 + 69], 200);
    }

    #[test]
    fn wrong_length_and_bad_label() {
        assert_eq!(
            parse_record(&[0u8; 3072]),
            Err(Error::RecordLength { expected: 3073, actual: 3072 })
        );
        let mut bytes = vec![0u8; RECORD_LEN];
        bytes[0] = 10;
        assert_eq!(parse_record(&bytes), Err(Error::LabelOutOfRange { label: 10 }));
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        assert_eq!(normalize_byte(0, 0), -1.0);
        assert_eq!(normalize_byte(255, 2), 1.0);
        // independent evaluation: 128/255 = 0.50196..., minus 0.5, times 2
        let expect = 2.0 * (128.0 / 255.0) - 1.0;
        assert!((normalize_byte(128, 1) - expect).abs() < 1e-15);
        assert!((normalize_byte(128, 1) - 0.003_921_568_627_450_98).abs() < 1e-12);
    }

    #[test]
    fn denormalize_round_trip_all_bytes() {
        for v in 0..=255u8 {
            let n32: f32 = f32::from_f64(normalize_byte(v, 0));
            let n64: f64 = normalize_byte(v, 0);
            let target = v as f64 / 255.0;
            assert!((denormalize_value(n32) as f64 - target).abs() <= 1e-6);
            assert!((denormalize_value(n64) - target).abs() <= 1e-6);
        }
        assert_eq!(denormalize_value(-1.0f64), 0.0);
        assert_eq!(denormalize_value(1.0f64), 1.0);
        assert_eq!(denormalize_value(-3.0f64), 0.0);
        assert_eq!(denormalize_value(1.7f32), 1.0);
    }

    #[test]
    fn shards_parse_and_reject_partial() {
        let mut shard = vec![0u8; 3 * RECORD_LEN];
        shard[RECORD_LEN] = 9;
        shard[2 * RECORD_LEN] = 4;
        let s = Split::parse_shards([shard.as_slice(), &shard[..RECORD_LEN]]).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.labels(), &[0, 9, 4, 0]);
        assert_eq!(
            Split::parse_shards([&shard[..RECORD_LEN + 1]]),
            Err(Error::ShardLength { len: RECORD_LEN + 1 })
        );
    }

    #[test]
    fn batch_shapes() {
        let s = Split::from_parts(vec![1, 2], vec![255u8; 2 * IMAGE_LEN]).unwrap();
        let b: ImageBatch<f32> = s.batch(&[1]).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.labels.as_deref(), Some(&[2u8][..]));
        assert!(b.data.iter().all(|&v| v == 1.0));
        assert!(ImageBatch::<f32>::new(vec![0.0; IMAGE_LEN], Some(vec![1, 2])).is_err());
        assert!(ImageBatch::<f32>::new(vec![], None).is_err());
    }
}
