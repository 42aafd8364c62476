//! Deterministic CIFAR-shaped images for tests, demos and benchmarks.
//!
//! Images are smooth, class-dependent color fields with a randomly placed
//! bright disc, so an autoencoder has real structure to learn.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::cifar::{Split, HEIGHT, IMAGE_LEN, NUM_CLASSES, WIDTH};
use crate::seed::{rng_from, Tag};

const PALETTE: [[f64; 3]; NUM_CLASSES] = [
    [0.85, 0.20, 0.20],
    [0.20, 0.75, 0.25],
    [0.20, 0.30, 0.85],
    [0.80, 0.75, 0.20],
    [0.70, 0.25, 0.75],
    [0.25, 0.75, 0.75],
    [0.55, 0.40, 0.25],
    [0.90, 0.55, 0.15],
    [0.45, 0.45, 0.45],
    [0.15, 0.15, 0.35],
];

/// Balanced labels (exact when `n` is a multiple of 10), seeded order.
fn balanced_labels(n: usize, seed: u64) -> Vec<u8> {
    let mut labels: Vec<u8> = (0..n).map(|i| (i % NUM_CLASSES) as u8).collect();
    labels.shuffle(&mut rng_from(seed, &[Tag::Str("synthetic-labels")]));
    labels
}

pub fn cifar_like(n: usize, seed: u64) -> Split {
    let labels = balanced_labels(n, seed);
    let mut rng = rng_from(seed, &[Tag::Str("synthetic-pixels")]);
    let mut pixels = Vec::with_capacity(n * IMAGE_LEN);
    for &label in &labels {
        let color = PALETTE[label as usize];
        let freq = 0.15 + 0.05 * label as f64;
        let phase: f64 = rng.gen_range(0.0..core::f64::consts::TAU);
        let cy: f64 = rng.gen_range(6.0..26.0);
        let cx: f64 = rng.gen_range(6.0..26.0);
        let radius: f64 = rng.gen_range(3.0..8.0);
        let shade: f64 = rng.gen_range(-0.1..0.1);
        for channel in color {
            for y in 0..HEIGHT {
                for x in 0..WIDTH {
                    let wave = 0.2 * libm::sin(freq * (x as f64 + 0.5 * y as f64) + phase);
                    let dy = y as f64 - cy;
                    let dx = x as f64 - cx;
                    let disc = if dy * dy + dx * dx <= radius * radius { 0.3 } else { 0.0 };
                    let v = (channel * 0.7 + wave + disc + shade).clamp(0.0, 1.0);
                    pixels.push(libm::round(v * 255.0) as u8);
                }
            }
        }
    }
    Split::from_parts(labels, pixels).expect("synthetic split is well formed")
}

/// Balanced labels with all-zero pixels; cheap stand-in for label tallies.
pub fn labels_only(n: usize, seed: u64) -> Split {
    Split::from_parts(balanced_labels(n, seed), alloc::vec![0u8; n * IMAGE_LEN])
        .expect("synthetic split is well formed")
}

/// Serialize a split back to the on-disk record format.
pub fn to_records(split: &Split) -> Vec<u8> {
    let mut out = Vec::with_capacity(split.len() * (IMAGE_LEN + 1));
    for i in 0..split.len() {
        out.push(split.label(i));
        out.extend_from_slice(split.image(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let a = cifar_like(30, 4);
        assert_eq!(a, cifar_like(30, 4));
        assert_ne!(a, cifar_like(30, 5));
        assert_eq!(a.class_counts(), [3; NUM_CLASSES]);
        let back = Split::parse_shards([to_records(&a).as_slice()]).unwrap();
        assert_eq!(back, a);
    }
}
