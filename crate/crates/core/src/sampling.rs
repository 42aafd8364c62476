//! Seeded subsetting and shuffled batch iteration over a [`Split`].

use alloc::vec::Vec;
use core::marker::PhantomData;

use rand::seq::SliceRandom;

use crate::cifar::{ImageBatch, Split, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::seed::{rng_from, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubsetSpec {
    pub sample_count: usize,
    pub seed: u64,
    pub stratified: bool,
}

/// Sorted, duplicate-free indices of a seeded subset.
///
/// Stratified mode gives every class `count / 10` images, with the remainder
/// handed to a seeded choice of classes, so per-class counts differ by at
/// most one.
pub fn subset_indices(split: &Split, spec: &SubsetSpec) -> Result<Vec<usize>> {
    let n = split.len();
    if spec.sample_count == 0 {
        return Err(Error::InvalidConfig("sample_count must be >= 1".into()));
    }
    if spec.sample_count > n {
        return Err(Error::SampleCountTooLarge { requested: spec.sample_count, available: n });
    }
    if spec.sample_count == n {
        return Ok((0..n).collect());
    }
    let mut rng = rng_from(spec.seed, &[Tag::Str("subset")]);
    let mut chosen = if spec.stratified {
        let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
        for (i, &l) in split.labels().iter().enumerate() {
            by_class[l as usize].push(i);
        }
        let base = spec.sample_count / NUM_CLASSES;
        let extra = spec.sample_count % NUM_CLASSES;
        let mut class_order: Vec<usize> = (0..NUM_CLASSES).collect();
        class_order.shuffle(&mut rng);
        let mut quota = [base; NUM_CLASSES];
        for &c in &class_order[..extra] {
            quota[c] += 1;
        }
        let mut chosen = Vec::with_capacity(spec.sample_count);
        for (class, members) in by_class.iter_mut().enumerate() {
            if members.len() < quota[class] {
                return Err(Error::ClassUnderfilled {
                    class: class as u8,
                    needed: quota[class],
                    available: members.len(),
                });
            }
            members.shuffle(&mut rng);
            chosen.extend_from_slice(&members[..quota[class]]);
        }
        chosen
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all.truncate(spec.sample_count);
        all
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// Materialized subset in canonical (ascending source index) order.
pub fn subset_sample(split: &Split, spec: &SubsetSpec) -> Result<Split> {
    let idx = subset_indices(split, spec)?;
    Ok(split.select(&idx))
}

/// Seeded permutation of `0..n` for one pass over the data.
pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed, &[Tag::Str("shuffle")]));
    order
}

/// Number of batches in a pass; the final partial batch is kept.
pub fn batch_count(n: usize, batch_size: usize) -> usize {
    n.div_ceil(batch_size)
}

/// Shuffled batches over a split. Holds its own cursor; use one per consumer.
pub struct BatchIter<'a, T> {
    split: &'a Split,
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    _scalar: PhantomData<T>,
}

impl<T: Real> BatchIter<'_, T> {
    /// Source indices of the remaining batches, without normalizing pixels.
    pub fn index_batches(&self) -> impl Iterator<Item = &[usize]> {
        self.order[self.cursor..].chunks(self.batch_size)
    }
}

pub fn batch_iter<T: Real>(split: &Split, batch_size: usize, seed: u64) -> Result<BatchIter<'_, T>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    Ok(BatchIter {
        split,
        order: shuffled_order(split.len(), seed),
        batch_size,
        cursor: 0,
        _scalar: PhantomData,
    })
}

impl<T: Real> Iterator for BatchIter<'_, T> {
    type Item = ImageBatch<T>;

    fn next(&mut self) -> Option<ImageBatch<T>> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.split.batch(&self.order[self.cursor..end]).ok();
        self.cursor = end;
        batch
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = batch_count(self.order.len() - self.cursor, self.batch_size);
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cifar::IMAGE_LEN;
    use crate::synthetic;

    #[test]
    fn batch_arithmetic() {
        // 50000 = 390 * 128 + 80
        assert_eq!(batch_count(50_000, 128), 391);
        assert_eq!(50_000 - 390 * 128, 80);
        assert_eq!(batch_count(1, 1), 1);
        assert_eq!(batch_count(0, 5), 0);
    }

    #[test]
    fn full_count_is_identity() {
        let split = synthetic::cifar_like(40, 1);
        for stratified in [true, false] {
            let spec = SubsetSpec { sample_count: 40, seed: 9, stratified };
            assert_eq!(subset_indices(&split, &spec).unwrap(), (0..40).collect::<Vec<_>>());
            assert_eq!(subset_sample(&split, &spec).unwrap(), split);
        }
    }

    #[test]
    fn errors() {
        let split = synthetic::cifar_like(20, 1);
        let too_many = SubsetSpec { sample_count: 21, seed: 0, stratified: true };
        assert_eq!(
            subset_indices(&split, &too_many),
            Err(Error::SampleCountTooLarge { requested: 21, available: 20 })
        );
        let zero = SubsetSpec { sample_count: 0, seed: 0, stratified: false };
        assert!(subset_indices(&split, &zero).is_err());
        assert!(batch_iter::<f32>(&split, 0, 1).is_err());
    }

    #[test]
    fn stratified_thousand_gives_hundred_per_class() {
        let split = synthetic::labels_only(5_000, 3);
        let spec = SubsetSpec { sample_count: 1000, seed: 11, stratified: true };
        let idx = subset_indices(&split, &spec).unwrap();
        let mut tally = [0usize; NUM_CLASSES];
        for &i in &idx {
            tally[split.label(i) as usize] += 1;
        }
        assert_eq!(tally, [100; NUM_CLASSES]);
    }

    #[test]
    fn batch_size_one_follows_shuffle() {
        let split = synthetic::cifar_like(7, 2);
        let order = shuffled_order(7, 5);
        let it = batch_iter::<f32>(&split, 1, 5).unwrap();
        for (batch, &src) in it.zip(&order) {
            assert_eq!(batch.len(), 1);
            assert_eq!(batch.labels.as_deref().unwrap()[0], split.label(src));
            let expect: alloc::vec::Vec<f32> = crate::cifar::normalize_pixels(split.image(src));
            assert_eq!(batch.data, expect);
            assert_eq!(batch.data.len(), IMAGE_LEN);
        }
    }
}
