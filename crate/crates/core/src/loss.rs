//! Training losses and their gradients.

use alloc::format;
use alloc::vec::Vec;

use crate::cifar::{ImageBatch, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::real::Real;

fn check_same_len(what: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch { what, expected: format!("{a}"), actual: format!("{b}") });
    }
    Ok(())
}

/// Mean of squared differences, accumulated in `f64`.
pub fn mse<T: Real>(prediction: &[T], target: &[T]) -> Result<f64> {
    check_same_len("mse operands", target.len(), prediction.len())?;
    if prediction.is_empty() {
        return Err(Error::Empty("mse operands"));
    }
    let sum: f64 = prediction
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p.to_f64() - t.to_f64();
            d * d
        })
        .sum();
    Ok(sum / prediction.len() as f64)
}

pub fn mse_loss<T: Real>(prediction: &ImageBatch<T>, target: &ImageBatch<T>) -> Result<f64> {
    mse(&prediction.data, &target.data)
}

/// MSE and its gradient with respect to `prediction`.
pub fn mse_with_grad<T: Real>(prediction: &[T], target: &[T]) -> Result<(f64, Vec<T>)> {
    let loss = mse(prediction, target)?;
    let scale = T::from_f64(2.0 / prediction.len() as f64);
    let grad = prediction.iter().zip(target).map(|(&p, &t)| scale * (p - t)).collect();
    Ok((loss, grad))
}

fn validate_labels(labels: &[u8], rows: usize) -> Result<()> {
    check_same_len("labels", rows, labels.len())?;
    if rows == 0 {
        return Err(Error::Empty("logits"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        return Err(Error::LabelOutOfRange { label: bad as usize });
    }
    Ok(())
}

/// Numerically stable log-sum-exp of one row.
fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + libm::log(row.iter().map(|&v| libm::exp(v - max)).sum::<f64>())
}

/// Mean negative log-softmax probability of the true class over a
/// `batch x 10` logit matrix.
pub fn cross_entropy_loss<T: Real>(logits: &[T], labels: &[u8]) -> Result<f64> {
    Ok(cross_entropy_with_grad(logits, labels)?.0)
}

pub fn cross_entropy_with_grad<T: Real>(logits: &[T], labels: &[u8]) -> Result<(f64, Vec<T>)> {
    if !logits.len().is_multiple_of(NUM_CLASSES) {
        return Err(Error::ShapeMismatch {
            what: "logits",
            expected: format!("multiple of {NUM_CLASSES}"),
            actual: format!("{}", logits.len()),
        });
    }
    let rows = logits.len() / NUM_CLASSES;
    validate_labels(labels, rows)?;
    let inv_n = 1.0 / rows as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    let mut row = [0.0f64; NUM_CLASSES];
    for (chunk, &label) in logits.chunks_exact(NUM_CLASSES).zip(labels) {
        for (r, v) in row.iter_mut().zip(chunk) {
            *r = v.to_f64();
        }
        let lse = log_sum_exp(&row);
        let true_logit = row[label as usize];
        // +inf on the true class (and nowhere else) is a perfect prediction
        total += if true_logit == f64::INFINITY && lse == f64::INFINITY { 0.0 } else { lse - true_logit };
        for (c, &v) in row.iter().enumerate() {
            let p = if lse.is_finite() { libm::exp(v - lse) } else if v == lse { 1.0 } else { 0.0 };
            let onehot = if c == label as usize { 1.0 } else { 0.0 };
            grad.push(T::from_f64((p - onehot) * inv_n));
        }
    }
    Ok((total * inv_n, grad))
}
