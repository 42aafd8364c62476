//! Adam with bias-corrected first and second moments.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        AdamConfig { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    /// Zero moments shaped like `params`.
    pub fn new<P: AsRef<[T]>>(params: &[P]) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|p| alloc::vec![T::ZERO; p.as_ref().len()]).collect();
        AdamState { step: 0, first_moment: zeros.clone(), second_moment: zeros }
    }
}

/// One Adam step over a list of parameter arrays.
///
/// Rejects non-finite gradients before touching any state; the error's
/// epoch/batch fields are left for the caller to fill in.
pub fn adam_update<T: Real, P: AsMut<[T]>, G: AsRef<[T]>>(
    params: &mut [P],
    grads: &[G],
    state: &mut AdamState<T>,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::ShapeMismatch {
            what: "adam arrays",
            expected: alloc::format!("{}", state.first_moment.len()),
            actual: alloc::format!("{} params / {} grads", params.len(), grads.len()),
        });
    }
    for (p, g) in params.iter_mut().zip(grads) {
        if p.as_mut().len() != g.as_ref().len() {
            return Err(Error::ShapeMismatch {
                what: "adam gradient",
                expected: alloc::format!("{}", p.as_mut().len()),
                actual: alloc::format!("{}", g.as_ref().len()),
            });
        }
    }
    if grads.iter().any(|g| g.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite { what: "gradient", epoch: 0, batch: 0 });
    }

    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64(config.beta1);
    let b2 = T::from_f64(config.beta2);
    let one_minus_b1 = T::from_f64(1.0 - config.beta1);
    let one_minus_b2 = T::from_f64(1.0 - config.beta2);
    let correction1 = T::from_f64(1.0 - libm::pow(config.beta1, t as f64));
    let correction2 = T::from_f64(1.0 - libm::pow(config.beta2, t as f64));
    let lr = T::from_f64(config.learning_rate);
    let eps = T::from_f64(config.epsilon);

    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        for (((p, &g), m), v) in p.as_mut().iter_mut().zip(g.as_ref()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + one_minus_b1 * g;
            *v = b2 * *v + one_minus_b2 * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
