//! Central-difference check of every parameter array's analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semcomm_core::nn::{default_spec, loss_and_grad, LatentHook, Parameters, StepInput};
use semcomm_core::synthetic;

const STEP: f64 = 1e-6;
const RTOL: f64 = 1e-3;
const FLOOR: f64 = 1e-9;

fn total_loss(params: &Parameters<f64>, step: &StepInput<'_, f64>, latent: Option<&[f64]>) -> f64 {
    let mut shift = |z: &mut [f64]| {
        for (v, d) in z.iter_mut().zip(latent.unwrap()) {
            *v += d;
        }
    };
    let hook: LatentHook<'_, f64> = if latent.is_some() { Some(&mut shift) } else { None };
    loss_and_grad(params, step, hook).unwrap().0.total
}

fn check(latent: Option<&[f64]>) {
    let spec = default_spec();
    let mut params = Parameters::<f64>::init(&spec, 5, true).unwrap();
    let split = synthetic::cifar_like(4, 3);
    let batch = split.batch::<f64>(&[0, 1, 2, 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let input: Vec<f64> = batch.data.iter().map(|v| v + 0.2 * (rng.gen::<f64>() - 0.5)).collect();
    let labels = batch.labels.clone().unwrap();
    let step = StepInput { input: &input, target: &batch.data, labels: Some(&labels), aux_weight: 0.1 };

    let mut shift = |z: &mut [f64]| {
        for (v, d) in z.iter_mut().zip(latent.unwrap()) {
            *v += d;
        }
    };
    let hook: LatentHook<'_, f64> = if latent.is_some() { Some(&mut shift) } else { None };
    let (loss, grads) = loss_and_grad(&params, &step, hook).unwrap();
    assert!(loss.classification.is_some());

    let mut checked = 0;
    for (t, g) in grads.iter().enumerate() {
        let largest = (0..g.len()).max_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs())).unwrap();
        let mut coords: Vec<usize> = (0..5).map(|_| rng.gen_range(0..g.len())).collect();
        coords.push(largest);
        for &k in &coords {
            let orig = params.tensors()[t].data[k];
            params.tensors_mut()[t].data[k] = orig + STEP;
            let up = total_loss(&params, &step, latent);
            params.tensors_mut()[t].data[k] = orig - STEP;
            let down = total_loss(&params, &step, latent);
            params.tensors_mut()[t].data[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let err = (numeric - g[k]).abs();
            let scale = numeric.abs().max(g[k].abs());
            assert!(
                err <= RTOL * scale + FLOOR,
                "{}[{k}]: analytic {} numeric {numeric}",
                params.tensors()[t].name,
                g[k]
            );
            checked += 1;
        }
    }
    assert_eq!(grads.len(), 14);
    assert_eq!(checked, 6 * grads.len());
}

#[test]
fn gradients_match_finite_differences() {
    check(None);
}

#[test]
fn gradients_match_with_latent_perturbation() {
    let spec = default_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let shift: Vec<f64> = (0..4 * spec.latent_len()).map(|_| 0.1 * (rng.gen::<f64>() - 0.5)).collect();
    check(Some(&shift));
}
