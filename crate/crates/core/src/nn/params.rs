use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use sha2::{Digest, Sha256};

use crate::cifar::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::seed::{hex_digest, rng_from, Tag};

use super::spec::AutoencoderSpec;

/// A named, shaped parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    fn zeros(name: String, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor { name, shape, data: vec![T::ZERO; len] }
    }
}

impl<T> AsRef<[T]> for Tensor<T> {
    fn as_ref(&self) -> &[T] {
        &self.data
    }
}

impl<T> AsMut<[T]> for Tensor<T> {
    fn as_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

/// Codec parameters, optionally with a linear classifier head on the
/// flattened latent code.
///
/// Tensors are ordered `encoder.{i}.weight`, `encoder.{i}.bias`, then the
/// decoder layers likewise, then `head.weight`/`head.bias` if present.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    spec: AutoencoderSpec,
    tensors: Vec<Tensor<T>>,
    has_head: bool,
}

pub(crate) fn layer_names(spec: &AutoencoderSpec) -> Vec<String> {
    let mut names = Vec::with_capacity(spec.num_layers());
    for i in 0..spec.encoder_layers.len() {
        names.push(format!("encoder.{i}"));
    }
    for i in 0..spec.decoder_layers.len() {
        names.push(format!("decoder.{i}"));
    }
    names
}

fn uniform_fill<T: Real>(data: &mut [T], bound: f64, seed: u64, index: usize) {
    let mut rng = rng_from(seed, &[Tag::Str("init"), Tag::U64(index as u64)]);
    for v in data {
        *v = T::from_f64(rng.gen_range(-bound..=bound));
    }
}

impl<T: Real> Parameters<T> {
    /// All-zero parameters with the shapes implied by `spec`.
    pub fn zeros(spec: &AutoencoderSpec, with_head: bool) -> Result<Self> {
        spec.validate()?;
        let mut tensors = Vec::new();
        for (layer, name) in spec.layers().zip(layer_names(spec)) {
            tensors.push(Tensor::zeros(format!("{name}.weight"), layer.weight_shape().to_vec()));
            tensors.push(Tensor::zeros(format!("{name}.bias"), vec![layer.out_channels]));
        }
        if with_head {
            tensors.push(Tensor::zeros("head.weight".into(), vec![NUM_CLASSES, spec.latent_len()]));
            tensors.push(Tensor::zeros("head.bias".into(), vec![NUM_CLASSES]));
        }
        Ok(Parameters { spec: spec.clone(), tensors, has_head: with_head })
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization of weights
    /// and biases. Each tensor draws from its own derived stream, so adding a
    /// head does not change the codec's values.
    pub fn init(spec: &AutoencoderSpec, seed: u64, with_head: bool) -> Result<Self> {
        let mut params = Self::zeros(spec, with_head)?;
        let fan_ins: Vec<usize> = spec.layers().map(|l| l.fan_in()).collect();
        for (i, t) in params.tensors.iter_mut().enumerate() {
            let fan_in = fan_ins.get(i / 2).copied().unwrap_or(spec.latent_len());
            uniform_fill(&mut t.data, init_bound(fan_in), seed, i);
        }
        Ok(params)
    }

    /// Same codec values with a freshly initialized classifier head added.
    pub fn with_head(mut self, seed: u64) -> Self {
        if self.has_head {
            return self;
        }
        let base = self.tensors.len();
        let latent = self.spec.latent_len();
        let mut w = Tensor::zeros("head.weight".into(), vec![NUM_CLASSES, latent]);
        let mut b = Tensor::zeros("head.bias".into(), vec![NUM_CLASSES]);
        uniform_fill(&mut w.data, init_bound(latent), seed, base);
        uniform_fill(&mut b.data, init_bound(latent), seed, base + 1);
        self.tensors.push(w);
        self.tensors.push(b);
        self.has_head = true;
        self
    }

    /// Rebuild from named arrays, checking names and shapes against `spec`.
    pub fn from_tensors(spec: &AutoencoderSpec, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let with_head = tensors.len() == 2 * spec.num_layers() + 2;
        let template = Self::zeros(spec, with_head)?;
        if tensors.len() != template.tensors.len() {
            return Err(Error::ShapeMismatch {
                what: "parameter count",
                expected: format!("{}", template.tensors.len()),
                actual: format!("{}", tensors.len()),
            });
        }
        for (want, got) in template.tensors.iter().zip(&tensors) {
            if want.name != got.name || want.shape != got.shape || got.data.len() != want.data.len() {
                return Err(Error::ShapeMismatch {
                    what: "parameter tensor",
                    expected: format!("{} {:?}", want.name, want.shape),
                    actual: format!("{} {:?} ({} values)", got.name, got.shape, got.data.len()),
                });
            }
            if got.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("tensor {} holds non-finite values", got.name)));
            }
        }
        Ok(Parameters { spec: spec.clone(), tensors, has_head: with_head })
    }

    pub fn spec(&self) -> &AutoencoderSpec {
        &self.spec
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn has_head(&self) -> bool {
        self.has_head
    }

    pub fn codec_tensors(&self) -> &[Tensor<T>] {
        &self.tensors[..2 * self.spec.num_layers()]
    }

    pub(crate) fn weight(&self, layer: usize) -> &[T] {
        &self.tensors[2 * layer].data
    }

    pub(crate) fn bias(&self, layer: usize) -> &[T] {
        &self.tensors[2 * layer + 1].data
    }

    pub(crate) fn head(&self) -> Option<(&[T], &[T])> {
        let n = self.tensors.len();
        self.has_head.then(|| (&self.tensors[n - 2].data[..], &self.tensors[n - 1].data[..]))
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// SHA-256 over names, shapes and little-endian values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut buf = Vec::new();
        for t in &self.tensors {
            h.update((t.name.len() as u64).to_le_bytes());
            h.update(t.name.as_bytes());
            for &d in &t.shape {
                h.update((d as u64).to_le_bytes());
            }
            buf.clear();
            for &v in &t.data {
                v.write_le(&mut buf);
            }
            h.update(&buf);
        }
        hex_digest(&h.finalize())
    }

    /// Gradient buffer with matching shapes, all zero.
    pub fn zeros_like(&self) -> Vec<Vec<T>> {
        self.tensors.iter().map(|t| vec![T::ZERO; t.data.len()]).collect()
    }

    /// Convert to another precision.
    pub fn cast<U: Real>(&self) -> Parameters<U> {
        Parameters {
            spec: self.spec.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                })
                .collect(),
            has_head: self.has_head,
        }
    }
}

pub fn init_bound(fan_in: usize) -> f64 {
    1.0 / libm::sqrt(fan_in as f64)
}
