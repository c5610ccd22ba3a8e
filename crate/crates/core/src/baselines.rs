//! Reference augmenters: SMOTE interpolation and a classical generator of
//! matched capacity trained with the same adversarial recipe.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::neural::{Activation, Mlp, MlpCache, ParamSet, LEAKY_SLOPE};
use crate::qgan_train::{stream, train_adversarial, GeneratorModel, TrainConfig, TrainOutcome, STREAM_INIT};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self { k_neighbors: 5, n_samples: 0, seed: 0 }
    }
}

/// Where a synthetic row came from: `base + weight · (neighbor - base)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoteOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub weight: f64,
}

/// The `k` nearest rows to row `i` by Euclidean distance, excluding `i`
/// itself; ties go to the lower index.
pub fn nearest_neighbors<T: Real>(data: &Matrix<T>, i: usize, k: usize) -> Vec<usize> {
    let xi = data.row(i);
    let mut cand: Vec<(f64, usize)> = (0..data.rows())
        .filter(|&j| j != i)
        .map(|j| {
            let d2: f64 = data.row(j).iter().zip(xi).map(|(&a, &b)| (a - b).as_f64().powi(2)).sum();
            (d2, j)
        })
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.into_iter().take(k).map(|(_, j)| j).collect()
}

/// SMOTE oversampling with the provenance of every generated row.
pub fn smote_generate<T: Real>(minority: &Matrix<T>, config: &SmoteConfig) -> Result<(Matrix<T>, Vec<SmoteOrigin>)> {
    let n = minority.rows();
    if config.k_neighbors == 0 {
        return Err(Error::invalid("k_neighbors must be positive"));
    }
    if n <= config.k_neighbors {
        return Err(Error::invalid(format!(
            "SMOTE needs more than k_neighbors = {} minority rows, got {n}",
            config.k_neighbors
        )));
    }
    if !minority.is_finite() {
        return Err(Error::invalid("minority rows are not finite"));
    }
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| nearest_neighbors(minority, i, config.k_neighbors)).collect();
    let mut rng = stream(config.seed, 0);
    let mut out = Matrix::zeros(config.n_samples, minority.cols());
    let mut origins = Vec::with_capacity(config.n_samples);
    for s in 0..config.n_samples {
        let base = rng.random_range(0..n);
        let neighbor = neighbors[base][rng.random_range(0..config.k_neighbors)];
        let weight: f64 = rng.random();
        let u = T::lit(weight);
        let (a, b) = (minority.row(base), minority.row(neighbor));
        for (j, (&x, &y)) in a.iter().zip(b).enumerate() {
            out.set(s, j, x + u * (y - x));
        }
        origins.push(SmoteOrigin { base, neighbor, weight });
    }
    Ok((out, origins))
}

/// Two-hidden-layer network from the latent prior to `[-1, 1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalGenerator<T> {
    pub net: Mlp<T>,
}

pub fn classical_param_count(latent: usize, hidden: usize, out: usize) -> usize {
    latent * hidden + hidden + hidden * hidden + hidden + hidden * out + out
}

/// Hidden width whose parameter count is closest to `target`
/// (smaller width on ties).
pub fn matched_hidden_width(target: usize, latent: usize, out: usize) -> usize {
    let mut best = (usize::MAX, 1);
    for h in 1..=target.max(1) {
        let c = classical_param_count(latent, h, out);
        let diff = c.abs_diff(target);
        if diff < best.0 {
            best = (diff, h);
        }
        if c > target {
            break;
        }
    }
    best.1
}

impl<T: Real> ClassicalGenerator<T> {
    pub fn init(latent: usize, hidden: usize, out: usize, rng: &mut dyn RngCore) -> Self {
        let net = Mlp::fan_in_uniform(
            &[latent, hidden, hidden, out],
            Activation::LeakyRelu { slope: LEAKY_SLOPE },
            Activation::Tanh,
            rng,
        );
        Self { net }
    }

    pub fn hidden_width(&self) -> usize {
        self.net.layers.first().map_or(0, |l| l.weight.rows())
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.net.layers.len() != 3 || self.net.output != Activation::Tanh {
            return Err(Error::invalid("classical generator must have two hidden layers and a tanh head"));
        }
        Ok(())
    }
}

impl<T: Real> ParamSet<T> for ClassicalGenerator<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        self.net.tensors().into_iter().map(|(n, t)| (format!("generator.{n}"), t)).collect()
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        self.net.tensors_mut().into_iter().map(|(n, t)| (format!("generator.{n}"), t)).collect()
    }
}

impl<T: Real> GeneratorModel<T> for ClassicalGenerator<T> {
    type Cache = MlpCache<T>;

    fn latent_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.net.output_dim()
    }

    fn forward(&self, z: &[T]) -> Result<(Vec<T>, MlpCache<T>)> {
        let cache = self.net.forward_cached(z)?;
        Ok((cache.output().to_vec(), cache))
    }

    fn backward(&self, cache: &MlpCache<T>, d_out: &[T], grads: &mut Self) -> Result<()> {
        self.net.backward(cache, d_out, &mut grads.net);
        Ok(())
    }

    fn generate(&self, z: &[T]) -> Result<Vec<T>> {
        self.net.forward(z)
    }
}

/// Quantum generator parameter count for width-`d` data under `config`.
pub fn quantum_param_count(d: usize, config: &TrainConfig) -> usize {
    let (m, h, p) = (d, config.hidden, 3 * d);
    m * h + h + h * p + p
}

/// Train the classical counterpart with hidden width matched to the
/// quantum generator's parameter count.
pub fn classical_gan_train<T: Real>(
    data: &Matrix<T>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T, ClassicalGenerator<T>>> {
    config.validate()?;
    let d = data.cols();
    if d == 0 {
        return Err(Error::invalid("data has no columns"));
    }
    let h = matched_hidden_width(quantum_param_count(d, config), d, d);
    let mut init = stream(config.seed, STREAM_INIT);
    let generator = ClassicalGenerator::init(d, h, d, &mut init);
    train_adversarial(data, config, generator)
}
