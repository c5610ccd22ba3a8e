//! Stabilized adversarial training.
//!
//! One discriminator step then one generator step per mini-batch. Both
//! players see inputs perturbed by clipped Gaussian instance noise. The
//! generator objective is the label-smoothed adversarial term plus feature
//! matching on the discriminator's feature tap plus batch moment matching.
//! Its gradient is norm-clipped before the Adam update. Noise, smoothing
//! target and dropout are adapted at evaluation checkpoints.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::neural::{
    clip_grad_norm, AdamState, DiscriminatorParams, GeneratorParams, LatentEmbed, Mode, ParamSet,
    DISC_HIDDEN, LEAKY_SLOPE,
};
use crate::quantum_sim::{generator_forward_and_gradient, run_generator_circuit, AngleMatrix, CircuitSpec};
use crate::scalar::{sign0, Real};

const BCE_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub num_layers: usize,
    pub hidden: usize,
    pub lambda_fm: f64,
    pub alpha_mm: f64,
    pub beta_mm: f64,
    pub eps_sigma: f64,
    pub clip: f64,
    pub eval_every: usize,
    pub n_eval: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub init_bound: f64,
    pub disc_hidden: (usize, usize),
    pub leaky_slope: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            lr_g: 7e-4,
            lr_d: 2e-4,
            num_layers: 8,
            hidden: 32,
            lambda_fm: 0.10,
            alpha_mm: 0.05,
            beta_mm: 0.03,
            eps_sigma: 1e-6,
            clip: 1.0,
            eval_every: 10,
            n_eval: 2000,
            beta1: 0.5,
            beta2: 0.9,
            adam_eps: 1e-8,
            init_bound: 0.1,
            disc_hidden: DISC_HIDDEN,
            leaky_slope: LEAKY_SLOPE,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("lr_g", self.lr_g),
            ("lr_d", self.lr_d),
            ("eps_sigma", self.eps_sigma),
            ("clip", self.clip),
            ("adam_eps", self.adam_eps),
            ("init_bound", self.init_bound),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda_fm", self.lambda_fm), ("alpha_mm", self.alpha_mm), ("beta_mm", self.beta_mm)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.batch_size == 0 || self.num_layers == 0 || self.hidden == 0 {
            return Err(Error::Config("batch_size, num_layers and hidden must be positive".into()));
        }
        if self.disc_hidden.0 == 0 || self.disc_hidden.1 == 0 {
            return Err(Error::Config("discriminator hidden sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0,1)".into()));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config("leaky_slope must lie in (0,1)".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Regularization schedule

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleState {
    /// Current instance-noise scale.
    pub sigma: f64,
    /// Label-smoothing target for the generator's adversarial term.
    pub gamma: f64,
    /// Discriminator dropout rate.
    pub dropout: f64,
    /// Accumulated adaptive part of sigma, added on top of the ramp.
    pub noise_offset: f64,
    pub gamma_bounds: (f64, f64),
    pub dropout_bounds: (f64, f64),
    pub noise_step: f64,
    pub gamma_step: f64,
    pub dropout_step: f64,
    pub base_noise: f64,
    pub end_bonus: f64,
    /// Accuracy above which regularization is increased.
    pub high_accuracy: f64,
    /// Accuracy below which regularization is relaxed.
    pub low_accuracy: f64,
}

impl Default for ScheduleState {
    fn default() -> Self {
        let base_noise = 0.014;
        let initial_increment = 0.002;
        Self {
            sigma: base_noise + initial_increment,
            gamma: 0.88,
            dropout: 0.10,
            noise_offset: initial_increment,
            gamma_bounds: (0.80, 0.94),
            dropout_bounds: (0.10, 0.16),
            noise_step: 0.004,
            gamma_step: 0.02,
            dropout_step: 0.03,
            base_noise,
            end_bonus: 0.016,
            high_accuracy: 0.85,
            low_accuracy: 0.55,
        }
    }
}

impl ScheduleState {
    /// Deterministic part of the noise: base plus a linear ramp reaching
    /// `base + end_bonus` at the final epoch.
    pub fn ramp(&self, epoch: usize, epochs: usize) -> f64 {
        let frac = if epochs > 1 { epoch as f64 / (epochs - 1) as f64 } else { 0.0 };
        self.base_noise + self.end_bonus * frac
    }

    pub fn begin_epoch(&mut self, epoch: usize, epochs: usize) {
        self.sigma = (self.ramp(epoch, epochs) + self.noise_offset).max(0.0);
    }

    pub fn check_bounds(&self) -> bool {
        let (glo, ghi) = self.gamma_bounds;
        let (plo, phi) = self.dropout_bounds;
        self.sigma >= 0.0
            && (glo..=ghi).contains(&self.gamma)
            && (plo..=phi).contains(&self.dropout)
    }
}

/// Checkpoint update driven by discriminator accuracy on noisy real vs.
/// generated samples.
pub fn adapt_regularization(schedule: &ScheduleState, disc_accuracy: f64) -> ScheduleState {
    let mut s = schedule.clone();
    let (glo, ghi) = s.gamma_bounds;
    let (plo, phi) = s.dropout_bounds;
    if disc_accuracy > s.high_accuracy {
        s.sigma += s.noise_step;
        s.noise_offset += s.noise_step;
        s.dropout = (s.dropout + s.dropout_step).min(phi);
        s.gamma = (s.gamma - s.gamma_step).max(glo);
    } else if disc_accuracy < s.low_accuracy {
        let next = (s.sigma - s.noise_step).max(0.0);
        s.noise_offset += next - s.sigma;
        s.sigma = next;
        s.dropout = (s.dropout - s.dropout_step).max(plo);
        s.gamma = (s.gamma + s.gamma_step).min(ghi);
    }
    s.gamma = s.gamma.clamp(glo, ghi);
    s.dropout = s.dropout.clamp(plo, phi);
    s
}

// ---------------------------------------------------------------------------
// Losses and perturbation

/// Binary cross-entropy with `u` clamped into [1e-7, 1 - 1e-7].
pub fn bce<T: Real>(u: T, y: T) -> T {
    let lo = T::lit(BCE_CLAMP);
    let u = u.max(lo).min(T::one() - lo);
    -y * u.ln() - (T::one() - y) * (T::one() - u).ln()
}

/// ∂bce/∂logit for `u = sigmoid(logit)`; zero where the clamp is active.
fn bce_grad_logit<T: Real>(u: T, y: T) -> T {
    let lo = T::lit(BCE_CLAMP);
    if u < lo || u > T::one() - lo {
        T::zero()
    } else {
        u - y
    }
}

/// Π_{[-1,1]^d}(u + σ ε) with ε ~ N(0, I).
pub fn perturb_instance<T: Real>(u: &[T], sigma: T, rng: &mut dyn RngCore) -> Vec<T> {
    perturb_with_mask(u, sigma, rng).0
}

/// Perturbed vector plus the derivative of the clip (1 where not clipped).
fn perturb_with_mask<T: Real>(u: &[T], sigma: T, rng: &mut dyn RngCore) -> (Vec<T>, Vec<T>) {
    let mut out = Vec::with_capacity(u.len());
    let mut mask = Vec::with_capacity(u.len());
    for &v in u {
        let eps: f64 = rng.sample(StandardNormal);
        let raw = v + sigma * T::lit(eps);
        let inside = raw >= -T::one() && raw <= T::one();
        out.push(raw.clamp_unit());
        mask.push(if inside { T::one() } else { T::zero() });
    }
    (out, mask)
}

pub fn sample_latent<T: Real>(dim: usize, rng: &mut dyn RngCore) -> Vec<T> {
    (0..dim).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect()
}

// ---------------------------------------------------------------------------
// Generators

/// A trainable map from the latent prior to the bounded data space.
pub trait GeneratorModel<T: Real>: ParamSet<T> + Clone + Serialize + DeserializeOwned {
    type Cache;

    fn latent_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn forward(&self, z: &[T]) -> Result<(Vec<T>, Self::Cache)>;
    /// Accumulate parameter gradients for `d_out = ∂L/∂output` into `grads`.
    fn backward(&self, cache: &Self::Cache, d_out: &[T], grads: &mut Self) -> Result<()>;

    fn generate(&self, z: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(z)?.0)
    }

    fn zeroed(&self) -> Self {
        let mut g = self.clone();
        g.fill_zero();
        g
    }
}

/// Classical front-end feeding a shared-angle variational circuit whose
/// Pauli-Z readouts are the generated sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumGenerator<T> {
    pub params: GeneratorParams<T>,
    pub embed: LatentEmbed<T>,
    pub num_layers: usize,
}

#[derive(Clone, Debug)]
pub struct QuantumCache<T> {
    z: Vec<T>,
    hidden: Vec<T>,
    spec: CircuitSpec<T>,
    theta: AngleMatrix<T>,
}

impl<T: Real> QuantumGenerator<T> {
    /// m = d latent dims, standard embedding, front-end weights U(-bound, bound).
    pub fn init(num_qubits: usize, num_layers: usize, hidden: usize, bound: f64, rng: &mut dyn RngCore) -> Self {
        Self {
            params: GeneratorParams::uniform(num_qubits, hidden, num_qubits, bound, rng),
            embed: LatentEmbed::standard(num_qubits),
            num_layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.embed.latent_dim() != self.params.latent_dim() || self.embed.num_qubits() != self.params.num_qubits() {
            return Err(Error::invalid("latent embedding does not match generator front-end"));
        }
        if self.num_layers == 0 {
            return Err(Error::invalid("quantum generator needs at least one layer"));
        }
        Ok(())
    }

    fn spec_for(&self, z: &[T]) -> Result<CircuitSpec<T>> {
        CircuitSpec::new(self.params.num_qubits(), self.num_layers, self.embed.embed(z)?)
    }
}

impl<T: Real> ParamSet<T> for QuantumGenerator<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        self.params.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        self.params.tensors_mut()
    }
}

impl<T: Real> GeneratorModel<T> for QuantumGenerator<T> {
    type Cache = QuantumCache<T>;

    fn latent_dim(&self) -> usize {
        self.params.latent_dim()
    }

    fn output_dim(&self) -> usize {
        self.params.num_qubits()
    }

    fn forward(&self, z: &[T]) -> Result<(Vec<T>, QuantumCache<T>)> {
        let spec = self.spec_for(z)?;
        let (theta, hidden) = self.params.forward(z)?;
        let x = run_generator_circuit(&spec, &theta)?;
        Ok((x, QuantumCache { z: z.to_vec(), hidden, spec, theta }))
    }

    fn backward(&self, cache: &QuantumCache<T>, d_out: &[T], grads: &mut Self) -> Result<()> {
        let (_, jac) = generator_forward_and_gradient(&cache.spec, &cache.theta)?;
        let d_theta = jac.matvec_t(d_out);
        self.params.backward(&cache.z, &cache.hidden, &d_theta, &mut grads.params);
        Ok(())
    }

    fn generate(&self, z: &[T]) -> Result<Vec<T>> {
        let spec = self.spec_for(z)?;
        let (theta, _) = self.params.forward(z)?;
        run_generator_circuit(&spec, &theta)
    }
}

// ---------------------------------------------------------------------------
// Steps

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub g_adv: f64,
    pub g_fm: f64,
    pub g_mm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorLosses<T> {
    pub adv: T,
    pub fm: T,
    pub mm: T,
    pub total: T,
    /// Global gradient 2-norm before clipping.
    pub grad_norm: T,
    /// Global gradient 2-norm after clipping.
    pub clipped_norm: T,
}

fn check_batch<T: Real>(name: &str, m: &Matrix<T>, d: usize) -> Result<()> {
    if m.rows() == 0 {
        return Err(Error::invalid(format!("{name} batch is empty")));
    }
    if m.cols() != d {
        return Err(Error::invalid(format!("{name} batch has width {}, expected {d}", m.cols())));
    }
    Ok(())
}

/// Gradient of the discriminator loss on noisy inputs; returns L_D.
pub fn discriminator_loss_and_grad<T: Real>(
    real: &Matrix<T>,
    fake: &Matrix<T>,
    disc: &DiscriminatorParams<T>,
    sigma: T,
    rng: &mut dyn RngCore,
    grads: &mut DiscriminatorParams<T>,
) -> Result<T> {
    let d = disc.input_dim();
    check_batch("real", real, d)?;
    check_batch("generated", fake, d)?;
    let mut total = T::zero();
    for (batch, label) in [(real, T::one()), (fake, T::zero())] {
        let n = T::count(batch.rows());
        let mut loss = T::zero();
        for row in batch.iter_rows() {
            let noisy = perturb_instance(row, sigma, rng);
            let out = disc.forward(&noisy, Mode::Train(rng))?;
            loss += bce(out.prob, label);
            disc.backward(&out, bce_grad_logit(out.prob, label) / n, None, grads);
        }
        total += loss / n;
    }
    if !total.is_finite() {
        return Err(Error::training("discriminator loss is not finite"));
    }
    Ok(total)
}

/// One Adam step on the discriminator. Generated samples are constants here.
pub fn discriminator_step<T: Real>(
    real: &Matrix<T>,
    fake: &Matrix<T>,
    disc: &mut DiscriminatorParams<T>,
    adam: &mut AdamState<T>,
    schedule: &ScheduleState,
    rng: &mut dyn RngCore,
) -> Result<T> {
    disc.dropout_rate = T::lit(schedule.dropout);
    let mut grads = disc.clone();
    grads.fill_zero();
    let loss = discriminator_loss_and_grad(real, fake, disc, T::lit(schedule.sigma), rng, &mut grads)?;
    adam.update(disc, &grads)?;
    Ok(loss)
}

fn batch_moments<T: Real>(rows: &[Vec<T>], d: usize, eps_sigma: T) -> (Vec<T>, Vec<T>) {
    let n = T::count(rows.len());
    let mut mean = vec![T::zero(); d];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![T::zero(); d];
    for r in rows {
        for ((s, &v), &m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n + eps_sigma).sqrt()).collect();
    (mean, std)
}

/// Generator objective and its unclipped gradient, without updating anything.
#[allow(clippy::too_many_arguments)]
pub fn generator_loss_and_grad<T: Real, G: GeneratorModel<T>>(
    real: &Matrix<T>,
    latents: &[Vec<T>],
    generator: &G,
    disc: &DiscriminatorParams<T>,
    config: &TrainConfig,
    schedule: &ScheduleState,
    rng: &mut dyn RngCore,
    grads: &mut G,
) -> Result<(T, T, T)> {
    let d = generator.output_dim();
    check_batch("real", real, d)?;
    if latents.is_empty() {
        return Err(Error::invalid("latent batch is empty"));
    }
    if disc.input_dim() != d {
        return Err(Error::invalid("discriminator input width does not match generator output"));
    }
    let bf = T::count(latents.len());
    let br = T::count(real.rows());
    let k = disc.feature_dim();
    let gamma = T::lit(schedule.gamma);
    let sigma = T::lit(schedule.sigma);
    let lambda = T::lit(config.lambda_fm);
    let alpha = T::lit(config.alpha_mm);
    let beta = T::lit(config.beta_mm);

    let mut fakes = Vec::with_capacity(latents.len());
    let mut caches = Vec::with_capacity(latents.len());
    for z in latents {
        let (x, c) = generator.forward(z)?;
        fakes.push(x);
        caches.push(c);
    }

    // feature matching on clean samples, dropout off
    let mut mean_real_f = vec![T::zero(); k];
    for row in real.iter_rows() {
        let out = disc.forward(row, Mode::Eval)?;
        for (m, &f) in mean_real_f.iter_mut().zip(&out.features) {
            *m += f / br;
        }
    }
    let mut fake_outs = Vec::with_capacity(fakes.len());
    let mut mean_fake_f = vec![T::zero(); k];
    for x in &fakes {
        let out = disc.forward(x, Mode::Eval)?;
        for (m, &f) in mean_fake_f.iter_mut().zip(&out.features) {
            *m += f / bf;
        }
        fake_outs.push(out);
    }
    let fm = lambda
        * mean_real_f
            .iter()
            .zip(&mean_fake_f)
            .map(|(&a, &b)| (a - b).abs())
            .sum::<T>();
    let d_feat: Vec<T> = mean_fake_f
        .iter()
        .zip(&mean_real_f)
        .map(|(&f, &r)| lambda * sign0(f - r) / bf)
        .collect();

    // moment matching
    let eps_sigma = T::lit(config.eps_sigma);
    let real_rows: Vec<Vec<T>> = real.iter_rows().map(<[T]>::to_vec).collect();
    let (mu_r, s_r) = batch_moments(&real_rows, d, eps_sigma);
    let (mu_f, s_f) = batch_moments(&fakes, d, eps_sigma);
    let mm = alpha * mu_r.iter().zip(&mu_f).map(|(&a, &b)| (a - b).abs()).sum::<T>()
        + beta * s_r.iter().zip(&s_f).map(|(&a, &b)| (a - b).abs()).sum::<T>();

    let mut scratch = disc.clone();
    let mut adv = T::zero();
    for (i, x) in fakes.iter().enumerate() {
        let (noisy, mask) = perturb_with_mask(x, sigma, rng);
        let out = disc.forward(&noisy, Mode::Train(rng))?;
        adv += bce(out.prob, gamma) / bf;
        let d_adv = disc.backward(&out, bce_grad_logit(out.prob, gamma) / bf, None, &mut scratch);
        let d_fm = disc.backward(&fake_outs[i], T::zero(), Some(&d_feat), &mut scratch);
        let d_x: Vec<T> = (0..d)
            .map(|j| {
                let d_mean = alpha * sign0(mu_f[j] - mu_r[j]) / bf;
                let d_std = beta * sign0(s_f[j] - s_r[j]) * (x[j] - mu_f[j]) / (bf * s_f[j]);
                mask[j] * d_adv[j] + d_fm[j] + d_mean + d_std
            })
            .collect();
        generator.backward(&caches[i], &d_x, grads)?;
    }
    if !(adv.is_finite() && fm.is_finite() && mm.is_finite()) {
        return Err(Error::training("generator loss is not finite"));
    }
    Ok((adv, fm, mm))
}

/// Compute the generator objective, clip the gradient, take one Adam step.
#[allow(clippy::too_many_arguments)]
pub fn generator_step<T: Real, G: GeneratorModel<T>>(
    real: &Matrix<T>,
    latents: &[Vec<T>],
    generator: &mut G,
    disc: &DiscriminatorParams<T>,
    adam: &mut AdamState<T>,
    config: &TrainConfig,
    schedule: &ScheduleState,
    rng: &mut dyn RngCore,
) -> Result<GeneratorLosses<T>> {
    let mut disc = disc.clone();
    disc.dropout_rate = T::lit(schedule.dropout);
    let mut grads = generator.zeroed();
    let (adv, fm, mm) = generator_loss_and_grad(real, latents, generator, &disc, config, schedule, rng, &mut grads)?;
    if !grads.is_finite() {
        return Err(Error::training("non-finite generator gradient"));
    }
    let grad_norm = clip_grad_norm(&mut grads, T::lit(config.clip));
    let clipped_norm = grads.l2_norm();
    adam.update(generator, &grads)?;
    Ok(GeneratorLosses { adv, fm, mm, total: adv + fm + mm, grad_norm, clipped_norm })
}

// ---------------------------------------------------------------------------
// Training loop

pub(crate) const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_LATENT: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_DISC_INIT: u64 = 5;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEval {
    pub epoch: usize,
    pub disc_accuracy: f64,
    pub schedule: ScheduleState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "G: Serialize, T: Serialize", deserialize = "G: DeserializeOwned, T: DeserializeOwned"))]
pub struct TrainOutcome<T, G> {
    pub generator: G,
    pub discriminator: DiscriminatorParams<T>,
    pub schedule: ScheduleState,
    pub history: Vec<LossRecord>,
    pub checkpoints: Vec<CheckpointEval>,
    /// ChaCha word position reached by each named stream.
    pub rng_words: BTreeMap<String, String>,
}

/// Build the default quantum generator for `data` and train it.
pub fn train<T: Real>(data: &Matrix<T>, config: &TrainConfig) -> Result<TrainOutcome<T, QuantumGenerator<T>>> {
    config.validate()?;
    let mut init = stream(config.seed, STREAM_INIT);
    let generator = QuantumGenerator::init(data.cols(), config.num_layers, config.hidden, config.init_bound, &mut init);
    train_adversarial(data, config, generator)
}

/// Fraction of noisy real samples scored ≥ 0.5 plus generated samples
/// scored < 0.5, on `n` draws of each (real drawn with replacement).
pub fn discriminator_accuracy<T: Real, G: GeneratorModel<T>>(
    data: &Matrix<T>,
    generator: &G,
    disc: &DiscriminatorParams<T>,
    n: usize,
    sigma: T,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if n == 0 || data.rows() == 0 {
        return Ok(0.5);
    }
    let half = T::lit(0.5);
    let mut correct = 0usize;
    for _ in 0..n {
        let i = rng.random_range(0..data.rows());
        let x = perturb_instance(data.row(i), sigma, rng);
        if disc.forward(&x, Mode::Eval)?.prob >= half {
            correct += 1;
        }
        let z = sample_latent(generator.latent_dim(), rng);
        let g = perturb_instance(&generator.generate(&z)?, sigma, rng);
        if disc.forward(&g, Mode::Eval)?.prob < half {
            correct += 1;
        }
    }
    Ok(correct as f64 / (2 * n) as f64)
}

/// Alternating adversarial training of any generator against the default
/// discriminator. Deterministic given `config.seed`.
pub fn train_adversarial<T: Real, G: GeneratorModel<T>>(
    data: &Matrix<T>,
    config: &TrainConfig,
    mut generator: G,
) -> Result<TrainOutcome<T, G>> {
    config.validate()?;
    let d = generator.output_dim();
    if data.cols() != d {
        return Err(Error::invalid(format!("data width {} != generator output {d}", data.cols())));
    }
    if data.rows() < config.batch_size {
        return Err(Error::invalid(format!(
            "need at least batch_size = {} rows, got {}",
            config.batch_size,
            data.rows()
        )));
    }
    if data.as_slice().iter().any(|v| !v.is_finite() || v.abs() > T::one()) {
        return Err(Error::invalid("training data must be finite and inside [-1, 1]"));
    }

    let mut init = stream(config.seed, STREAM_DISC_INIT);
    let mut schedule = ScheduleState::default();
    let (k1, k2) = config.disc_hidden;
    let mut disc = DiscriminatorParams::fan_in_uniform(
        d,
        k1,
        k2,
        T::lit(config.leaky_slope),
        T::lit(schedule.dropout),
        &mut init,
    );
    let lit = T::lit;
    let mut adam_d = AdamState::new(&disc, lit(config.lr_d), lit(config.beta1), lit(config.beta2), lit(config.adam_eps));
    let mut adam_g =
        AdamState::new(&generator, lit(config.lr_g), lit(config.beta1), lit(config.beta2), lit(config.adam_eps));

    let mut shuffle = stream(config.seed, STREAM_SHUFFLE);
    let mut latent = stream(config.seed, STREAM_LATENT);
    let mut noise = stream(config.seed, STREAM_NOISE);
    let mut eval = stream(config.seed, STREAM_EVAL);

    let mut history = Vec::with_capacity(config.epochs);
    let mut checkpoints = Vec::new();
    let mut order: Vec<usize> = (0..data.rows()).collect();
    let m = generator.latent_dim();

    for epoch in 0..config.epochs {
        schedule.begin_epoch(epoch, config.epochs);
        order.shuffle(&mut shuffle);
        let mut sums = [0.0f64; 4];
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let ctx = || format!("epoch {epoch}, batch {b}");
            let real = data.select_rows(chunk);
            let latents: Vec<Vec<T>> = (0..chunk.len()).map(|_| sample_latent(m, &mut latent)).collect();
            let mut fake = Matrix::zeros(0, d);
            for z in &latents {
                fake.push_row(&generator.generate(z).map_err(|e| e.with_context(ctx()))?)?;
            }
            let ld = discriminator_step(&real, &fake, &mut disc, &mut adam_d, &schedule, &mut noise)
                .map_err(|e| e.with_context(ctx()))?;
            let lg = generator_step(&real, &latents, &mut generator, &disc, &mut adam_g, config, &schedule, &mut noise)
                .map_err(|e| e.with_context(ctx()))?;
            sums[0] += ld.as_f64();
            sums[1] += lg.adv.as_f64();
            sums[2] += lg.fm.as_f64();
            sums[3] += lg.mm.as_f64();
            batches += 1;
        }
        let nb = batches.max(1) as f64;
        let (g_adv, g_fm, g_mm) = (sums[1] / nb, sums[2] / nb, sums[3] / nb);
        history.push(LossRecord { epoch, d_loss: sums[0] / nb, g_loss: g_adv + g_fm + g_mm, g_adv, g_fm, g_mm });

        if config.eval_every > 0 && (epoch + 1) % config.eval_every == 0 {
            let acc = discriminator_accuracy(data, &generator, &disc, config.n_eval, T::lit(schedule.sigma), &mut eval)?;
            schedule = adapt_regularization(&schedule, acc);
            disc.dropout_rate = T::lit(schedule.dropout);
            checkpoints.push(CheckpointEval { epoch, disc_accuracy: acc, schedule: schedule.clone() });
        }
    }

    let rng_words = [("shuffle", &shuffle), ("latent", &latent), ("noise", &noise), ("eval", &eval)]
        .into_iter()
        .map(|(k, r)| (k.to_string(), r.get_word_pos().to_string()))
        .collect();
    Ok(TrainOutcome { generator, discriminator: disc, schedule, history, checkpoints, rng_words })
}

/// `n` i.i.d. prior draws mapped through the generator.
pub fn generate_samples<T: Real, G: GeneratorModel<T>>(generator: &G, n: usize, seed: u64) -> Result<Matrix<T>> {
    let mut rng = stream(seed, STREAM_LATENT);
    let d = generator.output_dim();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z = sample_latent(generator.latent_dim(), &mut rng);
        data.extend(generator.generate(&z)?);
    }
    Matrix::from_vec(n, d, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn bce_examples() {
        assert_abs_diff_eq!(bce(0.5f64, 1.0), LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(bce(0.5f64, 0.88), LN_2, epsilon = 1e-15);
        // -0.88 ln 0.9 - 0.12 ln 0.1
        let want = -0.88 * 0.9f64.ln() - 0.12 * 0.1f64.ln();
        assert_abs_diff_eq!(bce(0.9f64, 0.88), want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, 0.369_027_465, epsilon = 1e-9);
        assert!(bce(0.0f64, 1.0).is_finite());
        assert!(bce(1.0f64, 0.0).is_finite());
    }

    #[test]
    fn perturb_zero_sigma_is_identity() {
        let mut rng = stream(1, 0);
        let u = [0.3, -1.0, 1.0, 0.0];
        assert_eq!(perturb_instance(&u, 0.0f64, &mut rng), u.to_vec());
    }

    #[test]
    fn perturb_replays_stream() {
        let u = [0.1, -0.2, 0.95];
        let out = perturb_instance(&u, 0.1f64, &mut stream(7, 3));
        let mut replay = stream(7, 3);
        for (o, &v) in out.iter().zip(&u) {
            let e: f64 = replay.sample(StandardNormal);
            assert_eq!(*o, (v + 0.1 * e).clamp(-1.0, 1.0));
        }
    }

    #[test]
    fn perturb_stays_at_upper_corner_for_nonnegative_noise() {
        let mut rng = stream(2, 0);
        for _ in 0..200 {
            let out = perturb_instance(&[1.0f64; 3], 0.5, &mut rng);
            assert!(out.iter().all(|&v| (-1.0..=1.0).contains(&v)));
        }
        // a sigma of zero with u on the boundary stays put whatever ε is
        assert_eq!(perturb_instance(&[1.0f64; 3], 0.0, &mut rng), vec![1.0; 3]);
    }

    #[test]
    fn adapt_dead_zone() {
        let s = ScheduleState { sigma: 0.014, ..ScheduleState::default() };
        assert_eq!(adapt_regularization(&s, 0.70), s);
    }

    #[test]
    fn adapt_high_accuracy() {
        let s = ScheduleState { sigma: 0.014, gamma: 0.88, dropout: 0.10, ..ScheduleState::default() };
        let n = adapt_regularization(&s, 0.95);
        assert_abs_diff_eq!(n.sigma, 0.018, epsilon = 1e-12);
        assert_abs_diff_eq!(n.gamma, 0.86, epsilon = 1e-12);
        assert_abs_diff_eq!(n.dropout, 0.13, epsilon = 1e-12);
    }

    #[test]
    fn adapt_saturates() {
        let mut s = ScheduleState::default();
        for _ in 0..10 {
            s = adapt_regularization(&s, 1.0);
        }
        assert_eq!(s.dropout, 0.16);
        assert_eq!(s.gamma, 0.80);
        for _ in 0..20 {
            s = adapt_regularization(&s, 0.0);
        }
        assert_eq!(s.dropout, 0.10);
        assert_eq!(s.gamma, 0.94);
        assert_eq!(s.sigma, 0.0);
    }

    #[test]
    fn ramp_reaches_end_bonus() {
        let s = ScheduleState::default();
        assert_abs_diff_eq!(s.ramp(0, 100), 0.014, epsilon = 1e-15);
        assert_abs_diff_eq!(s.ramp(99, 100), 0.030, epsilon = 1e-15);
        assert_abs_diff_eq!(s.ramp(0, 1), 0.014, epsilon = 1e-15);
    }

    #[test]
    fn zero_discriminator_losses() {
        let disc = DiscriminatorParams::<f64>::zeros(2, 16, 8, 0.2, 0.1);
        let real = Matrix::from_rows(&[vec![0.1, 0.2], vec![-0.3, 0.5], vec![0.9, -0.9]]).unwrap();
        let fake = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.4, 0.4]]).unwrap();
        let mut grads = disc.clone();
        let ld = discriminator_loss_and_grad(&real, &fake, &disc, 0.05, &mut stream(0, 0), &mut grads).unwrap();
        assert_abs_diff_eq!(ld, 2.0 * LN_2, epsilon = 1e-12);
    }

    #[test]
    fn identical_batches_have_zero_regularizers() {
        let mut rng = stream(4, 0);
        let gen = QuantumGenerator::<f64>::init(2, 2, 8, 0.3, &mut rng);
        let latents: Vec<Vec<f64>> = (0..6).map(|_| sample_latent(2, &mut rng)).collect();
        let rows: Vec<Vec<f64>> = latents.iter().map(|z| gen.generate(z).unwrap()).collect();
        let real = Matrix::from_rows(&rows).unwrap();
        let disc = DiscriminatorParams::<f64>::fan_in_uniform(2, 16, 8, 0.2, 0.1, &mut rng);
        let cfg = TrainConfig::default();
        let mut grads = gen.zeroed();
        let (_, fm, mm) = generator_loss_and_grad(&real, &latents, &gen, &disc, &cfg, &ScheduleState::default(), &mut rng, &mut grads)
            .unwrap();
        assert_eq!(fm, 0.0);
        assert_eq!(mm, 0.0);
    }

    #[test]
    fn zero_discriminator_adv_is_ln2() {
        let mut rng = stream(5, 0);
        let gen = QuantumGenerator::<f64>::init(2, 1, 4, 0.1, &mut rng);
        let disc = DiscriminatorParams::<f64>::zeros(2, 16, 8, 0.2, 0.1);
        let real = Matrix::from_rows(&[vec![0.5, 0.5], vec![-0.5, 0.1]]).unwrap();
        let latents: Vec<Vec<f64>> = (0..3).map(|_| sample_latent(2, &mut rng)).collect();
        for gamma in [0.80, 0.88, 0.94] {
            let schedule = ScheduleState { gamma, ..ScheduleState::default() };
            let mut grads = gen.zeroed();
            let (adv, _, _) =
                generator_loss_and_grad(&real, &latents, &gen, &disc, &TrainConfig::default(), &schedule, &mut rng, &mut grads)
                    .unwrap();
            assert_abs_diff_eq!(adv, LN_2, epsilon = 1e-12);
        }
    }

    #[test]
    fn train_with_zero_epochs_returns_init() {
        let cfg = TrainConfig { epochs: 0, batch_size: 4, num_layers: 2, ..TrainConfig::default() };
        let data = Matrix::from_fn(8, 2, |i, j| ((i + j) as f64 / 10.0) - 0.5);
        let out = train(&data, &cfg).unwrap();
        let mut init = stream(cfg.seed, STREAM_INIT);
        let fresh = QuantumGenerator::<f64>::init(2, 2, cfg.hidden, cfg.init_bound, &mut init);
        assert_eq!(out.generator, fresh);
        assert!(out.history.is_empty());
    }

    #[test]
    fn train_rejects_small_data() {
        let cfg = TrainConfig { batch_size: 16, ..TrainConfig::default() };
        let data = Matrix::<f64>::zeros(8, 2);
        assert!(matches!(train(&data, &cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn generate_zero_rows() {
        let mut rng = stream(0, 0);
        let gen = QuantumGenerator::<f64>::init(2, 1, 4, 0.1, &mut rng);
        let m = generate_samples(&gen, 0, 1).unwrap();
        assert_eq!(m.rows(), 0);
    }
}
