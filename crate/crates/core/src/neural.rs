//! Classical trainable pieces: the generator front-end that emits circuit
//! angles, the fixed latent embedding, the discriminator with its feature
//! tap, a small dense MLP, and Adam.
//!
//! Gradients are derived by hand for these fixed architectures.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quantum_sim::AngleMatrix;
use crate::scalar::Real;

/// Named views over every trainable tensor of a model.
///
/// Gradient buffers use the same type as the parameters they belong to, so
/// tensor order and shapes line up by construction.
pub trait ParamSet<T: Real> {
    fn tensors(&self) -> Vec<(String, &[T])>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])>;

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn flat(&self) -> Vec<T> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    fn set_flat(&mut self, values: &[T]) -> Result<()> {
        let n = self.num_parameters();
        if values.len() != n {
            return Err(Error::invalid(format!("expected {n} parameters, got {}", values.len())));
        }
        let mut off = 0;
        for (_, t) in self.tensors_mut() {
            t.copy_from_slice(&values[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }

    fn fill_zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    fn scale_all(&mut self, s: T) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    fn l2_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|&v| v * v)
            .sum::<T>()
            .sqrt()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Rescale `grads` so its global 2-norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm<T: Real, P: ParamSet<T>>(grads: &mut P, max_norm: T) -> T {
    let norm = grads.l2_norm();
    if norm > max_norm && norm > T::zero() {
        grads.scale_all(max_norm / norm);
    }
    norm
}

#[inline]
pub fn sigmoid<T: Real>(s: T) -> T {
    if s >= T::zero() {
        T::one() / (T::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn leaky<T: Real>(u: T, slope: T) -> T {
    if u > T::zero() {
        u
    } else {
        slope * u
    }
}

#[inline]
fn leaky_grad<T: Real>(u: T, slope: T) -> T {
    if u > T::zero() {
        T::one()
    } else {
        slope
    }
}

fn uniform_vec<T: Real>(rng: &mut dyn RngCore, n: usize, bound: f64) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect()
}

fn uniform_matrix<T: Real>(rng: &mut dyn RngCore, rows: usize, cols: usize, bound: f64) -> Matrix<T> {
    Matrix::from_vec(rows, cols, uniform_vec(rng, rows * cols, bound)).expect("shape")
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::invalid(format!("{what}: expected length {want}, got {got}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Generator front-end

/// Two-layer map z ↦ Θ = reshape(W2·tanh(W1·z + b1) + b2; d, 3).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams<T> {
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
}

impl<T: Real> GeneratorParams<T> {
    pub fn zeros(latent_dim: usize, hidden: usize, num_qubits: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden, latent_dim),
            b1: vec![T::zero(); hidden],
            w2: Matrix::zeros(3 * num_qubits, hidden),
            b2: vec![T::zero(); 3 * num_qubits],
        }
    }

    /// Every entry drawn from U(-bound, bound).
    pub fn uniform(
        latent_dim: usize,
        hidden: usize,
        num_qubits: usize,
        bound: f64,
        rng: &mut dyn RngCore,
    ) -> Self {
        Self {
            w1: uniform_matrix(rng, hidden, latent_dim, bound),
            b1: uniform_vec(rng, hidden, bound),
            w2: uniform_matrix(rng, 3 * num_qubits, hidden, bound),
            b2: uniform_vec(rng, 3 * num_qubits, bound),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn num_qubits(&self) -> usize {
        self.w2.rows() / 3
    }

    pub fn validate(&self) -> Result<()> {
        let (m, r, d3) = (self.w1.cols(), self.w1.rows(), self.w2.rows());
        if self.b1.len() != r || self.w2.cols() != r || self.b2.len() != d3 || d3 % 3 != 0 {
            return Err(Error::invalid("generator parameter shapes are inconsistent"));
        }
        if self.w1.as_slice().len() != r * m || self.w2.as_slice().len() != d3 * r {
            return Err(Error::invalid("generator weight matrix has wrong data length"));
        }
        if !self.is_finite() {
            return Err(Error::invalid("generator parameters are not finite"));
        }
        Ok(())
    }

    /// Returns Θ and the hidden activation needed for the backward pass.
    pub fn forward(&self, z: &[T]) -> Result<(AngleMatrix<T>, Vec<T>)> {
        check_len("latent vector", z.len(), self.latent_dim())?;
        let mut h = self.w1.matvec(z);
        for (hi, &bi) in h.iter_mut().zip(&self.b1) {
            *hi = (*hi + bi).tanh();
        }
        let mut a = self.w2.matvec(&h);
        for (ai, &bi) in a.iter_mut().zip(&self.b2) {
            *ai += bi;
        }
        let theta = AngleMatrix::from_vec(self.num_qubits(), a)
            .map_err(|e| Error::training(format!("generator front-end produced bad angles: {e}")))?;
        Ok((theta, h))
    }

    /// Accumulate parameter gradients for upstream `d_theta` (flattened
    /// qubit-major, same layout as Θ).
    pub fn backward(&self, z: &[T], hidden: &[T], d_theta: &[T], grads: &mut Self) {
        grads.w2.add_outer(d_theta, hidden, T::one());
        for (g, &d) in grads.b2.iter_mut().zip(d_theta) {
            *g += d;
        }
        let dh = self.w2.matvec_t(d_theta);
        let du: Vec<T> = dh.iter().zip(hidden).map(|(&g, &h)| g * (T::one() - h * h)).collect();
        grads.w1.add_outer(&du, z, T::one());
        for (g, &d) in grads.b1.iter_mut().zip(&du) {
            *g += d;
        }
    }
}

impl<T: Real> ParamSet<T> for GeneratorParams<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        vec![
            ("generator.w1".into(), self.w1.as_slice()),
            ("generator.b1".into(), &self.b1),
            ("generator.w2".into(), self.w2.as_slice()),
            ("generator.b2".into(), &self.b2),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        vec![
            ("generator.w1".into(), self.w1.as_mut_slice()),
            ("generator.b1".into(), &mut self.b1),
            ("generator.w2".into(), self.w2.as_mut_slice()),
            ("generator.b2".into(), &mut self.b2),
        ]
    }
}

/// Fixed map z ↦ z' = S ⊙ (P z) giving one embedding angle per qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentEmbed<T> {
    projection: Matrix<T>,
    scale: Vec<T>,
}

impl<T: Real> LatentEmbed<T> {
    pub fn new(projection: Matrix<T>, scale: Vec<T>) -> Result<Self> {
        check_len("embedding scale", scale.len(), projection.rows())?;
        if !projection.is_finite() || scale.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent embedding is not finite"));
        }
        Ok(Self { projection, scale })
    }

    /// P = I, S = diag(π/2): maps U(-1,1)^d onto angles in [-π/2, π/2].
    pub fn standard(num_qubits: usize) -> Self {
        Self {
            projection: Matrix::identity(num_qubits),
            scale: vec![T::FRAC_PI_2(); num_qubits],
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn num_qubits(&self) -> usize {
        self.projection.rows()
    }

    pub fn embed(&self, z: &[T]) -> Result<Vec<T>> {
        check_len("latent vector", z.len(), self.latent_dim())?;
        Ok(self
            .projection
            .matvec(z)
            .into_iter()
            .zip(&self.scale)
            .map(|(v, &s)| v * s)
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Discriminator

pub const DISC_HIDDEN: (usize, usize) = (16, 8);
pub const LEAKY_SLOPE: f64 = 0.2;

/// Forward-pass mode. Training draws a dropout mask from the given source.
pub enum Mode<'a> {
    Train(&'a mut dyn RngCore),
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorParams<T> {
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
    pub w_out: Vec<T>,
    pub b_out: T,
    pub leaky_slope: T,
    pub dropout_rate: T,
}

#[derive(Clone, Debug)]
pub struct DiscOutput<T> {
    pub prob: T,
    pub logit: T,
    /// Activations after the second LeakyReLU, before dropout.
    pub features: Vec<T>,
    input: Vec<T>,
    u1: Vec<T>,
    v1: Vec<T>,
    u2: Vec<T>,
    /// δ/(1-p) in training mode, ones in eval mode.
    keep: Vec<T>,
}

impl<T: Real> DiscriminatorParams<T> {
    pub fn zeros(input_dim: usize, k1: usize, k2: usize, leaky_slope: T, dropout_rate: T) -> Self {
        Self {
            w1: Matrix::zeros(k1, input_dim),
            b1: vec![T::zero(); k1],
            w2: Matrix::zeros(k2, k1),
            b2: vec![T::zero(); k2],
            w_out: vec![T::zero(); k2],
            b_out: T::zero(),
            leaky_slope,
            dropout_rate,
        }
    }

    /// Fan-in scaled uniform init, U(-1/√fan_in, 1/√fan_in) for weights and biases.
    pub fn fan_in_uniform(
        input_dim: usize,
        k1: usize,
        k2: usize,
        leaky_slope: T,
        dropout_rate: T,
        rng: &mut dyn RngCore,
    ) -> Self {
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (k1 as f64).sqrt();
        let b3 = 1.0 / (k2 as f64).sqrt();
        Self {
            w1: uniform_matrix(rng, k1, input_dim, b1),
            b1: uniform_vec(rng, k1, b1),
            w2: uniform_matrix(rng, k2, k1, b2),
            b2: uniform_vec(rng, k2, b2),
            w_out: uniform_vec(rng, k2, b3),
            b_out: T::lit(rng.random_range(-b3..=b3)),
            leaky_slope,
            dropout_rate,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k1, k2) = (self.w1.cols(), self.w1.rows(), self.w2.rows());
        if self.b1.len() != k1 || self.w2.cols() != k1 || self.b2.len() != k2 || self.w_out.len() != k2 {
            return Err(Error::invalid("discriminator parameter shapes are inconsistent"));
        }
        if self.w1.as_slice().len() != k1 * d || self.w2.as_slice().len() != k2 * k1 {
            return Err(Error::invalid("discriminator weight matrix has wrong data length"));
        }
        let (zero, one) = (T::zero(), T::one());
        if !(self.leaky_slope > zero && self.leaky_slope < one) {
            return Err(Error::invalid("leaky slope must be in (0,1)"));
        }
        if !(self.dropout_rate >= zero && self.dropout_rate < one) {
            return Err(Error::invalid("dropout rate must be in [0,1)"));
        }
        if !self.is_finite() {
            return Err(Error::invalid("discriminator parameters are not finite"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T], mode: Mode<'_>) -> Result<DiscOutput<T>> {
        check_len("discriminator input", x.len(), self.input_dim())?;
        let a = self.leaky_slope;
        let mut u1 = self.w1.matvec(x);
        for (u, &b) in u1.iter_mut().zip(&self.b1) {
            *u += b;
        }
        let v1: Vec<T> = u1.iter().map(|&u| leaky(u, a)).collect();
        let mut u2 = self.w2.matvec(&v1);
        for (u, &b) in u2.iter_mut().zip(&self.b2) {
            *u += b;
        }
        let h: Vec<T> = u2.iter().map(|&u| leaky(u, a)).collect();
        let keep: Vec<T> = match mode {
            Mode::Eval => vec![T::one(); h.len()],
            Mode::Train(rng) => {
                let p = self.dropout_rate.as_f64();
                let inv = T::one() / (T::one() - self.dropout_rate);
                (0..h.len())
                    .map(|_| if rng.random::<f64>() < 1.0 - p { inv } else { T::zero() })
                    .collect()
            }
        };
        let logit = self
            .w_out
            .iter()
            .zip(&h)
            .zip(&keep)
            .map(|((&w, &hv), &k)| w * hv * k)
            .sum::<T>()
            + self.b_out;
        Ok(DiscOutput {
            prob: sigmoid(logit),
            logit,
            features: h,
            input: x.to_vec(),
            u1,
            v1,
            u2,
            keep,
        })
    }

    /// Backpropagate `d_logit` (and optionally a gradient on the feature tap)
    /// into `grads`; returns the gradient with respect to the input.
    pub fn backward(
        &self,
        out: &DiscOutput<T>,
        d_logit: T,
        d_features: Option<&[T]>,
        grads: &mut Self,
    ) -> Vec<T> {
        let a = self.leaky_slope;
        let mut dh: Vec<T> = self
            .w_out
            .iter()
            .zip(&out.keep)
            .map(|(&w, &k)| d_logit * w * k)
            .collect();
        if let Some(df) = d_features {
            for (g, &f) in dh.iter_mut().zip(df) {
                *g += f;
            }
        }
        for ((g, &hv), &k) in grads.w_out.iter_mut().zip(&out.features).zip(&out.keep) {
            *g += d_logit * hv * k;
        }
        grads.b_out += d_logit;

        let du2: Vec<T> = dh.iter().zip(&out.u2).map(|(&g, &u)| g * leaky_grad(u, a)).collect();
        grads.w2.add_outer(&du2, &out.v1, T::one());
        for (g, &d) in grads.b2.iter_mut().zip(&du2) {
            *g += d;
        }
        let dv1 = self.w2.matvec_t(&du2);
        let du1: Vec<T> = dv1.iter().zip(&out.u1).map(|(&g, &u)| g * leaky_grad(u, a)).collect();
        grads.w1.add_outer(&du1, &out.input, T::one());
        for (g, &d) in grads.b1.iter_mut().zip(&du1) {
            *g += d;
        }
        self.w1.matvec_t(&du1)
    }
}

impl<T: Real> ParamSet<T> for DiscriminatorParams<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        vec![
            ("discriminator.w1".into(), self.w1.as_slice()),
            ("discriminator.b1".into(), &self.b1),
            ("discriminator.w2".into(), self.w2.as_slice()),
            ("discriminator.b2".into(), &self.b2),
            ("discriminator.w_out".into(), &self.w_out),
            ("discriminator.b_out".into(), std::slice::from_ref(&self.b_out)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        vec![
            ("discriminator.w1".into(), self.w1.as_mut_slice()),
            ("discriminator.b1".into(), &mut self.b1),
            ("discriminator.w2".into(), self.w2.as_mut_slice()),
            ("discriminator.b2".into(), &mut self.b2),
            ("discriminator.w_out".into(), &mut self.w_out),
            ("discriminator.b_out".into(), std::slice::from_mut(&mut self.b_out)),
        ]
    }
}

// ---------------------------------------------------------------------------
// Dense MLP

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    LeakyRelu { slope: f64 },
}

impl Activation {
    fn apply<T: Real>(self, u: T) -> T {
        match self {
            Activation::Identity => u,
            Activation::Tanh => u.tanh(),
            Activation::Sigmoid => sigmoid(u),
            Activation::LeakyRelu { slope } => leaky(u, T::lit(slope)),
        }
    }

    /// Derivative given pre-activation `u` and output `y`.
    fn grad<T: Real>(self, u: T, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
            Activation::LeakyRelu { slope } => leaky_grad(u, T::lit(slope)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

/// Fully connected network; `hidden` is applied after every layer except
/// the last, which uses `output`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
    pub hidden: Activation,
    pub output: Activation,
}

#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    input: Vec<T>,
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
}

impl<T> MlpCache<T> {
    pub fn output(&self) -> &[T] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl<T: Real> Mlp<T> {
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense { weight: Matrix::zeros(w[1], w[0]), bias: vec![T::zero(); w[1]] })
            .collect();
        Self { layers, hidden, output }
    }

    pub fn fan_in_uniform(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut dyn RngCore,
    ) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let b = 1.0 / (w[0] as f64).sqrt();
                Dense { weight: uniform_matrix(rng, w[1], w[0], b), bias: uniform_vec(rng, w[1], b) }
            })
            .collect();
        Self { layers, hidden, output }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.cols())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.rows())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("MLP has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.weight.rows() || l.weight.as_slice().len() != l.weight.rows() * l.weight.cols() {
                return Err(Error::invalid(format!("MLP layer {i} has inconsistent shapes")));
            }
            if i > 0 && l.weight.cols() != self.layers[i - 1].weight.rows() {
                return Err(Error::invalid(format!("MLP layer {i} input width mismatch")));
            }
        }
        if !self.is_finite() {
            return Err(Error::invalid("MLP parameters are not finite"));
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: &[T]) -> Result<MlpCache<T>> {
        check_len("MLP input", x.len(), self.input_dim())?;
        let n = self.layers.len();
        let mut pre = Vec::with_capacity(n);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(n);
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { x } else { &post[i - 1] };
            let mut u = layer.weight.matvec(input);
            for (ui, &b) in u.iter_mut().zip(&layer.bias) {
                *ui += b;
            }
            let act = if i + 1 == n { self.output } else { self.hidden };
            let y = u.iter().map(|&v| act.apply(v)).collect();
            pre.push(u);
            post.push(y);
        }
        Ok(MlpCache { input: x.to_vec(), pre, post })
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.post.pop().unwrap_or_default())
    }

    /// Gradient w.r.t. the output *after* the output activation.
    pub fn backward(&self, cache: &MlpCache<T>, d_out: &[T], grads: &mut Self) -> Vec<T> {
        let n = self.layers.len();
        let mut delta = d_out.to_vec();
        for i in (0..n).rev() {
            let act = if i + 1 == n { self.output } else { self.hidden };
            for ((d, &u), &y) in delta.iter_mut().zip(&cache.pre[i]).zip(&cache.post[i]) {
                *d *= act.grad(u, y);
            }
            let input = if i == 0 { &cache.input } else { &cache.post[i - 1] };
            grads.layers[i].weight.add_outer(&delta, input, T::one());
            for (g, &d) in grads.layers[i].bias.iter_mut().zip(&delta) {
                *g += d;
            }
            delta = self.layers[i].weight.matvec_t(&delta);
        }
        delta
    }
}

impl<T: Real> ParamSet<T> for Mlp<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("layer{i}.weight"), l.weight.as_slice()),
                    (format!("layer{i}.bias"), l.bias.as_slice()),
                ]
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("layer{i}.weight"), l.weight.as_mut_slice()),
                    (format!("layer{i}.bias"), l.bias.as_mut_slice()),
                ]
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Adam

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new<P: ParamSet<T>>(params: &P, lr: T, beta1: T, beta2: T, eps: T) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            first: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// One bias-corrected Adam update. Fails without touching anything if
    /// any gradient entry is non-finite.
    pub fn update<P: ParamSet<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gt = grads.tensors();
        if gt.len() != self.first.len() {
            return Err(Error::invalid("gradient tensor count does not match optimizer state"));
        }
        for ((name, g), m) in gt.iter().zip(&self.first) {
            if g.len() != m.len() {
                return Err(Error::invalid(format!("gradient shape mismatch for {name}")));
            }
            if let Some(bad) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::training(format!("non-finite gradient in {name}[{bad}]")));
            }
        }
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for ((((_, p), (_, g)), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(gt)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
