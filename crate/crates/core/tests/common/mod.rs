//! Shared oracles and check suites for the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsynth::downstream::{BinaryModel, QnnClassifier, QnnConfig};
use qsynth::matrix::Matrix;
use qsynth::metrics::{auc_roc, ks_two_sample, wasserstein_1d};
use qsynth::neural::{DiscriminatorParams, GeneratorParams, Mode, ParamSet};
use qsynth::qgan_train::{
    adapt_regularization, generator_loss_and_grad, QuantumGenerator, ScheduleState, TrainConfig,
};
use qsynth::quantum_sim::{generator_gradient, run_generator_circuit, AngleMatrix, CircuitSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Dense unitary oracle

type Dense = Vec<Vec<Complex64>>;

fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).collect())
        .collect()
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut c = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn kron(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.len());
    let mut c = vec![vec![Complex64::new(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    c[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    c
}

pub fn rx(t: f64) -> Dense {
    let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    vec![vec![Complex64::new(c, 0.0), Complex64::new(0.0, -s)], vec![Complex64::new(0.0, -s), Complex64::new(c, 0.0)]]
}

pub fn ry(t: f64) -> Dense {
    let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    vec![vec![Complex64::new(c, 0.0), Complex64::new(-s, 0.0)], vec![Complex64::new(s, 0.0), Complex64::new(c, 0.0)]]
}

pub fn rz(t: f64) -> Dense {
    vec![
        vec![Complex64::from_polar(1.0, -t / 2.0), Complex64::new(0.0, 0.0)],
        vec![Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, t / 2.0)],
    ]
}

/// Full-register matrix of a one-qubit gate; qubit 0 is the leftmost factor.
fn lift(d: usize, q: usize, g: &Dense) -> Dense {
    let mut m = identity(1);
    for k in 0..d {
        m = kron(&m, if k == q { g } else { &IDENTITY2 });
    }
    m
}

static IDENTITY2: std::sync::LazyLock<Dense> = std::sync::LazyLock::new(|| identity(2));

fn cnot(d: usize, control: usize, target: usize) -> Dense {
    let n = 1 << d;
    let bit = |b: usize, q: usize| (b >> (d - 1 - q)) & 1;
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for b in 0..n {
        let out = if bit(b, control) == 1 { b ^ (1 << (d - 1 - target)) } else { b };
        m[out][b] = Complex64::new(1.0, 0.0);
    }
    m
}

/// ⟨Z_q⟩ for every qubit after the embed + L·[RX RY RZ; ring] circuit, with
/// a separate angle set per layer.
pub fn oracle_untied(d: usize, embedding: &[f64], layers: &[Vec<f64>]) -> Vec<f64> {
    let mut u = identity(1 << d);
    let mut apply = |g: Dense| u = matmul(&g, &u);
    for q in 0..d {
        apply(lift(d, q, &ry(embedding[q])));
    }
    for theta in layers {
        for q in 0..d {
            apply(lift(d, q, &rx(theta[3 * q])));
            apply(lift(d, q, &ry(theta[3 * q + 1])));
            apply(lift(d, q, &rz(theta[3 * q + 2])));
        }
        if d > 1 {
            for q in 0..d {
                apply(cnot(d, q, (q + 1) % d));
            }
        }
    }
    let psi: Vec<Complex64> = u.iter().map(|row| row[0]).collect();
    (0..d)
        .map(|q| {
            psi.iter()
                .enumerate()
                .map(|(b, a)| if (b >> (d - 1 - q)) & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                .sum()
        })
        .collect()
}

pub fn oracle_expectations(d: usize, num_layers: usize, embedding: &[f64], theta: &[f64]) -> Vec<f64> {
    oracle_untied(d, embedding, &vec![theta.to_vec(); num_layers])
}

pub fn random_angles(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

/// Compare the simulator against the dense oracle on `draws` random circuits
/// for each d in `dims`. Returns the largest absolute deviation.
pub fn quantum_oracle_suite(dims: &[usize], draws: usize, seed: u64) -> Result<f64, String> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for &d in dims {
        for k in 0..draws {
            let layers = r.random_range(1..=4);
            let z = random_angles(&mut r, d);
            let theta = random_angles(&mut r, 3 * d);
            let spec = CircuitSpec::new(d, layers, z.clone()).map_err(|e| e.to_string())?;
            let got = run_generator_circuit(&spec, &AngleMatrix::from_vec(d, theta.clone()).unwrap())
                .map_err(|e| e.to_string())?;
            let want = oracle_expectations(d, layers, &z, &theta);
            for (g, w) in got.iter().zip(&want) {
                let err = (g - w).abs();
                worst = worst.max(err);
                if err > 1e-10 {
                    return Err(format!("d={d} draw {k} L={layers}: {g} vs oracle {w}"));
                }
            }
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central differences of `f` at `x`, compared element-wise with `analytic`:
/// |a - fd| ≤ rtol · max(|a|, |fd|) + atol.
pub fn check_grad(
    what: &str,
    analytic: &[f64],
    x: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<(), String> {
    if analytic.len() != x.len() {
        return Err(format!("{what}: gradient length {} for {} parameters", analytic.len(), x.len()));
    }
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = f(&p);
        p[i] = x[i] - h;
        let down = f(&p);
        p[i] = x[i];
        let fd = (up - down) / (2.0 * h);
        let a = analytic[i];
        if (a - fd).abs() > rtol * a.abs().max(fd.abs()) + atol {
            return Err(format!("{what}[{i}]: analytic {a:.10e} vs finite difference {fd:.10e}"));
        }
    }
    Ok(())
}

pub fn circuit_gradient_case(r: &mut ChaCha8Rng, d: usize, layers: usize) -> Result<(), String> {
    let z = random_angles(r, d);
    let theta = random_angles(r, 3 * d);
    let spec = CircuitSpec::new(d, layers, z).unwrap();
    let jac = generator_gradient(&spec, &AngleMatrix::from_vec(d, theta.clone()).unwrap()).map_err(|e| e.to_string())?;
    for q in 0..d {
        let row: Vec<f64> = (0..3 * d).map(|c| jac.get(q, c)).collect();
        check_grad(&format!("circuit d={d} L={layers} q={q}"), &row, &theta, 1e-4, 1e-4, 1e-6, |t| {
            run_generator_circuit(&spec, &AngleMatrix::from_vec(d, t.to_vec()).unwrap()).unwrap()[q]
        })?;
    }
    Ok(())
}

pub fn frontend_gradient_case(r: &mut ChaCha8Rng, d: usize) -> Result<(), String> {
    let m = d;
    let hidden = r.random_range(2..=6);
    let params: GeneratorParams<f64> = GeneratorParams::uniform(m, hidden, d, 0.8, r);
    let z: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
    let weights: Vec<f64> = (0..3 * d).map(|_| r.random_range(-1.0..1.0)).collect();
    let (_, h) = params.forward(&z).unwrap();
    let mut grads = params.clone();
    grads.fill_zero();
    params.backward(&z, &h, &weights, &mut grads);
    let x0 = params.flat();
    check_grad("front-end", &grads.flat(), &x0, 1e-5, 1e-4, 1e-8, |x| {
        let mut p = params.clone();
        p.set_flat(x).unwrap();
        let (theta, _) = p.forward(&z).unwrap();
        theta.as_slice().iter().zip(&weights).map(|(a, b)| a * b).sum()
    })
}

pub fn discriminator_gradient_case(r: &mut ChaCha8Rng, d: usize) -> Result<(), String> {
    let disc: DiscriminatorParams<f64> = DiscriminatorParams::fan_in_uniform(d, 5, 4, 0.2, 0.25, r);
    let x: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
    let a: f64 = r.random_range(-1.0..1.0);
    let b: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let mask_seed: u64 = r.random();
    let objective = |p: &DiscriminatorParams<f64>, x: &[f64]| {
        let out = p.forward(x, Mode::Train(&mut rng(mask_seed))).unwrap();
        a * out.logit + out.features.iter().zip(&b).map(|(f, w)| f * w).sum::<f64>()
    };
    let out = disc.forward(&x, Mode::Train(&mut rng(mask_seed))).unwrap();
    let mut grads = disc.clone();
    grads.fill_zero();
    let dx = disc.backward(&out, a, Some(&b), &mut grads);
    check_grad("discriminator params", &grads.flat(), &disc.flat(), 1e-6, 1e-4, 1e-8, |v| {
        let mut p = disc.clone();
        p.set_flat(v).unwrap();
        objective(&p, &x)
    })?;
    check_grad("discriminator input", &dx, &x, 1e-6, 1e-4, 1e-8, |v| objective(&disc, v))
}

pub fn qnn_gradient_case(r: &mut ChaCha8Rng) -> Result<(), String> {
    let cfg = QnnConfig { qubits: r.random_range(2..=4), quantum_layers: r.random_range(1..=2), head_hidden: 3, ..Default::default() };
    let model: QnnClassifier<f64> = QnnClassifier::init(&cfg, r);
    let x = Matrix::from_fn(2, cfg.qubits.min(3), |_, _| r.random_range(-1.0..1.0));
    let y = [1u8, 0];
    let mut grads = model.clone();
    grads.fill_zero();
    model.loss_and_grad(&x, &y, &mut grads).map_err(|e| e.to_string())?;
    check_grad("qnn", &grads.flat(), &model.flat(), 1e-6, 1e-3, 1e-8, |v| {
        let mut m = model.clone();
        m.set_flat(v).unwrap();
        let mut scratch = m.clone();
        m.loss_and_grad(&x, &y, &mut scratch).unwrap()
    })
}

/// Full generator objective (adversarial + feature + moment terms) against
/// finite differences over every front-end parameter. Noise and dropout
/// draws are replayed from the same seed for each evaluation.
pub fn total_generator_gradient_case(r: &mut ChaCha8Rng, d: usize, layers: usize, batch: usize) -> Result<(), String> {
    let cfg = TrainConfig { num_layers: layers, hidden: 4, ..Default::default() };
    let gen = QuantumGenerator::<f64>::init(d, layers, cfg.hidden, 0.5, r);
    let disc: DiscriminatorParams<f64> = DiscriminatorParams::fan_in_uniform(d, 16, 8, 0.2, 0.1, r);
    let real = Matrix::from_fn(batch, d, |_, _| r.random_range(-0.9..0.9));
    let latents: Vec<Vec<f64>> = (0..batch).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let schedule = ScheduleState { sigma: 0.02, ..ScheduleState::default() };
    let noise_seed: u64 = r.random();
    let loss = |g: &QuantumGenerator<f64>, grads: &mut QuantumGenerator<f64>| {
        let (a, f, m) =
            generator_loss_and_grad(&real, &latents, g, &disc, &cfg, &schedule, &mut rng(noise_seed), grads).unwrap();
        a + f + m
    };
    let mut grads = gen.clone();
    grads.fill_zero();
    loss(&gen, &mut grads);
    check_grad(&format!("total generator loss d={d} L={layers}"), &grads.flat(), &gen.flat(), 1e-6, 1e-3, 1e-7, |v| {
        let mut g = gen.clone();
        g.set_flat(v).unwrap();
        let mut scratch = g.clone();
        loss(&g, &mut scratch)
    })
}

/// Runs every gradient family on `configs` random tiny configurations.
pub fn gradient_suite(configs: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for k in 0..configs {
        let d = r.random_range(1..=4);
        let layers = r.random_range(1..=8);
        circuit_gradient_case(&mut r, d, layers).map_err(|e| format!("config {k}: {e}"))?;
        frontend_gradient_case(&mut r, d).map_err(|e| format!("config {k}: {e}"))?;
        discriminator_gradient_case(&mut r, d).map_err(|e| format!("config {k}: {e}"))?;
        qnn_gradient_case(&mut r).map_err(|e| format!("config {k}: {e}"))?;
        let gd = r.random_range(1..=3);
        let gl = r.random_range(1..=3);
        total_generator_gradient_case(&mut r, gd, gl, 4).map_err(|e| format!("config {k}: {e}"))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Metric oracles

pub fn brute_force_ks(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    a.iter()
        .chain(b)
        .map(|&t| {
            let i = a.iter().filter(|&&v| v <= t).count();
            let j = b.iter().filter(|&&v| v <= t).count();
            (i as f64 / n1 - j as f64 / n2).abs()
        })
        .fold(0.0, f64::max)
}

pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn random_sample(r: &mut ChaCha8Rng, n: usize, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| if ties { f64::from(r.random_range(0..6u8)) / 5.0 } else { r.random_range(-2.0..2.0) })
        .collect()
}

pub fn ks_oracle_suite(cases: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for k in 0..cases {
        let ties = k % 3 == 0;
        let (na, nb) = (r.random_range(1..=25), r.random_range(1..=25));
        let a = random_sample(&mut r, na, ties);
        let b = random_sample(&mut r, nb, ties);
        let (got, _) = ks_two_sample(&a, &b).map_err(|e| e.to_string())?;
        let want = brute_force_ks(&a, &b);
        if got != want {
            return Err(format!("case {k}: KS {got} vs brute force {want}"));
        }
    }
    Ok(())
}

pub fn wasserstein_property_suite(cases: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for k in 0..cases {
        let n = r.random_range(1..=30);
        let a = random_sample(&mut r, n, false);
        let (nb, nc) = (r.random_range(1..=30), r.random_range(1..=30));
        let b = random_sample(&mut r, nb, false);
        let c = random_sample(&mut r, nc, false);
        let shift: f64 = r.random_range(-3.0..3.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let w = wasserstein_1d(&a, &shifted).unwrap();
        if (w - shift.abs()).abs() > 1e-10 {
            return Err(format!("case {k}: shift {shift} gives {w}"));
        }
        let scale: f64 = r.random_range(-4.0..4.0);
        let sa: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * scale).collect();
        let (wab, wsc) = (wasserstein_1d(&a, &b).unwrap(), wasserstein_1d(&sa, &sb).unwrap());
        if (wsc - scale.abs() * wab).abs() > 1e-10 {
            return Err(format!("case {k}: scale {scale}: {wsc} vs {}", scale.abs() * wab));
        }
        let (wac, wcb) = (wasserstein_1d(&a, &c).unwrap(), wasserstein_1d(&c, &b).unwrap());
        if wab > wac + wcb + 1e-10 {
            return Err(format!("case {k}: triangle {wab} > {wac} + {wcb}"));
        }
    }
    Ok(())
}

pub fn auc_oracle_suite(cases: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for k in 0..cases {
        let n = r.random_range(2..=30);
        let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores = random_sample(&mut r, n, k % 2 == 0);
        let got = auc_roc(&scores, &labels).map_err(|e| e.to_string())?;
        let want = brute_force_auc(&scores, &labels);
        if (got - want).abs() > 1e-12 {
            return Err(format!("case {k}: AUC {got} vs pair count {want}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Schedule

pub fn schedule_fuzz(steps: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let mut s = ScheduleState::default();
    for k in 0..steps {
        let acc: f64 = match r.random_range(0..4u8) {
            0 => r.random_range(0.85..=1.0),
            1 => r.random_range(0.0..0.55),
            _ => r.random_range(0.0..=1.0),
        };
        s = adapt_regularization(&s, acc);
        if !(0.80..=0.94).contains(&s.gamma) || !(0.10..=0.16).contains(&s.dropout) || s.sigma < 0.0 {
            return Err(format!("step {k} (acc {acc}): {s:?}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Symmetric start

/// With an all-zero discriminator every score is 0.5, so both losses are
/// fixed by the clamped BCE alone.
pub fn loss_sanity_suite(seed: u64) -> Result<(f64, f64), String> {
    let ln2 = std::f64::consts::LN_2;
    let mut r = rng(seed);
    let mut worst = (0.0f64, 0.0f64);
    for gamma in [0.80, 0.88, 0.94, 1.0] {
        let d = r.random_range(1..=4);
        let gen = QuantumGenerator::<f64>::init(d, 2, 6, 0.5, &mut r);
        let disc = DiscriminatorParams::<f64>::zeros(d, 16, 8, 0.2, 0.1);
        let real = Matrix::from_fn(16, d, |_, _| r.random_range(-1.0..1.0));
        let latents: Vec<Vec<f64>> = (0..16).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let mut fake = Matrix::zeros(0, d);
        for z in &latents {
            use qsynth::qgan_train::GeneratorModel;
            fake.push_row(&gen.generate(z).unwrap()).unwrap();
        }
        let mut dg = disc.clone();
        let ld = qsynth::qgan_train::discriminator_loss_and_grad(&real, &fake, &disc, 0.02, &mut r, &mut dg)
            .map_err(|e| e.to_string())?;
        let schedule = ScheduleState { gamma, ..ScheduleState::default() };
        let mut gg = gen.clone();
        let (adv, _, _) =
            generator_loss_and_grad(&real, &latents, &gen, &disc, &TrainConfig::default(), &schedule, &mut r, &mut gg)
                .map_err(|e| e.to_string())?;
        worst.0 = worst.0.max((ld - 2.0 * ln2).abs());
        worst.1 = worst.1.max((adv - ln2).abs());
        if (ld - 2.0 * ln2).abs() > 1e-9 || (adv - ln2).abs() > 1e-9 {
            return Err(format!("gamma {gamma}: L_D = {ld}, adversarial L_G = {adv}"));
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// SMOTE

pub fn smote_geometry_suite(seed: u64) -> Result<f64, String> {
    use qsynth::baselines::{nearest_neighbors, smote_generate, SmoteConfig};
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = r.random_range(3..=40);
        let d = r.random_range(1..=6);
        let k = r.random_range(1..n.min(8));
        let data = Matrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0));
        let cfg = SmoteConfig { k_neighbors: k, n_samples: r.random_range(1..=200), seed: r.random() };
        let (samples, origins) = smote_generate(&data, &cfg).map_err(|e| e.to_string())?;
        if samples.rows() != cfg.n_samples || origins.len() != cfg.n_samples {
            return Err(format!("case {case}: wrong sample count"));
        }
        for (i, o) in origins.iter().enumerate() {
            if !(0.0..=1.0).contains(&o.weight) || !nearest_neighbors(&data, o.base, k).contains(&o.neighbor) {
                return Err(format!("case {case} row {i}: bad origin {o:?}"));
            }
            let (a, b) = (data.row(o.base), data.row(o.neighbor));
            for j in 0..d {
                let res = (samples.get(i, j) - (a[j] + o.weight * (b[j] - a[j]))).abs();
                worst = worst.max(res);
                if res >= 1e-10 {
                    return Err(format!("case {case} row {i}: residual {res}"));
                }
            }
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Command-line runs

/// A small transactions file in the public card-fraud layout: fraud rows
/// are shifted along a few informative columns.
pub fn write_transactions(path: &std::path::Path, n: usize, n_fraud: usize, seed: u64) {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(qsynth::preprocess::ulb_header()).unwrap();
    for i in 0..n {
        let fraud = i % (n / n_fraud) == 0 && i / (n / n_fraud) < n_fraud;
        let mut row = vec![format!("{}", i as f64 * 3.0)];
        for j in 0..28 {
            let e: f64 = StandardNormal.sample(&mut r);
            let shift = if fraud && j % 4 == 0 { 2.5 } else { 0.0 };
            row.push(format!("{:.6}", e + shift));
        }
        row.push(format!("{:.2}", r.random_range(0.0..200.0)));
        row.push(if fraud { "\"1\"".into() } else { "\"0\"".into() });
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
}

pub fn config(command: &str, pairs: &[(&str, &str)]) -> qsynth::cli::RunConfig {
    let mut c = qsynth::cli::RunConfig::defaults(command);
    for (k, v) in pairs {
        c.set(k, v).unwrap();
    }
    c
}

pub const FAST_TRAINING: &[(&str, &str)] = &[
    ("train.epochs", "2"),
    ("train.num_layers", "2"),
    ("train.hidden", "8"),
    ("train.batch_size", "16"),
    ("train.eval_every", "1"),
    ("train.n_eval", "50"),
    ("eval.n_samples", "120"),
    ("qnn.epochs", "2"),
    ("qnn.quantum_layers", "1"),
    ("ann.epochs", "2"),
    ("preprocess.k", "6"),
];

fn with_fast(extra: &[(&'static str, String)]) -> Vec<(&'static str, String)> {
    let mut v: Vec<(&str, String)> = FAST_TRAINING.iter().map(|(k, v)| (*k, v.to_string())).collect();
    v.extend(extra.iter().cloned());
    v
}

fn run_twice(root: &std::path::Path, command: &str, pairs: &[(&str, String)]) -> Result<std::path::PathBuf, String> {
    use qsynth::cli::{execute, RunConfig};
    let mut cfg = RunConfig::defaults(command);
    for (k, v) in pairs {
        cfg.set(k, v).map_err(|e| e.to_string())?;
    }
    let first = root.join(command).join("first");
    let second = root.join(command).join("second");
    let files = execute(&cfg, &first).map_err(|e| format!("{command}: {e}"))?;
    let text = std::fs::read_to_string(first.join("run_config.txt")).map_err(|e| e.to_string())?;
    let mut replay = RunConfig::defaults(command);
    replay.apply_text(&text).map_err(|e| e.to_string())?;
    let files2 = execute(&replay, &second).map_err(|e| format!("{command} rerun: {e}"))?;
    if files.len() != files2.len() {
        return Err(format!("{command}: rerun wrote a different file set"));
    }
    for f in &files {
        let name = f.file_name().unwrap();
        let a = std::fs::read(f).map_err(|e| e.to_string())?;
        let b = std::fs::read(second.join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{command}: {} differs on rerun", name.to_string_lossy()));
        }
    }
    Ok(first)
}

/// Runs every command on small inputs, then reruns each from its recorded
/// run_config.txt and compares artifacts byte for byte.
pub fn determinism_suite(root: &std::path::Path) -> Result<usize, String> {
    let tx = root.join("transactions.csv");
    write_transactions(&tx, 600, 60, 17);
    let tx = tx.display().to_string();
    let seed = ("seed", "5".to_string());
    let pre = run_twice(root, "preprocess", &with_fast(&[("input", tx.clone()), seed.clone()]))?;
    let fraud = pre.join("train_fraud_bounded.csv").display().to_string();
    let q = run_twice(root, "train-qsynth", &with_fast(&[("input", fraud.clone()), seed.clone()]))?;
    run_twice(root, "train-gan", &with_fast(&[("input", fraud.clone()), seed.clone()]))?;
    let sm = run_twice(root, "smote", &with_fast(&[("input", fraud.clone()), seed.clone()]))?;
    let smote_samples = sm.join("samples.csv").display().to_string();
    run_twice(root, "audit", &with_fast(&[("input", fraud.clone()), ("synthetic", smote_samples), seed.clone()]))?;
    let ckpt = q.join("checkpoint.json").display().to_string();
    let audit_root = root.join("audit-checkpoint");
    run_twice(&audit_root, "audit", &with_fast(&[("input", fraud), ("checkpoint", ckpt), seed.clone()]))?;
    run_twice(root, "downstream", &with_fast(&[("input", tx.clone()), seed.clone()]))?;
    run_twice(
        root,
        "scaling",
        &with_fast(&[("input", tx), ("scaling.classifier", "logreg".into()), seed.clone()]),
    )?;
    run_twice(root, "toy", &with_fast(&[("toy.points", "300".into()), seed]))?;
    Ok(9)
}

pub struct ToyResult {
    pub k_med: f64,
    pub auc_gap: f64,
    pub first_g_loss: f64,
    pub last_g_loss: f64,
}

impl ToyResult {
    pub fn passes(&self) -> bool {
        self.last_g_loss < self.first_g_loss && self.k_med < 0.15 && self.auc_gap < 0.15
    }
}

/// The `toy` command with its default configuration.
pub fn toy_run(seed: u64, out: &std::path::Path) -> Result<ToyResult, String> {
    use qsynth::metrics::FidelityReport;
    let cfg = config("toy", &[("seed", &seed.to_string())]);
    qsynth::cli::execute(&cfg, out).map_err(|e| e.to_string())?;
    let report = qsynth::io::read_json::<FidelityReport>(&out.join("fidelity_report.json")).map_err(|e| e.to_string())?;
    let history = qsynth::io::read_history_csv(&out.join("loss_history.csv")).map_err(|e| e.to_string())?;
    Ok(ToyResult {
        k_med: report.payload.ks_median,
        auc_gap: report.payload.detectability_gap,
        first_g_loss: history.first().ok_or("empty history")?.g_loss,
        last_g_loss: history.last().ok_or("empty history")?.g_loss,
    })
}
