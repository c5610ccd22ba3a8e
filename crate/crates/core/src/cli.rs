//! Batch experiment runner.
//!
//! Configuration is a flat `key=value` map: built-in defaults, then an
//! optional config file, then command-line flags, then `--set` overrides.
//! The effective map is written to `run_config.txt` next to the artifacts
//! and embedded in every JSON artifact, so any run can be replayed with
//! `--config run_config.txt`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::{classical_gan_train, smote_generate, ClassicalGenerator, SmoteConfig};
use crate::downstream::{
    downstream_grid, scaling_experiment, split_train_test, AnnConfig, Augmenter, ClassifierKind, ClassifierSettings,
    DownstreamSplit, GeneratorAugmenter, Injection, OptimConfig, QnnConfig, ScalingPlan, SmoteAugmenter,
};
use crate::error::{Error, Result};
use crate::io::{self, ExperimentTable, Provenance, SmoteRecord};
use crate::matrix::Matrix;
use crate::metrics::fidelity_report;
use crate::preprocess::{self, LabeledTable, PreprocessModel};
use crate::qgan_train::{generate_samples, train, GeneratorModel, QuantumGenerator, TrainConfig, TrainOutcome};

#[derive(Debug, Parser)]
#[command(name = "qsynth", version, about = "Quantum-classical adversarial minority-class synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the bounded representation on a transactions CSV.
    Preprocess(CommonArgs),
    /// Train the quantum generator on bounded minority rows.
    TrainQsynth(CommonArgs),
    /// Train the capacity-matched classical GAN on bounded minority rows.
    TrainGan(CommonArgs),
    /// Oversample bounded minority rows with SMOTE.
    Smote(CommonArgs),
    /// Fidelity and detectability report for a sample file or checkpoint.
    Audit(CommonArgs),
    /// Augmenter x classifier comparison grid on a transactions CSV.
    Downstream(CommonArgs),
    /// Synthetic-injection scaling study on a transactions CSV.
    Scaling(CommonArgs),
    /// Self-contained demo on a synthetic 2-D mixture.
    Toy(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Preprocess(_) => "preprocess",
            Command::TrainQsynth(_) => "train-qsynth",
            Command::TrainGan(_) => "train-gan",
            Command::Smote(_) => "smote",
            Command::Audit(_) => "audit",
            Command::Downstream(_) => "downstream",
            Command::Scaling(_) => "scaling",
            Command::Toy(_) => "toy",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Preprocess(a)
            | Command::TrainQsynth(a)
            | Command::TrainGan(a)
            | Command::Smote(a)
            | Command::Audit(a)
            | Command::Downstream(a)
            | Command::Scaling(a)
            | Command::Toy(a) => a,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Input CSV (transactions CSV or bounded sample file, by command).
    #[arg(long)]
    pub input: Option<String>,
    /// Synthetic sample CSV to audit.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Generator checkpoint to audit.
    #[arg(long)]
    pub checkpoint: Option<String>,
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

// ---------------------------------------------------------------------------
// Configuration

const DEFAULTS: &[(&str, &str)] = &[
    ("ann.batch_size", "64"),
    ("ann.epochs", "30"),
    ("ann.hidden", "32,16,8"),
    ("ann.lr", "0.001"),
    ("audit.sigma", "auto"),
    ("checkpoint", ""),
    ("downstream.augmenters", "smote,gan,qsynth"),
    ("downstream.classifiers", "qnn,ann,logreg"),
    ("eval.n_samples", "2000"),
    ("input", ""),
    ("preprocess.eps", "1e-8"),
    ("preprocess.k", "10"),
    ("preprocess.out_dim", "4"),
    ("qnn.batch_size", "64"),
    ("qnn.epochs", "30"),
    ("qnn.head_hidden", "8"),
    ("qnn.lr", "0.001"),
    ("qnn.quantum_layers", "3"),
    ("qnn.qubits", "6"),
    ("scaling.classifier", "qnn"),
    ("scaling.modes", "balanced,imbalanced"),
    ("scaling.ratios", "0,0.1,0.25,0.5,1"),
    ("scaling.synthetic_only", "true"),
    ("seed", "0"),
    ("smote.k_neighbors", "5"),
    ("smote.n_samples", "0"),
    ("split.train_ratio", "0.7"),
    ("synthetic", ""),
    ("toy.modes", "4"),
    ("toy.points", "2000"),
    ("toy.radius", "0.5"),
    ("toy.spread", "0.1"),
    ("train.adam_eps", "1e-8"),
    ("train.alpha_mm", "0.05"),
    ("train.batch_size", "64"),
    ("train.beta1", "0.5"),
    ("train.beta2", "0.9"),
    ("train.beta_mm", "0.03"),
    ("train.clip", "1"),
    ("train.disc_hidden", "16,8"),
    ("train.epochs", "100"),
    ("train.eps_sigma", "1e-6"),
    ("train.eval_every", "10"),
    ("train.hidden", "32"),
    ("train.init_bound", "0.1"),
    ("train.lambda_fm", "0.1"),
    ("train.leaky_slope", "0.2"),
    ("train.lr_d", "0.0002"),
    ("train.lr_g", "0.0007"),
    ("train.n_eval", "2000"),
    ("train.num_layers", "8"),
];

/// Defaults that differ for the self-contained demo.
const TOY_DEFAULTS: &[(&str, &str)] = &[("train.epochs", "60"), ("train.num_layers", "4")];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn defaults(command: &str) -> Self {
        let mut values: BTreeMap<String, String> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if command == "toy" {
            for (k, v) in TOY_DEFAULTS {
                values.insert(k.to_string(), v.to_string());
            }
        }
        Self { command: command.to_string(), values }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if key == "command" {
            if value.trim() != self.command {
                return Err(Error::Config(format!(
                    "config is for command {:?}, not {:?}",
                    value.trim(),
                    self.command
                )));
            }
            return Ok(());
        }
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
    }

    pub fn apply_assignment(&mut self, line: &str) -> Result<()> {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))?;
        self.set(k, v)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.apply_assignment(line)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn parse<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.get(key);
        raw.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}")))
    }

    fn list<V: std::str::FromStr>(&self, key: &str) -> Result<Vec<V>> {
        let raw = self.get(key);
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}"))))
            .collect()
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        match self.get(key) {
            "" => Err(Error::Config(format!("{} needs {key}", self.command))),
            p => Ok(PathBuf::from(p)),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("seed")
    }

    /// Every effective key, as embedded in artifacts.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("command={}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let dh: Vec<usize> = self.list("train.disc_hidden")?;
        if dh.len() != 2 {
            return Err(Error::Config("train.disc_hidden needs two widths".into()));
        }
        let cfg = TrainConfig {
            epochs: self.parse("train.epochs")?,
            batch_size: self.parse("train.batch_size")?,
            lr_g: self.parse("train.lr_g")?,
            lr_d: self.parse("train.lr_d")?,
            num_layers: self.parse("train.num_layers")?,
            hidden: self.parse("train.hidden")?,
            lambda_fm: self.parse("train.lambda_fm")?,
            alpha_mm: self.parse("train.alpha_mm")?,
            beta_mm: self.parse("train.beta_mm")?,
            eps_sigma: self.parse("train.eps_sigma")?,
            clip: self.parse("train.clip")?,
            eval_every: self.parse("train.eval_every")?,
            n_eval: self.parse("train.n_eval")?,
            beta1: self.parse("train.beta1")?,
            beta2: self.parse("train.beta2")?,
            adam_eps: self.parse("train.adam_eps")?,
            init_bound: self.parse("train.init_bound")?,
            disc_hidden: (dh[0], dh[1]),
            leaky_slope: self.parse("train.leaky_slope")?,
            seed: substream_seed(self.seed()?, "train"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn classifier_settings(&self) -> Result<ClassifierSettings> {
        let optim = |p: &str| -> Result<OptimConfig> {
            let o = OptimConfig {
                lr: self.parse(&format!("{p}.lr"))?,
                epochs: self.parse(&format!("{p}.epochs"))?,
                batch_size: self.parse(&format!("{p}.batch_size"))?,
                ..OptimConfig::default()
            };
            o.validate()?;
            Ok(o)
        };
        Ok(ClassifierSettings {
            qnn: QnnConfig {
                qubits: self.parse("qnn.qubits")?,
                quantum_layers: self.parse("qnn.quantum_layers")?,
                head_hidden: self.parse("qnn.head_hidden")?,
                optim: optim("qnn")?,
            },
            ann: AnnConfig { hidden: self.list("ann.hidden")?, optim: optim("ann")? },
        })
    }

    fn classifier_kinds(&self, key: &str) -> Result<Vec<ClassifierKind>> {
        self.list::<String>(key)?.iter().map(|s| parse_classifier(key, s)).collect()
    }

    pub fn scaling_plan(&self) -> Result<ScalingPlan> {
        let mut injections: Vec<Injection> = self.list::<f64>("scaling.ratios")?.into_iter().map(Injection::Ratio).collect();
        if self.parse::<bool>("scaling.synthetic_only")? {
            injections.push(Injection::SyntheticOnly);
        }
        let modes = self
            .list::<String>("scaling.modes")?
            .iter()
            .map(|m| match m.as_str() {
                "balanced" => Ok(crate::downstream::EvalMode::Balanced),
                "imbalanced" => Ok(crate::downstream::EvalMode::Imbalanced),
                other => Err(Error::Config(format!("scaling.modes: unknown mode {other:?}"))),
            })
            .collect::<Result<_>>()?;
        let plan = ScalingPlan {
            injections,
            modes,
            classifier: parse_classifier("scaling.classifier", self.get("scaling.classifier"))?,
            seed: substream_seed(self.seed()?, "downstream"),
        };
        plan.validate()?;
        Ok(plan)
    }
}

fn parse_classifier(key: &str, s: &str) -> Result<ClassifierKind> {
    match s {
        "qnn" => Ok(ClassifierKind::Qnn),
        "ann" => Ok(ClassifierKind::Ann),
        "logreg" => Ok(ClassifierKind::LogReg),
        other => Err(Error::Config(format!("{key}: unknown classifier {other:?}"))),
    }
}

/// Independent seed for a named stage, derived from the root seed.
pub fn substream_seed(root: u64, name: &str) -> u64 {
    // FNV-1a over the name, mixed with the root by splitmix64
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = root ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn resolve_config(command: &Command) -> Result<RunConfig> {
    let args = command.args();
    let mut cfg = RunConfig::defaults(command.name());
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(v) = &args.input {
        cfg.set("input", v)?;
    }
    if let Some(v) = &args.synthetic {
        cfg.set("synthetic", v)?;
    }
    if let Some(v) = &args.checkpoint {
        cfg.set("checkpoint", v)?;
    }
    if let Some(s) = args.seed {
        cfg.set("seed", &s.to_string())?;
    }
    for a in &args.set {
        cfg.apply_assignment(a)?;
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Toy target

/// `n` points from an equal-weight ring of Gaussian modes, clipped to
/// `[-1, 1]²`.
pub fn toy_mixture(n: usize, modes: usize, radius: f64, spread: f64, rng: &mut dyn RngCore) -> Result<Matrix<f64>> {
    if modes == 0 || !(radius >= 0.0) || !(spread >= 0.0) {
        return Err(Error::Config("toy mixture needs modes > 0 and non-negative radius/spread".into()));
    }
    let mut m = Matrix::zeros(n, 2);
    for i in 0..n {
        let k = rng.random_range(0..modes);
        let angle = std::f64::consts::TAU * k as f64 / modes as f64 + std::f64::consts::FRAC_PI_4;
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        m.set(i, 0, (radius * angle.cos() + spread * dx).clamp(-1.0, 1.0));
        m.set(i, 1, (radius * angle.sin() + spread * dy).clamp(-1.0, 1.0));
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Commands

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    written: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn provenance(&self) -> Result<Provenance> {
        Ok(Provenance::new(&self.cfg.command, self.cfg.seed()?, self.cfg.entries().clone()))
    }

    fn file(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.written.push(p.clone());
        p
    }

    fn json<P: io::Schema + serde::Serialize>(&mut self, name: &str, payload: &P) -> Result<()> {
        let prov = self.provenance()?;
        let path = self.file(name);
        io::write_json(&path, payload, &prov)
    }
}

/// Run one command with a resolved configuration; returns the files
/// written.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut ctx = Ctx { cfg, out, written: Vec::new() };
    match cfg.command.as_str() {
        "preprocess" => cmd_preprocess(&mut ctx)?,
        "train-qsynth" => {
            let data = io::read_matrix_csv::<f64>(&cfg.path("input")?)?;
            let outcome = train(&data, &cfg.train_config()?)?;
            write_training(&mut ctx, &data, &outcome)?;
        }
        "train-gan" => {
            let data = io::read_matrix_csv::<f64>(&cfg.path("input")?)?;
            let outcome = classical_gan_train(&data, &cfg.train_config()?)?;
            write_training(&mut ctx, &data, &outcome)?;
        }
        "smote" => cmd_smote(&mut ctx)?,
        "audit" => cmd_audit(&mut ctx)?,
        "downstream" => cmd_downstream(&mut ctx)?,
        "scaling" => cmd_scaling(&mut ctx)?,
        "toy" => cmd_toy(&mut ctx)?,
        other => return Err(Error::Config(format!("unknown command {other:?}"))),
    }
    let path = ctx.file("run_config.txt");
    std::fs::write(path, cfg.to_text())?;
    Ok(ctx.written)
}

struct Prepared {
    model: PreprocessModel<f64>,
    train_fraud: Matrix<f64>,
    split: DownstreamSplit<f64>,
}

fn prepare_transactions(cfg: &RunConfig) -> Result<Prepared> {
    let table = preprocess::read_ulb_csv::<f64>(&cfg.path("input")?)?;
    let seed = substream_seed(cfg.seed()?, "preprocess");
    let raw = split_train_test(&table, cfg.parse("split.train_ratio")?, seed)?;
    let (model, train_fraud) =
        preprocess::fit(&raw.train, cfg.parse("preprocess.k")?, cfg.parse("preprocess.out_dim")?, cfg.parse("preprocess.eps")?)?;
    let bounded = |t: &LabeledTable<f64>| -> Result<LabeledTable<f64>> {
        LabeledTable::new(model.transform(&t.features)?, t.labels.clone())
    };
    let split = DownstreamSplit { train: bounded(&raw.train)?, test: bounded(&raw.test)? };
    Ok(Prepared { model, train_fraud, split })
}

fn cmd_preprocess(ctx: &mut Ctx<'_>) -> Result<()> {
    let p = prepare_transactions(ctx.cfg)?;
    ctx.json("preprocess_model.json", &p.model)?;
    let path = ctx.file("train_fraud_bounded.csv");
    io::write_matrix_csv(&path, &p.train_fraud)?;
    let path = ctx.file("train_bounded.csv");
    io::write_labeled_csv(&path, &p.split.train)?;
    let path = ctx.file("test_bounded.csv");
    io::write_labeled_csv(&path, &p.split.test)?;
    Ok(())
}

fn eval_sigma(cfg: &RunConfig, final_sigma: Option<f64>) -> Result<f64> {
    match cfg.get("audit.sigma") {
        "auto" => Ok(final_sigma.unwrap_or(0.0)),
        _ => {
            let s: f64 = cfg.parse("audit.sigma")?;
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config("audit.sigma must be non-negative".into()));
            }
            Ok(s)
        }
    }
}

fn write_audit(ctx: &mut Ctx<'_>, real: &Matrix<f64>, synthetic: &Matrix<f64>, sigma: f64) -> Result<()> {
    let seed = substream_seed(ctx.cfg.seed()?, "eval");
    let (report, audit) = fidelity_report(real, synthetic, sigma, seed)?;
    ctx.json("fidelity_report.json", &report)?;
    let path = ctx.file("roc.csv");
    io::write_roc_csv(&path, &audit.roc)
}

fn write_training<G>(ctx: &mut Ctx<'_>, data: &Matrix<f64>, outcome: &TrainOutcome<f64, G>) -> Result<()>
where
    G: GeneratorModel<f64>,
    TrainOutcome<f64, G>: io::Schema,
{
    ctx.json("checkpoint.json", outcome)?;
    let path = ctx.file("loss_history.csv");
    io::write_history_csv(&path, &outcome.history)?;
    let n: usize = ctx.cfg.parse("eval.n_samples")?;
    let samples = generate_samples(&outcome.generator, n, substream_seed(ctx.cfg.seed()?, "eval"))?;
    let path = ctx.file("samples.csv");
    io::write_matrix_csv(&path, &samples)?;
    let sigma = eval_sigma(ctx.cfg, Some(outcome.schedule.sigma))?;
    write_audit(ctx, data, &samples, sigma)
}

fn cmd_smote(ctx: &mut Ctx<'_>) -> Result<()> {
    let data = io::read_matrix_csv::<f64>(&ctx.cfg.path("input")?)?;
    let n: usize = ctx.cfg.parse("smote.n_samples")?;
    let config = SmoteConfig {
        k_neighbors: ctx.cfg.parse("smote.k_neighbors")?,
        n_samples: if n == 0 { data.rows() } else { n },
        seed: substream_seed(ctx.cfg.seed()?, "smote"),
    };
    let (samples, origins) = smote_generate(&data, &config)?;
    let path = ctx.file("samples.csv");
    io::write_matrix_csv(&path, &samples)?;
    ctx.json("smote_provenance.json", &SmoteRecord { k_neighbors: config.k_neighbors, origins: origins.clone() })?;
    let path = ctx.file("smote_provenance.csv");
    io::write_smote_csv(&path, &origins)
}

fn cmd_audit(ctx: &mut Ctx<'_>) -> Result<()> {
    let real = io::read_matrix_csv::<f64>(&ctx.cfg.path("input")?)?;
    let (synthetic, final_sigma) = match (ctx.cfg.get("synthetic"), ctx.cfg.get("checkpoint")) {
        ("", "") => return Err(Error::Config("audit needs synthetic or checkpoint".into())),
        (s, "") => (io::read_matrix_csv::<f64>(Path::new(s))?, None),
        ("", c) => {
            let n: usize = ctx.cfg.parse("eval.n_samples")?;
            let seed = substream_seed(ctx.cfg.seed()?, "eval");
            let path = Path::new(c);
            match io::read_json::<TrainOutcome<f64, QuantumGenerator<f64>>>(path) {
                Ok(doc) => (generate_samples(&doc.payload.generator, n, seed)?, Some(doc.payload.schedule.sigma)),
                Err(_) => {
                    let doc = io::read_json::<TrainOutcome<f64, ClassicalGenerator<f64>>>(path)?;
                    (generate_samples(&doc.payload.generator, n, seed)?, Some(doc.payload.schedule.sigma))
                }
            }
        }
        _ => return Err(Error::Config("give either synthetic or checkpoint, not both".into())),
    };
    let sigma = eval_sigma(ctx.cfg, final_sigma)?;
    write_audit(ctx, &real, &synthetic, sigma)
}

fn write_table(ctx: &mut Ctx<'_>, name: &str, rows: Vec<crate::downstream::GridRow>) -> Result<()> {
    let path = ctx.file(&format!("{name}.csv"));
    io::write_grid_csv(&path, &rows)?;
    ctx.json(&format!("{name}.json"), &ExperimentTable { experiment: name.to_string(), rows })
}

fn cmd_downstream(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let p = prepare_transactions(cfg)?;
    let train_cfg = cfg.train_config()?;
    let names: Vec<String> = cfg.list("downstream.augmenters")?;
    let mut quantum = None;
    let mut classical = None;
    for n in &names {
        match n.as_str() {
            "qsynth" => quantum = Some(train(&p.train_fraud, &train_cfg)?.generator),
            "gan" => classical = Some(classical_gan_train(&p.train_fraud, &train_cfg)?.generator),
            "smote" => {}
            other => return Err(Error::Config(format!("downstream.augmenters: unknown augmenter {other:?}"))),
        }
    }
    let smote = SmoteAugmenter { minority: &p.train_fraud, k_neighbors: cfg.parse("smote.k_neighbors")? };
    let q_aug = quantum.as_ref().map(GeneratorAugmenter);
    let c_aug = classical.as_ref().map(GeneratorAugmenter);
    let mut augmenters: Vec<(&str, &dyn Augmenter<f64>)> = Vec::new();
    for n in &names {
        match n.as_str() {
            "smote" => augmenters.push(("smote", &smote)),
            "gan" => augmenters.push(("gan", c_aug.as_ref().expect("trained"))),
            "qsynth" => augmenters.push(("qsynth", q_aug.as_ref().expect("trained"))),
            _ => {}
        }
    }
    let rows = downstream_grid(
        &p.split,
        &augmenters,
        &cfg.classifier_kinds("downstream.classifiers")?,
        &cfg.classifier_settings()?,
        substream_seed(cfg.seed()?, "downstream"),
    )?;
    write_table(ctx, "downstream", rows)
}

fn cmd_scaling(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let p = prepare_transactions(cfg)?;
    let generator = train(&p.train_fraud, &cfg.train_config()?)?.generator;
    let rows = scaling_experiment(&p.split, &GeneratorAugmenter(&generator), &cfg.scaling_plan()?, &cfg.classifier_settings()?)?;
    write_table(ctx, "scaling", rows)
}

fn cmd_toy(ctx: &mut Ctx<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed()?, "toy"));
    let target = toy_mixture(
        cfg.parse("toy.points")?,
        cfg.parse("toy.modes")?,
        cfg.parse("toy.radius")?,
        cfg.parse("toy.spread")?,
        &mut rng,
    )?;
    let path = ctx.file("target.csv");
    io::write_matrix_csv(&path, &target)?;
    let outcome = train(&target, &cfg.train_config()?)?;
    write_training(ctx, &target, &outcome)
}

// ---------------------------------------------------------------------------
// Entry point

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Training(_) => 4,
        _ => 3,
    }
}

/// One-line, machine-parseable error report.
pub fn error_line(e: &Error) -> String {
    let msg: String = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
    format!("error code={} kind={} message={:?}", exit_code(e), e.kind(), msg)
}

/// Parse arguments, run, and return the process exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("bad arguments").to_string();
            eprintln!("{}", error_line(&Error::Config(first)));
            return 2;
        }
    };
    let result = resolve_config(&cli.command).and_then(|cfg| execute(&cfg, &cli.command.args().out));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}
