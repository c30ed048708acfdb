use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use ehr_denoise::baselines::{soft_impute, Identity, KnnConfig, PrevalenceImputer, SoftImputeConfig};
use ehr_denoise::data::io::{load_matrix, load_prob_csv, load_vector, save_matrix, save_prob_csv, save_vector};
use ehr_denoise::data::{corrupt, or_merge, prevalence_match_mask, sample_clean, split_rows, AndRule, GeneratorSpec, NoiseSpec};
use ehr_denoise::denoisers::{load_checkpoint, save_checkpoint, train_denoiser, Arch, DenoiserModel, Hyper, TrainConfig};
use ehr_denoise::eval::{
    bootstrap_ci, evaluate_denoiser, holdout_code_task, macro_auprc_on_rows, spectrum_diagnostic, BootstrapSpec,
    ClassifierConfig,
};
use ehr_denoise::nn::{grad_check, AdamWConfig, Graph, LossSpec};
use ehr_denoise::oracle::{closed_form_discrepancy, random_instance, MAX_DIMS};
use ehr_denoise::rng::{self, Domain};
use ehr_denoise::thresholding::{
    apply_thresholded_model, compute_caps, fit_thresholds, ThresholdFitConfig, ThresholdVector, ThresholdedDenoiser,
};
use ehr_denoise::{BinaryMatrix, Imputer};
use serde::Serialize;

use crate::args::*;

/// What a command read and wrote, and whether it passed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Set when a check-style command ran but its check failed.
    pub failure: Option<String>,
}

impl Outcome {
    fn new(inputs: &[&Path], outputs: Vec<PathBuf>) -> Self {
        Self { inputs: inputs.iter().map(|p| p.to_path_buf()).collect(), outputs, failure: None }
    }
}

pub fn run(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Corrupt(a) => corrupt_cmd(a),
        Command::Merge(a) => merge(a),
        Command::Train(a) => train(a),
        Command::FitThresholds(a) => fit_thresholds_cmd(a),
        Command::Denoise(a) => denoise(a),
        Command::Baseline(a) => baseline(a),
        Command::Eval(a) => eval(a),
        Command::Holdout(a) => holdout(a),
        Command::Spectrum(a) => spectrum(a),
        Command::OracleCheck(a) => oracle_check(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Replay(_) => unreachable!("replay is handled by the caller"),
    }
}

fn load(path: &Path) -> Result<BinaryMatrix> {
    Ok(load_matrix(path)?)
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    ensure!((0.0..=1.0).contains(&v), "--{name} must lie in [0, 1], got {v}");
    Ok(())
}

/// Two input files disagree on shape.
#[derive(Debug)]
pub struct ShapeMismatch(String);

impl std::fmt::Display for ShapeMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ShapeMismatch {}

fn same_shape(a: (usize, usize), pa: &Path, b: (usize, usize), pb: &Path) -> Result<()> {
    if a != b {
        bail!(ShapeMismatch(format!(
            "shape mismatch: {} is {}x{} but {} is {}x{}",
            pa.display(),
            a.0,
            a.1,
            pb.display(),
            b.0,
            b.1
        )));
    }
    Ok(())
}

/// `dir/name.ext` -> `dir/name.<tag>.ext`.
pub fn tagged_path(path: &Path, tag: &str) -> PathBuf {
    match (path.file_stem(), path.extension()) {
        (Some(stem), Some(ext)) => {
            path.with_file_name(format!("{}.{tag}.{}", stem.to_string_lossy(), ext.to_string_lossy()))
        }
        _ => {
            let mut s = path.as_os_str().to_owned();
            s.push(format!(".{tag}"));
            PathBuf::from(s)
        }
    }
}

fn validate_split(s: &SplitArgs) -> Result<()> {
    if s.split {
        split_rows(0, s.train_frac, s.fit_frac)?;
    }
    Ok(())
}

fn write_splits(m: &BinaryMatrix, out: &Path, s: &SplitArgs, outputs: &mut Vec<PathBuf>) -> Result<()> {
    if !s.split {
        return Ok(());
    }
    let splits = split_rows(m.n_rows(), s.train_frac, s.fit_frac)?;
    for (tag, range) in [("train", splits.train), ("fit", splits.fit), ("test", splits.test)] {
        let p = tagged_path(out, tag);
        save_matrix(&m.slice_rows(range), &p)?;
        outputs.push(p);
    }
    Ok(())
}

fn gen(a: &GenArgs) -> Result<Outcome> {
    let rules: Vec<AndRule> = a.and_rules.iter().map(|r| r.parse()).collect::<Result<_, _>>()?;
    check_fraction("base-prev", a.base_prev)?;
    validate_split(&a.split)?;
    let mut spec = GeneratorSpec::uniform(a.n_cols, a.rank, a.base_prev, a.factor_strength, a.seed);
    spec.and_rules = rules;
    spec.validate()?;
    let mut inputs = Vec::new();
    if let Some(p) = &a.base_prev_file {
        spec.base_prev = load_vector(p)?;
        spec.validate().with_context(|| format!("base prevalences from {}", p.display()))?;
        inputs.push(p.as_path());
    }
    let x = sample_clean(&spec, a.rows)?;
    save_matrix(&x, &a.out)?;
    let mut outputs = vec![a.out.clone()];
    write_splits(&x, &a.out, &a.split, &mut outputs)?;
    println!("gen: {} rows x {} codes, {} ones", x.n_rows(), x.n_cols(), x.count_ones());
    Ok(Outcome::new(&inputs, outputs))
}

fn corrupt_cmd(a: &CorruptArgs) -> Result<Outcome> {
    check_fraction("beta", a.beta)?;
    check_fraction("drop", a.drop)?;
    validate_split(&a.split)?;
    let mut inputs = vec![a.input.as_path()];
    let x = load(&a.input)?;
    let noisy = if let Some(tp) = &a.target_prev {
        inputs.push(tp);
        prevalence_match_mask(&x, &load_vector(tp)?, a.seed)?
    } else {
        let drop = match &a.drop_file {
            Some(p) => {
                inputs.push(p);
                load_vector(p)?
            }
            None => vec![a.drop; x.n_cols()],
        };
        corrupt(&x, &NoiseSpec::new(a.beta, drop)?, a.seed)?
    };
    save_matrix(&noisy, &a.out)?;
    let mut outputs = vec![a.out.clone()];
    write_splits(&noisy, &a.out, &a.split, &mut outputs)?;
    println!("corrupt: kept {} of {} ones", noisy.count_ones(), x.count_ones());
    Ok(Outcome::new(&inputs, outputs))
}

fn merge(a: &MergeArgs) -> Result<Outcome> {
    let (x, y) = (load(&a.a)?, load(&a.b)?);
    same_shape(x.shape(), &a.a, y.shape(), &a.b)?;
    save_matrix(&or_merge(&x, &y)?, &a.out)?;
    Ok(Outcome::new(&[&a.a, &a.b], vec![a.out.clone()]))
}

fn arch_of(a: ArchArg) -> Arch {
    match a {
        ArchArg::Mlp => Arch::Mlp,
        ArchArg::Dae => Arch::Dae,
        ArchArg::SetAttention => Arch::SetAttention,
    }
}

fn train(a: &TrainArgs) -> Result<Outcome> {
    let arch = arch_of(a.arch);
    let mut cfg = TrainConfig::for_arch(arch, a.seed).with_epochs(a.epochs);
    cfg.loss = LossSpec::new(a.lambda, cfg.loss.epsilon)?;
    cfg.mask_prob = a.mask_prob;
    cfg.optim = AdamWConfig::default().with_lr(a.lr).with_weight_decay(a.weight_decay);
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    cfg.validate()?;
    let noisy = load(&a.noisy)?;
    let clean = load(&a.clean)?;
    same_shape(noisy.shape(), &a.noisy, clean.shape(), &a.clean)?;
    let hyper = Hyper {
        n_cols: noisy.n_cols(),
        hidden: a.hidden,
        depth: a.depth,
        latent: a.latent,
        embed_dim: a.embed_dim,
        heads: a.heads,
    };
    let mut model = DenoiserModel::new(arch, hyper, a.seed)?;
    let report = train_denoiser(&mut model, &noisy, &clean, &cfg)?;
    save_checkpoint(&model, &a.out)?;
    let curve = a.loss_curve.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".loss.csv");
        PathBuf::from(s)
    });
    report.save_csv(&curve)?;
    if let (Some(first), Some(last)) = (report.loss_curve.first(), report.loss_curve.last()) {
        println!("train: {arch}, {} steps, loss {first:.4} -> {last:.4}", report.steps);
    }
    Ok(Outcome::new(&[&a.noisy, &a.clean], vec![a.out.clone(), curve]))
}

fn fit_thresholds_cmd(a: &FitThresholdsArgs) -> Result<Outcome> {
    let mut cfg = ThresholdFitConfig::new(a.seed);
    cfg.loss = LossSpec::new(a.lambda, cfg.loss.epsilon)?;
    cfg.alpha = a.alpha;
    cfg.lr = a.lr;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    ensure!(a.alpha > 0.0 && a.alpha.is_finite(), "--alpha must be positive, got {}", a.alpha);
    ensure!(a.batch_size > 0, "--batch-size must be at least 1");
    let model = load_checkpoint(&a.model)?;
    let noisy = load(&a.noisy)?;
    let clean = load(&a.clean)?;
    same_shape(noisy.shape(), &a.noisy, clean.shape(), &a.clean)?;
    let g = model.forward(&noisy)?;
    let caps = compute_caps(&g, &noisy, &clean)?;
    let report = fit_thresholds(&g, &noisy, &clean, &caps, &cfg)?;
    report.thresholds.save(&a.out)?;
    println!(
        "fit-thresholds: loss {:.4} -> {:.4}",
        report.initial_loss,
        report.loss_curve.last().copied().unwrap_or(report.initial_loss)
    );
    Ok(Outcome::new(&[&a.model, &a.noisy, &a.clean], vec![a.out.clone()]))
}

fn denoise(a: &DenoiseArgs) -> Result<Outcome> {
    ensure!(!a.soft || a.thresholds.is_some(), "--soft needs --thresholds");
    let model = load_checkpoint(&a.model)?;
    let x = load(&a.input)?;
    let mut inputs = vec![a.model.as_path(), a.input.as_path()];
    let out = match &a.thresholds {
        Some(p) => {
            inputs.push(p);
            apply_thresholded_model(&model, &ThresholdVector::load(p)?, &x, !a.soft)?
        }
        None => model.denoise(&x)?,
    };
    save_prob_csv(&out, &a.out)?;
    Ok(Outcome::new(&inputs, vec![a.out.clone()]))
}

struct ImputerSpec<'a> {
    method: MethodArg,
    train: Option<&'a Path>,
    tau: u32,
    k: usize,
    majority: bool,
    soft: SoftImputeConfig,
}

impl<'a> From<&'a ImputerArgs> for ImputerSpec<'a> {
    fn from(a: &'a ImputerArgs) -> Self {
        Self {
            method: a.method,
            train: a.train.as_deref(),
            tau: a.tau,
            k: a.k,
            majority: a.majority,
            soft: SoftImputeConfig { shrinkage: a.shrinkage, max_rank: a.max_rank, max_iters: a.max_iters, tol: a.tol },
        }
    }
}

impl ImputerSpec<'_> {
    fn validate(&self) -> Result<()> {
        match self.method {
            MethodArg::Prevalence | MethodArg::Knn => {
                ensure!(self.train.is_some(), "--method {:?} needs --train", self.method)
            }
            MethodArg::SoftImpute => ensure!(
                self.soft.shrinkage >= 0.0 && self.soft.tol > 0.0,
                "--shrinkage must be nonnegative and --tol positive"
            ),
            MethodArg::Identity => {}
        }
        if self.method == MethodArg::Knn {
            ensure!(self.k > 0, "--k must be at least 1");
            // The cut-off changes results a lot and has no canonical value.
            eprintln!("knn: tau = {} (neighbours at Hamming distance >= {} are ignored)", self.tau, self.tau);
        }
        Ok(())
    }

    fn build(&self, n_cols: usize, inputs: &mut Vec<PathBuf>) -> Result<Box<dyn Imputer>> {
        let reference = |inputs: &mut Vec<PathBuf>| -> Result<BinaryMatrix> {
            let p = self.train.context("missing --train")?;
            inputs.push(p.to_path_buf());
            let m = load(p)?;
            ensure!(m.n_cols() == n_cols, "{} has {} codes, expected {n_cols}", p.display(), m.n_cols());
            Ok(m)
        };
        Ok(match self.method {
            MethodArg::Identity => Box::new(Identity),
            MethodArg::Prevalence => Box::new(PrevalenceImputer { prevalence: reference(inputs)?.column_prevalence() }),
            MethodArg::Knn => {
                let mut cfg = KnnConfig::new(reference(inputs)?, self.tau);
                cfg.k = self.k;
                cfg.majority = self.majority;
                Box::new(cfg)
            }
            MethodArg::SoftImpute => Box::new(self.soft),
        })
    }
}

fn baseline(a: &BaselineArgs) -> Result<Outcome> {
    let spec = ImputerSpec::from(&a.imputer);
    spec.validate()?;
    let x = load(&a.input)?;
    let mut inputs = vec![a.input.clone()];
    let mut outputs = vec![a.out.clone()];
    let out = if spec.method == MethodArg::SoftImpute {
        let r = soft_impute(&x, &spec.soft)?;
        println!("soft-impute: {} iterations, converged={}", r.iterations, r.converged);
        if let Some(p) = &a.objective_out {
            save_vector(&r.objective, p)?;
            outputs.push(p.clone());
        }
        r.probs
    } else {
        spec.build(x.n_cols(), &mut inputs)?.impute(&x)?
    };
    save_prob_csv(&out, &a.out)?;
    Ok(Outcome { inputs, outputs, failure: None })
}

fn bootstrap_spec(reps: usize, fraction: f64, seed: u64) -> Result<Option<BootstrapSpec>> {
    if reps == 0 {
        return Ok(None);
    }
    ensure!(fraction > 0.0 && fraction <= 1.0, "--bootstrap-fraction must lie in (0, 1], got {fraction}");
    Ok(Some(BootstrapSpec { fraction, reps, seed }))
}

fn eval(a: &EvalArgs) -> Result<Outcome> {
    let boot = bootstrap_spec(a.bootstrap_reps, a.bootstrap_fraction, a.seed)?;
    let summary = a.summary.clone().unwrap_or_else(|| a.out.with_extension("json"));
    ensure!(summary != a.out, "--summary must differ from --out");
    let probs = load_prob_csv(&a.scores)?;
    let truth = load(&a.truth)?;
    let noisy = load(&a.noisy)?;
    same_shape(probs.shape(), &a.scores, truth.shape(), &a.truth)?;
    same_shape(noisy.shape(), &a.noisy, truth.shape(), &a.truth)?;
    let label = a.method.clone().unwrap_or_else(|| {
        a.scores.file_stem().map_or_else(|| "scores".into(), |s| s.to_string_lossy().into_owned())
    });
    let mut report = evaluate_denoiser(&label, &probs, &truth, &noisy, a.restrict_to_zeros)?;
    report.seed = Some(a.seed);
    if let Some(spec) = boot {
        let metric = |rows: &[usize]| macro_auprc_on_rows(&probs, &truth, &noisy, rows, a.restrict_to_zeros);
        match bootstrap_ci(probs.n_rows(), metric, &spec) {
            Ok(r) => report.ci = Some(r.interval()),
            Err(e) => eprintln!("eval: no interval: {e}"),
        }
    }
    report.save_csv(&a.out)?;
    report.save_json(&summary)?;
    let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
    println!("eval: {label} macro={} micro={}", fmt(report.macro_auprc), fmt(report.micro_auprc));
    Ok(Outcome::new(&[&a.scores, &a.truth, &a.noisy], vec![a.out.clone(), summary]))
}

#[derive(Serialize)]
struct HoldoutJson {
    method: String,
    target_dim: usize,
    auprc: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    n_train: usize,
    n_test: usize,
    seed: u64,
}

fn holdout(a: &HoldoutArgs) -> Result<Outcome> {
    let boot = bootstrap_spec(a.bootstrap_reps, a.bootstrap_fraction, a.seed)?.unwrap_or(BootstrapSpec {
        fraction: a.bootstrap_fraction,
        reps: 1,
        seed: a.seed,
    });
    let spec = a.method.map(|method| ImputerSpec {
        method,
        train: a.train.as_deref(),
        tau: a.tau,
        k: a.k,
        majority: a.majority,
        soft: SoftImputeConfig { shrinkage: a.shrinkage, max_rank: a.max_rank, max_iters: a.max_iters, tol: a.tol },
    });
    if let Some(s) = &spec {
        s.validate()?;
    }
    let clean = load(&a.clean)?;
    let noisy = load(&a.noisy)?;
    same_shape(noisy.shape(), &a.noisy, clean.shape(), &a.clean)?;
    let mut inputs = vec![a.clean.clone(), a.noisy.clone()];
    let (label, imputer): (String, Box<dyn Imputer>) = match (&spec, &a.model) {
        (Some(s), _) => (format!("{:?}", s.method).to_lowercase(), s.build(clean.n_cols(), &mut inputs)?),
        (None, Some(m)) => {
            inputs.push(m.clone());
            let model = load_checkpoint(m)?;
            match &a.thresholds {
                Some(t) => {
                    inputs.push(t.clone());
                    let thresholds = ThresholdVector::load(t)?;
                    (format!("{}-thresholded", model.arch()), Box::new(ThresholdedDenoiser { model, thresholds, hard: true }))
                }
                None => (model.arch().to_string(), Box::new(model)),
            }
        }
        (None, None) => bail!("holdout needs --method or --model"),
    };
    let cfg = ClassifierConfig::new(a.seed);
    let r = holdout_code_task(imputer.as_ref(), &clean, &noisy, a.target_dim, &cfg, &boot)?;
    let ci = r.ci.as_ref().filter(|_| a.bootstrap_reps > 0).map(|c| c.interval());
    let json = HoldoutJson {
        method: label,
        target_dim: r.target_dim,
        auprc: r.auprc,
        ci_low: ci.map(|c| c.0),
        ci_high: ci.map(|c| c.1),
        n_train: r.n_train,
        n_test: r.n_test,
        seed: a.seed,
    };
    std::fs::write(&a.out, serde_json::to_string_pretty(&json)? + "\n")
        .with_context(|| format!("writing {}", a.out.display()))?;
    let auprc = r.auprc.map_or("NA".to_string(), |x| format!("{x:.4}"));
    println!("holdout: code {} auprc={auprc}", r.target_dim);
    Ok(Outcome { inputs, outputs: vec![a.out.clone()], failure: None })
}

fn spectrum(a: &SpectrumArgs) -> Result<Outcome> {
    ensure!(a.n_random > 0, "--n-random must be at least 1");
    let x = load(&a.input)?;
    let s = spectrum_diagnostic(&x, a.n_random, a.seed)?;
    s.save_csv(&a.out)?;
    for w in &s.warnings {
        eprintln!("spectrum: {w}");
    }
    println!(
        "spectrum: {} of {} eigenvalues above the null band, {:.1}% inside",
        s.above_band().len(),
        s.eigvals.len(),
        100.0 * s.fraction_inside()
    );
    Ok(Outcome::new(&[&a.input], vec![a.out.clone()]))
}

#[derive(Serialize)]
struct CheckJson {
    max_error: f64,
    tol: f64,
    passed: bool,
    probed: usize,
}

fn write_check(out: &Option<PathBuf>, json: &CheckJson) -> Result<Vec<PathBuf>> {
    match out {
        Some(p) => {
            std::fs::write(p, serde_json::to_string_pretty(json)? + "\n")
                .with_context(|| format!("writing {}", p.display()))?;
            Ok(vec![p.clone()])
        }
        None => Ok(Vec::new()),
    }
}

fn oracle_check(a: &OracleCheckArgs) -> Result<Outcome> {
    ensure!((1..=MAX_DIMS).contains(&a.n_dims), "--T must lie in 1..={MAX_DIMS}, got {}", a.n_dims);
    ensure!(a.trials > 0, "--trials must be at least 1");
    ensure!(!a.betas.is_empty(), "--betas is empty");
    for &b in &a.betas {
        ensure!(b > 0.0 && b <= 1.0, "--betas entries must lie in (0, 1], got {b}");
    }
    let mut worst: f64 = 0.0;
    for trial in 0..a.trials {
        let beta = a.betas[trial % a.betas.len()];
        let (dist, noise) = random_instance(a.n_dims, beta, a.seed, trial as u64)?;
        worst = worst.max(closed_form_discrepancy(&dist, &noise)?);
    }
    let passed = worst < a.tol;
    println!("oracle-check: max |f*-posterior| = {worst:.3e} over {} trials (tol {:e})", a.trials, a.tol);
    let outputs = write_check(&a.out, &CheckJson { max_error: worst, tol: a.tol, passed, probed: a.trials })?;
    let failure = (!passed).then(|| format!("max |f*-posterior| {worst:.3e} is not below {:e}", a.tol));
    Ok(Outcome { inputs: Vec::new(), outputs, failure })
}

fn gradcheck(a: &GradcheckArgs) -> Result<Outcome> {
    ensure!(a.rows > 0 && a.n_cols > 0, "--rows and --T must be at least 1");
    ensure!(a.step > 0.0, "--step must be positive");
    let spec = LossSpec::new(a.lambda, LossSpec::default().epsilon)?;
    let arch = arch_of(a.arch);
    let hyper = Hyper {
        n_cols: a.n_cols,
        hidden: a.hidden,
        depth: a.depth,
        latent: a.latent,
        embed_dim: a.embed_dim,
        heads: a.heads,
    };
    let mut model = DenoiserModel::new(arch, hyper, a.seed)?;
    let mut r = rng::stream(a.seed, Domain::Misc, 0);
    // Zero-initialised biases put ReLU units exactly on their kink for
    // all-zero rows; probe at a generic point instead.
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        for v in model.params_mut().get_mut(id).data_mut() {
            *v += rand::Rng::random_range(&mut r, -0.05..0.05);
        }
    }
    // Random clean targets with a one-sided corrupted input.
    let n = a.rows * a.n_cols;
    let target: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rand::Rng::random_bool(&mut r, 0.5)))).collect();
    let input: Vec<f64> =
        target.iter().map(|&t| if t == 1.0 && rand::Rng::random_bool(&mut r, 0.5) { 0.0 } else { t }).collect();
    let report = grad_check(
        model.params(),
        |p| {
            let mut g = Graph::new();
            let l = model.loss_graph(&mut g, p, &input, &target, a.rows, &spec)?;
            Ok(g.value(l).item())
        },
        |p| Ok(model.loss_and_grad(p, &input, &target, a.rows, &spec)?.1),
        a.step,
        a.coords,
        a.seed,
    )?;
    let passed = report.max_rel_error < a.tol;
    println!(
        "gradcheck: {arch} max relative error {:.3e} over {} coordinates (tol {:e}), worst at {}",
        report.max_rel_error,
        report.probed,
        a.tol,
        report.worst.as_ref().map_or("-".to_string(), |(name, i)| format!("{name}[{i}]"))
    );
    let outputs = write_check(
        &a.out,
        &CheckJson { max_error: report.max_rel_error, tol: a.tol, passed, probed: report.probed },
    )?;
    let failure = (!passed).then(|| format!("max relative error {:.3e} is not below {:e}", report.max_rel_error, a.tol));
    Ok(Outcome { inputs: Vec::new(), outputs, failure })
}
